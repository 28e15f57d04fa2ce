use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include "ldp_gnn.h"

int main(void) {
    LdpRunConfig cfg;
    if (ldp_run_config_default(&cfg) != LDP_STATUS_OK) return 1;
    cfg.eps_x = INFINITY;
    cfg.objective = LDP_OBJECTIVE_FORWARD_CORRECTION;
    LdpDataset *ds = NULL;
    LdpSbmParams p = {100, 2, 8, 0.1, 0.01, 0.5, 0};
    (void)ldp_dataset_generate_sbm(&p, &ds);
    ldp_dataset_free(ds);
    return (int)ldp_optimal_m(1.0, 10) - 1;
}
"#;

#[test]
fn generated_header_is_valid_c() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(include.join("ldp_gnn.h").exists());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler on PATH; skipping");
        return;
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
