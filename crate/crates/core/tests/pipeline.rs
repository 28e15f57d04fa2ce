use ldp_gnn::experiment::{run_once, FeatureKind, RunSpec};
use ldp_gnn::graph::{generate_sbm, split_nodes, Dataset, SbmParams, SplitRatios};
use ldp_gnn::ldp::{collect_features, collect_labels, BudgetLedger, Epsilon, FeatureMechanism};
use ldp_gnn::nn::Backbone;
use ldp_gnn::propagate::estimate_labels;
use ldp_gnn::train::{Objective, TrainPlan};

fn sbm(seed: u64) -> Dataset {
    generate_sbm(&SbmParams {
        num_nodes: 600,
        num_classes: 4,
        dim: 32,
        p_in: 0.03,
        p_out: 0.002,
        feature_signal: 0.5,
        seed,
    })
    .unwrap()
}

fn eps(v: f64) -> Epsilon {
    Epsilon::new(v).unwrap()
}

#[test]
fn one_bit_samples_every_coordinate() {
    let d = sbm(0);
    let mut ledger = BudgetLedger::new(600);
    let got = collect_features(
        &d.features,
        FeatureMechanism::OneBit,
        eps(1.0),
        3,
        &mut ledger,
    )
    .unwrap();
    let enc = got.encoded.unwrap();
    assert_eq!(enc.params().m, enc.params().d);
    for v in 0..600 {
        assert!(enc.row(v).iter().all(|&e| e == 1 || e == -1));
    }
    let mut ledger = BudgetLedger::new(600);
    let mb = collect_features(
        &d.features,
        FeatureMechanism::MultiBit,
        eps(1.0),
        3,
        &mut ledger,
    )
    .unwrap();
    assert_eq!(mb.encoded.unwrap().params().m, 1);
}

#[test]
fn infinite_budget_bypasses_the_encoder() {
    let d = sbm(1);
    for mech in FeatureMechanism::ALL {
        let mut ledger = BudgetLedger::new(600);
        let got = collect_features(&d.features, mech, Epsilon::INFINITY, 3, &mut ledger).unwrap();
        assert_eq!(got.estimate, d.features.values);
        assert!(got.encoded.is_none());
        assert!(ledger.nodes().iter().all(|b| b.feature_invocations == 0));
        assert_eq!(ledger.max_total(), f64::INFINITY);
    }
}

#[test]
fn label_propagation_denoises() {
    for seed in 0..5 {
        let d = sbm(seed);
        let split = split_nodes(600, SplitRatios::default(), seed).unwrap();
        let nodes: Vec<usize> = split.labeled().collect();
        let mut ledger = BudgetLedger::new(600);
        let noisy =
            collect_labels(d.labels.clean(), 4, &nodes, eps(1.0), seed, &mut ledger).unwrap();
        let hits = |est: &[Option<usize>]| {
            nodes
                .iter()
                .filter(|&&v| est[v] == d.labels.clean()[v])
                .count()
        };
        let raw = hits(&estimate_labels(&d.graph, &noisy, 4, 0).unwrap());
        let smoothed = hits(&estimate_labels(&d.graph, &noisy, 4, 2).unwrap());
        assert_eq!(raw, hits(&noisy));
        assert!(smoothed > raw, "seed {seed}: {smoothed} vs {raw}");
    }
}

fn accuracy(d: &Dataset, objective: Objective, seed: u64) -> f64 {
    let spec = RunSpec {
        backbone: Backbone::Sage,
        mechanism: FeatureMechanism::MultiBit,
        features: FeatureKind::Private,
        objective,
        hidden_dim: 16,
        plan: TrainPlan {
            eps_x: eps(1.0),
            eps_y: eps(1.0),
            kx: 4,
            ky: 4,
            epochs: 200,
            seed,
            ..TrainPlan::default()
        },
        split_seed: seed,
    };
    run_once(d, &spec).unwrap().outcome.test_accuracy
}

#[test]
fn drop_beats_both_baselines_under_feature_and_label_noise() {
    let (mut ce, mut fc, mut drop) = (0.0, 0.0, 0.0);
    for seed in 0..3 {
        let d = sbm(10 + seed);
        ce += accuracy(&d, Objective::CrossEntropy, seed) / 3.0;
        fc += accuracy(&d, Objective::ForwardCorrection, seed) / 3.0;
        drop += accuracy(&d, Objective::Drop, seed) / 3.0;
    }
    assert!(
        drop > fc + 0.1 && drop > ce + 0.1,
        "drop {drop} fc {fc} ce {ce}"
    );
}
