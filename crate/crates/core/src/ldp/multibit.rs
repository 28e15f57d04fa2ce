//! Multi-bit encoder (user side) and rectifier (server side).
//!
//! The encoder samples `m` of the `d` coordinates without replacement and
//! reports each sampled coordinate as ±1 through a biased coin whose bias grows
//! with the coordinate's position in `[α, β]`. Unsampled coordinates report 0.
//! With `m = d` this is the classic 1-bit mechanism at budget ε/d per
//! coordinate.

use rand::seq::index;
use rand::Rng;

use super::MechanismParams;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Root of `z = sinh(z) / 2`, rounded to two decimals.
const OPTIMAL_RATIO: f64 = 2.18;

/// Sampling size minimizing the worst-case rectifier variance.
pub fn optimal_m(epsilon: f64, d: usize) -> usize {
    let m = (epsilon / OPTIMAL_RATIO).floor();
    if m.is_nan() || m < 1.0 {
        1
    } else if m >= d as f64 {
        d.max(1)
    } else {
        m as usize
    }
}

/// Probability that a sampled coordinate holding `x` is reported as +1.
#[inline]
pub(crate) fn plus_probability(x: f64, params: &MechanismParams) -> f64 {
    let t = params.contrast();
    let z = (x - params.alpha) / (params.beta - params.alpha);
    0.5 * (1.0 - t) + z * t
}

pub fn multibit_encode<R: Rng + ?Sized>(
    x: &[f64],
    params: &MechanismParams,
    rng: &mut R,
) -> Result<Vec<i8>> {
    check_input(x, params)?;
    let mut out = vec![0i8; params.d];
    for i in index::sample(rng, params.d, params.m) {
        let p = plus_probability(x[i], params);
        out[i] = if rng.random::<f64>() < p { 1 } else { -1 };
    }
    Ok(out)
}

/// Exact probability that [`multibit_encode`] maps `x` to `out`.
pub fn outcome_probability(x: &[f64], out: &[i8], params: &MechanismParams) -> Result<f64> {
    check_input(x, params)?;
    if out.len() != params.d {
        return Err(Error::Shape(format!(
            "{} outputs for d = {}",
            out.len(),
            params.d
        )));
    }
    if out.iter().filter(|&&e| e != 0).count() != params.m {
        return Ok(0.0);
    }
    // Every size-m subset is equally likely: 1 / C(d, m).
    let subsets = (0..params.m).fold(1.0, |acc, i| acc * (params.d - i) as f64 / (i + 1) as f64);
    let mut p = 1.0 / subsets;
    for (&xi, &e) in x.iter().zip(out) {
        p *= match e {
            0 => 1.0,
            1 => plus_probability(xi, params),
            -1 => 1.0 - plus_probability(xi, params),
            _ => return Err(Error::Argument(format!("output entry {e} outside -1..=1"))),
        };
    }
    Ok(p)
}

fn check_input(x: &[f64], params: &MechanismParams) -> Result<()> {
    if x.len() != params.d {
        return Err(Error::Shape(format!(
            "feature vector has {} entries, mechanism expects {}",
            x.len(),
            params.d
        )));
    }
    if let Some((index, &value)) = x
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v >= params.alpha && v <= params.beta))
    {
        return Err(Error::Domain {
            index,
            value,
            alpha: params.alpha,
            beta: params.beta,
        });
    }
    Ok(())
}

/// Scale applied to an encoded coordinate by the rectifier.
#[inline]
fn rectifier_scale(params: &MechanismParams) -> f64 {
    params.d as f64 * (params.beta - params.alpha) / (2.0 * params.m as f64) / params.contrast()
}

/// Unbiased estimate of the original vector from its encoding.
pub fn multibit_rectify(x_star: &[i8], params: &MechanismParams) -> Vec<f64> {
    let scale = rectifier_scale(params);
    let mid = 0.5 * (params.alpha + params.beta);
    x_star.iter().map(|&e| scale * f64::from(e) + mid).collect()
}

/// Variance of one rectified coordinate whose true value is `x_i`.
pub fn rectifier_variance(x_i: f64, params: &MechanismParams) -> f64 {
    let half = 0.5 * (params.beta - params.alpha) / params.contrast();
    let mid = 0.5 * (params.alpha + params.beta);
    params.d as f64 / params.m as f64 * half * half - (x_i - mid).powi(2)
}

/// Entries per byte in the packed wire form.
const PER_BYTE: usize = 4;

/// Packs a row at two bits per entry, least-significant pair first:
/// `00` = 0, `01` = +1, `10` = −1. The row is zero-padded to a byte boundary.
pub fn pack_row(row: &[i8]) -> Vec<u8> {
    let mut out = vec![0u8; row.len().div_ceil(PER_BYTE)];
    for (i, &e) in row.iter().enumerate() {
        let code = match e {
            0 => 0b00,
            1 => 0b01,
            -1 => 0b10,
            other => panic!("encoded entries are -1, 0 or 1, got {other}"),
        };
        out[i / PER_BYTE] |= code << (2 * (i % PER_BYTE));
    }
    out
}

/// Inverse of [`pack_row`]. Rejects the reserved `11` code and nonzero
/// padding.
pub fn unpack_row(bytes: &[u8], d: usize) -> Result<Vec<i8>> {
    if bytes.len() != d.div_ceil(PER_BYTE) {
        return Err(Error::Shape(format!(
            "{} bytes cannot hold a packed row of {d} entries",
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(d);
    for i in 0..bytes.len() * PER_BYTE {
        let code = (bytes[i / PER_BYTE] >> (2 * (i % PER_BYTE))) & 0b11;
        if i >= d {
            if code != 0 {
                return Err(Error::Schema("nonzero padding in packed row".into()));
            }
            continue;
        }
        out.push(match code {
            0b00 => 0,
            0b01 => 1,
            0b10 => -1,
            _ => return Err(Error::Schema(format!("reserved code 0b11 at entry {i}"))),
        });
    }
    Ok(out)
}

/// All nodes' encoded rows together with the parameters that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedMatrix {
    params: MechanismParams,
    entries: Vec<i8>,
}

impl EncodedMatrix {
    pub fn from_rows(params: MechanismParams, rows: &[Vec<i8>]) -> Result<Self> {
        let mut entries = Vec::with_capacity(rows.len() * params.d);
        for (v, row) in rows.iter().enumerate() {
            if row.len() != params.d {
                return Err(Error::Shape(format!(
                    "row {v} has {} entries, expected {}",
                    row.len(),
                    params.d
                )));
            }
            let nonzero = row.iter().filter(|&&e| e != 0).count();
            if nonzero != params.m || row.iter().any(|e| !(-1..=1).contains(e)) {
                return Err(Error::Schema(format!(
                    "row {v} must hold exactly {} entries in {{-1, 1}}, found {nonzero}",
                    params.m
                )));
            }
            entries.extend_from_slice(row);
        }
        Ok(Self { params, entries })
    }

    pub fn params(&self) -> &MechanismParams {
        &self.params
    }

    pub fn num_nodes(&self) -> usize {
        self.entries.len() / self.params.d.max(1)
    }

    pub fn row(&self, v: usize) -> &[i8] {
        &self.entries[v * self.params.d..(v + 1) * self.params.d]
    }

    /// Concatenated packed rows, each padded to a whole byte.
    pub fn to_packed(&self) -> Vec<u8> {
        (0..self.num_nodes())
            .flat_map(|v| pack_row(self.row(v)))
            .collect()
    }

    pub fn from_packed(bytes: &[u8], num_nodes: usize, params: MechanismParams) -> Result<Self> {
        let stride = params.d.div_ceil(PER_BYTE);
        if bytes.len() != stride * num_nodes {
            return Err(Error::Shape(format!(
                "{} bytes do not hold {num_nodes} packed rows of {} entries",
                bytes.len(),
                params.d
            )));
        }
        let rows = bytes
            .chunks(stride.max(1))
            .take(num_nodes)
            .map(|chunk| unpack_row(chunk, params.d))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(params, &rows)
    }

    /// Rectified estimate of every node's feature vector.
    pub fn rectify(&self) -> Matrix {
        let d = self.params.d;
        let n = self.num_nodes();
        let mut data = Vec::with_capacity(n * d);
        for v in 0..n {
            data.extend(multibit_rectify(self.row(v), &self.params));
        }
        Matrix::from_vec(n, d, data).expect("rows have d entries")
    }
}
