use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::state::{Blocks, NavState, STATE_DIM};

/// Default acceptance ratio (second-best over best squared distance).
pub const RATIO_THRESHOLD: f64 = 2.0;

/// Float-sigma threshold per double difference before a fix is attempted
/// [cycles].
const FLOAT_SIGMA_GATE: f64 = 0.5;

/// Node budget of the integer search.
const SEARCH_NODE_CAP: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IarStatus {
    Float,
    Fixed,
    Rejected,
}

/// Result of one integer-resolution attempt.
#[derive(Debug, Clone)]
pub struct IarResult {
    /// Fixed double-difference integers keyed by satellite id, against the
    /// pivot satellite.
    pub fixed: BTreeMap<u8, i64>,
    pub pivot: Option<u8>,
    /// Acceptance statistic: second-best over best squared distance.
    pub ratio: f64,
    pub status: IarStatus,
}

impl IarResult {
    fn float() -> Self {
        IarResult {
            fixed: BTreeMap::new(),
            pivot: None,
            ratio: 0.0,
            status: IarStatus::Float,
        }
    }
}

/// Attempt integer ambiguity resolution on the single-difference float bank.
///
/// Double differences are formed against the best-determined satellite,
/// decorrelated with an integer-preserving transform, searched by a bounded
/// integer least squares, and accepted on the ratio test. On acceptance the
/// full state is conditioned on the fixed integers through zero-noise
/// pseudo-measurements, after which the relative baseline holds
/// carrier-level precision.
pub fn resolve_integers(nav: &mut NavState) -> IarResult {
    let active = nav.active_sd();
    if active.len() < 5 {
        return IarResult::float();
    }

    // Pivot: smallest float variance.
    let pivot = active
        .iter()
        .min_by(|a, b| {
            let va = nav.cov[(Blocks::sd(a.0), Blocks::sd(a.0))];
            let vb = nav.cov[(Blocks::sd(b.0), Blocks::sd(b.0))];
            va.total_cmp(&vb)
        })
        .copied()
        .expect("nonempty");
    let others: Vec<(usize, u8)> = active.iter().copied().filter(|s| s.0 != pivot.0).collect();
    let n = others.len();

    // Double-difference floats and covariance via the differencing map.
    let mut t = DMatrix::<f64>::zeros(n, STATE_DIM);
    let mut a_hat = DVector::<f64>::zeros(n);
    for (row, (slot, _)) in others.iter().enumerate() {
        t[(row, Blocks::sd(*slot))] = 1.0;
        t[(row, Blocks::sd(pivot.0))] = -1.0;
        a_hat[row] = nav.x[Blocks::sd(*slot)] - nav.x[Blocks::sd(pivot.0)];
    }
    let q_dd = &t * &nav.cov * t.transpose();

    // Only attempt when the floats are tight enough for a meaningful search.
    let max_sigma = (0..n).map(|k| q_dd[(k, k)].sqrt()).fold(0.0, f64::max);
    if max_sigma > FLOAT_SIGMA_GATE {
        return IarResult::float();
    }

    // Decorrelate, search, ratio-test.
    let (z_mat, q_z) = decorrelate(&q_dd);
    let z_hat = z_mat.transpose() * &a_hat;
    let Some((best, _second, d1, d2)) = ils_search(&z_hat, &q_z, SEARCH_NODE_CAP) else {
        return IarResult {
            fixed: BTreeMap::new(),
            pivot: Some(pivot.1),
            ratio: 0.0,
            status: IarStatus::Rejected,
        };
    };
    let ratio = if d1 <= 1e-12 { f64::INFINITY } else { d2 / d1 };
    if ratio < RATIO_THRESHOLD {
        return IarResult {
            fixed: BTreeMap::new(),
            pivot: Some(pivot.1),
            ratio,
            status: IarStatus::Rejected,
        };
    }

    // Back-transform: z = Z' a  =>  a = Z^-T z; the transform is unimodular
    // so the result is integer.
    let z_inv_t = z_mat
        .clone()
        .try_inverse()
        .expect("unimodular transform")
        .transpose();
    let a_fixed = z_inv_t * best.map(|v| v as f64);
    let a_int: Vec<i64> = a_fixed.iter().map(|v| v.round() as i64).collect();

    // Condition the filter on the fixed integers.
    for (row, (_, _sat)) in others.iter().enumerate() {
        let h_row: DVector<f64> = t.row(row).transpose();
        let innovation = a_int[row] as f64 - a_hat[row];
        let ph = &nav.cov * &h_row;
        let s = h_row.dot(&ph) + 1e-10;
        let k = ph / s;
        nav.x += &k * innovation;
        let kh_p = &k * (h_row.transpose() * &nav.cov);
        nav.cov -= kh_p;
        // Keep a_hat consistent as conditioning proceeds.
        for (r2, (slot2, _)) in others.iter().enumerate() {
            a_hat[r2] = nav.x[Blocks::sd(*slot2)] - nav.x[Blocks::sd(pivot.0)];
        }
    }
    nav.symmetrize();
    nav.iar_fixed = true;

    IarResult {
        fixed: others
            .iter()
            .zip(a_int.iter())
            .map(|((_, sat), v)| (*sat, *v))
            .collect(),
        pivot: Some(pivot.1),
        ratio,
        status: IarStatus::Fixed,
    }
}

/// LAMBDA-style decorrelation: integer Gauss reductions interleaved with
/// symmetric swaps until the conditional variances are (approximately)
/// sorted. Returns the unimodular transform Z and Q_z = Z' Q Z.
pub fn decorrelate(q: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = q.nrows();
    let mut qz = q.clone();
    let mut z = DMatrix::<f64>::identity(n, n);

    // L D L' factorization with unit lower L.
    let factor = |m: &DMatrix<f64>| -> Option<(DMatrix<f64>, DVector<f64>)> {
        let n = m.nrows();
        let mut l = DMatrix::<f64>::identity(n, n);
        let mut d = DVector::<f64>::zeros(n);
        let mut a = m.clone();
        for j in 0..n {
            d[j] = a[(j, j)];
            if d[j] <= 0.0 {
                return None;
            }
            for i in (j + 1)..n {
                l[(i, j)] = a[(i, j)] / d[j];
            }
            for i in (j + 1)..n {
                for k in (j + 1)..=i {
                    a[(i, k)] -= l[(i, j)] * d[j] * l[(k, j)];
                }
            }
        }
        Some((l, d))
    };

    for _sweep in 0..64 {
        let Some((l, d)) = factor(&qz) else {
            break;
        };
        // Integer Gauss reduction of the sub-diagonal entries; the factor
        // is refreshed afterwards, so one pass per sweep suffices.
        let mut reduced = false;
        for j in (0..n).rev() {
            for i in (j + 1)..n {
                let mu = l[(i, j)].round();
                if mu != 0.0 {
                    reduced = true;
                    for k in 0..n {
                        let adj = mu * z[(k, j)];
                        z[(k, i)] -= adj;
                    }
                }
            }
        }
        let _ = (l, d);
        if reduced {
            qz = z.transpose() * q * &z;
        }
        let Some((l2, d2)) = factor(&qz) else {
            break;
        };
        // Find the first adjacent pair violating the sorted-conditional
        // condition and swap it.
        let mut swapped = false;
        for k in 0..n - 1 {
            let delta = d2[k] + l2[(k + 1, k)] * l2[(k + 1, k)] * d2[k + 1];
            if delta < 0.999 * d2[k + 1] {
                z.swap_columns(k, k + 1);
                qz = z.transpose() * q * &z;
                swapped = true;
                break;
            }
        }
        if !swapped && !reduced {
            break;
        }
    }
    (z, qz)
}

/// Integer least squares by Schnorr-Euchner sphere decoding on the Cholesky
/// factor of Q^-1: returns the best and second-best integer vectors with
/// their squared Mahalanobis distances, or None if the node budget is hit.
pub fn ils_search(
    a_hat: &DVector<f64>,
    q: &DMatrix<f64>,
    node_cap: usize,
) -> Option<(DVector<i64>, DVector<i64>, f64, f64)> {
    let n = a_hat.len();
    let w = q.clone().try_inverse()?;
    // Upper-triangular R with R'R = W.
    let chol = (0.5 * (&w + w.transpose())).cholesky()?;
    let r_t = chol.l(); // lower L with L L' = W -> take R = L'
    let r = r_t.transpose();

    // Depth-first Schnorr-Euchner from the last row.
    struct Frame {
        level: usize,
        candidates: Vec<i64>,
        next: usize,
        partial: f64,
    }

    let mut best: Option<(DVector<i64>, f64)> = None;
    let mut second: Option<(DVector<i64>, f64)> = None;
    let mut z = DVector::<i64>::zeros(n);
    let mut nodes = 0usize;

    // Candidate ordering around the conditional center.
    let make_candidates = |center: f64| -> Vec<i64> {
        let base = center.round() as i64;
        let mut c = Vec::with_capacity(9);
        c.push(base);
        for k in 1..=4i64 {
            c.push(base + k);
            c.push(base - k);
        }
        c
    };

    let center_at = |level: usize, z: &DVector<i64>| -> f64 {
        // Solve row `level` of R (z - a) for the conditional center.
        let mut acc = 0.0;
        for k in (level + 1)..n {
            acc += r[(level, k)] * (z[k] as f64 - a_hat[k]);
        }
        a_hat[level] - acc / r[(level, level)]
    };

    let mut stack: Vec<Frame> = Vec::with_capacity(n);
    stack.push(Frame {
        level: n - 1,
        candidates: make_candidates(a_hat[n - 1]),
        next: 0,
        partial: 0.0,
    });

    while let Some(frame) = stack.last_mut() {
        nodes += 1;
        if nodes > node_cap {
            return None;
        }
        if frame.next >= frame.candidates.len() {
            stack.pop();
            continue;
        }
        let level = frame.level;
        let cand = frame.candidates[frame.next];
        frame.next += 1;
        z[level] = cand;

        let center = if level == n - 1 {
            a_hat[level]
        } else {
            center_at(level, &z)
        };
        let term = r[(level, level)] * (cand as f64 - center);
        let partial = frame.partial + term * term;

        let bound = second.as_ref().map(|(_, d)| *d).unwrap_or(f64::INFINITY);
        if partial >= bound {
            continue;
        }
        if level == 0 {
            let dist = partial;
            let vec = z.clone();
            match &mut best {
                Some((bv, bd)) if dist < *bd => {
                    second = Some((bv.clone(), *bd));
                    best = Some((vec, dist));
                }
                Some((bv, _)) if *bv != vec => match &second {
                    Some((_, sd)) if dist >= *sd => {}
                    _ => second = Some((vec, dist)),
                },
                None => best = Some((vec, dist)),
                _ => {}
            }
        } else {
            let next_level = level - 1;
            let next_center = {
                let mut acc = 0.0;
                for k in (next_level + 1)..n {
                    acc += r[(next_level, k)] * (z[k] as f64 - a_hat[k]);
                }
                a_hat[next_level] - acc / r[(next_level, next_level)]
            };
            stack.push(Frame {
                level: next_level,
                candidates: make_candidates(next_center),
                next: 0,
                partial,
            });
        }
    }

    let (bv, bd) = best?;
    let (sv, sd) = second?;
    Some((bv, sv, bd, sd))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_ils(
        a_hat: &DVector<f64>,
        q: &DMatrix<f64>,
        radius: i64,
    ) -> (DVector<i64>, f64, f64) {
        let n = a_hat.len();
        let w = q.clone().try_inverse().unwrap();
        let mut best = (DVector::<i64>::zeros(n), f64::INFINITY);
        let mut second = f64::INFINITY;
        let mut idx = vec![-radius; n];
        let center: Vec<i64> = a_hat.iter().map(|v| v.round() as i64).collect();
        loop {
            let z = DVector::from_fn(n, |k, _| (center[k] + idx[k]) as f64);
            let d = &z - a_hat;
            let dist = (w.clone() * &d).dot(&d);
            let zi = DVector::from_fn(n, |k, _| center[k] + idx[k]);
            if dist < best.1 {
                second = best.1;
                best = (zi, dist);
            } else if dist < second && zi != best.0 {
                second = dist;
            }
            // Increment the mixed-radix counter.
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] <= radius {
                    break;
                }
                idx[k] = -radius;
                k += 1;
                if k == n {
                    return (best.0, best.1, second);
                }
            }
        }
    }

    #[test]
    fn toy_two_dim_rounds_to_nearest() {
        let a_hat = DVector::from_column_slice(&[1.2, 2.9]);
        let q = DMatrix::identity(2, 2);
        let (best, _, d1, d2) = ils_search(&a_hat, &q, 10_000).unwrap();
        assert_eq!(best[0], 1);
        assert_eq!(best[1], 3);
        assert!(d2 > d1);
    }

    #[test]
    fn search_matches_brute_force_on_random_problems() {
        let mut seed = 4321u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for case in 0..40 {
            let n = 3 + (case % 4);
            // Random correlated covariance: Q = A A' + I*0.01.
            let a = DMatrix::<f64>::from_fn(n, n, |_, _| next() - 0.5);
            let q = &a * a.transpose() + DMatrix::identity(n, n) * 0.01;
            let a_hat = DVector::from_fn(n, |_, _| 6.0 * (next() - 0.5));

            let (best, _, d1, d2) = ils_search(&a_hat, &q, 500_000).unwrap();
            let (bf_best, bf_d1, bf_d2) = brute_force_ils(&a_hat, &q, 4);
            assert_eq!(best, bf_best, "case {case}");
            assert!((d1 - bf_d1).abs() < 1e-9, "case {case}: {d1} vs {bf_d1}");
            assert!((d2 - bf_d2).abs() < 1e-6, "case {case}: {d2} vs {bf_d2}");
        }
    }

    #[test]
    fn decorrelation_is_unimodular_and_helps() {
        let mut seed = 11u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for case in 0..20 {
            let n = 4;
            let a = DMatrix::<f64>::from_fn(n, n, |_, _| next() - 0.5);
            // Ill-conditioned: strong common mode.
            let ones = DMatrix::<f64>::from_element(n, n, 1.0);
            let q = &a * a.transpose() * 0.01 + ones * 2.0 + DMatrix::identity(n, n) * 1e-3;
            let (z, qz) = decorrelate(&q);

            // Integer entries, determinant +-1.
            for v in z.iter() {
                assert!((v - v.round()).abs() < 1e-9, "non-integer Z entry {v}");
            }
            let det = z.clone().determinant();
            assert!((det.abs() - 1.0).abs() < 1e-6, "case {case}: det {det}");
            // Q_z consistent with the transform.
            let qz_check = z.transpose() * &q * &z;
            assert!((&qz_check - &qz).norm() < 1e-9);

            // The search result maps back to the plain-domain optimum.
            let a_hat = DVector::from_fn(n, |_, _| 4.0 * (next() - 0.5));
            let z_hat = z.transpose() * &a_hat;
            let (zbest, _, zd1, _) = ils_search(&z_hat, &qz, 500_000).unwrap();
            let back = z.transpose().try_inverse().unwrap() * zbest.map(|v| v as f64);
            let (plain_best, pd1, _) = brute_force_ils(&a_hat, &q, 6);
            let back_int = DVector::from_fn(n, |k, _| back[k].round() as i64);
            assert_eq!(back_int, plain_best, "case {case}");
            assert!(
                (zd1 - pd1).abs() < 1e-6 * pd1.max(1.0),
                "case {case}: distances differ ({zd1} vs {pd1})"
            );
        }
    }
}
