//! Test-support oracles, kept independent of the implementation paths they
//! check. Used by the unit, property, and acceptance suites; not part of the
//! simulation itself.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::astro::AbsoluteOrbit;
use crate::control::gamma;
use crate::dynamics::{mean_arg_lat_at, stm_j2};

/// Two-phase revised simplex for `min c'x  s.t.  Ax = b, x >= 0`.
///
/// The basis is refactorized from the original data at every iteration, so
/// no pivot rounding accumulates across the run; the fuel-oracle problems
/// have at most six rows, making the refactorization free.
pub fn simplex_lp(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Option<DVector<f64>> {
    let m = a.nrows();
    let n = a.ncols();

    // Make b nonnegative so the artificial basis is feasible.
    let mut a = a.clone();
    let mut b = b.clone();
    for r in 0..m {
        if b[r] < 0.0 {
            b[r] = -b[r];
            for j in 0..n {
                a[(r, j)] = -a[(r, j)];
            }
        }
    }

    // Extended matrix [A | I] with artificial columns.
    let total = n + m;
    let mut ext = DMatrix::<f64>::zeros(m, total);
    ext.view_mut((0, 0), (m, n)).copy_from(&a);
    for r in 0..m {
        ext[(r, n + r)] = 1.0;
    }

    let run_phase = |basis: &mut Vec<usize>, cost: &DVector<f64>, allowed: usize| -> Option<DVector<f64>> {
        for _ in 0..50_000 {
            let b_mat = ext.select_columns(basis.iter());
            let lu = b_mat.clone().lu();
            let x_b = lu.solve(&b)?;
            let cb = DVector::from_fn(m, |r, _| cost[basis[r]]);
            // Simplex multipliers: B' y = c_B.
            let y = b_mat.transpose().lu().solve(&cb)?;

            // Bland's rule on the reduced costs, computed from original data.
            let mut entering = None;
            for j in 0..allowed {
                if basis.contains(&j) {
                    continue;
                }
                let col = ext.column(j);
                let reduced = cost[j] - y.dot(&col.into_owned());
                if reduced < -1e-9 {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Some(x_b);
            };

            let d = lu.solve(&ext.column(j).into_owned())?;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..m {
                if d[r] > 1e-10 {
                    let ratio = x_b[r].max(0.0) / d[r];
                    let better = match leave {
                        Some((lr, best)) => {
                            ratio < best - 1e-12 || (ratio < best + 1e-12 && basis[r] < basis[lr])
                        }
                        None => true,
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let (r, _) = leave?; // unbounded
            basis[r] = j;
        }
        None
    };

    // Phase 1: minimize the artificial sum.
    let mut basis: Vec<usize> = (n..total).collect();
    let mut cost1 = DVector::<f64>::zeros(total);
    for j in n..total {
        cost1[j] = 1.0;
    }
    let x_b = run_phase(&mut basis, &cost1, total)?;
    let infeasibility: f64 = basis
        .iter()
        .zip(x_b.iter())
        .filter(|(&j, _)| j >= n)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    if infeasibility > 1e-7 * (1.0 + b.norm()) {
        return None;
    }

    // Phase 2 on the original columns (artificials may stay basic at zero).
    let mut cost2 = DVector::<f64>::zeros(total);
    for j in 0..n {
        cost2[j] = c[j];
    }
    let x_b = run_phase(&mut basis, &cost2, n)?;

    let mut x = DVector::<f64>::zeros(n);
    for (r, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = x_b[r].max(0.0);
        }
    }
    // The solution must reproduce b; reject numerically broken bases.
    if (&a * &x - &b).norm() > 1e-6 * (1.0 + b.norm()) {
        return None;
    }
    Some(x)
}

/// Independent dense-grid fuel oracle for the sub-orbit reconfiguration
/// problem: discretize the horizon into `grid` times and the impulse
/// directions into a fan, then solve the resulting minimum-fuel LP exactly.
/// Returns the summed impulse magnitude [m/s].
pub fn dense_grid_min_fuel(
    d_roe: &nalgebra::Vector6<f64>,
    chief: &AbsoluteOrbit,
    t_now: f64,
    tf: f64,
    grid: usize,
    directions: usize,
) -> Option<f64> {
    let times: Vec<f64> = (0..grid)
        .map(|k| t_now + (k as f64 + 0.5) * (tf - t_now) / grid as f64)
        .collect();

    // In-plane LP: columns are unit impulses along a direction fan.
    let d_ip = DVector::from_column_slice(&[d_roe[0], d_roe[1], d_roe[2], d_roe[3]]);
    let ip_fuel = if d_ip.norm() > 1e-12 {
        let mut cols: Vec<[f64; 4]> = Vec::with_capacity(grid * directions);
        for &t in &times {
            let block =
                stm_j2(chief, t, tf).matrix * gamma(chief, mean_arg_lat_at(chief, t)).matrix;
            for j in 0..directions {
                let ang = j as f64 * std::f64::consts::TAU / directions as f64;
                let dir = Vector2::new(ang.cos(), ang.sin());
                cols.push([
                    block[(0, 0)] * dir.x + block[(0, 1)] * dir.y,
                    block[(1, 0)] * dir.x + block[(1, 1)] * dir.y,
                    block[(2, 0)] * dir.x + block[(2, 1)] * dir.y,
                    block[(3, 0)] * dir.x + block[(3, 1)] * dir.y,
                ]);
            }
        }
        let mut a = DMatrix::<f64>::zeros(4, cols.len());
        for (j, col) in cols.iter().enumerate() {
            for r in 0..4 {
                a[(r, j)] = col[r];
            }
        }
        let c = DVector::from_element(cols.len(), 1.0);
        let x = simplex_lp(&a, &d_ip, &c)?;
        x.sum()
    } else {
        0.0
    };

    // Out-of-plane LP: signed normal impulses.
    let d_op = DVector::from_column_slice(&[d_roe[4], d_roe[5]]);
    let op_fuel = if d_op.norm() > 1e-12 {
        let mut a = DMatrix::<f64>::zeros(2, 2 * grid);
        for (k, &t) in times.iter().enumerate() {
            let block =
                stm_j2(chief, t, tf).matrix * gamma(chief, mean_arg_lat_at(chief, t)).matrix;
            a[(0, 2 * k)] = block[(4, 2)];
            a[(1, 2 * k)] = block[(5, 2)];
            a[(0, 2 * k + 1)] = -block[(4, 2)];
            a[(1, 2 * k + 1)] = -block[(5, 2)];
        }
        let c = DVector::from_element(2 * grid, 1.0);
        let x = simplex_lp(&a, &d_op, &c)?;
        x.sum()
    } else {
        0.0
    };

    Some(ip_fuel + op_fuel)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_solves_a_textbook_lp() {
        // min -3x - 5y s.t. x + y + s1 = 4, x + 3y + s2 = 6, all >= 0.
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 0.0, 1.0, 3.0, 0.0, 1.0]);
        let b = DVector::from_column_slice(&[4.0, 6.0]);
        let c = DVector::from_column_slice(&[-3.0, -5.0, 0.0, 0.0]);
        let x = simplex_lp(&a, &b, &c).unwrap();
        // Optimum at (3, 1): objective -14.
        assert!((x[0] - 3.0).abs() < 1e-8, "{x:?}");
        assert!((x[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn simplex_reports_infeasible() {
        // x1 + x2 = -1 cannot hold with x >= 0 (after sign flip it's fine,
        // so use contradictory rows instead).
        let a = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0]);
        let c = DVector::from_column_slice(&[1.0]);
        assert!(simplex_lp(&a, &b, &c).is_none());
    }
}
