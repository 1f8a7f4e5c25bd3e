//! Small dense primal-dual interior-point solver for second-order cone
//! programs in the inequality form
//!
//!   minimize    c'x
//!   subject to  Gx + s = h,  s in K
//!
//! where K is a product of a nonnegative orthant and second-order cones and
//! x is free. Nesterov-Todd scaling with a Mehrotra predictor-corrector;
//! sized for the maneuver-planning problems (tens of variables, a few
//! hundred rows), solved with dense factorizations.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConeSpec {
    /// Nonnegative orthant of the given dimension.
    NonNeg(usize),
    /// Second-order cone { (t, u) : ||u|| <= t } of the given total dimension.
    Soc(usize),
}

impl ConeSpec {
    fn dim(&self) -> usize {
        match *self {
            ConeSpec::NonNeg(d) | ConeSpec::Soc(d) => d,
        }
    }

    /// Barrier degree contributed to the duality measure.
    fn degree(&self) -> usize {
        match *self {
            ConeSpec::NonNeg(d) => d,
            ConeSpec::Soc(_) => 1,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SocpError {
    #[error("cone dimensions do not match the constraint rows")]
    DimensionMismatch,
    #[error("interior-point iteration limit reached (gap {0:.3e})")]
    IterationLimit(f64),
    #[error("KKT system is singular")]
    SingularKkt,
}

#[derive(Debug, Clone)]
pub struct SocpSolution {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub s: DVector<f64>,
    pub primal_objective: f64,
    pub gap: f64,
    pub iterations: usize,
}

const MAX_ITER: usize = 60;
const TOL_GAP: f64 = 1e-9;
const TOL_FEAS: f64 = 1e-7;

/// Debug entry point that traces the iteration (used by scratch tooling).
pub fn solve_socp_debug(
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    cones: &[ConeSpec],
) -> Result<SocpSolution, SocpError> {
    std::env::set_var("SOCP_TRACE", "1");
    let r = solve_socp(c, g, h, cones);
    std::env::remove_var("SOCP_TRACE");
    r
}

/// Solve `min c'x  s.t.  Gx + s = h, s in K`.
pub fn solve_socp(
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    h: &DVector<f64>,
    cones: &[ConeSpec],
) -> Result<SocpSolution, SocpError> {
    let n = c.len();
    let m = g.nrows();
    if g.ncols() != n || h.len() != m || cones.iter().map(ConeSpec::dim).sum::<usize>() != m {
        return Err(SocpError::DimensionMismatch);
    }
    let degree: f64 = cones.iter().map(ConeSpec::degree).sum::<usize>() as f64;

    let mut x = DVector::<f64>::zeros(n);
    let mut s = cone_identity(cones);
    let mut z = cone_identity(cones);

    // Scale the starting point to the data magnitude.
    let h_scale = h.amax().max(1.0);
    s *= h_scale;
    z *= c.amax().max(1.0);

    let mut scaling = Scaling::identity(cones);
    let mut last_gap = f64::INFINITY;
    let mut best: Option<(f64, SocpSolution)> = None;

    for iter in 0..MAX_ITER {
        let gap = s.dot(&z) / degree;
        last_gap = gap;
        let r_dual = g.transpose() * &z + c;
        let r_prim = g * &x + &s - h;
        let feas = r_dual.norm() / (1.0 + c.norm()) + r_prim.norm() / (1.0 + h.norm());
        if !gap.is_finite() || !feas.is_finite() {
            break;
        }
        let quality = gap / (1.0 + c.norm()) + feas;
        if best.as_ref().map(|(q, _)| quality < *q).unwrap_or(true) {
            best = Some((
                quality,
                SocpSolution {
                    primal_objective: c.dot(&x),
                    gap,
                    iterations: iter,
                    x: x.clone(),
                    z: z.clone(),
                    s: s.clone(),
                },
            ));
        }
        if gap < TOL_GAP * (1.0 + c.norm()) && feas < TOL_FEAS {
            return Ok(SocpSolution {
                primal_objective: c.dot(&x),
                gap,
                iterations: iter,
                x,
                z,
                s,
            });
        }

        scaling.update(cones, &s, &z);
        let lambda = scaling.lambda(cones, &z);

        // KKT reduction: (G' W^-2 G) dx = -r_dual - G' W^-2 (r_prim·(-1)... )
        let w_inv2_g = {
            let mut out = DMatrix::<f64>::zeros(m, n);
            for j in 0..n {
                let col = g.column(j).into_owned();
                let wi = scaling.apply_w_inv(cones, &col);
                let wi2 = scaling.apply_w_inv(cones, &wi);
                out.set_column(j, &wi2);
            }
            out
        };
        let kkt = g.transpose() * &w_inv2_g;
        let kkt_lu = kkt.clone().lu();

        let solve_direction = |dc: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
            // dc is the complementarity target residual in scaled space:
            // lambda o (dz~ + ds~) = dc.
            let gvec = arrow_solve(cones, &lambda, dc);
            let wg = scaling.apply_w(cones, &gvec);
            // G dx - W^2 dz = -r_prim - W g   (ds = W(g - W dz))
            let rhs_z = -&r_prim - &wg;
            let rhs = -&r_dual
                + g.transpose() * {
                    let wi = scaling.apply_w_inv(cones, &rhs_z);
                    scaling.apply_w_inv(cones, &wi)
                };
            let dx = kkt_lu.solve(&rhs)?;
            let dz = {
                let t = g * &dx - &rhs_z;
                let wi = scaling.apply_w_inv(cones, &t);
                scaling.apply_w_inv(cones, &wi)
            };
            let ds = {
                let wdz = scaling.apply_w(cones, &dz);
                let inner = &gvec - &wdz;
                scaling.apply_w(cones, &inner)
            };
            Some((dx, dz, ds))
        };

        // Affine (predictor) direction: lambda o (..) = -lambda o lambda.
        let lam_sq = arrow_product(cones, &lambda, &lambda);
        let dc_aff = -&lam_sq;
        let (_dx_a, dz_a, ds_a) = solve_direction(&dc_aff).ok_or(SocpError::SingularKkt)?;

        let alpha_aff = step_to_boundary(cones, &s, &ds_a)
            .min(step_to_boundary(cones, &z, &dz_a))
            .min(1.0);
        let gap_aff = (&s + &ds_a * alpha_aff).dot(&(&z + &dz_a * alpha_aff)) / degree;
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Corrector: lambda o (..) = -lambda o lambda - ds~ o dz~ + sigma mu e.
        let ds_t = scaling.apply_w_inv(cones, &ds_a);
        let dz_t = scaling.apply_w(cones, &dz_a);
        let cross = arrow_product(cones, &ds_t, &dz_t);
        let mut dc = -&lam_sq - &cross;
        add_scaled_identity(cones, &mut dc, sigma * gap);
        let (dx, dz, ds) = solve_direction(&dc).ok_or(SocpError::SingularKkt)?;

        let alpha = (0.99
            * step_to_boundary(cones, &s, &ds).min(step_to_boundary(cones, &z, &dz)))
        .min(1.0);

        if std::env::var_os("SOCP_TRACE").is_some() {
            // Scaling identity check: lambda must equal both Wz and W^-1 s.
            let lam2 = scaling.apply_w_inv(cones, &s);
            eprintln!(
                "iter {iter}: gap {gap:.3e} feas {feas:.3e} sigma {sigma:.3} alpha {alpha:.3} | Wz-W^-1s {:.3e}",
                (&lambda - &lam2).norm()
            );
        }

        x += &dx * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
    }

    // Accept a near-converged iterate when the boundary ill-conditioning
    // stalls the last digits.
    if let Some((quality, sol)) = best {
        if quality < 1e-6 {
            return Ok(sol);
        }
    }
    Err(SocpError::IterationLimit(last_gap))
}

/// Identity element of the cone product.
fn cone_identity(cones: &[ConeSpec]) -> DVector<f64> {
    let m: usize = cones.iter().map(ConeSpec::dim).sum();
    let mut e = DVector::zeros(m);
    let mut off = 0;
    for cone in cones {
        match *cone {
            ConeSpec::NonNeg(d) => {
                for k in 0..d {
                    e[off + k] = 1.0;
                }
                off += d;
            }
            ConeSpec::Soc(d) => {
                e[off] = 1.0;
                off += d;
            }
        }
    }
    e
}

fn add_scaled_identity(cones: &[ConeSpec], v: &mut DVector<f64>, scale: f64) {
    let mut off = 0;
    for cone in cones {
        match *cone {
            ConeSpec::NonNeg(d) => {
                for k in 0..d {
                    v[off + k] += scale;
                }
                off += d;
            }
            ConeSpec::Soc(d) => {
                v[off] += scale;
                off += d;
            }
        }
    }
}

/// Jordan product u o v per cone block.
fn arrow_product(cones: &[ConeSpec], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    let mut off = 0;
    for cone in cones {
        match *cone {
            ConeSpec::NonNeg(d) => {
                for k in 0..d {
                    out[off + k] = u[off + k] * v[off + k];
                }
                off += d;
            }
            ConeSpec::Soc(d) => {
                let u0 = u[off];
                let v0 = v[off];
                let mut dot = 0.0;
                for k in 1..d {
                    dot += u[off + k] * v[off + k];
                }
                out[off] = u0 * v0 + dot;
                for k in 1..d {
                    out[off + k] = u0 * v[off + k] + v0 * u[off + k];
                }
                off += d;
            }
        }
    }
    out
}

/// Solve lambda o x = d per cone block.
fn arrow_solve(cones: &[ConeSpec], lambda: &DVector<f64>, d: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(d.len());
    let mut off = 0;
    for cone in cones {
        match *cone {
            ConeSpec::NonNeg(dim) => {
                for k in 0..dim {
                    out[off + k] = d[off + k] / lambda[off + k];
                }
                off += dim;
            }
            ConeSpec::Soc(dim) => {
                let l0 = lambda[off];
                let mut l1_sq = 0.0;
                let mut l1_d1 = 0.0;
                for k in 1..dim {
                    l1_sq += lambda[off + k] * lambda[off + k];
                    l1_d1 += lambda[off + k] * d[off + k];
                }
                let det = l0 * l0 - l1_sq;
                let x0 = (l0 * d[off] - l1_d1) / det;
                out[off] = x0;
                for k in 1..dim {
                    out[off + k] = (d[off + k] - x0 * lambda[off + k]) / l0;
                }
                off += dim;
            }
        }
    }
    out
}

/// Largest alpha in [0, inf) with u + alpha du staying in the cone.
fn step_to_boundary(cones: &[ConeSpec], u: &DVector<f64>, du: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    let mut off = 0;
    for cone in cones {
        match *cone {
            ConeSpec::NonNeg(d) => {
                for k in 0..d {
                    if du[off + k] < 0.0 {
                        alpha = alpha.min(-u[off + k] / du[off + k]);
                    }
                }
                off += d;
            }
            ConeSpec::Soc(d) => {
                // Roots of (u0 + a d0)^2 - ||u1 + a d1||^2 = 0.
                let u0 = u[off];
                let d0 = du[off];
                let (mut uu, mut ud, mut dd) = (0.0, 0.0, 0.0);
                for k in 1..d {
                    uu += u[off + k] * u[off + k];
                    ud += u[off + k] * du[off + k];
                    dd += du[off + k] * du[off + k];
                }
                let a = d0 * d0 - dd;
                let b = 2.0 * (u0 * d0 - ud);
                let c0 = u0 * u0 - uu;
                let mut best = f64::INFINITY;
                if a.abs() < 1e-300 {
                    if b < 0.0 {
                        best = -c0 / b;
                    }
                } else {
                    let disc = b * b - 4.0 * a * c0;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for root in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                            if root > 1e-14 && u0 + root * d0 >= 0.0 {
                                best = best.min(root);
                            }
                        }
                    }
                }
                alpha = alpha.min(best);
                off += d;
            }
        }
    }
    alpha.max(0.0)
}

/// Nesterov-Todd scaling per cone block.
struct Scaling {
    /// Orthant: w_i = sqrt(s_i / z_i); SOC: (eta, w_bar).
    orthant: Vec<f64>,
    soc: Vec<(f64, DVector<f64>)>,
}

impl Scaling {
    fn identity(cones: &[ConeSpec]) -> Self {
        let mut orthant = Vec::new();
        let mut soc = Vec::new();
        for cone in cones {
            match *cone {
                ConeSpec::NonNeg(d) => orthant.extend(std::iter::repeat(1.0).take(d)),
                ConeSpec::Soc(d) => {
                    let mut w = DVector::zeros(d);
                    w[0] = 1.0;
                    soc.push((1.0, w));
                }
            }
        }
        Scaling { orthant, soc }
    }

    fn update(&mut self, cones: &[ConeSpec], s: &DVector<f64>, z: &DVector<f64>) {
        let mut off = 0;
        let mut oi = 0;
        let mut si = 0;
        for cone in cones {
            match *cone {
                ConeSpec::NonNeg(d) => {
                    for k in 0..d {
                        self.orthant[oi + k] = (s[off + k] / z[off + k]).sqrt();
                    }
                    oi += d;
                    off += d;
                }
                ConeSpec::Soc(d) => {
                    let res_s = soc_resid(s, off, d);
                    let res_z = soc_resid(z, off, d);
                    let beta_s = res_s.sqrt();
                    let beta_z = res_z.sqrt();
                    // gamma^2 = (1 + s_bar' z_bar) / 2 (plain inner product),
                    // which keeps w_bar on the unit hyperboloid.
                    let mut sz = s[off] / beta_s * (z[off] / beta_z);
                    for k in 1..d {
                        sz += (s[off + k] / beta_s) * (z[off + k] / beta_z);
                    }
                    let gamma = (0.5 * (1.0 + sz)).max(1e-300).sqrt();
                    let mut w_bar = DVector::zeros(d);
                    w_bar[0] = (s[off] / beta_s + z[off] / beta_z) / (2.0 * gamma);
                    for k in 1..d {
                        w_bar[k] =
                            (s[off + k] / beta_s - z[off + k] / beta_z) / (2.0 * gamma);
                    }
                    let eta = (beta_s / beta_z).sqrt();
                    self.soc[si] = (eta, w_bar);
                    si += 1;
                    off += d;
                }
            }
        }
    }

    /// lambda = W z (scaled point).
    fn lambda(&self, cones: &[ConeSpec], z: &DVector<f64>) -> DVector<f64> {
        self.apply_w(cones, z)
    }

    fn apply_w(&self, cones: &[ConeSpec], v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        let mut off = 0;
        let mut oi = 0;
        let mut si = 0;
        for cone in cones {
            match *cone {
                ConeSpec::NonNeg(d) => {
                    for k in 0..d {
                        out[off + k] = self.orthant[oi + k] * v[off + k];
                    }
                    oi += d;
                    off += d;
                }
                ConeSpec::Soc(d) => {
                    let (eta, w_bar) = &self.soc[si];
                    // Hyperbolic Householder square root of 2 w w' - J:
                    // W v = eta [ a v0 + b'v1 ; v0 b + v1 + b (b'v1)/(1+a) ].
                    let a = w_bar[0];
                    let mut bv = 0.0;
                    for k in 1..d {
                        bv += w_bar[k] * v[off + k];
                    }
                    out[off] = eta * (a * v[off] + bv);
                    let coef = v[off] + bv / (1.0 + a);
                    for k in 1..d {
                        out[off + k] = eta * (v[off + k] + coef * w_bar[k]);
                    }
                    si += 1;
                    off += d;
                }
            }
        }
        out
    }

    fn apply_w_inv(&self, cones: &[ConeSpec], v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        let mut off = 0;
        let mut oi = 0;
        let mut si = 0;
        for cone in cones {
            match *cone {
                ConeSpec::NonNeg(d) => {
                    for k in 0..d {
                        out[off + k] = v[off + k] / self.orthant[oi + k];
                    }
                    oi += d;
                    off += d;
                }
                ConeSpec::Soc(d) => {
                    let (eta, w_bar) = &self.soc[si];
                    // W^-1 = J W J / eta^2 applied directly:
                    // W^-1 v = (1/eta) [ a v0 - b'v1 ; -v0 b + v1 + b (b'v1)/(1+a) ].
                    let a = w_bar[0];
                    let mut bv = 0.0;
                    for k in 1..d {
                        bv += w_bar[k] * v[off + k];
                    }
                    out[off] = (a * v[off] - bv) / eta;
                    let coef = -v[off] + bv / (1.0 + a);
                    for k in 1..d {
                        out[off + k] = (v[off + k] + coef * w_bar[k]) / eta;
                    }
                    si += 1;
                    off += d;
                }
            }
        }
        out
    }
}

fn soc_resid(v: &DVector<f64>, off: usize, d: usize) -> f64 {
    let mut r = v[off] * v[off];
    for k in 1..d {
        r -= v[off + k] * v[off + k];
    }
    r.max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min -x0 - x1 s.t. x in box [0,1]^2 (pure LP through the orthant path).
    #[test]
    fn box_lp() {
        let c = DVector::from_column_slice(&[-1.0, -1.0]);
        // Constraints: x <= 1 (2 rows), -x <= 0 (2 rows).
        let g = DMatrix::from_row_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0],
        );
        let h = DVector::from_column_slice(&[1.0, 1.0, 0.0, 0.0]);
        let sol = solve_socp(&c, &g, &h, &[ConeSpec::NonNeg(4)]).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-7);
        assert!((sol.x[1] - 1.0).abs() < 1e-7);
        assert!((sol.primal_objective + 2.0).abs() < 1e-7);
    }

    /// min c'x s.t. ||x|| <= 1: optimum is -||c|| at x = -c/||c||.
    #[test]
    fn unit_ball_minimization() {
        let c = DVector::from_column_slice(&[3.0, -4.0]);
        // s = (1, x) in SOC3: rows: s0 = 1, s1 = x0, s2 = x1.
        let g = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, -1.0, 0.0, 0.0, -1.0]);
        let h = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        let sol = solve_socp(&c, &g, &h, &[ConeSpec::Soc(3)]).unwrap();
        assert!((sol.primal_objective + 5.0).abs() < 1e-7, "{}", sol.primal_objective);
        assert!((sol.x[0] + 0.6).abs() < 1e-6);
        assert!((sol.x[1] - 0.8).abs() < 1e-6);
    }

    /// Mixed cones: min x0 s.t. ||(x0, x1) - (2, 1)|| <= 1, x0 >= 0.5.
    #[test]
    fn shifted_ball_with_orthant() {
        let c = DVector::from_column_slice(&[1.0, 0.0]);
        // SOC: s = (1, x0 - 2, x1 - 1) -> h - Gx with h = (1, -2, -1),
        // G = (0 0; -1 0; 0 -1). Orthant: x0 - 0.5 >= 0 -> h0 = -0.5, G = (-1, 0).
        let g = DMatrix::from_row_slice(
            4,
            2,
            &[-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, -1.0],
        );
        let h = DVector::from_column_slice(&[-0.5, 1.0, -2.0, -1.0]);
        let sol = solve_socp(
            &c,
            &g,
            &h,
            &[ConeSpec::NonNeg(1), ConeSpec::Soc(3)],
        )
        .unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-6, "x = {:?}", sol.x);
    }

    /// KKT certificate on a random feasible SOCP: duality gap must close.
    #[test]
    fn random_socp_closes_the_gap() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for trial in 0..20 {
            let n = 4;
            let blocks = 5;
            let mut g = DMatrix::zeros(3 * blocks, n);
            let mut h = DVector::zeros(3 * blocks);
            let mut cones = Vec::new();
            for b in 0..blocks {
                h[3 * b] = 1.0;
                for r in 1..3 {
                    for j in 0..n {
                        g[(3 * b + r, j)] = next();
                    }
                }
                cones.push(ConeSpec::Soc(3));
            }
            let c = DVector::from_fn(n, |_, _| next());
            let sol = solve_socp(&c, &g, &h, &cones).unwrap_or_else(|e| {
                panic!("trial {trial}: solver failed: {e}");
            });
            // Primal feasibility.
            let s = &h - &g * &sol.x;
            for b in 0..blocks {
                let t = s[3 * b];
                let u = (s[3 * b + 1].powi(2) + s[3 * b + 2].powi(2)).sqrt();
                assert!(u <= t + 1e-6, "trial {trial}: infeasible block {b}");
            }
            assert!(sol.gap < 1e-7, "trial {trial}: gap {}", sol.gap);
        }
    }
}
