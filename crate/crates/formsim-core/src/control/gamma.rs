use nalgebra::{Matrix6x3, Vector3, Vector6};

use crate::astro::{AbsoluteOrbit, RoeState};

/// Impulsive control-input matrix from the Gauss variational equations:
/// maps an RTN velocity impulse to the instantaneous change of the
/// dimensional ROE at mean argument of latitude `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaMatrix {
    pub matrix: Matrix6x3<f64>,
    pub u: f64,
}

impl GammaMatrix {
    pub fn apply(&self, dv_rtn: &Vector3<f64>) -> RoeState {
        RoeState::from_vector(&(self.matrix * dv_rtn))
    }

    pub fn column(&self, axis: usize) -> Vector6<f64> {
        self.matrix.column(axis).into_owned()
    }
}

/// Near-circular impulsive GVE map at mean argument of latitude `u`:
///
///   d(da)      =  (2/n) dv_T
///   d(dlambda) = -(2/n) dv_R
///   d(dex)     =  (1/n) (sin u dv_R + 2 cos u dv_T)
///   d(dey)     =  (1/n) (-cos u dv_R + 2 sin u dv_T)
///   d(dix)     =  (1/n) cos u dv_N
///   d(diy)     =  (1/n) sin u dv_N
///
/// This convention is exactly consistent with `rtn_from_roe`: pushing an
/// impulse through this matrix and mapping back leaves the relative position
/// unchanged and adds the impulse to the relative velocity.
pub fn gamma(chief: &AbsoluteOrbit, u: f64) -> GammaMatrix {
    let n = chief.mean_motion();
    let (su, cu) = u.sin_cos();
    let i = 1.0 / n;
    #[rustfmt::skip]
    let matrix = Matrix6x3::new(
        0.0,          2.0 * i,      0.0,
        -2.0 * i,     0.0,          0.0,
        su * i,       2.0 * cu * i, 0.0,
        -cu * i,      2.0 * su * i, 0.0,
        0.0,          0.0,          cu * i,
        0.0,          0.0,          su * i,
    );
    GammaMatrix { matrix, u }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{
        absolute_from_eci, eci_from_absolute, roe_from_absolute, rtn_from_roe,
    };
    use crate::consts::R_EARTH;
    use crate::dynamics::{propagate_truth, BallisticProperties, ForceModelConfig, TruthState};
    use crate::types::SpacecraftId;

    fn table5_chief() -> AbsoluteOrbit {
        AbsoluteOrbit::new(
            R_EARTH + 500e3,
            0.004,
            97.8f64.to_radians(),
            157.5f64.to_radians(),
            0.0,
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn normal_impulse_at_node_changes_only_dix() {
        let chief = table5_chief();
        let g = gamma(&chief, 0.0);
        let droe = g.apply(&Vector3::new(0.0, 0.0, 1.0e-3));
        assert!(droe.dix > 0.0);
        assert!(droe.diy.abs() < 1e-15);
        assert!(droe.da.abs() < 1e-15 && droe.dex.abs() < 1e-15);
    }

    #[test]
    fn two_mm_per_s_tangential_raises_da_by_two_dv_over_n() {
        let chief = table5_chief();
        let n = chief.mean_motion();
        let g = gamma(&chief, 1.2);
        let droe = g.apply(&Vector3::new(0.0, 2.0e-3, 0.0));
        let expected = 2.0 * 2.0e-3 / n;
        assert!((droe.da - expected).abs() < 1e-12);
        assert!((expected - 3.61).abs() < 0.05);
    }

    #[test]
    fn gamma_matches_truth_propagator_for_small_impulses() {
        // Compare the instantaneous ROE jump predicted by the GVE map with
        // the jump realized by the truth propagator across a 2 mm/s burn.
        let chief = table5_chief();
        let eci = eci_from_absolute(&chief).unwrap();
        let ball = [
            BallisticProperties {
                mass: 11.35,
                cd: 2.2,
                cr: 1.8,
                area: 0.25,
            },
            BallisticProperties {
                mass: 10.62,
                cd: 2.2,
                cr: 1.8,
                area: 0.22,
            },
        ];
        for (axis, dv) in [(0usize, 2.0e-3), (1, 2.0e-3), (2, 2.0e-3)] {
            let mut dv_vec = Vector3::zeros();
            dv_vec[axis] = dv;
            let truth0 = TruthState {
                epoch: 0.0,
                dsc: eci,
                osc: eci,
            };
            let burn = crate::dynamics::ImpulsiveBurn {
                epoch: 0.0,
                dv_rtn: dv_vec,
                actor: SpacecraftId::Osc,
            };
            let dt = 1.0;
            let out = propagate_truth(
                &truth0,
                &ball,
                &ForceModelConfig::kepler(),
                &[burn],
                dt,
                None,
            )
            .unwrap();
            let chief_el = absolute_from_eci(&out.dsc, dt).unwrap();
            let deputy_el = absolute_from_eci(&out.osc, dt).unwrap();
            let roe_truth = roe_from_absolute(&chief_el, &deputy_el).unwrap();

            let g = gamma(&chief, chief.mean_arg_latitude());
            let roe_pred = g.apply(&dv_vec);
            let scale = roe_pred.to_vector().norm();
            let err = (roe_truth.to_vector() - roe_pred.to_vector()).norm() / scale;
            assert!(err < 0.01, "axis {axis}: gamma vs truth error {err}");
        }
    }

    #[test]
    fn impulse_recovery_through_linear_map() {
        // Applying Gamma then mapping to RTN must reproduce the impulse in
        // velocity with zero instantaneous position change.
        let chief = table5_chief();
        let u = 2.2;
        let dv = Vector3::new(0.7e-3, -1.1e-3, 0.4e-3);
        let g = gamma(&chief, u);
        let droe = g.apply(&dv);
        let rtn = rtn_from_roe(&chief, &droe, u);
        assert!(rtn.position().norm() < 1e-12, "position jump {rtn:?}");
        assert!((rtn.velocity() - dv).norm() < 1e-12, "velocity mismatch");
    }
}
