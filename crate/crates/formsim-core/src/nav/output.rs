use nalgebra::{DMatrix, Matrix6};

use super::state::{Blocks, NavState, STATE_DIM};
use super::NavError;
use crate::astro::{absolute_from_eci, roe_from_absolute, EciState, RoeState};
use crate::types::SpacecraftId;

/// The navigation product consumed by control and safety: the ROE estimate
/// of the deputy (OSC) relative to the chief (DSC) with its covariance,
/// mapped from the Cartesian filter states through the element conversion
/// Jacobian.
pub fn relative_output(nav: &NavState) -> Result<(RoeState, Matrix6<f64>), NavError> {
    let dsc = nav.eci_state(SpacecraftId::Dsc);
    let osc = nav.eci_state(SpacecraftId::Osc);
    let roe = roe_of(&dsc, &osc, nav.epoch)?;

    // Numeric Jacobian of the 12 -> 6 map.
    let mut jac = DMatrix::<f64>::zeros(6, 12);
    let base = roe.to_vector();
    for col in 0..12 {
        let eps = if col % 6 < 3 { 1e-2 } else { 1e-5 };
        let mut d = dsc;
        let mut o = osc;
        match col {
            0..=2 => d.r[col] += eps,
            3..=5 => d.v[col - 3] += eps,
            6..=8 => o.r[col - 6] += eps,
            _ => o.v[col - 9] += eps,
        }
        let perturbed = roe_of(&d, &o, nav.epoch)?;
        let diff = (perturbed.to_vector() - base) / eps;
        for row in 0..6 {
            jac[(row, col)] = diff[row];
        }
    }

    // 12x12 sub-covariance in (r_dsc, v_dsc, r_osc, v_osc) order.
    let order: Vec<usize> = [
        Blocks::pos(SpacecraftId::Dsc),
        Blocks::vel(SpacecraftId::Dsc),
        Blocks::pos(SpacecraftId::Osc),
        Blocks::vel(SpacecraftId::Osc),
    ]
    .iter()
    .flat_map(|&b| b..b + 3)
    .collect();
    let mut sub = DMatrix::<f64>::zeros(12, 12);
    for (r, &ri) in order.iter().enumerate() {
        for (c, &ci) in order.iter().enumerate() {
            sub[(r, c)] = nav.cov[(ri, ci)];
        }
    }
    let full = &jac * sub * jac.transpose();
    let mut cov = Matrix6::from_fn(|r, c| full[(r, c)]);
    cov = (cov + cov.transpose()) * 0.5;
    Ok((roe, cov))
}

fn roe_of(dsc: &EciState, osc: &EciState, epoch: f64) -> Result<RoeState, NavError> {
    let chief = absolute_from_eci(dsc, epoch)?;
    let deputy = absolute_from_eci(osc, epoch)?;
    Ok(roe_from_absolute(&chief, &deputy)?)
}

/// Guard helper used by telemetry: the full covariance must stay symmetric.
pub fn covariance_asymmetry(nav: &NavState) -> f64 {
    let mut max = 0.0f64;
    for r in 0..STATE_DIM {
        for c in (r + 1)..STATE_DIM {
            max = max.max((nav.cov[(r, c)] - nav.cov[(c, r)]).abs());
        }
    }
    max / nav.cov.trace().max(1e-30)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{absolute_from_roe, eci_from_absolute, AbsoluteOrbit};
    use crate::consts::R_EARTH;
    use crate::dynamics::{BallisticProperties, ForceModelConfig};
    use crate::gnss::AntennaModel;
    use crate::nav::NavConfig;

    #[test]
    fn truth_injected_state_reproduces_the_roe() {
        let chief = AbsoluteOrbit::new(
            R_EARTH + 500e3,
            0.004,
            97.8f64.to_radians(),
            157.5f64.to_radians(),
            0.0,
            1.1,
            0.0,
        )
        .unwrap();
        let roe_in = RoeState::new(-2.62, 45.21, -34.51, 4.78, -18.72, 2.72);
        let deputy = absolute_from_roe(&chief, &roe_in).unwrap();
        let dsc = eci_from_absolute(&chief).unwrap();
        let osc = eci_from_absolute(&deputy).unwrap();

        let ball = BallisticProperties {
            mass: 11.35,
            cd: 2.2,
            cr: 1.8,
            area: 0.25,
        };
        let nav = NavState::new(
            SpacecraftId::Dsc,
            0.0,
            &dsc,
            &osc,
            1.0,
            1e-3,
            NavConfig::default(),
            ForceModelConfig::j2(),
            [ball, ball],
            [AntennaModel::default(), AntennaModel::default()],
        );
        let (roe_out, cov) = relative_output(&nav).unwrap();
        let err = (roe_out.to_vector() - roe_in.to_vector()).norm() / chief.a;
        assert!(err < 1e-9, "roe reconstruction error {err}");

        // RN-plane projection of the covariance stays PSD.
        let rn = nalgebra::Matrix2::new(cov[(0, 0)], cov[(0, 4)], cov[(4, 0)], cov[(4, 4)]);
        let tr = rn.trace();
        let det = rn.determinant();
        assert!(tr >= 0.0 && det >= -1e-9 * tr * tr);
    }
}
