use nalgebra::Vector6;
use serde::{Deserialize, Serialize};

use super::{wrap_to_pi, AbsoluteOrbit, AstroError};

/// Near-circular domain bound for the ROE mappings.
pub const ROE_ECC_LIMIT: f64 = 0.05;

/// Quasi-nonsingular relative orbital elements, each component scaled by the
/// chief semi-major axis (meters):
/// `(a*da, a*dlambda, a*dex, a*dey, a*dix, a*diy)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoeState {
    /// Relative semi-major axis a*(a_d - a_c)/a_c [m].
    pub da: f64,
    /// Relative mean longitude a*[(u_d - u_c) + (raan_d - raan_c) cos i_c] [m].
    pub dlambda: f64,
    /// Relative eccentricity vector, x component a*(e_d cos w_d - e_c cos w_c) [m].
    pub dex: f64,
    /// Relative eccentricity vector, y component [m].
    pub dey: f64,
    /// Relative inclination vector, x component a*(i_d - i_c) [m].
    pub dix: f64,
    /// Relative inclination vector, y component a*(raan_d - raan_c) sin i_c [m].
    pub diy: f64,
}

impl RoeState {
    pub const ZERO: RoeState = RoeState {
        da: 0.0,
        dlambda: 0.0,
        dex: 0.0,
        dey: 0.0,
        dix: 0.0,
        diy: 0.0,
    };

    pub fn new(da: f64, dlambda: f64, dex: f64, dey: f64, dix: f64, diy: f64) -> Self {
        Self {
            da,
            dlambda,
            dex,
            dey,
            dix,
            diy,
        }
    }

    pub fn to_vector(self) -> Vector6<f64> {
        Vector6::new(self.da, self.dlambda, self.dex, self.dey, self.dix, self.diy)
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    /// Magnitude of the relative eccentricity vector [m].
    pub fn de_norm(&self) -> f64 {
        self.dex.hypot(self.dey)
    }

    /// Magnitude of the relative inclination vector [m].
    pub fn di_norm(&self) -> f64 {
        self.dix.hypot(self.diy)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

impl std::ops::Sub for RoeState {
    type Output = RoeState;
    fn sub(self, rhs: RoeState) -> RoeState {
        RoeState::from_vector(&(self.to_vector() - rhs.to_vector()))
    }
}

impl std::ops::Add for RoeState {
    type Output = RoeState;
    fn add(self, rhs: RoeState) -> RoeState {
        RoeState::from_vector(&(self.to_vector() + rhs.to_vector()))
    }
}

fn check_near_circular(orbit: &AbsoluteOrbit) -> Result<(), AstroError> {
    if orbit.e >= ROE_ECC_LIMIT {
        return Err(AstroError::EccentricityOutOfRange(orbit.e, ROE_ECC_LIMIT));
    }
    Ok(())
}

/// Quasi-nonsingular ROE of the deputy relative to the chief.
///
/// Exact element arithmetic; composing with [`absolute_from_roe`] recovers
/// the deputy to floating precision.
pub fn roe_from_absolute(
    chief: &AbsoluteOrbit,
    deputy: &AbsoluteOrbit,
) -> Result<RoeState, AstroError> {
    check_near_circular(chief)?;
    check_near_circular(deputy)?;
    let a = chief.a;
    let du = wrap_to_pi(deputy.mean_arg_latitude() - chief.mean_arg_latitude());
    let draan = wrap_to_pi(deputy.raan - chief.raan);
    Ok(RoeState {
        da: deputy.a - chief.a,
        dlambda: a * (du + draan * chief.i.cos()),
        dex: a * (deputy.e * deputy.argp.cos() - chief.e * chief.argp.cos()),
        dey: a * (deputy.e * deputy.argp.sin() - chief.e * chief.argp.sin()),
        dix: a * (deputy.i - chief.i),
        diy: a * draan * chief.i.sin(),
    })
}

/// Deputy absolute elements from chief elements and ROE; exact inverse of
/// [`roe_from_absolute`].
pub fn absolute_from_roe(chief: &AbsoluteOrbit, roe: &RoeState) -> Result<AbsoluteOrbit, AstroError> {
    check_near_circular(chief)?;
    let a = chief.a;
    let a_d = chief.a + roe.da;
    let i_d = chief.i + roe.dix / a;
    let draan = roe.diy / (a * chief.i.sin());
    let raan_d = chief.raan + draan;

    let ex_d = chief.e * chief.argp.cos() + roe.dex / a;
    let ey_d = chief.e * chief.argp.sin() + roe.dey / a;
    let e_d = ex_d.hypot(ey_d);
    let argp_d = if e_d > 0.0 { ey_d.atan2(ex_d) } else { 0.0 };

    let u_d = chief.mean_arg_latitude() + roe.dlambda / a - draan * chief.i.cos();
    let mean_anomaly_d = u_d - argp_d;

    AbsoluteOrbit::new(a_d, e_d, i_d, raan_d, argp_d, mean_anomaly_d, chief.epoch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::R_EARTH;

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
    fn identical_orbits_give_zero_roe() {
        let chief = table5_chief();
        let roe = roe_from_absolute(&chief, &chief).unwrap();
        assert_eq!(roe, RoeState::ZERO);
    }

    #[test]
    fn zero_roe_recovers_chief() {
        let chief = table5_chief();
        let deputy = absolute_from_roe(&chief, &RoeState::ZERO).unwrap();
        assert!((deputy.a - chief.a).abs() < 1e-9);
        assert!((deputy.e - chief.e).abs() < 1e-15);
        assert!((deputy.i - chief.i).abs() < 1e-15);
        assert!((deputy.raan - chief.raan).abs() < 1e-15);
        assert!((deputy.mean_arg_latitude() - chief.mean_arg_latitude()).abs() < 1e-12);
    }

    #[test]
    fn standby_roe_produces_raan_offset() {
        // Standby configuration: a*dey = a*diy = 200 m, the rest zero.
        let chief = table5_chief();
        let standby = RoeState::new(0.0, 0.0, 0.0, 200.0, 0.0, 200.0);
        let deputy = absolute_from_roe(&chief, &standby).unwrap();

        let expected_draan = 200.0 / (chief.a * chief.i.sin());
        assert!(((deputy.raan - chief.raan) - expected_draan).abs() < 1e-15);
        assert!((deputy.i - chief.i).abs() < 1e-15);

        let back = roe_from_absolute(&chief, &deputy).unwrap();
        let err = (back.to_vector() - standby.to_vector()).norm() / chief.a;
        assert!(err < 1e-12, "standby round trip relative error {err}");
    }

    #[test]
    fn round_trip_random_near_circular_pairs() {
        let mut seed = 777u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let chief = AbsoluteOrbit::new(
                6.7e6 + 0.5e6 * next(),
                0.02 * next(),
                0.3 + 2.3 * next(),
                std::f64::consts::TAU * next(),
                std::f64::consts::TAU * next(),
                std::f64::consts::TAU * next(),
                0.0,
            )
            .unwrap();
            let roe = RoeState::new(
                2e3 * (next() - 0.5),
                2e3 * (next() - 0.5),
                2e3 * (next() - 0.5),
                2e3 * (next() - 0.5),
                2e3 * (next() - 0.5),
                2e3 * (next() - 0.5),
            );
            let deputy = absolute_from_roe(&chief, &roe).unwrap();
            let back = roe_from_absolute(&chief, &deputy).unwrap();
            let scale = chief.a;
            let err = (back.to_vector() - roe.to_vector()).norm() / scale;
            assert!(err < 1e-12, "round trip relative error {err}");
        }
    }

    #[test]
    fn eccentric_orbits_are_rejected() {
        let chief = table5_chief();
        let fat = AbsoluteOrbit::new(7.0e6, 0.2, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            roe_from_absolute(&chief, &fat),
            Err(AstroError::EccentricityOutOfRange(_, _))
        ));
        assert!(matches!(
            roe_from_absolute(&fat, &chief),
            Err(AstroError::EccentricityOutOfRange(_, _))
        ));
    }
}
