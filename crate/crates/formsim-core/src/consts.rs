//! Physical constants shared across the simulation.
//!
//! Earth model values are fixed here on purpose: every module (truth
//! propagation, on-board models, GNSS geometry) must agree on them or the
//! navigation filter sees phantom dynamics.

/// Earth gravitational parameter [m^3/s^2].
pub const GM_EARTH: f64 = 3.986004418e14;

/// Earth equatorial radius [m].
pub const R_EARTH: f64 = 6_378_137.0;

/// Earth oblateness coefficient J2 [-].
pub const J2_EARTH: f64 = 1.08263e-3;

/// Earth rotation rate [rad/s].
pub const OMEGA_EARTH: f64 = 7.2921159e-5;

/// Speed of light [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// GPS L1 carrier frequency [Hz].
pub const GPS_L1_FREQUENCY: f64 = 1_575.42e6;

/// GPS L1 carrier wavelength [m].
pub const GPS_L1_WAVELENGTH: f64 = SPEED_OF_LIGHT / GPS_L1_FREQUENCY;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l1_wavelength_is_about_19_cm() {
        assert!((GPS_L1_WAVELENGTH - 0.1903).abs() < 1e-4);
    }
}
