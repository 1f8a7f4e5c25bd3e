use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::astro::{absolute_from_roe, eci_from_absolute, AbsoluteOrbit, EciState, RoeState};

/// Satellite clock random-walk intensity [m/sqrt(s)]; slower than the
/// receiver clocks, tunable.
pub const SAT_CLOCK_WALK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatClockModel {
    RandomWalk,
    Frozen,
}

#[derive(Debug, Clone)]
pub struct GnssSatellite {
    pub id: u8,
    /// True orbit (Kepler propagation; J2 is negligible for the visibility
    /// geometry this feeds).
    pub orbit: AbsoluteOrbit,
    /// True clock offset c*dt [m], random walk.
    pub clock_m: f64,
    /// Broadcast ephemeris: the true elements corrupted by a fixed ROE-space
    /// offset, giving bounded periodic Cartesian errors.
    pub broadcast: AbsoluteOrbit,
    /// Broadcast clock bias relative to truth [m], fixed per satellite.
    pub broadcast_clock_bias_m: f64,
}

impl GnssSatellite {
    pub fn true_position(&self, t: f64) -> EciState {
        let mut el = self.orbit;
        el.mean_anomaly += el.mean_motion() * (t - el.epoch);
        eci_from_absolute(&el).expect("valid GNSS orbit")
    }

    pub fn broadcast_position(&self, t: f64) -> EciState {
        let mut el = self.broadcast;
        el.mean_anomaly += el.mean_motion() * (t - el.epoch);
        eci_from_absolute(&el).expect("valid GNSS orbit")
    }

    /// Broadcast clock estimate of the true clock [m].
    pub fn broadcast_clock_m(&self) -> f64 {
        self.clock_m + self.broadcast_clock_bias_m
    }
}

#[derive(Debug, Clone)]
pub struct GnssConstellation {
    pub sats: Vec<GnssSatellite>,
    pub epoch: f64,
    pub clock_model: SatClockModel,
}

impl GnssConstellation {
    /// Nominal GPS-like shell: `count` satellites on six 55-degree planes at
    /// a = 26560 km, with ephemeris corruption sampled per satellite in ROE
    /// space (sigma per component in meters) and fixed broadcast clock
    /// biases (sigma in meters).
    pub fn nominal(
        count: usize,
        ephemeris_roe_sigma: f64,
        clock_bias_sigma: f64,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(count >= 8, "constellation needs at least 8 satellites");
        let a = 26_560e3;
        let inc = 55f64.to_radians();
        let planes = 6usize;
        let per_plane = count.div_ceil(planes);
        let normal = Normal::new(0.0, 1.0).unwrap();

        let mut sats = Vec::with_capacity(count);
        for idx in 0..count {
            let plane = idx % planes;
            let slot = idx / planes;
            let raan = plane as f64 * std::f64::consts::TAU / planes as f64;
            let u0 = slot as f64 * std::f64::consts::TAU / per_plane as f64
                + plane as f64 * 0.25; // inter-plane phasing
            let orbit =
                AbsoluteOrbit::new(a, 0.0, inc, raan, 0.0, u0, 0.0).expect("valid shell orbit");

            // No da component: a semi-major-axis error would drift the
            // along-track error secularly, while the injected ephemeris
            // error must stay a bounded periodic oscillation.
            let corruption = RoeState::new(
                0.0,
                ephemeris_roe_sigma * normal.sample(rng),
                ephemeris_roe_sigma * normal.sample(rng),
                ephemeris_roe_sigma * normal.sample(rng),
                ephemeris_roe_sigma * normal.sample(rng),
                ephemeris_roe_sigma * normal.sample(rng),
            );
            let broadcast = absolute_from_roe(&orbit, &corruption).expect("corrupted orbit");

            sats.push(GnssSatellite {
                id: idx as u8 + 1,
                orbit,
                clock_m: 0.0,
                broadcast,
                broadcast_clock_bias_m: clock_bias_sigma * normal.sample(rng),
            });
        }
        GnssConstellation {
            sats,
            epoch: 0.0,
            clock_model: SatClockModel::RandomWalk,
        }
    }

    /// Advance to `t`, stepping the satellite clocks by their random walk
    /// (one step per elapsed second).
    pub fn advance(&mut self, t: f64, rng: &mut impl Rng) {
        let dt = t - self.epoch;
        if dt <= 0.0 {
            return;
        }
        if self.clock_model == SatClockModel::RandomWalk {
            let steps = dt.round().max(1.0);
            let normal = Normal::new(0.0, SAT_CLOCK_WALK * steps.sqrt()).unwrap();
            for sat in &mut self.sats {
                sat.clock_m += normal.sample(rng);
            }
        }
        self.epoch = t;
    }
}
