//! Synthetic single-frequency GNSS world: constellation with corrupted
//! broadcast ephemerides, Klobuchar ionosphere, and raw pseudorange /
//! carrier-phase generation with the navigation error budget.

mod constellation;
mod klobuchar;
mod measurement;

pub use constellation::{GnssConstellation, GnssSatellite, SatClockModel};
pub use klobuchar::{klobuchar_delay, KlobucharModel};
pub use measurement::{
    generate_measurements, AntennaModel, MeasurementConfig, RawMeasurement, ReceiverChannels,
};
