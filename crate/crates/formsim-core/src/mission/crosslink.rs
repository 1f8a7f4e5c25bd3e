use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::control::Maneuver;
use crate::gnss::RawMeasurement;

/// What travels over the inter-satellite link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CrosslinkPayload {
    Measurements(Vec<RawMeasurement>),
    ManeuverNotice(Maneuver),
    Attitude { epoch: f64, body_to_eci: Matrix3<f64> },
    Time(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosslinkMessage {
    pub payload: CrosslinkPayload,
    pub send_epoch: f64,
    pub receive_epoch: f64,
}

/// One direction of the crosslink: FIFO with fixed latency and an optional
/// Bernoulli drop. Fixed latency means delivery is never out of order.
#[derive(Debug, Clone)]
pub struct Crosslink {
    pub latency_s: f64,
    pub drop_probability: f64,
    pub disabled: bool,
    queue: VecDeque<CrosslinkMessage>,
    pub dropped: usize,
}

impl Crosslink {
    pub fn new(latency_s: f64, drop_probability: f64) -> Self {
        Crosslink {
            latency_s,
            drop_probability,
            disabled: false,
            queue: VecDeque::new(),
            dropped: 0,
        }
    }

    pub fn send(&mut self, payload: CrosslinkPayload, now: f64, rng: &mut impl Rng) {
        if self.disabled || (self.drop_probability > 0.0 && rng.gen::<f64>() < self.drop_probability)
        {
            self.dropped += 1;
            return;
        }
        self.queue.push_back(CrosslinkMessage {
            payload,
            send_epoch: now,
            receive_epoch: now + self.latency_s,
        });
    }

    /// Messages whose receive epoch has passed, delivered exactly once.
    pub fn deliver(&mut self, now: f64) -> Vec<CrosslinkMessage> {
        let mut out = Vec::new();
        while let Some(front) = self.queue.front() {
            if front.receive_epoch <= now + 1e-9 {
                out.push(self.queue.pop_front().unwrap());
            } else {
                break;
            }
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}
