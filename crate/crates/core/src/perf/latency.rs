//! Computation and communication latency of one global round.

use serde::{Deserialize, Serialize};

/// Time for `samples` samples at `cycles_per_sample` cycles each on a
/// processor running at `frequency` Hz.
pub fn latency_compute(cycles_per_sample: f64, samples: f64, frequency: f64) -> f64 {
    cycles_per_sample * samples / frequency
}

/// Time to send `bits` over `bandwidth` Hz at Shannon rate `log2(1 + sinr)`.
/// A zero SINR carries no data and yields `f64::INFINITY`.
pub fn latency_link(bits: f64, bandwidth: f64, sinr: f64) -> f64 {
    if sinr <= 0.0 {
        return f64::INFINITY;
    }
    bits / (bandwidth * sinr.ln_1p() / std::f64::consts::LN_2)
}

/// Component latencies of one UAV cluster. Device vectors run over the
/// cluster members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavLatency {
    /// UAV-to-device model transfer.
    pub downlink: Vec<f64>,
    /// Device-to-UAV model transfer.
    pub uplink: Vec<f64>,
    pub backhaul: f64,
    /// One local iteration at each device.
    pub compute: Vec<f64>,
}

fn max_of(values: &[f64]) -> f64 {
    values.iter().copied().fold(0.0, f64::max)
}

impl UavLatency {
    /// Time the UAV needs for one global round: `G/E` edge exchanges with
    /// its slowest device each way, one backhaul upload, and `G` local
    /// iterations of its slowest device.
    pub fn round(&self, local_period: usize, global_period: usize) -> f64 {
        let exchanges = global_period as f64 / local_period as f64;
        exchanges * max_of(&self.downlink)
            + exchanges * max_of(&self.uplink)
            + self.backhaul
            + global_period as f64 * max_of(&self.compute)
    }
}

/// Synchronous round time: the slowest UAV.
pub fn latency_round(uavs: &[UavLatency], local_period: usize, global_period: usize) -> f64 {
    uavs.iter()
        .map(|u| u.round(local_period, global_period))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_examples() {
        assert_eq!(latency_compute(20.0, 1000.0, 2e9), 1e-5);
        assert_eq!(latency_compute(20.0, 0.0, 2e9), 0.0);
        assert_eq!(latency_link(1e6, 1e6, 1.0), 1.0);
        assert_eq!(latency_link(2e6, 1e6, 1.0), 2.0);
        assert!(latency_link(1e6, 1e6, 1e300) < latency_link(1e6, 1e6, 1e30));
        assert!(latency_link(1e6, 1e6, 1e300) < 2e-3);
        assert_eq!(latency_link(1e6, 1e6, 0.0), f64::INFINITY);
    }

    #[test]
    fn single_device_sums_its_terms() {
        let u = UavLatency {
            downlink: vec![0.5],
            uplink: vec![0.25],
            backhaul: 0.125,
            compute: vec![0.0625],
        };
        assert_eq!(latency_round(std::slice::from_ref(&u), 1, 1), 0.9375);
        // Four iterations with two edge exchanges.
        assert_eq!(latency_round(&[u], 2, 4), 2.0 * 0.75 + 0.125 + 4.0 * 0.0625);
    }

    #[test]
    fn only_the_slowest_device_matters() {
        let base = UavLatency {
            downlink: vec![1.0, 2.0],
            uplink: vec![1.0, 1.0],
            backhaul: 0.5,
            compute: vec![0.1, 0.1],
        };
        let t0 = latency_round(std::slice::from_ref(&base), 2, 2);
        let mut slower_non_max = base.clone();
        slower_non_max.downlink[0] = 1.5;
        assert_eq!(latency_round(&[slower_non_max], 2, 2), t0);
        let mut slower_max = base.clone();
        slower_max.downlink[1] = 2.5;
        assert!(latency_round(&[slower_max], 2, 2) > t0);
        let other = UavLatency {
            backhaul: 0.1,
            ..base.clone()
        };
        assert_eq!(latency_round(&[base, other], 2, 2), t0);
    }

    #[test]
    fn monotone_in_every_component() {
        let base = UavLatency {
            downlink: vec![0.3, 0.2],
            uplink: vec![0.4, 0.1],
            backhaul: 0.5,
            compute: vec![0.01, 0.02],
        };
        let t0 = latency_round(std::slice::from_ref(&base), 2, 4);
        for i in 0..7 {
            let mut u = base.clone();
            match i {
                0 | 1 => u.downlink[i] += 0.3,
                2 | 3 => u.uplink[i - 2] += 0.3,
                4 => u.backhaul += 0.3,
                _ => u.compute[i - 5] += 0.3,
            }
            assert!(latency_round(&[u], 2, 4) >= t0);
        }
    }
}
