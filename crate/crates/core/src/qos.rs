//! QoS translation: application traffic descriptors to minimum downlink rates.
//!
//! Delay-sensitive traffic gets an effective-bandwidth rate floor that keeps
//! the probability of exceeding the delay bound below the configured violation
//! probability. Delay-tolerant traffic only needs to keep up with its average
//! arrival rate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::TrafficClass;

/// Per-application traffic parameters. Defaults match the evaluation setup:
/// 1048-bit safety packets at 4 packet/s with a 10 ms delay bound, and
/// 9000-bit map packets at 20 packet/s.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficSpec {
    /// Delay-sensitive packet size, bits.
    pub sensitive_packet_bits: f64,
    /// Delay-sensitive packet arrival rate, packets/s.
    pub sensitive_arrival_rate: f64,
    /// Maximum tolerated downlink delay, seconds.
    pub delay_bound_s: f64,
    /// Probability that the delay bound may be exceeded.
    pub delay_violation_prob: f64,
    /// Delay-tolerant packet size, bits.
    pub tolerant_packet_bits: f64,
    /// Delay-tolerant packet arrival rate, packets/s.
    pub tolerant_arrival_rate: f64,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec {
            sensitive_packet_bits: 1048.0,
            sensitive_arrival_rate: 4.0,
            delay_bound_s: 0.010,
            delay_violation_prob: 1e-3,
            tolerant_packet_bits: 9000.0,
            tolerant_arrival_rate: 20.0,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum QosError {
    #[error("traffic spec field {0} must be positive")]
    NonPositive(&'static str),
    #[error("delay violation probability must lie in (0,1)")]
    BadViolationProb,
}

impl TrafficSpec {
    pub fn validate(&self) -> Result<(), QosError> {
        let positive = [
            (self.sensitive_packet_bits, "sensitive_packet_bits"),
            (self.sensitive_arrival_rate, "sensitive_arrival_rate"),
            (self.delay_bound_s, "delay_bound_s"),
            (self.tolerant_packet_bits, "tolerant_packet_bits"),
            (self.tolerant_arrival_rate, "tolerant_arrival_rate"),
        ];
        for (v, name) in positive {
            if !(v > 0.0) {
                return Err(QosError::NonPositive(name));
            }
        }
        if !(self.delay_violation_prob > 0.0 && self.delay_violation_prob < 1.0) {
            return Err(QosError::BadViolationProb);
        }
        Ok(())
    }
}

/// Minimum rate (bit/s) for a delay-sensitive flow so that downlink delay
/// exceeds the bound with probability at most `delay_violation_prob`.
pub fn min_rate_sensitive(spec: &TrafficSpec) -> f64 {
    let ln_rho = spec.delay_violation_prob.ln();
    let denom = spec.delay_bound_s
        * (1.0 - ln_rho / (spec.sensitive_arrival_rate * spec.delay_bound_s)).ln();
    -spec.sensitive_packet_bits * ln_rho / denom
}

/// Minimum rate (bit/s) for a delay-tolerant flow: the average arrival bit rate.
pub fn min_rate_tolerant(spec: &TrafficSpec) -> f64 {
    spec.tolerant_arrival_rate * spec.tolerant_packet_bits
}

/// Rate floor for a vehicle of the given traffic class.
pub fn min_rate_for(spec: &TrafficSpec, class: TrafficClass) -> f64 {
    match class {
        TrafficClass::DelaySensitive => min_rate_sensitive(spec),
        TrafficClass::DelayTolerant => min_rate_tolerant(spec),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sensitive_floor_matches_reference_value() {
        let spec = TrafficSpec::default();
        let rate = min_rate_sensitive(&spec);
        // 140.37 kbit/s, within 0.01 kbit/s
        assert!((rate - 140_370.0).abs() < 10.0, "got {rate}");
    }

    #[test]
    fn tolerant_floor_is_arrival_bit_rate() {
        let spec = TrafficSpec::default();
        assert_eq!(min_rate_tolerant(&spec), 180_000.0);
        let zero = TrafficSpec {
            tolerant_arrival_rate: 0.0,
            ..spec.clone()
        };
        assert_eq!(min_rate_tolerant(&zero), 0.0);
        let double = TrafficSpec {
            tolerant_arrival_rate: 40.0,
            ..spec
        };
        assert_eq!(min_rate_tolerant(&double), 360_000.0);
    }

    #[test]
    fn sensitive_floor_linear_in_packet_size() {
        let spec = TrafficSpec::default();
        let doubled = TrafficSpec {
            sensitive_packet_bits: 2.0 * spec.sensitive_packet_bits,
            ..spec.clone()
        };
        assert_relative_eq!(
            min_rate_sensitive(&doubled),
            2.0 * min_rate_sensitive(&spec),
            max_relative = 1e-12
        );
    }

    #[test]
    fn sensitive_floor_approaches_mean_bit_rate_as_violation_prob_approaches_one() {
        // With ln(rho) -> 0 the effective-bandwidth floor collapses to the
        // mean arrival bit rate lambda * L.
        let spec = TrafficSpec {
            delay_violation_prob: 1.0 - 1e-9,
            ..TrafficSpec::default()
        };
        let mean = spec.sensitive_arrival_rate * spec.sensitive_packet_bits;
        assert_relative_eq!(min_rate_sensitive(&spec), mean, max_relative = 1e-6);
    }

    #[test]
    fn sensitive_floor_monotone_in_bound_and_violation_prob() {
        let base = TrafficSpec::default();
        for (d, rho) in [(0.005, 1e-4), (0.01, 1e-3), (0.02, 1e-2)] {
            let a = TrafficSpec {
                delay_bound_s: d,
                delay_violation_prob: rho,
                ..base.clone()
            };
            let b = TrafficSpec {
                delay_bound_s: d * 1.01,
                ..a.clone()
            };
            assert!(min_rate_sensitive(&b) < min_rate_sensitive(&a));
            let c = TrafficSpec {
                delay_violation_prob: rho * 1.01,
                ..a.clone()
            };
            assert!(min_rate_sensitive(&c) < min_rate_sensitive(&a));
        }
    }

    #[test]
    fn default_floors_are_ordered() {
        let spec = TrafficSpec::default();
        assert!(min_rate_tolerant(&spec) > min_rate_sensitive(&spec));
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut spec = TrafficSpec::default();
        spec.delay_bound_s = 0.0;
        assert_eq!(spec.validate(), Err(QosError::NonPositive("delay_bound_s")));
        let mut spec = TrafficSpec::default();
        spec.delay_violation_prob = 1.0;
        assert_eq!(spec.validate(), Err(QosError::BadViolationProb));
    }
}
