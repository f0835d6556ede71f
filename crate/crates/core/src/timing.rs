//! PHY/MAC constants and the channel-event durations derived from them.
//!
//! All durations are held as integer nanoseconds so the simulator can
//! accumulate and compare times exactly; microseconds appear only at the
//! I/O boundary. Byte lengths are converted to bits explicitly (x8) before
//! dividing by a rate, since rates are per-bit while frame sizes are bytes.

use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{ModelError, Result};
use crate::scalar::{from_f64, to_f64, Scalar};

/// Exact duration in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Nanos(u64);

impl Nanos {
    pub const ZERO: Nanos = Nanos(0);

    pub fn from_nanos(ns: u64) -> Self {
        Nanos(ns)
    }

    /// Rounds a microsecond value to the nearest nanosecond.
    pub fn from_micros_f64(us: f64) -> Self {
        Nanos((us * 1_000.0).round().max(0.0) as u64)
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    /// Exact for any duration below ~104 days (2^53 ns).
    pub fn as_micros(self) -> f64 {
        self.0 as f64 / 1_000.0
    }
}

impl Add for Nanos {
    type Output = Nanos;
    fn add(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 + rhs.0)
    }
}

impl AddAssign for Nanos {
    fn add_assign(&mut self, rhs: Nanos) {
        self.0 += rhs.0;
    }
}

impl Sub for Nanos {
    type Output = Nanos;
    fn sub(self, rhs: Nanos) -> Nanos {
        Nanos(self.0 - rhs.0)
    }
}

impl Mul<u64> for Nanos {
    type Output = Nanos;
    fn mul(self, rhs: u64) -> Nanos {
        Nanos(self.0 * rhs)
    }
}

impl Sum for Nanos {
    fn sum<I: Iterator<Item = Nanos>>(iter: I) -> Nanos {
        iter.fold(Nanos::ZERO, |a, b| a + b)
    }
}

/// PHY/MAC constants; defaults are the 802.11b parameter set.
///
/// Rates are in bits per microsecond, which is numerically identical to
/// Mb/s, hence the `_mbps` suffixes shared with the config file keys.
#[derive(Debug, Clone, PartialEq)]
pub struct PhyParams {
    /// Data rate C_d (bits/us).
    pub data_rate_mbps: f64,
    /// Control rate C_c (bits/us).
    pub control_rate_mbps: f64,
    /// PLCP header time T_P (us).
    pub plcp_us: f64,
    /// PHY header time T_PHY (us).
    pub phy_header_us: f64,
    pub mac_header_bytes: u32,
    pub pspoll_bytes: u32,
    pub ack_bytes: u32,
    pub ap_payload_bytes: u32,
    pub sta_payload_bytes: u32,
    /// System slot time delta (us).
    pub slot_us: f64,
    pub sifs_us: f64,
    pub difs_us: f64,
    pub eifs_us: f64,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            data_rate_mbps: 11.0,
            control_rate_mbps: 2.0,
            plcp_us: 144.0,
            phy_header_us: 48.0,
            mac_header_bytes: 34,
            pspoll_bytes: 20,
            ack_bytes: 14,
            ap_payload_bytes: 512,
            sta_payload_bytes: 512,
            slot_us: 20.0,
            sifs_us: 10.0,
            difs_us: 50.0,
            eifs_us: 364.0,
        }
    }
}

impl PhyParams {
    /// Checks the structural invariants a full parameter set must satisfy.
    ///
    /// `frame_durations` itself only requires positive rates, so degenerate
    /// sets (zero-length frames, zero header times) stay computable; this
    /// validation is for configuration input.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("phy.data_rate_mbps", self.data_rate_mbps),
            ("phy.control_rate_mbps", self.control_rate_mbps),
            ("phy.plcp_time_us", self.plcp_us),
            ("phy.phy_header_time_us", self.phy_header_us),
            ("phy.slot_time_us", self.slot_us),
            ("phy.sifs_us", self.sifs_us),
            ("phy.difs_us", self.difs_us),
            ("phy.eifs_us", self.eifs_us),
        ];
        for (key, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::InvalidParameter(format!(
                    "{key} must be strictly positive, got {v}"
                )));
            }
        }
        let byte_fields = [
            ("phy.mac_header_bytes", self.mac_header_bytes),
            ("phy.pspoll_bytes", self.pspoll_bytes),
            ("phy.ack_bytes", self.ack_bytes),
            ("phy.ap_payload_bytes", self.ap_payload_bytes),
            ("phy.sta_payload_bytes", self.sta_payload_bytes),
        ];
        for (key, v) in byte_fields {
            if v == 0 {
                return Err(ModelError::InvalidParameter(format!(
                    "{key} must be strictly positive"
                )));
            }
        }
        if self.control_rate_mbps > self.data_rate_mbps {
            return Err(ModelError::InvalidParameter(format!(
                "phy.control_rate_mbps ({}) must not exceed phy.data_rate_mbps ({})",
                self.control_rate_mbps, self.data_rate_mbps
            )));
        }
        if self.difs_us <= self.sifs_us {
            return Err(ModelError::InvalidParameter(format!(
                "phy.difs_us ({}) must exceed phy.sifs_us ({})",
                self.difs_us, self.sifs_us
            )));
        }
        if self.eifs_us <= self.difs_us {
            return Err(ModelError::InvalidParameter(format!(
                "phy.eifs_us ({}) must exceed phy.difs_us ({})",
                self.eifs_us, self.difs_us
            )));
        }
        Ok(())
    }
}

/// Durations of every channel event the throughput formulas use.
///
/// The two expectation fields stay unset until the PS-POLL attempt rate is
/// known; `expected_pspoll_service_time` fills them in.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDurations {
    /// ACK frame time T_ACK.
    pub t_ack: Nanos,
    /// PS-POLL frame time T_PSPL.
    pub t_pspl: Nanos,
    /// AP data frame time T_AP,d (MAC header + payload at the data rate).
    pub t_ap_data: Nanos,
    /// STA data frame time T_STA,d.
    pub t_sta_data: Nanos,
    /// Contention-free PS-POLL exchange: T_PSPL + SIFS + DIFS + T_ACK.
    pub t_s_pspl: Nanos,
    /// STA success event: SIFS + DIFS + T_ACK + T_STA,d.
    pub t_s_sta: Nanos,
    /// Collision event: max(T_AP,d, T_STA,d) + EIFS.
    pub t_c: Nanos,
    /// Expected PS-POLL service time E[T_PSPL] (us), including the expected
    /// residual countdown. `None` until completed.
    pub e_t_pspl_us: Option<f64>,
    /// Expected AP success event time T_sAP (us): the AP data exchange plus
    /// E[T_PSPL]. `None` until completed.
    pub t_s_ap_us: Option<f64>,
}

impl EventDurations {
    /// AP data exchange alone: T_AP,d + SIFS + T_ACK + DIFS (no PS-POLL part).
    pub fn ap_data_exchange(&self) -> Nanos {
        self.t_s_sta - self.t_sta_data + self.t_ap_data
    }
}

/// Derives all deterministic event durations from the PHY constants.
///
/// Leaves `e_t_pspl_us` and `t_s_ap_us` unset; those depend on the PS-POLL
/// attempt rate. Rejects non-positive rates, but accepts zero-length frames
/// and header times.
pub fn frame_durations(params: &PhyParams) -> Result<EventDurations> {
    for (key, v) in [
        ("data rate", params.data_rate_mbps),
        ("control rate", params.control_rate_mbps),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "{key} must be strictly positive, got {v}"
            )));
        }
    }

    let header = params.plcp_us + params.phy_header_us;
    let ctrl = |bytes: u32| header + f64::from(bytes) * 8.0 / params.control_rate_mbps;
    let data = |bytes: u32| header + f64::from(bytes) * 8.0 / params.data_rate_mbps;

    let t_ack = Nanos::from_micros_f64(ctrl(params.ack_bytes));
    let t_pspl = Nanos::from_micros_f64(ctrl(params.pspoll_bytes));
    let t_ap_data =
        Nanos::from_micros_f64(data(params.mac_header_bytes + params.ap_payload_bytes));
    let t_sta_data =
        Nanos::from_micros_f64(data(params.mac_header_bytes + params.sta_payload_bytes));
    let sifs = Nanos::from_micros_f64(params.sifs_us);
    let difs = Nanos::from_micros_f64(params.difs_us);
    let eifs = Nanos::from_micros_f64(params.eifs_us);

    Ok(EventDurations {
        t_ack,
        t_pspl,
        t_ap_data,
        t_sta_data,
        t_s_pspl: t_pspl + sifs + difs + t_ack,
        t_s_sta: sifs + difs + t_ack + t_sta_data,
        t_c: t_ap_data.max(t_sta_data) + eifs,
        e_t_pspl_us: None,
        t_s_ap_us: None,
    })
}

/// Expected time to serve one PS-POLL, `T_sPSPL + ((1 - beta_ps)/beta_ps) * slot`.
///
/// The residual countdown before the poll is modeled as a per-slot attempt
/// at rate `beta_ps`. Also completes `t_s_ap_us` and `e_t_pspl_us` on the
/// durations. `beta_ps = 0` means the poll never goes out, which is a model
/// breakdown rather than an infinite answer.
pub fn expected_pspoll_service_time<S: Scalar>(
    durations: &mut EventDurations,
    beta_ps: S,
    slot_us: S,
) -> Result<S> {
    if !(beta_ps > S::zero() && beta_ps <= S::one()) {
        return Err(ModelError::Breakdown {
            quantity: "beta_ps",
            value: to_f64(beta_ps),
        });
    }
    let t_s_pspl = from_f64::<S>(durations.t_s_pspl.as_micros());
    let expected = t_s_pspl + (S::one() - beta_ps) / beta_ps * slot_us;
    let t_s_ap = from_f64::<S>(durations.ap_data_exchange().as_micros()) + expected;
    durations.e_t_pspl_us = Some(to_f64(expected));
    durations.t_s_ap_us = Some(to_f64(t_s_ap));
    Ok(expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn table_defaults_reproduce_hand_arithmetic() {
        let d = frame_durations(&PhyParams::default()).unwrap();
        // 144 + 48 + 112/2
        assert_eq!(d.t_ack.as_micros(), 248.0);
        // 144 + 48 + 160/2
        assert_eq!(d.t_pspl.as_micros(), 272.0);
        // 192 + 546*8/11
        assert_relative_eq!(d.t_ap_data.as_micros(), 589.0909, max_relative = 1e-6);
        // 272 + 10 + 50 + 248
        assert_eq!(d.t_s_pspl.as_micros(), 580.0);
        assert_relative_eq!(d.t_s_sta.as_micros(), 897.0909, max_relative = 1e-6);
        assert_relative_eq!(d.t_c.as_micros(), 953.0909, max_relative = 1e-6);
    }

    #[test]
    fn zero_length_frame_has_zero_duration() {
        let params = PhyParams {
            ack_bytes: 0,
            plcp_us: 0.0,
            phy_header_us: 0.0,
            ..PhyParams::default()
        };
        let d = frame_durations(&params).unwrap();
        assert_eq!(d.t_ack, Nanos::ZERO);
    }

    #[test]
    fn non_positive_rates_rejected() {
        let zero_rate = PhyParams {
            data_rate_mbps: 0.0,
            ..PhyParams::default()
        };
        assert!(frame_durations(&zero_rate).is_err());
        let negative_rate = PhyParams {
            control_rate_mbps: -2.0,
            ..PhyParams::default()
        };
        assert!(frame_durations(&negative_rate).is_err());
    }

    #[test]
    fn durations_are_pure() {
        let params = PhyParams::default();
        assert_eq!(
            frame_durations(&params).unwrap(),
            frame_durations(&params).unwrap()
        );
    }

    #[test]
    fn pspoll_service_time_cases() {
        let mut d = frame_durations(&PhyParams::default()).unwrap();
        // No residual slots when every countdown slot is an attempt.
        let e = expected_pspoll_service_time(&mut d, 1.0f64, 20.0).unwrap();
        assert_eq!(e, 580.0);
        // One extra expected slot at beta_ps = 1/2.
        let e = expected_pspoll_service_time(&mut d, 0.5f64, 20.0).unwrap();
        assert_eq!(e, 600.0);
        assert_eq!(d.e_t_pspl_us, Some(600.0));
        // T_sAP = SIFS + DIFS + T_ACK + T_AP,d + E[T_PSPL].
        assert_relative_eq!(
            d.t_s_ap_us.unwrap(),
            897.0909 + 600.0,
            max_relative = 1e-6
        );
        assert!(expected_pspoll_service_time(&mut d, 0.0f64, 20.0).is_err());
    }

    #[test]
    fn pspoll_service_time_decreasing_in_rate() {
        let mut d = frame_durations(&PhyParams::default()).unwrap();
        let mut last = f64::INFINITY;
        for i in 1..=100 {
            let beta = f64::from(i) / 100.0;
            let e = expected_pspoll_service_time(&mut d, beta, 20.0).unwrap();
            assert!(e < last, "E[T_PSPL] not decreasing at beta_ps = {beta}");
            last = e;
        }
    }

    #[test]
    fn ap_success_covers_sta_success_for_equal_payloads() {
        let mut d = frame_durations(&PhyParams::default()).unwrap();
        expected_pspoll_service_time(&mut d, 0.3f64, 20.0).unwrap();
        assert!(d.t_s_ap_us.unwrap() >= d.t_s_sta.as_micros());
        assert!(d.t_c >= d.t_ap_data.max(d.t_sta_data));
    }

    #[test]
    fn validate_enforces_ifs_ordering() {
        let difs_at_sifs = PhyParams {
            difs_us: 10.0,
            ..PhyParams::default()
        };
        assert!(difs_at_sifs.validate().is_err());
        let eifs_at_difs = PhyParams {
            eifs_us: 50.0,
            ..PhyParams::default()
        };
        assert!(eifs_at_difs.validate().is_err());
        let control_above_data = PhyParams {
            control_rate_mbps: 12.0,
            ..PhyParams::default()
        };
        assert!(control_above_data.validate().is_err());
        assert!(PhyParams::default().validate().is_ok());
    }

    proptest! {
        // Durations are monotone: nondecreasing in byte lengths,
        // nonincreasing in rates.
        #[test]
        fn monotone_in_sizes_and_rates(
            bytes in 0u32..4096,
            extra in 1u32..1024,
            rate in 1.0f64..54.0,
        ) {
            let base = PhyParams {
                ap_payload_bytes: bytes,
                data_rate_mbps: rate,
                control_rate_mbps: 1.0,
                ..PhyParams::default()
            };
            let bigger = PhyParams { ap_payload_bytes: bytes + extra, ..base.clone() };
            let faster = PhyParams { data_rate_mbps: rate * 2.0, ..base.clone() };
            let d0 = frame_durations(&base).unwrap();
            let d1 = frame_durations(&bigger).unwrap();
            let d2 = frame_durations(&faster).unwrap();
            prop_assert!(d1.t_ap_data >= d0.t_ap_data);
            prop_assert!(d1.t_c >= d0.t_c);
            prop_assert!(d2.t_ap_data <= d0.t_ap_data);
        }
    }
}
