//! Scalar channel and source parameters.
//!
//! Every hop in the line network is an additive unit-variance noise channel
//! with the same SNR `P`. All rates are carried in nats; the packet size in
//! bits is converted once, at construction, via `ln 2`.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Bar transform `a / (1 + a)`.
#[inline]
pub fn bar(a: f64) -> f64 {
    a / (1.0 + a)
}

/// Inverse of [`bar`]: `b / (1 - b)`.
#[inline]
pub fn unbar(b: f64) -> f64 {
    b / (1.0 - b)
}

/// SNR of a single hop and the quantities derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    snr: f64,
    snr_bar: f64,
    one_minus_snr_bar: f64,
    capacity_nats: f64,
}

impl ChannelParams {
    pub fn new(snr: f64) -> Result<Self> {
        if !snr.is_finite() || snr <= 0.0 {
            return Err(invalid("snr", format!("must be positive and finite, got {snr}")));
        }
        Ok(Self {
            snr,
            snr_bar: bar(snr),
            one_minus_snr_bar: 1.0 / (1.0 + snr),
            capacity_nats: 0.5 * snr.ln_1p(),
        })
    }

    /// Linear SNR `P`.
    pub fn snr(&self) -> f64 {
        self.snr
    }

    /// `P / (1 + P)`.
    pub fn snr_bar(&self) -> f64 {
        self.snr_bar
    }

    /// `1 - P̄ = 1 / (1 + P)`, computed without cancellation.
    pub fn one_minus_snr_bar(&self) -> f64 {
        self.one_minus_snr_bar
    }

    /// Gaussian capacity `½ ln(1 + P)` in nats per channel use.
    pub fn capacity_nats(&self) -> f64 {
        self.capacity_nats
    }

    /// `η = (1 - P̄) e^{2R} = e^{-2(C - R)}`.
    pub fn eta(&self, rate_nats: f64) -> f64 {
        (-2.0 * (self.capacity_nats - rate_nats)).exp()
    }
}

pub fn make_channel_params(snr: f64) -> Result<ChannelParams> {
    ChannelParams::new(snr)
}

/// Packet stream of `packet_bits` bits every `period` steps, or a continuous
/// refinement at a given rate when built with [`StreamParams::from_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamParams {
    packet: Option<(u32, u32)>,
    rate_nats: f64,
    eta: f64,
    below_capacity: bool,
}

impl StreamParams {
    pub fn new(packet_bits: u32, period: u32, channel: &ChannelParams) -> Result<Self> {
        if packet_bits == 0 {
            return Err(invalid("packet_bits", "must be at least 1"));
        }
        if period == 0 {
            return Err(invalid("period", "must be at least 1"));
        }
        let rate = f64::from(packet_bits) * LN_2 / f64::from(period);
        let mut params = Self::from_rate(rate, channel)?;
        params.packet = Some((packet_bits, period));
        Ok(params)
    }

    /// Continuous-rate source; `rate_nats = 0` is the single-packet limit.
    pub fn from_rate(rate_nats: f64, channel: &ChannelParams) -> Result<Self> {
        if !rate_nats.is_finite() || rate_nats < 0.0 {
            return Err(invalid("rate_nats", format!("must be finite and >= 0, got {rate_nats}")));
        }
        Ok(Self {
            packet: None,
            rate_nats,
            eta: channel.one_minus_snr_bar() * (2.0 * rate_nats).exp(),
            below_capacity: rate_nats < channel.capacity_nats(),
        })
    }

    pub fn packet_bits(&self) -> Option<u32> {
        self.packet.map(|(bits, _)| bits)
    }

    pub fn period(&self) -> Option<u32> {
        self.packet.map(|(_, period)| period)
    }

    pub fn rate_nats(&self) -> f64 {
        self.rate_nats
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn below_capacity(&self) -> bool {
        self.below_capacity
    }
}

pub fn make_stream_params(packet_bits: u32, period: u32, channel: &ChannelParams) -> Result<StreamParams> {
    StreamParams::new(packet_bits, period, channel)
}

/// Whether a relay may forward what it received in the same time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum HopConvention {
    #[default]
    #[serde(rename = "inst")]
    Instantaneous,
    #[serde(rename = "delayed")]
    Delayed,
}

impl HopConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            HopConvention::Instantaneous => "inst",
            HopConvention::Delayed => "delayed",
        }
    }
}

impl fmt::Display for HopConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for HopConvention {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inst" | "instantaneous" => Ok(HopConvention::Instantaneous),
            "delayed" => Ok(HopConvention::Delayed),
            other => Err(invalid("convention", format!("expected `inst` or `delayed`, got `{other}`"))),
        }
    }
}

/// Relays advanced per time step, tagged with its hop convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity {
    value: f64,
    convention: HopConvention,
}

impl Velocity {
    pub fn new(value: f64, convention: HopConvention) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 {
            return Err(invalid("velocity", format!("must be positive and finite, got {value}")));
        }
        if convention == HopConvention::Delayed && value >= 1.0 {
            return Err(invalid("velocity", format!("delayed-hop velocity must be < 1, got {value}")));
        }
        Ok(Self { value, convention })
    }

    pub fn instantaneous(value: f64) -> Result<Self> {
        Self::new(value, HopConvention::Instantaneous)
    }

    pub fn delayed(value: f64) -> Result<Self> {
        Self::new(value, HopConvention::Delayed)
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn convention(&self) -> HopConvention {
        self.convention
    }

    /// The same velocity expressed with instantaneous hops.
    pub fn to_instantaneous(&self) -> f64 {
        match self.convention {
            HopConvention::Instantaneous => self.value,
            HopConvention::Delayed => unbar(self.value),
        }
    }
}

/// `v ↦ v/(1+v)` (instantaneous to delayed) and its inverse.
pub fn translate_velocity(v: Velocity, target: HopConvention) -> Result<Velocity> {
    let value = match (v.convention, target) {
        (a, b) if a == b => v.value,
        (HopConvention::Instantaneous, HopConvention::Delayed) => bar(v.value),
        (HopConvention::Delayed, HopConvention::Instantaneous) => unbar(v.value),
        _ => unreachable!(),
    };
    Velocity::new(value, target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn capacity_at_snr_ten() {
        let ch = make_channel_params(10.0).unwrap();
        assert!((ch.capacity_nats() - 11f64.ln() / 2.0).abs() < 1e-15);
        assert!((ch.capacity_nats() - 1.19895).abs() < 1e-5);
        assert_eq!(ch.snr_bar(), 10.0 / 11.0);
    }

    #[test]
    fn capacity_at_unit_snr() {
        let ch = make_channel_params(1.0).unwrap();
        assert!((ch.capacity_nats() - 0.346_573_590_279_972_65).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_snr() {
        for snr in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(make_channel_params(snr).is_err(), "snr={snr}");
        }
    }

    #[test]
    fn stream_rate_and_eta() {
        let ch = make_channel_params(10.0).unwrap();
        let s = make_stream_params(4, 4, &ch).unwrap();
        assert!((s.rate_nats() - LN_2).abs() < 1e-15);
        assert!((s.eta() - 4.0 / 11.0).abs() < 1e-14);
        assert!(s.below_capacity());
        assert_eq!(s.packet_bits(), Some(4));

        let zero = StreamParams::from_rate(0.0, &ch).unwrap();
        assert_eq!(zero.eta(), ch.one_minus_snr_bar());
        assert!((zero.eta() - (1.0 - ch.snr_bar())).abs() < 1e-15);

        assert!(make_stream_params(0, 4, &ch).is_err());
        assert!(make_stream_params(4, 0, &ch).is_err());
    }

    #[test]
    fn stream_above_capacity_is_flagged_not_rejected() {
        let ch = make_channel_params(10.0).unwrap();
        let s = make_stream_params(8, 4, &ch).unwrap();
        assert!(!s.below_capacity());
        assert!(s.eta() >= 1.0);
    }

    #[test]
    fn velocity_translation() {
        let p = 10.0;
        let v = Velocity::instantaneous(p).unwrap();
        let d = translate_velocity(v, HopConvention::Delayed).unwrap();
        assert_eq!(d.value(), bar(p));

        let d3 = translate_velocity(Velocity::instantaneous(3.0).unwrap(), HopConvention::Delayed).unwrap();
        assert_eq!(d3.value(), 0.75);

        let tiny = translate_velocity(Velocity::instantaneous(1e-300).unwrap(), HopConvention::Delayed).unwrap();
        assert!(tiny.value() > 0.0 && tiny.value() <= 1e-300);

        assert!(Velocity::delayed(1.0).is_err());
        assert!(Velocity::instantaneous(0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn snr_bar_in_unit_interval(snr in 1e-6f64..1e6) {
            let ch = make_channel_params(snr).unwrap();
            proptest::prop_assert!(ch.snr_bar() > 0.0 && ch.snr_bar() < 1.0);
            proptest::prop_assert!(ch.capacity_nats() > 0.0);
        }

        #[test]
        fn eta_below_one_iff_rate_below_capacity(snr in 1e-3f64..1e3, frac in 0.0f64..2.0) {
            let ch = make_channel_params(snr).unwrap();
            let rate = frac * ch.capacity_nats();
            // skip the measure-zero boundary where rounding decides
            proptest::prop_assume!((frac - 1.0).abs() > 1e-9);
            let s = StreamParams::from_rate(rate, &ch).unwrap();
            proptest::prop_assert_eq!(s.eta() < 1.0, s.below_capacity());
        }

        #[test]
        fn velocity_round_trip(v in 1e-6f64..1e6) {
            let inst = Velocity::instantaneous(v).unwrap();
            let there = translate_velocity(inst, HopConvention::Delayed).unwrap();
            let back = translate_velocity(there, HopConvention::Instantaneous).unwrap();
            proptest::prop_assert!((back.value() - v).abs() <= 1e-14 * v.max(1.0) * (1.0 + v));
        }
    }
}
