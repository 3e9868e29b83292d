//! Experiment configuration, stored as TOML.

use serde::{Deserialize, Serialize};

use crate::channel::HopConvention;
use crate::error::{invalid, Error, Result};
use crate::sim::NoiseModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// A unit-variance sample known to the transmitter at `t = 0`.
    #[default]
    SingleSample,
    /// One packet of bits mapped to a PAM point.
    SinglePacket,
    /// A sample refined at the transmitter with MSE `e^{-2R(t+1)}`.
    RefinedSource,
    /// Packets of `packet_bits` bits every `period` steps.
    PacketStream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub scheme: Scheme,
    pub snr: f64,
    pub convention: HopConvention,
    pub output_dir: String,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            scheme: Scheme::SingleSample,
            snr: 10.0,
            convention: HopConvention::Instantaneous,
            output_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    /// Refinement rate in nats per channel use.
    pub rate_nats: f64,
    pub packet_bits: u32,
    pub period: u32,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            rate_nats: 0.5,
            packet_bits: 2,
            period: 2,
        }
    }
}

/// Extent of the analytic lattice written by `mse`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub max_relay: usize,
    pub max_time: usize,
    /// Channel SNRs checked by `verify` against the closed forms.
    pub verify_snrs: Vec<f64>,
}

impl Default for LatticeSection {
    fn default() -> Self {
        LatticeSection {
            max_relay: 200,
            max_time: 200,
            verify_snrs: vec![0.1, 1.0, 10.0, 100.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub num_trials: u64,
    pub master_seed: u64,
    pub noise: NoiseModel,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    /// Extent of the lattice simulated by `simulate`.
    pub max_relay: usize,
    pub max_time: usize,
    pub decorrelation_lags: usize,
    /// Report error probabilities below `10/num_trials` as censored.
    pub censor: bool,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            num_trials: 100_000,
            master_seed: 1,
            noise: NoiseModel::Gaussian,
            threads: 0,
            max_relay: 5,
            max_time: 20,
            decorrelation_lags: 4,
            censor: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExponentsSection {
    /// Rates in nats; rates at or above capacity reproduce `E1`.
    pub rates: Vec<f64>,
    pub v_min: f64,
    pub v_max: f64,
    /// Geometrically spaced velocity samples.
    pub points: usize,
    /// Also emit the streaming envelope for rates below capacity.
    pub envelope: bool,
}

impl Default for ExponentsSection {
    fn default() -> Self {
        ExponentsSection {
            rates: vec![0.1, 0.5, 1.0, 1.5],
            v_min: 0.01,
            v_max: 100.0,
            points: 100,
            envelope: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IvSection {
    pub snrs: Vec<f64>,
    /// Samples of `R/C` on `[0, 1]`.
    pub points: usize,
    /// Largest deviation from `1 - R/C` tolerated for SNRs at or below
    /// `low_snr`.
    pub low_snr: f64,
    pub low_snr_tolerance: f64,
}

impl Default for IvSection {
    fn default() -> Self {
        IvSection {
            snrs: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            points: 101,
            low_snr: 0.01,
            low_snr_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketSection {
    pub velocity: f64,
    pub relays: Vec<usize>,
    /// Prefix depth checked against the packet-size-free bound.
    pub prefix_depth: u32,
    pub dithered: bool,
}

impl Default for PacketSection {
    fn default() -> Self {
        PacketSection {
            velocity: 1.0,
            relays: (2..=12).collect(),
            prefix_depth: 2,
            dithered: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    /// Forced velocity; when absent, `velocity_fraction` of the achievable
    /// streaming velocity.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<f64>,
    pub velocity_fraction: f64,
    pub relays: Vec<usize>,
    /// Packets whose worst-bit error is tallied.
    pub num_packets: usize,
}

impl Default for StreamSection {
    fn default() -> Self {
        StreamSection {
            velocity: None,
            velocity_fraction: 0.5,
            relays: vec![4, 8, 12, 16, 20, 24],
            num_packets: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub source: SourceSection,
    pub lattice: LatticeSection,
    pub monte_carlo: MonteCarloSection,
    pub exponents: ExponentsSection,
    pub iv: IvSection,
    pub packet: PacketSection,
    pub stream: StreamSection,
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and positive, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        positive("snr", self.experiment.snr)?;
        let s = &self.source;
        if !(s.rate_nats.is_finite() && s.rate_nats >= 0.0) {
            return Err(invalid("rate_nats", format!("must be finite and >= 0, got {}", s.rate_nats)));
        }
        if matches!(self.experiment.scheme, Scheme::SinglePacket | Scheme::PacketStream) && s.packet_bits == 0 {
            return Err(invalid("packet_bits", "must be at least 1"));
        }
        if self.experiment.scheme == Scheme::PacketStream && s.period == 0 {
            return Err(invalid("period", "must be at least 1"));
        }
        if self.lattice.max_relay == 0 || self.monte_carlo.max_relay == 0 {
            return Err(invalid("max_relay", "must be at least 1"));
        }
        for &p in &self.lattice.verify_snrs {
            positive("verify_snrs", p)?;
        }
        if self.monte_carlo.num_trials == 0 {
            return Err(invalid("num_trials", "must be at least 1"));
        }
        let e = &self.exponents;
        positive("v_min", e.v_min)?;
        positive("v_max", e.v_max)?;
        if e.v_min >= e.v_max || e.points < 2 {
            return Err(invalid("exponents", "need v_min < v_max and at least 2 points"));
        }
        for &r in &e.rates {
            if !(r.is_finite() && r >= 0.0) {
                return Err(invalid("rates", format!("must be finite and >= 0, got {r}")));
            }
        }
        for &p in &self.iv.snrs {
            positive("iv.snrs", p)?;
        }
        if self.iv.points < 2 {
            return Err(invalid("iv.points", "must be at least 2"));
        }
        positive("packet.velocity", self.packet.velocity)?;
        if self.packet.relays.iter().any(|&r| r == 0) || self.stream.relays.iter().any(|&r| r == 0) {
            return Err(invalid("relays", "relay indices start at 1"));
        }
        if self.packet.prefix_depth == 0 {
            return Err(invalid("prefix_depth", "must be at least 1"));
        }
        if let Some(v) = self.stream.velocity {
            positive("stream.velocity", v)?;
        }
        positive("velocity_fraction", self.stream.velocity_fraction)?;
        if self.stream.num_packets == 0 {
            return Err(invalid("num_packets", "must be at least 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip_is_byte_identical() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn sections_and_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "[experiment]\nscheme = \"packet_stream\"\nsnr = 4.0\nconvention = \"delayed\"\n\n[stream]\nvelocity = 0.3\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment.scheme, Scheme::PacketStream);
        assert_eq!(cfg.experiment.convention, HopConvention::Delayed);
        assert_eq!(cfg.stream.velocity, Some(0.3));
        assert_eq!(cfg.monte_carlo, MonteCarloSection::default());
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap().to_toml().unwrap(), text);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("[experiment]\nsnr = -1.0\n").is_err());
        assert!(ExperimentConfig::from_toml("[experiment]\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::from_toml("[packet]\nvelocity = 0.0\n").is_err());
        assert!(ExperimentConfig::from_toml("[monte_carlo]\nnum_trials = 0\n").is_err());
    }
}
