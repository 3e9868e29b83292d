//! Transmitter-side source processes: the sequence `Ŝ_0(t)` and the truth.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::lattice::BoundaryCondition;
use crate::pam;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Below this the transmitter MSE is treated as exactly zero.
const EXACT_MSE: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// The same known sample in every trial.
    FixedSample(f64),
    /// `S` uniform on `[-√3, √3)`, known at `t = 0`.
    UniformSample,
    /// One packet of uniform bits mapped to `S^ψ`, known at `t = 0`.
    SinglePacket { packet_bits: u32 },
    /// `S` uniform, revealed through successive noisy observations whose
    /// LMMSE estimate has MSE `mse_profile[t]` at time `t`.
    Refinement { mse_profile: Vec<f64> },
    /// Packets of uniform bits; at time `t` the transmitter holds
    /// `S^{ψ(⌊t/T⌋+1)}` of the virtual source `S = S^N + U^N`.
    PacketStream { packet_bits: u32, period: u32 },
}

/// One trial's source draw.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceRealization {
    /// The quantity the network estimates.
    pub s: f64,
    /// `Ŝ_0(t)` for `t = 0..=t_max`.
    pub node0: Vec<f64>,
    /// Source bits, when the source is digital.
    pub bits: Vec<bool>,
}

/// A validated source bound to a time horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceProcess {
    spec: SourceSpec,
    max_time: usize,
    /// Per-step observation precision `1/σ_t²` for refinement sources
    /// (`inf` once the profile reaches zero).
    precision: Vec<f64>,
}

pub fn make_source_process(spec: SourceSpec, max_time: usize) -> Result<SourceProcess> {
    let mut precision = Vec::new();
    match &spec {
        SourceSpec::FixedSample(s) => {
            if !s.is_finite() {
                return Err(invalid("sample", "must be finite"));
            }
        }
        SourceSpec::UniformSample => {}
        SourceSpec::SinglePacket { packet_bits } => {
            if *packet_bits == 0 || *packet_bits > 52 {
                return Err(invalid("packet_bits", format!("must lie in 1..=52, got {packet_bits}")));
            }
        }
        SourceSpec::Refinement { mse_profile } => {
            if mse_profile.len() != max_time + 1 {
                return Err(Error::LengthMismatch {
                    what: "refinement MSE profile",
                    expected: max_time + 1,
                    got: mse_profile.len(),
                });
            }
            let mut prev = 1.0f64;
            for &m in mse_profile {
                if !(0.0..=prev).contains(&m) {
                    return Err(invalid("mse_profile", "must be non-increasing within [0, 1]"));
                }
                let p = if m <= EXACT_MSE { f64::INFINITY } else { 1.0 / m - 1.0 / prev.max(EXACT_MSE) };
                precision.push(p.max(0.0));
                prev = m;
            }
        }
        SourceSpec::PacketStream { packet_bits, period } => {
            if *packet_bits == 0 || *period == 0 {
                return Err(invalid("packet_stream", "packet_bits and period must be >= 1"));
            }
        }
    }
    Ok(SourceProcess { spec, max_time, precision })
}

impl SourceProcess {
    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    /// Number of packets a stream source draws for the horizon.
    pub fn num_packets(&self) -> usize {
        match self.spec {
            SourceSpec::SinglePacket { .. } => 1,
            SourceSpec::PacketStream { period, .. } => self.max_time / period as usize + 1,
            _ => 0,
        }
    }

    /// Checks that `boundary` describes this source's transmitter MSE for a
    /// unit-variance design.
    pub fn check_boundary(&self, boundary: &BoundaryCondition) -> Result<()> {
        let ok = match (&self.spec, boundary) {
            (SourceSpec::FixedSample(_) | SourceSpec::UniformSample | SourceSpec::SinglePacket { .. }, BoundaryCondition::SingleSample) => true,
            (SourceSpec::PacketStream { packet_bits, period }, BoundaryCondition::PacketStream { packet_bits: b, period: p }) => {
                packet_bits == b && period == p
            }
            (SourceSpec::Refinement { mse_profile }, b) => mse_profile
                .iter()
                .enumerate()
                .all(|(t, &m)| (m - b.m0(t)).abs() <= 1e-12 * m.max(1e-300)),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("boundary", format!("{boundary:?} does not match source {:?}", self.spec)))
        }
    }

    /// Draws one trial's source into `out`.
    pub fn realize<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut SourceRealization) {
        let n = self.max_time + 1;
        out.node0.clear();
        out.bits.clear();
        match &self.spec {
            SourceSpec::FixedSample(s) => {
                out.s = *s;
                out.node0.resize(n, *s);
            }
            SourceSpec::UniformSample => {
                out.s = rng.random_range(-SQRT3..SQRT3);
                out.node0.resize(n, out.s);
            }
            SourceSpec::SinglePacket { packet_bits } => {
                out.bits.extend((0..*packet_bits).map(|_| rng.random::<bool>()));
                out.s = pam::encode(&out.bits, *packet_bits as usize).expect("bit count checked").value;
                out.node0.resize(n, out.s);
            }
            SourceSpec::Refinement { mse_profile } => {
                let s = rng.random_range(-SQRT3..SQRT3);
                out.s = s;
                let mut acc = 0.0;
                let mut exact = false;
                for (t, &w) in self.precision.iter().enumerate() {
                    let g: f64 = rng.sample(StandardNormal);
                    if exact || w.is_infinite() {
                        exact = true;
                        out.node0.push(s);
                        continue;
                    }
                    // observation S + N_t with Var N_t = 1/w, weighted by w
                    acc += s * w + g * w.sqrt();
                    out.node0.push(mse_profile[t] * acc);
                }
            }
            SourceSpec::PacketStream { packet_bits, period } => {
                let psi = *packet_bits as usize;
                let total = self.num_packets() * psi;
                out.bits.extend((0..total).map(|_| rng.random::<bool>()));
                let mut prefix = Vec::with_capacity(self.num_packets());
                let mut acc = 0.0f64;
                let mut w = 0.5f64;
                for (i, &b) in out.bits.iter().enumerate() {
                    acc += if b { -w } else { w };
                    w *= 0.5;
                    if (i + 1) % psi == 0 {
                        prefix.push(SQRT3 * acc);
                    }
                }
                let half = 0.5 * pam::min_distance(total as u32);
                out.s = SQRT3 * acc + rng.random_range(-half..half);
                out.node0.extend((0..n).map(|t| prefix[t / *period as usize]));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_channel_params;
    use crate::lattice::solve_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn known_sample_is_constant() {
        let p = make_source_process(SourceSpec::FixedSample(0.3), 5).unwrap();
        let mut out = SourceRealization::default();
        p.realize(&mut ChaCha8Rng::seed_from_u64(0), &mut out);
        assert_eq!(out.node0, vec![0.3; 6]);
        assert_eq!(out.s, 0.3);
    }

    #[test]
    fn packet_stream_staircase() {
        let p = make_source_process(SourceSpec::PacketStream { packet_bits: 4, period: 4 }, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut out = SourceRealization::default();
        // find a draw whose first packet is 0000
        loop {
            p.realize(&mut rng, &mut out);
            if out.bits[..4].iter().all(|&b| !b) {
                break;
            }
        }
        let want = 3f64.sqrt() * 15.0 / 16.0;
        for t in 0..4 {
            assert!((out.node0[t] - want).abs() < 1e-15);
        }
        assert_eq!(out.bits.len(), 12);
        let full = pam::encode(&out.bits, 12).unwrap().value;
        assert!((out.s - full).abs() <= 0.5 * pam::min_distance(12));
        for t in 8..12 {
            assert_eq!(out.node0[t], full);
        }
    }

    #[test]
    fn refinement_profile_is_realized() {
        let ch = make_channel_params(10.0).unwrap();
        let b = BoundaryCondition::ExponentialRefinement { rate_nats: 0.3 };
        let g = solve_grid(&ch, b, 1, 6).unwrap();
        let profile: Vec<f64> = (0..=6).map(|t| g.get(0, t).unwrap()).collect();
        let p = make_source_process(SourceSpec::Refinement { mse_profile: profile.clone() }, 6).unwrap();
        p.check_boundary(&b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut out = SourceRealization::default();
        let n = 200_000;
        let mut sq = vec![0.0; 7];
        let mut cross = 0.0;
        for _ in 0..n {
            p.realize(&mut rng, &mut out);
            for t in 0..=6 {
                sq[t] += (out.s - out.node0[t]).powi(2);
            }
            // LMMSE orthogonality: error at t=3 uncorrelated with estimate at t=1
            cross += (out.s - out.node0[3]) * out.node0[1];
        }
        for t in 0..=6 {
            let emp = sq[t] / n as f64;
            assert!((emp / profile[t] - 1.0).abs() < 0.02, "t={t}: {emp} vs {}", profile[t]);
        }
        assert!((cross / n as f64).abs() < 5e-3);
    }

    #[test]
    fn refinement_rejects_bad_profiles() {
        assert!(make_source_process(SourceSpec::Refinement { mse_profile: vec![0.5; 3] }, 5).is_err());
        assert!(make_source_process(SourceSpec::Refinement { mse_profile: vec![0.5, 0.6] }, 1).is_err());
        let p = make_source_process(SourceSpec::Refinement { mse_profile: vec![0.5, 0.0, 0.0] }, 2).unwrap();
        let mut out = SourceRealization::default();
        p.realize(&mut ChaCha8Rng::seed_from_u64(1), &mut out);
        assert_eq!(out.node0[1], out.s);
        assert_eq!(out.node0[2], out.s);
    }

    #[test]
    fn boundary_mismatch_is_rejected() {
        let p = make_source_process(SourceSpec::UniformSample, 3).unwrap();
        assert!(p.check_boundary(&BoundaryCondition::SingleSample).is_ok());
        assert!(p.check_boundary(&BoundaryCondition::ExponentialRefinement { rate_nats: 1.0 }).is_err());
    }
}
