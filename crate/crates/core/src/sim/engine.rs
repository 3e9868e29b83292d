//! Single-trial execution of the relaying scheme on a line network.
//!
//! Results are stored in lattice coordinates `(r, t)`: node `r` at lattice
//! time `t` holds the estimate whose analytic MSE is `M_r(t)`. With
//! instantaneous hops lattice and physical time coincide. With delayed hops
//! node `r` reaches lattice time `t` at physical time `t + r`; the engine runs
//! in physical time with the one-step delay and maps results back, drawing
//! the noise of hop `r` at lattice time `t` from the same address in both
//! conventions.

use std::io::Write;

use crate::channel::{ChannelParams, HopConvention};
use crate::error::{invalid, Error, Result};
use crate::lattice::MseGrid;
use crate::numeric::fmt_f64;

use super::gains::{precompute_gains, GainTable};
use super::noise::NoiseModel;
use super::rng::{lane_rng, Lane};
use super::source::{SourceProcess, SourceRealization};

/// A line network with precomputed gains.
#[derive(Debug, Clone)]
pub struct LineNetwork {
    channel: ChannelParams,
    gains: GainTable,
    noise: NoiseModel,
    convention: HopConvention,
    hops: usize,
    max_time: usize,
}

impl LineNetwork {
    /// Builds the network for `grid`, using all of its hops and times.
    pub fn new(grid: &MseGrid, noise: NoiseModel, convention: HopConvention) -> Result<Self> {
        Ok(LineNetwork {
            channel: *grid.channel(),
            gains: precompute_gains(grid)?,
            noise,
            convention,
            hops: grid.max_relay(),
            max_time: grid.max_time(),
        })
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn gains(&self) -> &GainTable {
        &self.gains
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn convention(&self) -> HopConvention {
        self.convention
    }

    /// Number of hops; nodes are `0..=hops`.
    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    /// Runs trial `trial` of the run keyed by `master_seed`.
    pub fn run_trial(&self, source: &SourceProcess, master_seed: u64, trial: u64, out: &mut TrialResult) -> Result<()> {
        if source.max_time() != self.max_time {
            return Err(invalid("source", "time horizon differs from the network's"));
        }
        let mut rng = lane_rng(master_seed, trial, Lane::Source);
        source.realize(&mut rng, &mut out.source);
        out.reset(self.hops, self.max_time);
        for r in 0..self.hops {
            let mut rng = lane_rng(master_seed, trial, Lane::Noise(r));
            self.noise.fill(&mut rng, out.z_row_mut(r));
        }
        self.propagate(out)
    }

    /// Runs the network noise-free on the constant source `S = 1`; the
    /// resulting estimates are the coefficients `α_r(t)` of the source in
    /// `Ŝ_r(t)`.
    pub fn coefficient_trial(&self) -> Result<Vec<f64>> {
        let mut out = TrialResult::default();
        out.source.s = 1.0;
        out.source.node0 = vec![1.0; self.max_time + 1];
        out.reset(self.hops, self.max_time);
        self.propagate(&mut out)?;
        Ok(out.estimate)
    }

    /// Runs the network on a prepared realization and noise in `out`.
    fn propagate(&self, out: &mut TrialResult) -> Result<()> {
        match self.convention {
            HopConvention::Instantaneous => self.propagate_instantaneous(out),
            HopConvention::Delayed => self.propagate_delayed(out),
        }
    }

    fn propagate_instantaneous(&self, out: &mut TrialResult) -> Result<()> {
        let w = self.max_time + 1;
        let mut est = vec![0.0; self.hops + 1];
        for t in 0..=self.max_time {
            est[0] = out.source.node0[t];
            out.estimate[t] = est[0];
            for r in 0..self.hops {
                let prev = est[r + 1];
                let i = r * w + t;
                let z = out.z[i];
                if self.gains.is_active(r, t) {
                    let x = self.gains.beta(r, t) * (est[r] - prev);
                    let y = x + z;
                    let next = prev + self.gains.gamma(r, t) * y;
                    out.x[i] = x;
                    out.y[i] = y;
                    est[r + 1] = next;
                    out.note_identity(self.identity_residual(est[r], prev, next, self.gains.gamma(r, t), z));
                } else {
                    out.x[i] = 0.0;
                    out.y[i] = z;
                }
                out.estimate[(r + 1) * w + t] = est[r + 1];
                check_finite(est[r + 1], r + 1, t)?;
            }
        }
        Ok(())
    }

    fn propagate_delayed(&self, out: &mut TrialResult) -> Result<()> {
        let w = self.max_time + 1;
        let mut est = vec![0.0; self.hops + 1];
        // channel output of hop r from the previous physical step
        let mut pending: Vec<Option<f64>> = vec![None; self.hops];
        for phys in 0..=(self.max_time + self.hops) {
            // receivers consume last step's outputs
            for r in 0..self.hops {
                let Some(y) = pending[r].take() else { continue };
                let t = phys - 1 - r;
                let prev = est[r + 1];
                let i = r * w + t;
                if self.gains.is_active(r, t) {
                    let gamma = self.gains.gamma(r, t);
                    est[r + 1] = prev + gamma * y;
                    let sender = out.estimate[r * w + t];
                    out.note_identity(self.identity_residual(sender, prev, est[r + 1], gamma, out.z[i]));
                }
                out.estimate[(r + 1) * w + t] = est[r + 1];
                check_finite(est[r + 1], r + 1, t)?;
            }
            if phys <= self.max_time {
                est[0] = out.source.node0[phys];
                out.estimate[phys] = est[0];
            }
            // transmitters send on hops whose lattice time is in range
            for r in 0..self.hops {
                if phys < r || phys - r > self.max_time {
                    continue;
                }
                let t = phys - r;
                let i = r * w + t;
                let z = out.z[i];
                let x = if self.gains.is_active(r, t) {
                    self.gains.beta(r, t) * (est[r] - est[r + 1])
                } else {
                    0.0
                };
                out.x[i] = x;
                out.y[i] = x + z;
                pending[r] = Some(x + z);
            }
        }
        Ok(())
    }

    /// Deviation from `Ŝ_{r+1}(t) = P̄Ŝ_r(t) + (1-P̄)Ŝ_{r+1}(t-1) + γZ_r(t)`.
    #[inline]
    fn identity_residual(&self, sender: f64, prev: f64, next: f64, gamma: f64, z: f64) -> f64 {
        let pb = self.channel.snr_bar();
        let expected = pb * sender + self.channel.one_minus_snr_bar() * prev + gamma * z;
        (next - expected).abs()
    }
}

fn check_finite(x: f64, relay: usize, time: usize) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { relay, time, what: "estimate" })
    }
}

/// Everything recorded in one trial, in lattice coordinates.
#[derive(Debug, Clone, Default)]
pub struct TrialResult {
    hops: usize,
    max_time: usize,
    /// Source draw, including `Ŝ_0(t)` and the source bits.
    pub source: SourceRealization,
    /// `Ŝ_r(t)` for nodes `0..=hops`, row-major in `r`.
    estimate: Vec<f64>,
    /// Channel inputs, outputs and noise for hops `0..hops`.
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    max_identity_residual: f64,
}

impl TrialResult {
    fn reset(&mut self, hops: usize, max_time: usize) {
        let w = max_time + 1;
        self.hops = hops;
        self.max_time = max_time;
        self.estimate.clear();
        self.estimate.resize((hops + 1) * w, 0.0);
        for v in [&mut self.x, &mut self.y] {
            v.clear();
            v.resize(hops * w, 0.0);
        }
        self.z.resize(hops * w, 0.0);
        self.max_identity_residual = 0.0;
    }

    fn z_row_mut(&mut self, r: usize) -> &mut [f64] {
        let w = self.max_time + 1;
        &mut self.z[r * w..(r + 1) * w]
    }

    #[inline]
    fn note_identity(&mut self, residual: f64) {
        if !(residual <= self.max_identity_residual) {
            self.max_identity_residual = residual;
        }
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    #[inline]
    pub fn estimate(&self, r: usize, t: usize) -> f64 {
        self.estimate[r * (self.max_time + 1) + t]
    }

    /// `E_r(t) = S - Ŝ_r(t)`.
    #[inline]
    pub fn error(&self, r: usize, t: usize) -> f64 {
        self.source.s - self.estimate(r, t)
    }

    #[inline]
    pub fn x(&self, r: usize, t: usize) -> f64 {
        self.x[r * (self.max_time + 1) + t]
    }

    #[inline]
    pub fn y(&self, r: usize, t: usize) -> f64 {
        self.y[r * (self.max_time + 1) + t]
    }

    #[inline]
    pub fn z(&self, r: usize, t: usize) -> f64 {
        self.z[r * (self.max_time + 1) + t]
    }

    /// Largest per-step deviation from the estimate recursion identity.
    pub fn max_identity_residual(&self) -> f64 {
        self.max_identity_residual
    }

    /// Writes the trace as `t,r,x,y,z,estimate`, one row per hop and lattice
    /// time; `estimate` is the receiving node's `Ŝ_{r+1}(t)`.
    pub fn write_trace<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,r,x,y,z,estimate")?;
        for t in 0..=self.max_time {
            for r in 0..self.hops {
                writeln!(
                    w,
                    "{t},{r},{},{},{},{}",
                    fmt_f64(self.x(r, t)),
                    fmt_f64(self.y(r, t)),
                    fmt_f64(self.z(r, t)),
                    fmt_f64(self.estimate(r + 1, t))
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_channel_params;
    use crate::lattice::{solve_grid, BoundaryCondition};
    use crate::sim::source::{make_source_process, SourceSpec};

    fn network(snr: f64, b: BoundaryCondition, hops: usize, tmax: usize, noise: NoiseModel, conv: HopConvention) -> LineNetwork {
        let ch = make_channel_params(snr).unwrap();
        let g = solve_grid(&ch, b, hops, tmax).unwrap();
        LineNetwork::new(&g, noise, conv).unwrap()
    }

    #[test]
    fn noise_free_first_hop() {
        let net = network(10.0, BoundaryCondition::SingleSample, 3, 4, NoiseModel::Zero, HopConvention::Instantaneous);
        let src = make_source_process(SourceSpec::FixedSample(0.7), 4).unwrap();
        let mut out = TrialResult::default();
        net.run_trial(&src, 1, 0, &mut out).unwrap();
        let pb = 10.0 / 11.0;
        assert!((out.estimate(1, 0) - pb * 0.7).abs() < 1e-15);
        assert!((out.error(1, 0).powi(2) - ((1.0 - pb) * 0.7f64).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn coefficients_match_lattice() {
        for conv in [HopConvention::Instantaneous, HopConvention::Delayed] {
            let ch = make_channel_params(3.0).unwrap();
            let g = solve_grid(&ch, BoundaryCondition::SingleSample, 5, 12).unwrap();
            let net = LineNetwork::new(&g, NoiseModel::Gaussian, conv).unwrap();
            let alpha = net.coefficient_trial().unwrap();
            for r in 0..=5 {
                for t in 0..=12 {
                    let a = alpha[r * 13 + t];
                    assert!((a - (1.0 - g.get(r, t as i64).unwrap())).abs() < 1e-12, "{conv} r={r} t={t}");
                }
            }
        }
    }

    #[test]
    fn identity_holds_for_every_noise() {
        for noise in [NoiseModel::Gaussian, NoiseModel::Uniform, NoiseModel::Rademacher] {
            let net = network(10.0, BoundaryCondition::SingleSample, 5, 20, noise, HopConvention::Instantaneous);
            let src = make_source_process(SourceSpec::UniformSample, 20).unwrap();
            let mut out = TrialResult::default();
            for trial in 0..50 {
                net.run_trial(&src, 3, trial, &mut out).unwrap();
                assert!(out.max_identity_residual() < 1e-12, "{noise:?}: {}", out.max_identity_residual());
            }
        }
    }

    #[test]
    fn delayed_engine_matches_lattice_results() {
        let b = BoundaryCondition::PacketStream { packet_bits: 2, period: 3 };
        let inst = network(4.0, b, 6, 17, NoiseModel::Gaussian, HopConvention::Instantaneous);
        let del = network(4.0, b, 6, 17, NoiseModel::Gaussian, HopConvention::Delayed);
        let src = make_source_process(SourceSpec::PacketStream { packet_bits: 2, period: 3 }, 17).unwrap();
        let mut a = TrialResult::default();
        let mut d = TrialResult::default();
        for trial in 0..20 {
            inst.run_trial(&src, 8, trial, &mut a).unwrap();
            del.run_trial(&src, 8, trial, &mut d).unwrap();
            assert_eq!(a.estimate, d.estimate);
            assert_eq!(a.y, d.y);
            assert!(d.max_identity_residual() < 1e-12);
        }
    }

    #[test]
    fn silent_hops_stay_finite() {
        let net = network(1e6, BoundaryCondition::SingleSample, 2, 200, NoiseModel::Gaussian, HopConvention::Instantaneous);
        assert!(net.gains().silent_count() > 0);
        let src = make_source_process(SourceSpec::UniformSample, 200).unwrap();
        let mut out = TrialResult::default();
        net.run_trial(&src, 0, 0, &mut out).unwrap();
        assert!(out.estimate.iter().all(|v| v.is_finite()));
        assert_eq!(out.x(0, 150), 0.0);
    }

    #[test]
    fn trace_has_one_row_per_hop_and_time() {
        let net = network(10.0, BoundaryCondition::SingleSample, 2, 3, NoiseModel::Gaussian, HopConvention::Instantaneous);
        let src = make_source_process(SourceSpec::UniformSample, 3).unwrap();
        let mut out = TrialResult::default();
        net.run_trial(&src, 0, 0, &mut out).unwrap();
        let mut buf = Vec::new();
        out.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 2 * 4);
        assert!(text.starts_with("t,r,x,y,z,estimate\n0,0,"));
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let net = network(10.0, BoundaryCondition::SingleSample, 2, 3, NoiseModel::Gaussian, HopConvention::Instantaneous);
        let src = make_source_process(SourceSpec::UniformSample, 4).unwrap();
        assert!(net.run_trial(&src, 0, 0, &mut TrialResult::default()).is_err());
    }
}
