//! Parallel Monte Carlo over independent trials with deterministic reduction.
//!
//! Trials are grouped into fixed chunks of [`CHUNK_TRIALS`]; each chunk is
//! accumulated sequentially and chunks are merged in index order, so the
//! aggregate does not depend on the number of worker threads.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::lattice::MseGrid;
use crate::numeric::{fmt_f64, NeumaierSum};
use crate::pam::{self, ErrorStats};
use crate::verdict::{FamilyCheck, Verdict};

use super::engine::{LineNetwork, TrialResult};
use super::rng::{lane_rng, Lane};
use super::source::{SourceProcess, SourceSpec};

pub const CHUNK_TRIALS: u64 = 1024;

/// Chunks run concurrently before their accumulators are merged.
const CHUNKS_PER_BATCH: u64 = 64;

/// Per-step identity tolerance (absolute).
pub const IDENTITY_TOL: f64 = 1e-12;

/// First and second moments of one probe.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    sum: NeumaierSum,
    sum_sq: NeumaierSum,
}

impl Moments {
    #[inline]
    pub fn add(&mut self, x: f64) {
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn merge(&mut self, other: &Moments) {
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
    }

    pub fn mean(&self, n: u64) -> f64 {
        self.sum.value() / n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self, n: u64) -> f64 {
        if n < 2 {
            return 0.0;
        }
        let nf = n as f64;
        let m = self.mean(n);
        ((self.sum_sq.value() / nf - m * m) * nf / (nf - 1.0)).max(0.0)
    }

    pub fn stderr(&self, n: u64) -> f64 {
        (self.variance(n) / n as f64).sqrt()
    }
}

/// A lattice cell decoded in every trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeCell {
    pub relay: usize,
    /// Lattice time.
    pub time: usize,
    /// Number of leading source bits decoded.
    pub depth: usize,
    /// Delays to tally; `None` tallies every decoded bit.
    pub delays: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodePlan {
    pub cells: Vec<DecodeCell>,
    /// Also run the dithered decoder (single-packet sources only). Cells
    /// whose source coefficient `α_r(t)` rounds to 0 or 1 are skipped.
    pub dithered: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub num_trials: u64,
    pub master_seed: u64,
    pub threads: usize,
    /// Output decorrelation is probed for lags `1..=decorrelation_lags`.
    pub decorrelation_lags: usize,
    /// Accumulate the per-cell MSE, power and orthogonality moments.
    pub moments: bool,
    pub decode: Option<DecodePlan>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            num_trials: 1,
            master_seed: 0,
            threads: 1,
            decorrelation_lags: 0,
            moments: true,
            decode: None,
        }
    }
}

/// Aggregated statistics of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloAggregate {
    n_trials: u64,
    hops: usize,
    max_time: usize,
    lags: usize,
    /// `E_r(t)²` for nodes `0..=hops`.
    mse: Vec<Moments>,
    /// `X_r(t)²` for hops `0..hops`.
    power: Vec<Moments>,
    /// `Y_r(t)Y_r(t+ℓ)` for hops, times and lags `1..=lags`.
    decorrelation: Vec<Moments>,
    /// `E_r(t)(E_{r+1}(t-1) - E_r(t))` for hops `0..hops`.
    orthogonality: Vec<Moments>,
    max_identity_residual: f64,
    /// Slicer outcomes.
    pub errors: ErrorStats,
    /// Dithered-decoder outcomes.
    pub dithered_errors: ErrorStats,
}

impl MonteCarloAggregate {
    fn new(hops: usize, max_time: usize, lags: usize) -> Self {
        let w = max_time + 1;
        MonteCarloAggregate {
            n_trials: 0,
            hops,
            max_time,
            lags,
            mse: vec![Moments::default(); (hops + 1) * w],
            power: vec![Moments::default(); hops * w],
            decorrelation: vec![Moments::default(); hops * w * lags],
            orthogonality: vec![Moments::default(); hops * w],
            max_identity_residual: 0.0,
            errors: ErrorStats::new(),
            dithered_errors: ErrorStats::new(),
        }
    }

    fn merge(&mut self, other: &MonteCarloAggregate) {
        self.n_trials += other.n_trials;
        for (a, b) in [
            (&mut self.mse, &other.mse),
            (&mut self.power, &other.power),
            (&mut self.decorrelation, &other.decorrelation),
            (&mut self.orthogonality, &other.orthogonality),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        self.max_identity_residual = self.max_identity_residual.max(other.max_identity_residual);
        self.errors.merge(&other.errors);
        self.dithered_errors.merge(&other.dithered_errors);
    }

    fn record(&mut self, trial: &TrialResult) {
        let w = self.max_time + 1;
        self.n_trials += 1;
        for r in 0..=self.hops {
            for t in 0..w {
                self.mse[r * w + t].add(trial.error(r, t).powi(2));
            }
        }
        for r in 0..self.hops {
            for t in 0..w {
                let i = r * w + t;
                self.power[i].add(trial.x(r, t).powi(2));
                let e = trial.error(r, t);
                let downstream = if t == 0 { trial.source.s } else { trial.error(r + 1, t - 1) };
                self.orthogonality[i].add(e * (downstream - e));
                let y = trial.y(r, t);
                for lag in 1..=self.lags.min(self.max_time - t) {
                    self.decorrelation[i * self.lags + lag - 1].add(y * trial.y(r, t + lag));
                }
            }
        }
        if !(trial.max_identity_residual() <= self.max_identity_residual) {
            self.max_identity_residual = trial.max_identity_residual();
        }
    }

    fn record_trial_only(&mut self, trial: &TrialResult) {
        self.n_trials += 1;
        if !(trial.max_identity_residual() <= self.max_identity_residual) {
            self.max_identity_residual = trial.max_identity_residual();
        }
    }

    pub fn n_trials(&self) -> u64 {
        self.n_trials
    }

    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    pub fn mse(&self, r: usize, t: usize) -> &Moments {
        &self.mse[r * (self.max_time + 1) + t]
    }

    pub fn power(&self, r: usize, t: usize) -> &Moments {
        &self.power[r * (self.max_time + 1) + t]
    }

    pub fn orthogonality(&self, r: usize, t: usize) -> &Moments {
        &self.orthogonality[r * (self.max_time + 1) + t]
    }

    /// Probe of `E[Y_r(t)Y_r(t+lag)]`, if the lag was tracked.
    pub fn decorrelation(&self, r: usize, t: usize, lag: usize) -> Option<&Moments> {
        if lag == 0 || lag > self.lags || t + lag > self.max_time {
            return None;
        }
        Some(&self.decorrelation[(r * (self.max_time + 1) + t) * self.lags + lag - 1])
    }

    pub fn max_identity_residual(&self) -> f64 {
        self.max_identity_residual
    }

    /// Writes `r,t,emp_mse,emp_power,stderr_mse,n_trials`; the power column
    /// is empty for the last node, which does not transmit.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.n_trials;
        writeln!(w, "r,t,emp_mse,emp_power,stderr_mse,n_trials")?;
        for r in 0..=self.hops {
            for t in 0..=self.max_time {
                let m = self.mse(r, t);
                let p = if r < self.hops { fmt_f64(self.power(r, t).mean(n)) } else { String::new() };
                writeln!(w, "{r},{t},{},{p},{},{n}", fmt_f64(m.mean(n)), fmt_f64(m.stderr(n)))?;
            }
        }
        Ok(())
    }

    /// Theory-vs-simulation verdicts against the grid the network was built
    /// on, for a source of variance `source_variance`.
    ///
    /// The gains assume a unit-variance source. With variance `1 - δ` the
    /// source part of `E_r(t)`, `M_r(t) S`, and of `X_r(t)`, `β D S`, lose
    /// `δ` of their power, so the expected MSE is `M - δM²` and the expected
    /// power `P(1 - δD)`, with `D = M_{r+1}(t-1) - M_r(t)`.
    pub fn verdicts(&self, grid: &MseGrid, network: &LineNetwork, source_variance: f64) -> Vec<Verdict> {
        let n = self.n_trials;
        let deficit = 1.0 - source_variance;
        let snr = grid.channel().snr();
        let gains = network.gains();
        let mut mse = FamilyCheck::new("mse");
        let mut power = FamilyCheck::new("power");
        let mut decor = FamilyCheck::new("decorrelation");
        let mut ortho = FamilyCheck::new("orthogonality");
        for r in 0..=self.hops {
            for t in 0..=self.max_time {
                let m = self.mse(r, t);
                let cell = grid.at(r, t as i64);
                mse.push(format!("r={r} t={t}"), m.mean(n), cell - deficit * cell * cell, m.stderr(n));
                if r == self.hops {
                    continue;
                }
                if gains.is_active(r, t) {
                    let p = self.power(r, t);
                    let diff = grid.at(r + 1, t as i64 - 1) - cell;
                    power.push(format!("r={r} t={t}"), p.mean(n), snr * (1.0 - deficit * diff), p.stderr(n));
                }
                let o = self.orthogonality(r, t);
                ortho.push(format!("r={r} t={t}"), o.mean(n), 0.0, o.stderr(n));
                for lag in 1..=self.lags {
                    if let Some(d) = self.decorrelation(r, t, lag) {
                        decor.push(format!("r={r} t={t} lag={lag}"), d.mean(n), 0.0, d.stderr(n));
                    }
                }
            }
        }
        let mut out = vec![mse.finish(), power.finish()];
        if self.lags > 0 {
            out.push(decor.finish());
        }
        out.push(ortho.finish());
        out.push(Verdict::tolerance("identity", 1, self.max_identity_residual, "", IDENTITY_TOL));
        out
    }
}

/// Runs `opts.num_trials` trials of `network` on `source`.
pub fn run_monte_carlo(network: &LineNetwork, source: &SourceProcess, opts: &RunOptions) -> Result<MonteCarloAggregate> {
    if opts.num_trials == 0 {
        return Err(invalid("num_trials", "must be at least 1"));
    }
    if opts.threads == 0 {
        return Err(invalid("threads", "must be at least 1"));
    }
    let ctx = ChunkContext::new(network, source, opts)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    let chunks = opts.num_trials.div_ceil(CHUNK_TRIALS);
    let mut total = MonteCarloAggregate::new(network.hops(), network.max_time(), opts.decorrelation_lags);
    let mut start = 0;
    while start < chunks {
        let end = (start + CHUNKS_PER_BATCH).min(chunks);
        let parts: Vec<Result<MonteCarloAggregate>> =
            pool.install(|| (start..end).into_par_iter().map(|c| ctx.run_chunk(c)).collect());
        for part in parts {
            total.merge(&part?);
        }
        start = end;
    }
    Ok(total)
}

struct ChunkContext<'a> {
    network: &'a LineNetwork,
    source: &'a SourceProcess,
    opts: &'a RunOptions,
    generation_times: Vec<usize>,
    packet_bits: usize,
    /// `α_r(t)` for the dithered decoder.
    alpha: Vec<f64>,
}

impl<'a> ChunkContext<'a> {
    fn new(network: &'a LineNetwork, source: &'a SourceProcess, opts: &'a RunOptions) -> Result<Self> {
        let (packet_bits, period) = match source.spec() {
            SourceSpec::SinglePacket { packet_bits } => (*packet_bits as usize, 1),
            SourceSpec::PacketStream { packet_bits, period } => (*packet_bits as usize, *period as usize),
            _ => (0, 1),
        };
        let total_bits = packet_bits * source.num_packets();
        let generation_times = if matches!(source.spec(), SourceSpec::SinglePacket { .. }) {
            vec![0; total_bits]
        } else {
            (0..total_bits).map(|n| n / packet_bits.max(1) * period).collect()
        };
        let mut alpha = Vec::new();
        if let Some(plan) = &opts.decode {
            if packet_bits == 0 {
                return Err(invalid("decode", "source carries no bits"));
            }
            for c in &plan.cells {
                if c.relay > network.hops() || c.time > network.max_time() {
                    return Err(invalid("decode", format!("cell ({}, {}) outside the lattice", c.relay, c.time)));
                }
                if c.depth == 0 || c.depth > total_bits {
                    return Err(invalid("decode", format!("depth {} outside 1..={total_bits}", c.depth)));
                }
            }
            if plan.dithered {
                if !matches!(source.spec(), SourceSpec::SinglePacket { .. }) {
                    return Err(invalid("decode", "the dithered decoder needs a single-packet source"));
                }
                alpha = network.coefficient_trial()?;
            }
        }
        Ok(ChunkContext {
            network,
            source,
            opts,
            generation_times,
            packet_bits,
            alpha,
        })
    }

    fn run_chunk(&self, chunk: u64) -> Result<MonteCarloAggregate> {
        let net = self.network;
        let mut acc = MonteCarloAggregate::new(net.hops(), net.max_time(), self.opts.decorrelation_lags);
        let mut trial = TrialResult::default();
        let mut decoded = Vec::new();
        let first = chunk * CHUNK_TRIALS;
        let last = (first + CHUNK_TRIALS).min(self.opts.num_trials);
        for i in first..last {
            net.run_trial(self.source, self.opts.master_seed, i, &mut trial)?;
            if self.opts.moments {
                acc.record(&trial);
            } else {
                acc.record_trial_only(&trial);
            }
            if let Some(plan) = &self.opts.decode {
                let mut dither = plan.dithered.then(|| lane_rng(self.opts.master_seed, i, Lane::Dither));
                for c in &plan.cells {
                    let est = trial.estimate(c.relay, c.time);
                    pam::decode_into(est, c.depth, &mut decoded);
                    self.tally(&mut acc.errors, &decoded, &trial, c)?;
                    if let Some(rng) = dither.as_mut() {
                        let alpha = self.alpha[c.relay * (net.max_time() + 1) + c.time];
                        // at α = 1 the estimate carries no residual to emulate
                        if !(alpha > 0.0 && alpha < 1.0) {
                            continue;
                        }
                        let bits = pam::dithered_decode(est, alpha, self.packet_bits as u32, c.depth, rng)?;
                        self.tally(&mut acc.dithered_errors, &bits, &trial, c)?;
                    }
                }
            }
        }
        Ok(acc)
    }

    fn tally(&self, stats: &mut ErrorStats, decoded: &[bool], trial: &TrialResult, c: &DecodeCell) -> Result<()> {
        stats.tally_errors(
            decoded,
            &trial.source.bits,
            c.relay,
            c.time,
            &self.generation_times,
            self.packet_bits,
            c.delays.as_deref(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{make_channel_params, HopConvention};
    use crate::lattice::{solve_grid, BoundaryCondition};
    use crate::sim::noise::NoiseModel;
    use crate::sim::source::make_source_process;

    fn setup(noise: NoiseModel) -> (MseGrid, LineNetwork, SourceProcess) {
        let ch = make_channel_params(10.0).unwrap();
        let g = solve_grid(&ch, BoundaryCondition::SingleSample, 3, 8).unwrap();
        let net = LineNetwork::new(&g, noise, HopConvention::Instantaneous).unwrap();
        let src = make_source_process(SourceSpec::UniformSample, 8).unwrap();
        (g, net, src)
    }

    #[test]
    fn moments_of_constant() {
        let mut m = Moments::default();
        for _ in 0..10 {
            m.add(2.0);
        }
        assert_eq!(m.mean(10), 2.0);
        assert_eq!(m.stderr(10), 0.0);
    }

    #[test]
    fn small_run_matches_grid() {
        let (g, net, src) = setup(NoiseModel::Gaussian);
        let opts = RunOptions {
            num_trials: 20_000,
            master_seed: 11,
            threads: 2,
            decorrelation_lags: 2,
            moments: true,
            decode: None,
        };
        let agg = run_monte_carlo(&net, &src, &opts).unwrap();
        for v in agg.verdicts(&g, &net, 1.0) {
            assert!(v.passed, "{}", v.summary());
        }
    }

    #[test]
    fn aggregate_is_thread_independent() {
        let (_, net, src) = setup(NoiseModel::Rademacher);
        let mut opts = RunOptions {
            num_trials: 3000,
            master_seed: 5,
            threads: 1,
            decorrelation_lags: 1,
            moments: true,
            decode: None,
        };
        let a = run_monte_carlo(&net, &src, &opts).unwrap();
        opts.threads = 3;
        let b = run_monte_carlo(&net, &src, &opts).unwrap();
        assert_eq!(a, b);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn decode_plan_tallies_cells() {
        let ch = make_channel_params(10.0).unwrap();
        let g = solve_grid(&ch, BoundaryCondition::SingleSample, 2, 6).unwrap();
        let net = LineNetwork::new(&g, NoiseModel::Gaussian, HopConvention::Instantaneous).unwrap();
        let src = make_source_process(SourceSpec::SinglePacket { packet_bits: 2 }, 6).unwrap();
        let opts = RunOptions {
            num_trials: 2000,
            master_seed: 1,
            threads: 1,
            decorrelation_lags: 0,
            moments: false,
            decode: Some(DecodePlan {
                cells: vec![DecodeCell { relay: 2, time: 6, depth: 2, delays: None }],
                dithered: true,
            }),
        };
        let agg = run_monte_carlo(&net, &src, &opts).unwrap();
        let s = agg.errors.get(2, 6).unwrap();
        assert_eq!(s.trials(), 2000);
        assert_eq!(agg.dithered_errors.get(2, 6).unwrap().trials(), 2000);
        assert!(s.worst_prefix_pe() < 0.5);
    }

    #[test]
    fn zero_trials_rejected() {
        let (_, net, src) = setup(NoiseModel::Gaussian);
        let opts = RunOptions { num_trials: 0, ..RunOptions::default() };
        assert!(run_monte_carlo(&net, &src, &opts).is_err());
    }
}
