//! Monte Carlo commands.

use std::io::Write;

use crate::channel::{make_channel_params, ChannelParams, HopConvention, Velocity};
use crate::error::{Error, Result};
use crate::exponent::{
    iv_lower_bound_single, iv_lower_bound_stream, packet_error_bound_chebyshev_raw, packet_error_bound_gaussian_raw, prefix_error_bound_raw,
    stream_envelope_exponent, stream_worst_bit_bound,
};
use crate::lattice::{lattice_time_at_velocity, solve_grid, BoundaryCondition};
use crate::numeric::fmt_f64;
use crate::pam::{format_probability, DelayStats};
use crate::sim::{make_source_process, run_monte_carlo, DecodeCell, DecodePlan, LineNetwork, RunOptions, SourceSpec, TrialResult};
use crate::verdict::{BoundCheck, Verdict};

use super::analytic::boundary_for;
use super::config::{ExperimentConfig, Scheme};
use super::{resolve_threads, CommandOutput};

fn run_options(cfg: &ExperimentConfig, lags: usize, decode: Option<DecodePlan>) -> RunOptions {
    let mc = &cfg.monte_carlo;
    RunOptions {
        num_trials: mc.num_trials,
        master_seed: mc.master_seed,
        threads: resolve_threads(mc.threads),
        decorrelation_lags: lags,
        moments: decode.is_none(),
        decode,
    }
}

/// Source matching the configured scheme, with its variance.
fn source_for(cfg: &ExperimentConfig, boundary: BoundaryCondition, max_time: usize) -> Result<(SourceSpec, f64)> {
    let psi = cfg.source.packet_bits;
    Ok(match cfg.experiment.scheme {
        Scheme::SingleSample => (SourceSpec::UniformSample, 1.0),
        Scheme::SinglePacket => (SourceSpec::SinglePacket { packet_bits: psi }, 1.0 - 4f64.powi(-(psi as i32))),
        Scheme::RefinedSource => (
            SourceSpec::Refinement {
                mse_profile: (0..=max_time).map(|t| boundary.m0(t)).collect(),
            },
            1.0,
        ),
        Scheme::PacketStream => (
            SourceSpec::PacketStream {
                packet_bits: psi,
                period: cfg.source.period,
            },
            1.0,
        ),
    })
}

/// Monte Carlo of the configured scheme against the analytic lattice.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let ch = make_channel_params(cfg.experiment.snr)?;
    let boundary = boundary_for(cfg);
    let mc = &cfg.monte_carlo;
    let grid = solve_grid(&ch, boundary, mc.max_relay, mc.max_time)?;
    let net = LineNetwork::new(&grid, mc.noise, cfg.experiment.convention)?;
    let (spec, variance) = source_for(cfg, boundary, mc.max_time)?;
    let source = make_source_process(spec, mc.max_time)?;
    let agg = run_monte_carlo(&net, &source, &run_options(cfg, mc.decorrelation_lags, None))?;

    let mut out = CommandOutput::new("simulate");
    out.add_csv("simulate_aggregate.csv", |w| agg.write_csv(w))?;
    let mut trace = TrialResult::default();
    net.run_trial(&source, mc.master_seed, 0, &mut trace)?;
    out.add_csv("simulate_trace.csv", |w| trace.write_trace(w))?;
    out.verdicts = agg.verdicts(&grid, &net, variance);
    if net.gains().clamp_count() > 0 {
        out.notes.push(format!("{} power-limit clamps applied to the gains", net.gains().clamp_count()));
    }
    if net.gains().silent_count() > 0 {
        out.notes.push(format!("{} silent hop uses (degenerate innovation variance)", net.gains().silent_count()));
    }
    out.seal()
}

fn rate(err: u64, obs: u64) -> f64 {
    if obs == 0 {
        0.0
    } else {
        err as f64 / obs as f64
    }
}

/// `ln(-ln p)` for a usable probability, else `None`.
fn loglog(p: f64, n: u64, censor: bool) -> Option<f64> {
    let floor = if censor { 10.0 / n as f64 } else { 0.0 };
    (p > 0.0 && p >= floor && p < 1.0).then(|| (-p.ln()).ln())
}

/// Least-squares slope of `y` on `x`.
fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Single-packet Monte Carlo at a fixed velocity: empirical packet and
/// prefix errors against the analytic bounds.
pub fn cmd_packet(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let ch = make_channel_params(cfg.experiment.snr)?;
    let conv = cfg.experiment.convention;
    let psi = cfg.source.packet_bits;
    let depth = cfg.packet.prefix_depth;
    if depth > psi {
        return Err(Error::InvalidParameter {
            name: "prefix_depth",
            reason: format!("{depth} exceeds the packet size {psi}"),
        });
    }
    let v = Velocity::new(cfg.packet.velocity, conv)?;
    let mut out = CommandOutput::new("packet");
    let mut relays: Vec<usize> = cfg.packet.relays.clone();
    relays.sort_unstable();
    relays.dedup();
    let mut points = Vec::new();
    for &r in &relays {
        match lattice_time_at_velocity(v, r) {
            Some(t) => points.push((r, t)),
            None => out.notes.push(format!("relay {r} is not reached at velocity {}", fmt_f64(v.value()))),
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter {
            name: "relays",
            reason: "no relay is reached at the configured velocity".into(),
        });
    }
    let rmax = points.iter().map(|p| p.0).max().unwrap_or(1);
    let tmax = points.iter().map(|p| p.1).max().unwrap_or(0);
    let grid = solve_grid(&ch, BoundaryCondition::SingleSample, rmax, tmax)?;
    let net = LineNetwork::new(&grid, cfg.monte_carlo.noise, conv)?;
    let source = make_source_process(SourceSpec::SinglePacket { packet_bits: psi }, tmax)?;
    let plan = DecodePlan {
        cells: points
            .iter()
            .map(|&(r, t)| DecodeCell {
                relay: r,
                time: t,
                depth: psi as usize,
                delays: None,
            })
            .collect(),
        dithered: cfg.packet.dithered,
    };
    let agg = run_monte_carlo(&net, &source, &run_options(cfg, 0, Some(plan)))?;
    let n = agg.n_trials();
    let censor = cfg.monte_carlo.censor;
    let fmt_p = |p: f64| format_probability(p, n, censor);

    let mut cheb = BoundCheck::new("packet_bound_chebyshev");
    let mut gauss = BoundCheck::new("packet_bound_gaussian");
    let mut prefix = BoundCheck::new("prefix_bound");
    let mut prefix_d = BoundCheck::new("prefix_bound_dithered");
    let mut diag = Vec::new();
    let mut rows = Vec::new();
    let empty = DelayStats::default();
    for &(r, t) in &points {
        let m = grid.get(r, t as i64)?;
        let s = agg.errors.get(r, t).unwrap_or(&empty);
        let d = agg.dithered_errors.get(r, t);
        let pk = (s.packet_err.first().copied().unwrap_or(0), s.packet_obs.first().copied().unwrap_or(0));
        let at = |v: &[u64]| v.get(depth as usize - 1).copied().unwrap_or(0);
        let pf = (at(&s.prefix_err), at(&s.bit_obs));
        let b_cheb = packet_error_bound_chebyshev_raw(m, psi);
        let b_gauss = packet_error_bound_gaussian_raw(m, psi);
        let b_prefix = prefix_error_bound_raw(m, depth);
        let label = format!("r={r} t={t}");
        cheb.push(label.clone(), pk.0, pk.1, b_cheb);
        gauss.push(label.clone(), pk.0, pk.1, b_gauss);
        prefix.push(label.clone(), pf.0, pf.1, b_prefix);
        let pd = d.map(|d| (at(&d.prefix_err), at(&d.bit_obs)));
        if let Some((e, o)) = pd {
            prefix_d.push(label.clone(), e, o, b_prefix);
        }
        let p_packet = rate(pk.0, pk.1);
        let ll = loglog(p_packet, n, censor);
        if let Some(y) = ll {
            diag.push((r as f64, y));
        }
        rows.push(format!(
            "{r},{t},{n},{},{},{},{},{depth},{},{},{},{}",
            fmt_f64(m),
            fmt_p(p_packet),
            fmt_f64(b_cheb),
            fmt_f64(b_gauss),
            fmt_p(rate(pf.0, pf.1)),
            pd.map_or(String::new(), |(e, o)| fmt_p(rate(e, o))),
            fmt_f64(b_prefix),
            ll.map_or(String::new(), fmt_f64)
        ));
    }
    out.add_csv("packet.csv", |w| {
        writeln!(
            w,
            "r,t,n_trials,mse,packet_err,bound_chebyshev,bound_gaussian,prefix_depth,prefix_err,prefix_err_dithered,prefix_bound,loglog_packet_err"
        )?;
        for row in &rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    })?;
    out.add_csv("packet_errors.csv", |w| agg.errors.write_csv(w, censor))?;
    if cfg.packet.dithered {
        out.add_csv("packet_errors_dithered.csv", |w| agg.dithered_errors.write_csv(w, censor))?;
    }
    out.verdicts.push(cheb.finish());
    out.verdicts.push(gauss.finish());
    out.verdicts.push(prefix.finish());
    if cfg.packet.dithered {
        out.verdicts.push(prefix_d.finish());
    }

    if v.to_instantaneous() < iv_lower_bound_single(&ch, HopConvention::Instantaneous) {
        out.verdicts.push(doubly_exponential_verdict(&diag));
    } else {
        out.notes.push(format!(
            "velocity {} is at or above the single-packet bound; convergence is reported, not asserted",
            fmt_f64(v.value())
        ));
    }
    out.seal()
}

/// `ln(-ln p̂)` must increase from relay to relay with a positive
/// least-squares slope over at least three usable points.
fn doubly_exponential_verdict(points: &[(f64, f64)]) -> Verdict {
    if points.len() < 3 {
        return Verdict::flag(
            "doubly_exponential",
            points.len(),
            false,
            format!("{} relays with an uncensored error in (0, 1); need 3", points.len()),
        );
    }
    let slope = ls_slope(points);
    let increasing = points.windows(2).all(|w| w[1].1 > w[0].1);
    Verdict::flag(
        "doubly_exponential",
        points.len(),
        increasing && slope > 0.0,
        format!("slope {} increasing {increasing}", fmt_f64(slope)),
    )
}

/// Velocity of a streaming run: the forced value, or the configured
/// fraction of the achievable streaming velocity.
pub fn stream_velocity(cfg: &ExperimentConfig, ch: &ChannelParams) -> Result<f64> {
    let rate_nats = stream_rate(cfg);
    match cfg.stream.velocity {
        Some(v) => Ok(v),
        None => Ok(cfg.stream.velocity_fraction * iv_lower_bound_stream(ch, rate_nats, cfg.experiment.convention)?),
    }
}

fn stream_rate(cfg: &ExperimentConfig) -> f64 {
    f64::from(cfg.source.packet_bits) * std::f64::consts::LN_2 / f64::from(cfg.source.period)
}

/// Packet-stream Monte Carlo: worst-bit error at delay `⌊r/v⌋` per relay.
pub fn cmd_stream(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let ch = make_channel_params(cfg.experiment.snr)?;
    let conv = cfg.experiment.convention;
    let (psi, period) = (cfg.source.packet_bits, cfg.source.period);
    let rate_nats = stream_rate(cfg);
    let mut out = CommandOutput::new("stream");
    let below_capacity = rate_nats < ch.capacity_nats();
    let v_raw = stream_velocity(cfg, &ch)?;
    let v = Velocity::new(v_raw, conv)?;
    let achievable = if below_capacity {
        Some(iv_lower_bound_stream(&ch, rate_nats, conv)?)
    } else {
        out.notes.push(format!(
            "rate {} nats is at or above capacity {}: no achievable velocity; the forced velocity is run and non-convergence is expected",
            fmt_f64(rate_nats),
            fmt_f64(ch.capacity_nats())
        ));
        None
    };

    let mut relays = cfg.stream.relays.clone();
    relays.sort_unstable();
    relays.dedup();
    let mut points = Vec::new();
    for &r in &relays {
        match lattice_time_at_velocity(v, r) {
            Some(delta) => points.push((r, delta)),
            None => out.notes.push(format!("relay {r} is not reached at velocity {}", fmt_f64(v_raw))),
        }
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter {
            name: "relays",
            reason: "no relay is reached at the configured velocity".into(),
        });
    }
    let k = cfg.stream.num_packets;
    let rmax = points.iter().map(|p| p.0).max().unwrap_or(1);
    let tmax = (k - 1) * period as usize + points.iter().map(|p| p.1).max().unwrap_or(0);
    let boundary = BoundaryCondition::PacketStream { packet_bits: psi, period };
    let grid = solve_grid(&ch, boundary, rmax, tmax)?;
    let net = LineNetwork::new(&grid, cfg.monte_carlo.noise, conv)?;
    let source = make_source_process(SourceSpec::PacketStream { packet_bits: psi, period }, tmax)?;
    let mut cells = Vec::new();
    for &(r, delta) in &points {
        for tau in 0..k {
            cells.push(DecodeCell {
                relay: r,
                time: tau * period as usize + delta,
                depth: (tau + 1) * psi as usize,
                delays: Some(vec![delta]),
            });
        }
    }
    let agg = run_monte_carlo(&net, &source, &run_options(cfg, 0, Some(DecodePlan { cells, dithered: false })))?;
    let n = agg.n_trials();
    let censor = cfg.monte_carlo.censor;

    let v_inst = v.to_instantaneous();
    let envelope = if rate_nats > 0.0 && v_inst < ch.snr() {
        Some(stream_envelope_exponent(&ch, rate_nats, v_inst)?.per_relay)
    } else {
        None
    };
    let mut bound_check = BoundCheck::new("envelope_bound");
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let empty = DelayStats::default();
    for &(r, delta) in &points {
        let s = agg.errors.get(r, delta).unwrap_or(&empty);
        let bound = stream_worst_bit_bound(&grid, psi, period, r, delta, k)?;
        for (bit, (&e, &o)) in s.bit_err.iter().zip(&s.bit_obs).enumerate() {
            let tau = bit / psi as usize;
            let m = grid.get(r, (tau * period as usize + delta) as i64)?;
            let b = prefix_error_bound_raw(m, (tau as u32 + 1) * psi);
            bound_check.push(format!("r={r} delta={delta} bit={bit}"), e, o, b);
        }
        let worst = s.worst_bit_pe();
        series.push((r, worst));
        rows.push(format!(
            "{r},{delta},{n},{},{},{},{}",
            format_probability(worst, n, censor),
            fmt_f64(bound),
            envelope.map_or(String::new(), fmt_f64),
            envelope.map_or(String::new(), |e| fmt_f64((-(r as f64) * e).exp()))
        ));
    }
    out.add_csv("stream.csv", |w| {
        writeln!(w, "r,delta,n_trials,worst_bit_pe,bound,envelope_exponent,envelope_asymptotic")?;
        for row in &rows {
            writeln!(w, "{row}")?;
        }
        Ok(())
    })?;
    out.add_csv("stream_errors.csv", |w| agg.errors.write_csv(w, censor))?;
    out.verdicts.push(bound_check.finish());

    match achievable {
        Some(bound) if v_raw < bound => {
            let ok = series.windows(2).all(|w| w[1].1 < w[0].1);
            let detail = series
                .iter()
                .map(|&(r, p)| format!("r={r}:{}", format_probability(p, n, censor)))
                .collect::<Vec<_>>()
                .join(" ");
            out.verdicts.push(Verdict::flag("worst_bit_decreasing", series.len(), ok, detail));
        }
        _ => out.notes.push(format!(
            "velocity {} is not below the achievable streaming velocity; the trend is reported, not asserted",
            fmt_f64(v_raw)
        )),
    }
    out.seal()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scheme: Scheme) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.scheme = scheme;
        cfg.monte_carlo.num_trials = 4000;
        cfg.monte_carlo.threads = 2;
        cfg.monte_carlo.max_relay = 3;
        cfg.monte_carlo.max_time = 8;
        cfg
    }

    #[test]
    fn simulate_every_scheme() {
        for scheme in [Scheme::SingleSample, Scheme::SinglePacket, Scheme::RefinedSource, Scheme::PacketStream] {
            for conv in [HopConvention::Instantaneous, HopConvention::Delayed] {
                let mut cfg = small(scheme);
                cfg.experiment.convention = conv;
                let out = cmd_simulate(&cfg).unwrap();
                assert!(out.passed(), "{scheme:?} {conv}: {:?}", out.failures());
                assert!(out.file("simulate_aggregate.csv").unwrap().starts_with("r,t,emp_mse,emp_power,stderr_mse,n_trials\n"));
            }
        }
    }

    #[test]
    fn packet_command_columns() {
        let mut cfg = small(Scheme::SinglePacket);
        cfg.packet.velocity = 5.0;
        cfg.packet.relays = vec![2, 4, 6];
        let out = cmd_packet(&cfg).unwrap();
        let csv = out.file("packet.csv").unwrap();
        assert_eq!(csv.lines().count(), 4);
        for v in out.verdicts.iter().filter(|v| v.name.starts_with("packet_bound") || v.name.starts_with("prefix")) {
            assert!(v.passed, "{}", v.summary());
        }
    }

    #[test]
    fn stream_above_capacity_needs_forced_velocity() {
        let mut cfg = small(Scheme::PacketStream);
        cfg.source.packet_bits = 4;
        cfg.source.period = 1;
        assert!(matches!(cmd_stream(&cfg), Err(Error::RateAtOrAboveCapacity { .. })));
        cfg.stream.velocity = Some(0.5);
        cfg.stream.relays = vec![2, 4];
        cfg.stream.num_packets = 2;
        let out = cmd_stream(&cfg).unwrap();
        assert!(out.notes.iter().any(|n| n.contains("at or above capacity")));
        assert!(!out.verdicts.iter().any(|v| v.name == "worst_bit_decreasing"));
    }

    #[test]
    fn stream_command_small() {
        let mut cfg = small(Scheme::PacketStream);
        cfg.stream.relays = vec![2, 4];
        cfg.stream.num_packets = 3;
        let out = cmd_stream(&cfg).unwrap();
        let csv = out.file("stream.csv").unwrap();
        assert!(csv.starts_with("r,delta,n_trials,worst_bit_pe,bound,envelope_exponent,envelope_asymptotic\n"));
        assert_eq!(csv.lines().count(), 3);
        let b = out.verdicts.iter().find(|v| v.name == "envelope_bound").unwrap();
        assert!(b.passed, "{}", b.summary());
    }

    #[test]
    fn slope_of_line() {
        assert!((ls_slope(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]) - 2.0).abs() < 1e-12);
    }
}
