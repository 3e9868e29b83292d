//! Commands that evaluate closed-form quantities only.

use crate::channel::{bar, make_channel_params, ChannelParams, HopConvention, Velocity};
use crate::error::Result;
use crate::exponent::{e1, es, iv_lower_bound_single, iv_lower_bound_stream, CurveKind, ExponentCurve};
use crate::lattice::{closed_form_single, closed_form_streaming, mse_at_velocity_closed_form, solve_grid, BoundaryCondition};
use crate::numeric::{fmt_f64, log_rel_diff, LogValue};
use crate::verdict::Verdict;

use super::config::{ExperimentConfig, ExponentsSection, Scheme};
use super::CommandOutput;

/// Relative tolerance between the recursion and the closed forms.
pub const CLOSED_FORM_TOL: f64 = 1e-9;

/// Tolerance of the `E_S` junction identity.
pub const CONTINUITY_TOL: f64 = 1e-9;

/// Geometric velocity grid on `[v_min, v_max]` in instantaneous units,
/// translated to `convention`.
pub fn velocity_grid(section: &ExponentsSection, convention: HopConvention) -> Vec<f64> {
    let (lo, hi) = (section.v_min.ln(), section.v_max.ln());
    let n = section.points;
    (0..n)
        .map(|i| {
            let v = (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp();
            match convention {
                HopConvention::Instantaneous => v,
                HopConvention::Delayed => bar(v),
            }
        })
        .collect()
}

pub(crate) fn boundary_for(cfg: &ExperimentConfig) -> BoundaryCondition {
    let s = &cfg.source;
    match cfg.experiment.scheme {
        Scheme::SingleSample | Scheme::SinglePacket => BoundaryCondition::SingleSample,
        Scheme::RefinedSource => BoundaryCondition::ExponentialRefinement { rate_nats: s.rate_nats },
        Scheme::PacketStream => BoundaryCondition::PacketStream {
            packet_bits: s.packet_bits,
            period: s.period,
        },
    }
}

/// Verdicts on the exponent family of one channel over a velocity grid:
/// `E_S = E_1` for rates at or above capacity, the `E_S` junction identity,
/// and non-increasing curves.
pub(crate) fn exponent_verdicts(ch: &ChannelParams, rates: &[f64], curves: &[ExponentCurve]) -> Vec<Verdict> {
    let mut out = Vec::new();
    let cap = ch.capacity_nats();

    let (mut worst, mut at, mut checks) = (0.0f64, String::new(), 0);
    for c in curves {
        if let CurveKind::Es { rate_nats } = c.kind {
            if rate_nats < cap {
                continue;
            }
            let e1_curve = curves.iter().find(|k| k.kind == CurveKind::E1).expect("e1 curve is always sampled");
            for (&(v, a), &(_, b)) in c.samples.iter().zip(&e1_curve.samples) {
                checks += 1;
                let d = (a - b).abs();
                if d > worst || at.is_empty() {
                    worst = d;
                    at = format!("R={} v={}", fmt_f64(rate_nats), fmt_f64(v));
                }
            }
        }
    }
    if checks > 0 {
        out.push(Verdict::tolerance("es_equals_e1_above_capacity", checks, worst, at, 0.0));
    }

    let (mut worst, mut at, mut checks) = (0.0f64, String::new(), 0);
    for &r in rates.iter().filter(|&&r| r < cap) {
        let eta = ch.eta(r);
        let v0 = (1.0 - eta) / eta;
        let d = (es(ch, r, v0.next_down()) - es(ch, r, v0.next_up())).abs();
        checks += 1;
        if d > worst || at.is_empty() {
            worst = d;
            at = format!("R={} v0={}", fmt_f64(r), fmt_f64(v0));
        }
    }
    if checks > 0 {
        out.push(Verdict::tolerance("es_continuity", checks, worst, at, CONTINUITY_TOL));
    }

    let (mut worst, mut at, mut checks) = (0.0f64, String::new(), 0);
    for c in curves {
        for w in c.samples.windows(2) {
            checks += 1;
            let rise = w[1].1 - w[0].1;
            let rel = rise / w[0].1.abs().max(f64::MIN_POSITIVE);
            if rel > worst {
                worst = rel;
                at = format!("{} v={}", c.kind.label(), fmt_f64(w[1].0));
            }
        }
    }
    out.push(Verdict::tolerance("non_increasing", checks, worst, at, 1e-12));
    out
}

/// `E_1` and `E_S` for each configured rate on the configured velocity grid.
pub fn cmd_exponents(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let ch = make_channel_params(cfg.experiment.snr)?;
    let conv = cfg.experiment.convention;
    let grid = velocity_grid(&cfg.exponents, conv);
    let mut curves = vec![ExponentCurve::sample(&ch, CurveKind::E1, conv, &grid)?];
    for &r in &cfg.exponents.rates {
        curves.push(ExponentCurve::sample(&ch, CurveKind::Es { rate_nats: r }, conv, &grid)?);
    }
    if cfg.exponents.envelope {
        for &r in cfg.exponents.rates.iter().filter(|&&r| r > 0.0 && r < ch.capacity_nats()) {
            curves.push(ExponentCurve::sample(&ch, CurveKind::StreamEnvelope { rate_nats: r }, conv, &grid)?);
        }
    }
    let mut out = CommandOutput::new("exponents");
    out.add_csv("exponents.csv", |w| {
        for (i, c) in curves.iter().enumerate() {
            c.write_csv(&mut *w, i == 0)?;
        }
        Ok(())
    })?;
    out.verdicts = exponent_verdicts(&ch, &cfg.exponents.rates, &curves);
    out.seal()
}

/// Streaming velocity bound at `R = frac·C`; the `R = C` endpoint is its
/// limit, 0.
pub fn iv_curve_value(ch: &ChannelParams, frac: f64, convention: HopConvention) -> Result<f64> {
    if frac >= 1.0 {
        return Ok(0.0);
    }
    iv_lower_bound_stream(ch, frac * ch.capacity_nats(), convention)
}

/// Normalized streaming velocity bound versus `R/C` for each SNR.
pub fn cmd_iv(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let conv = cfg.experiment.convention;
    let n = cfg.iv.points;
    let mut rows = Vec::new();
    let (mut zero_worst, mut zero_at) = (0.0f64, String::new());
    let (mut cap_worst, mut cap_at) = (0.0f64, String::new());
    let (mut lin_worst, mut lin_at, mut lin_checks) = (0.0f64, String::new(), 0);
    for &snr in &cfg.iv.snrs {
        let ch = make_channel_params(snr)?;
        let norm = iv_lower_bound_single(&ch, conv);
        for i in 0..n {
            let frac = i as f64 / (n - 1) as f64;
            let v = iv_curve_value(&ch, frac, conv)?;
            let vn = v / norm;
            let linear = 1.0 - frac;
            if i == 0 && ((vn - 1.0).abs() > zero_worst || zero_at.is_empty()) {
                zero_worst = (vn - 1.0).abs();
                zero_at = format!("P={}", fmt_f64(snr));
            }
            if i == n - 1 && (v.abs() > cap_worst || cap_at.is_empty()) {
                cap_worst = v.abs();
                cap_at = format!("P={}", fmt_f64(snr));
            }
            if snr <= cfg.iv.low_snr {
                lin_checks += 1;
                if (vn - linear).abs() > lin_worst || lin_at.is_empty() {
                    lin_worst = (vn - linear).abs();
                    lin_at = format!("P={} R/C={}", fmt_f64(snr), fmt_f64(frac));
                }
            }
            rows.push(format!(
                "{},{},{},{},{},{},{conv}",
                fmt_f64(snr),
                fmt_f64(frac),
                fmt_f64(frac * ch.capacity_nats()),
                fmt_f64(v),
                fmt_f64(vn),
                fmt_f64(linear)
            ));
        }
    }
    let mut out = CommandOutput::new("iv");
    out.add_csv("iv.csv", |w| {
        use std::io::Write;
        writeln!(w, "snr,rate_over_capacity,rate_nats,iv,iv_normalized,linear_reference,convention")?;
        for r in &rows {
            writeln!(w, "{r}")?;
        }
        Ok(())
    })?;
    let k = cfg.iv.snrs.len();
    out.verdicts.push(Verdict::tolerance("iv_zero_rate", k, zero_worst, zero_at, 1e-12));
    out.verdicts.push(Verdict::tolerance("iv_at_capacity", k, cap_worst, cap_at, 0.0));
    if lin_checks > 0 {
        out.verdicts.push(Verdict::tolerance("iv_low_snr_linear", lin_checks, lin_worst, lin_at, cfg.iv.low_snr_tolerance));
    }
    out.seal()
}

/// `-ln M_r(t)/r` at the time a velocity-`v` front reaches relay `r`, from
/// the single-sample closed form.
pub fn finite_exponent(ch: &ChannelParams, v: Velocity, r: usize) -> Result<f64> {
    Ok(-mse_at_velocity_closed_form(ch, v, r)?.ln() / r as f64)
}

/// Closed-form counterpart of grid cell `(r, t)`, if the boundary has one.
pub(crate) fn closed_form_at(ch: &ChannelParams, boundary: BoundaryCondition, r: usize, t: usize) -> Result<Option<LogValue>> {
    Ok(match boundary {
        BoundaryCondition::SingleSample => Some(closed_form_single(ch, r, t)?),
        BoundaryCondition::ExponentialRefinement { rate_nats } => {
            let (a, b) = closed_form_streaming(ch, rate_nats, r, t)?;
            Some(a.add(b))
        }
        BoundaryCondition::PacketStream { .. } => None,
    })
}

/// Largest relative discrepancy between the recursion and the closed form
/// over `1 <= r <= max_relay`, `0 <= t <= max_time`, with its location.
pub fn closed_form_discrepancy(ch: &ChannelParams, boundary: BoundaryCondition, max_relay: usize, max_time: usize) -> Result<Option<(f64, usize, usize)>> {
    let grid = solve_grid(ch, boundary, max_relay, max_time)?;
    let mut worst: Option<(f64, usize, usize)> = None;
    for r in 1..=max_relay {
        for t in 0..=max_time {
            let Some(cf) = closed_form_at(ch, boundary, r, t)? else { return Ok(None) };
            let d = log_rel_diff(grid.get_log(r, t as i64)?, cf);
            if worst.is_none_or(|(w, _, _)| d > w) {
                worst = Some((d, r, t));
            }
        }
    }
    Ok(worst)
}

/// The MSE lattice from the recursion, compared with the closed form.
pub fn cmd_mse(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let ch = make_channel_params(cfg.experiment.snr)?;
    let boundary = boundary_for(cfg);
    let (rmax, tmax) = (cfg.lattice.max_relay, cfg.lattice.max_time);
    let grid = solve_grid(&ch, boundary, rmax, tmax)?;
    let mut out = CommandOutput::new("mse");
    out.add_csv("mse_grid.csv", |w| grid.write_csv(w))?;

    let mut rows = Vec::new();
    let mut worst = (0.0f64, String::new(), 0usize);
    for r in 1..=rmax {
        for t in 0..=tmax {
            let Some(cf) = closed_form_at(&ch, boundary, r, t)? else { continue };
            let dp = grid.get_log(r, t as i64)?;
            let d = log_rel_diff(dp, cf);
            worst.2 += 1;
            if d > worst.0 || worst.1.is_empty() {
                worst = (d, format!("r={r} t={t}"), worst.2);
            }
            rows.push(format!("{r},{t},{},{},{}", fmt_f64(dp.ln()), fmt_f64(cf.ln()), fmt_f64(d)));
        }
    }
    if !rows.is_empty() {
        out.add_csv("mse_compare.csv", |w| {
            use std::io::Write;
            writeln!(w, "r,t,ln_recursion,ln_closed_form,rel_diff")?;
            for r in &rows {
                writeln!(w, "{r}")?;
            }
            Ok(())
        })?;
        out.verdicts.push(Verdict::tolerance("closed_form", worst.2, worst.0, worst.1, CLOSED_FORM_TOL));
    } else {
        out.notes.push("no closed form for the packet-stream boundary; only the recursion is reported".into());
    }

    let mut b_worst = (0.0f64, String::new());
    for t in 0..=tmax {
        let d = (grid.get(0, t as i64)? - boundary.m0(t)).abs();
        if d > b_worst.0 || b_worst.1.is_empty() {
            b_worst = (d, format!("t={t}"));
        }
    }
    out.verdicts.push(Verdict::tolerance("boundary_column", tmax + 1, b_worst.0, b_worst.1, 0.0));
    if boundary == BoundaryCondition::SingleSample {
        let mut f_worst = (0.0f64, String::new());
        for r in 0..=rmax {
            let want = 1.0 - ch.snr_bar().powi(r as i32);
            let d = (grid.get(r, 0)? - want).abs() / want.max(f64::MIN_POSITIVE);
            if d > f_worst.0 || f_worst.1.is_empty() {
                f_worst = (d, format!("r={r}"));
            }
        }
        out.verdicts.push(Verdict::tolerance("first_column", rmax + 1, f_worst.0, f_worst.1, 1e-12));
    }
    out.seal()
}

/// `|v E_1(v) - 2C| / 2C` at small `v`.
pub(crate) fn e1_small_velocity_gap(ch: &ChannelParams, v: f64) -> f64 {
    let two_c = 2.0 * ch.capacity_nats();
    (v * e1(ch, v) - two_c).abs() / two_c
}

/// `|v E_S(v) - 2R| / 2R` at small `v`.
pub(crate) fn es_small_velocity_gap(ch: &ChannelParams, rate_nats: f64, v: f64) -> f64 {
    let two_r = 2.0 * rate_nats;
    (v * es(ch, rate_nats, v) - two_r).abs() / two_r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_command_passes_defaults() {
        let out = cmd_exponents(&ExperimentConfig::default()).unwrap();
        assert!(out.passed(), "{:?}", out.failures());
        let csv = out.file("exponents.csv").unwrap();
        assert!(csv.starts_with("v,exponent,kind,convention\n"));
        assert_eq!(csv.lines().count(), 1 + 5 * 100);
    }

    #[test]
    fn delayed_grid_is_translated() {
        let g = velocity_grid(&ExponentsSection::default(), HopConvention::Delayed);
        assert!(g.iter().all(|&v| v > 0.0 && v < 1.0));
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.convention = HopConvention::Delayed;
        assert!(cmd_exponents(&cfg).unwrap().passed());
    }

    #[test]
    fn iv_command_endpoints() {
        let out = cmd_iv(&ExperimentConfig::default()).unwrap();
        assert!(out.passed(), "{:?}", out.failures());
        let csv = out.file("iv.csv").unwrap();
        assert_eq!(csv.lines().count(), 1 + 5 * 101);
    }

    #[test]
    fn mse_command_small_grid() {
        let mut cfg = ExperimentConfig::default();
        cfg.lattice.max_relay = 20;
        cfg.lattice.max_time = 30;
        for scheme in [Scheme::SingleSample, Scheme::RefinedSource, Scheme::PacketStream] {
            cfg.experiment.scheme = scheme;
            let out = cmd_mse(&cfg).unwrap();
            assert!(out.passed(), "{scheme:?}: {:?}", out.failures());
            assert!(out.file("mse_grid.csv").is_some());
        }
    }

    #[test]
    fn small_velocity_limits() {
        let ch = make_channel_params(10.0).unwrap();
        assert!(e1_small_velocity_gap(&ch, 1e-6) < 1e-4);
        assert!(es_small_velocity_gap(&ch, 0.5, 1e-6) < 1e-4);
    }
}
