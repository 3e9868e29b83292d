//! The full theory-versus-simulation invariant suite.

use crate::channel::{make_channel_params, translate_velocity, HopConvention, Velocity};
use crate::error::Result;
use crate::exponent::{e1, iv_lower_bound_single, iv_lower_bound_stream};
use crate::lattice::BoundaryCondition;
use crate::numeric::fmt_f64;
use crate::sim::NoiseModel;
use crate::verdict::Verdict;

use super::analytic::{closed_form_discrepancy, e1_small_velocity_gap, es_small_velocity_gap, finite_exponent, CLOSED_FORM_TOL};
use super::config::{ExperimentConfig, Scheme};
use super::{cmd_exponents, cmd_iv, cmd_packet, cmd_simulate, cmd_stream, CommandOutput};

/// Velocity at which the small-velocity limits are evaluated.
pub const SMALL_VELOCITY: f64 = 1e-6;

/// Relative tolerance of the small-velocity limits.
pub const SMALL_VELOCITY_TOL: f64 = 1e-4;

/// Velocities and relays of the finite-`r` exponent fit.
pub const FIT_VELOCITIES: [f64; 3] = [0.5, 1.0, 2.0];
pub const FIT_RELAYS: [usize; 4] = [50, 100, 200, 300];
pub const FIT_TOL: f64 = 0.1;

fn absorb(out: &mut CommandOutput, step: &str, sub: CommandOutput) {
    for mut v in sub.verdicts {
        v.name = format!("{step}.{}", v.name);
        out.verdicts.push(v);
    }
    out.notes.extend(sub.notes.into_iter().map(|n| format!("{step}: {n}")));
}

/// Relative gaps `|(-ln M_r(⌊r/v⌋))/r - E_1(v)| / E_1(v)` over [`FIT_RELAYS`].
pub fn exponent_fit_gaps(snr: f64, v: f64) -> Result<Vec<f64>> {
    let ch = make_channel_params(snr)?;
    let target = e1(&ch, v);
    let vel = Velocity::instantaneous(v)?;
    FIT_RELAYS
        .iter()
        .map(|&r| Ok((finite_exponent(&ch, vel, r)? - target).abs() / target))
        .collect()
}

/// Delayed-hop velocity bounds against the translation of the
/// instantaneous ones; returns the number of mismatches.
pub fn table_translation_mismatches(snr: f64, rates: &[f64]) -> Result<usize> {
    let ch = make_channel_params(snr)?;
    let mut bad = 0;
    let single = translate_velocity(Velocity::instantaneous(iv_lower_bound_single(&ch, HopConvention::Instantaneous))?, HopConvention::Delayed)?;
    bad += usize::from(single.value() != iv_lower_bound_single(&ch, HopConvention::Delayed));
    for &r in rates.iter().filter(|&&r| r < ch.capacity_nats()) {
        let inst = iv_lower_bound_stream(&ch, r, HopConvention::Instantaneous)?;
        let moved = translate_velocity(Velocity::instantaneous(inst)?, HopConvention::Delayed)?;
        bad += usize::from(moved.value() != iv_lower_bound_stream(&ch, r, HopConvention::Delayed)?);
    }
    Ok(bad)
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<CommandOutput> {
    let mut out = CommandOutput::new("verify");
    let ch = make_channel_params(cfg.experiment.snr)?;
    let (rmax, tmax) = (cfg.lattice.max_relay, cfg.lattice.max_time);

    for (name, boundary) in [
        ("closed_form_single", BoundaryCondition::SingleSample),
        (
            "closed_form_refinement",
            BoundaryCondition::ExponentialRefinement {
                rate_nats: cfg.source.rate_nats,
            },
        ),
    ] {
        let mut worst = (0.0f64, String::new());
        for &snr in &cfg.lattice.verify_snrs {
            let c = make_channel_params(snr)?;
            if let Some((d, r, t)) = closed_form_discrepancy(&c, boundary, rmax, tmax)? {
                if d > worst.0 || worst.1.is_empty() {
                    worst = (d, format!("P={} r={r} t={t}", fmt_f64(snr)));
                }
            }
        }
        out.verdicts.push(Verdict::tolerance(name, cfg.lattice.verify_snrs.len() * rmax * (tmax + 1), worst.0, worst.1, CLOSED_FORM_TOL));
    }

    let mut worst = (e1_small_velocity_gap(&ch, SMALL_VELOCITY), "e1".to_string());
    let rates: Vec<f64> = cfg.exponents.rates.iter().copied().filter(|&r| r > 0.0 && r < ch.capacity_nats()).collect();
    for &r in &rates {
        let g = es_small_velocity_gap(&ch, r, SMALL_VELOCITY);
        if g > worst.0 {
            worst = (g, format!("es R={}", fmt_f64(r)));
        }
    }
    out.verdicts.push(Verdict::tolerance("small_velocity_limits", 1 + rates.len(), worst.0, worst.1, SMALL_VELOCITY_TOL));
    absorb(&mut out, "exponents", cmd_exponents(cfg)?);

    let mut fit = (0.0f64, String::new(), true, 0);
    for &v in FIT_VELOCITIES.iter().filter(|&&v| v < ch.snr()) {
        let gaps = exponent_fit_gaps(ch.snr(), v)?;
        fit.3 += 1;
        fit.2 &= gaps.windows(2).all(|w| w[1] < w[0]);
        let last = *gaps.last().expect("fit relays are non-empty");
        if last > fit.0 || fit.1.is_empty() {
            fit = (last, format!("v={}", fmt_f64(v)), fit.2, fit.3);
        }
    }
    if fit.3 > 0 {
        let mut v = Verdict::tolerance("exponent_fit", fit.3, fit.0, fit.1, FIT_TOL);
        v.passed &= fit.2;
        out.verdicts.push(v);
    }

    absorb(&mut out, "iv", cmd_iv(cfg)?);
    let bad = table_translation_mismatches(ch.snr(), &cfg.exponents.rates)?;
    out.verdicts.push(Verdict::flag("table_translation", 1 + rates.len(), bad == 0, format!("{bad} mismatches")));

    for noise in [NoiseModel::Gaussian, NoiseModel::Uniform, NoiseModel::Rademacher] {
        let mut c = cfg.clone();
        c.experiment.scheme = Scheme::SingleSample;
        c.monte_carlo.noise = noise;
        absorb(&mut out, &format!("simulate[{}]", noise.as_str()), cmd_simulate(&c)?);
    }
    let mut c = cfg.clone();
    c.experiment.scheme = Scheme::SinglePacket;
    absorb(&mut out, "packet", cmd_packet(&c)?);
    let mut c = cfg.clone();
    c.experiment.scheme = Scheme::PacketStream;
    absorb(&mut out, "stream", cmd_stream(&c)?);
    out.seal()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translations_are_exact() {
        for snr in [0.1, 1.0, 10.0, 100.0] {
            assert_eq!(table_translation_mismatches(snr, &[0.01, 0.05, 0.1, 0.5, 1.0]).unwrap(), 0);
        }
    }

    #[test]
    fn fit_gap_shrinks() {
        let g = exponent_fit_gaps(10.0, 1.0).unwrap();
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(g[3] < FIT_TOL);
    }
}
