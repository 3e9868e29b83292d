//! Error exponents, information-velocity bounds and the analytic error
//! probability bounds that turn an MSE into a decoding guarantee.
//!
//! Exponents are per relay: `M_r(⌊r/v⌋) ≈ exp(-r E(v))`. Functions taking a
//! [`Velocity`] accept either hop convention and evaluate the instantaneous
//! formula at the translated velocity.

use std::io::Write;

use crate::channel::{bar, ChannelParams, HopConvention, Velocity};
use crate::error::{invalid, Error, Result};
use crate::lattice::MseGrid;
use crate::numeric::{bisect, fmt_f64, golden_section_min};

/// `x ln x` with `0 ln 0 = 0`.
fn xlnx_ratio(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).ln()
    }
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(name, format!("must lie in [0, 1], got {p}")))
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_prob("p", p)?;
    let a = if p == 0.0 { 0.0 } else { -p * p.ln() };
    let b = if p == 1.0 { 0.0 } else { -(1.0 - p) * (-p).ln_1p() };
    Ok(a + b)
}

/// Binary KL divergence `d(p‖q)` in nats; infinite when `q` cannot explain `p`.
pub fn kl_binary(p: f64, q: f64) -> Result<f64> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    Ok(kl(p, q))
}

fn kl(p: f64, q: f64) -> f64 {
    let a = xlnx_ratio(p, q);
    let b = xlnx_ratio(1.0 - p, 1.0 - q);
    (a + b).max(0.0)
}

/// `d(1-a‖1-b)` evaluated with `a` and `b` given directly, avoiding `1 - x`.
fn kl_complement(a_low: f64, a: f64, b_low: f64, b: f64) -> f64 {
    // d(p‖q) where p = 1 - a_low = a, q = b with 1 - q = b_low
    let first = xlnx_ratio(a, b);
    let second = xlnx_ratio(a_low, b_low);
    (first + second).max(0.0)
}

/// Single-sample exponent: `d(v̄‖P̄)/v̄` for `v < P`, else 0.
pub fn e1(channel: &ChannelParams, v: f64) -> f64 {
    if v >= channel.snr() {
        return 0.0;
    }
    let vb = bar(v);
    // d(v̄‖P̄) with 1 - v̄ = 1/(1+v) and 1 - P̄ = 1/(1+P)
    kl_complement(1.0 / (1.0 + v), vb, channel.one_minus_snr_bar(), channel.snr_bar()) / vb
}

pub fn e1_at(channel: &ChannelParams, v: Velocity) -> f64 {
    e1(channel, v.to_instantaneous())
}

/// `η/(1-η)`, the unconstrained minimizer of [`e_tilde`].
pub fn delta_star(channel: &ChannelParams, rate_nats: f64) -> Result<f64> {
    let eta = channel.eta(rate_nats);
    if eta >= 1.0 {
        return Err(Error::RateAtOrAboveCapacity {
            rate_nats,
            capacity_nats: channel.capacity_nats(),
        });
    }
    Ok(eta / (1.0 - eta))
}

/// `Ẽ(δ) = (1+δ) d(δ̄‖1-P̄) - 2Rδ`.
pub fn e_tilde(channel: &ChannelParams, rate_nats: f64, delta: f64) -> f64 {
    let db = bar(delta);
    (1.0 + delta) * kl_complement(1.0 / (1.0 + delta), db, channel.snr_bar(), channel.one_minus_snr_bar())
        - 2.0 * rate_nats * delta
}

/// `Ẽ'(δ) = ln(δ̄/η)`.
fn e_tilde_slope(channel: &ChannelParams, rate_nats: f64, delta: f64) -> f64 {
    bar(delta).ln() - channel.eta(rate_nats).ln()
}

/// Refinement-source exponent. Below the junction `v0 = (1-η)/η` the
/// transmitter's own residual error dominates and the exponent is the
/// tangent `d(1-η‖P̄)/(1-η) + 2R(1/v - η/(1-η))`; above it, [`e1`].
pub fn es(channel: &ChannelParams, rate_nats: f64, v: f64) -> f64 {
    let eta = channel.eta(rate_nats);
    if eta >= 1.0 {
        return e1(channel, v);
    }
    let v0 = (1.0 - eta) / eta;
    if v <= v0 {
        let one_minus_eta = -(-2.0 * (channel.capacity_nats() - rate_nats)).exp_m1();
        let d = kl_complement(eta, one_minus_eta, channel.one_minus_snr_bar(), channel.snr_bar());
        d / one_minus_eta + 2.0 * rate_nats * (1.0 / v - eta / one_minus_eta)
    } else {
        e1(channel, v)
    }
}

pub fn es_at(channel: &ChannelParams, rate_nats: f64, v: Velocity) -> f64 {
    es(channel, rate_nats, v.to_instantaneous())
}

/// Minimizer of `Ẽ` over `(0, 1/v]`, found by bisection on `Ẽ'`.
pub fn e2_minimizer(channel: &ChannelParams, rate_nats: f64, v: f64) -> f64 {
    let edge = 1.0 / v;
    if e_tilde_slope(channel, rate_nats, edge) <= 0.0 {
        return edge;
    }
    bisect(|d| e_tilde_slope(channel, rate_nats, d), 0.0, edge, 1e-15)
}

/// `E₂(v) = inf_{δ∈(0,1/v]} Ẽ(δ) + 2R/v`, the exponent of the part of the
/// MSE inherited from the transmitter. Equals [`es`] for `v <= P`.
pub fn e2(channel: &ChannelParams, rate_nats: f64, v: f64) -> f64 {
    let delta = e2_minimizer(channel, rate_nats, v);
    e_tilde(channel, rate_nats, delta) + 2.0 * rate_nats / v
}

/// Lemma-style packet bound `(1/3) 4^ψ mse`, unclamped.
pub fn packet_error_bound_chebyshev_raw(mse: f64, packet_bits: u32) -> f64 {
    4f64.powi(packet_bits as i32) * mse / 3.0
}

pub fn packet_error_bound_chebyshev(mse: f64, packet_bits: u32) -> f64 {
    packet_error_bound_chebyshev_raw(mse, packet_bits).clamp(0.0, 1.0)
}

/// Sub-Gaussian packet bound `2 exp(-3 / (2^{2ψ+1} mse))`, unclamped.
pub fn packet_error_bound_gaussian_raw(mse: f64, packet_bits: u32) -> f64 {
    if mse <= 0.0 {
        return 0.0;
    }
    2.0 * (-3.0 / (2f64.powi(2 * packet_bits as i32 + 1) * mse)).exp()
}

pub fn packet_error_bound_gaussian(mse: f64, packet_bits: u32) -> f64 {
    packet_error_bound_gaussian_raw(mse, packet_bits).clamp(0.0, 1.0)
}

/// Bound on the error probability of the first `n_bits` bits that holds for
/// any packet size: `(2/√3) 2^n √mse`, unclamped.
pub fn prefix_error_bound_raw(mse: f64, n_bits: u32) -> f64 {
    2.0 / 3f64.sqrt() * 2f64.powi(n_bits as i32) * mse.max(0.0).sqrt()
}

pub fn prefix_error_bound(mse: f64, n_bits: u32) -> f64 {
    prefix_error_bound_raw(mse, n_bits).clamp(0.0, 1.0)
}

/// Worst-bit bound for a packet stream at relay `r` and delay `delta`:
/// `sup_τ (2/√3) 2^{(τ+1)ψ} √M_r(τT + Δ)` over the packets the grid covers.
/// Returns the unclamped value.
pub fn stream_worst_bit_bound(grid: &MseGrid, packet_bits: u32, period: u32, r: usize, delta: usize, num_packets: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for tau in 0..num_packets {
        let t = tau * period as usize + delta;
        let m = grid.get(r, t as i64)?;
        let n = (tau as u32 + 1) * packet_bits;
        worst = worst.max(prefix_error_bound_raw(m, n));
    }
    Ok(worst)
}

/// Result of minimizing the streaming envelope over the packet-age offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeExponent {
    /// Exponent per unit of delay `Δ`.
    pub per_delay: f64,
    /// Exponent per relay, `per_delay / v`.
    pub per_relay: f64,
    /// Minimizing `θ = t0/Δ`.
    pub theta: f64,
}

/// Envelope exponent of the worst-bit error of a packet stream:
/// `inf_{θ≥0} [(v/2) E_S(v/(1+θ)) - θR]` per unit delay, with `t0 = θΔ`
/// the age of the oldest packet beyond `Δ`.
pub fn stream_envelope_exponent(channel: &ChannelParams, rate_nats: f64, v: f64) -> Result<EnvelopeExponent> {
    if !(v > 0.0 && v < channel.snr()) {
        return Err(invalid("v", format!("must lie in (0, P = {}), got {v}", channel.snr())));
    }
    if !(rate_nats > 0.0) {
        return Err(invalid("rate_nats", format!("must be positive, got {rate_nats}")));
    }
    let objective = |theta: f64| 0.5 * v * es(channel, rate_nats, v / (1.0 + theta)) - theta * rate_nats;

    const GRID: usize = 512;
    let (lo, hi) = (1e-6f64.ln(), 1e6f64.ln());
    let mut thetas = Vec::with_capacity(GRID + 1);
    thetas.push(0.0);
    thetas.extend((0..GRID).map(|i| (lo + (hi - lo) * i as f64 / (GRID - 1) as f64).exp()));

    let values: Vec<f64> = thetas.iter().map(|&t| objective(t)).collect();
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &x)| if x < values[b] { i } else { b });
    let a = thetas[best.saturating_sub(1)];
    let b = thetas[(best + 1).min(GRID)];
    let (mut theta, mut value) = golden_section_min(objective, a, b, 1e-10);
    if values[best] < value {
        theta = thetas[best];
        value = values[best];
    }
    Ok(EnvelopeExponent {
        per_delay: value,
        per_relay: value / v,
        theta,
    })
}

/// Per-relay envelope exponent below the streaming velocity bound, where it
/// no longer depends on `θ`: `(d(1-η‖P̄)/2 - ηR)/(1-η) + R/v`.
pub fn stream_envelope_first_region(channel: &ChannelParams, rate_nats: f64, v: f64) -> Result<f64> {
    let eta = channel.eta(rate_nats);
    if eta >= 1.0 {
        return Err(Error::RateAtOrAboveCapacity {
            rate_nats,
            capacity_nats: channel.capacity_nats(),
        });
    }
    let one_minus_eta = 1.0 - eta;
    let d = kl_complement(eta, one_minus_eta, channel.one_minus_snr_bar(), channel.snr_bar());
    Ok((0.5 * d - eta * rate_nats) / one_minus_eta + rate_nats / v)
}

/// Achievable single-packet velocity: `P`, or `P̄` with delayed hops.
pub fn iv_lower_bound_single(channel: &ChannelParams, convention: HopConvention) -> f64 {
    match convention {
        HopConvention::Instantaneous => channel.snr(),
        HopConvention::Delayed => bar(channel.snr()),
    }
}

/// Achievable streaming velocity `e^{2(C-R)} - 1 = (1-η)/η`; with delayed
/// hops its translation `1 - η`.
pub fn iv_lower_bound_stream(channel: &ChannelParams, rate_nats: f64, convention: HopConvention) -> Result<f64> {
    let gap = channel.capacity_nats() - rate_nats;
    if !(gap > 0.0) {
        return Err(Error::RateAtOrAboveCapacity {
            rate_nats,
            capacity_nats: channel.capacity_nats(),
        });
    }
    let inst = (2.0 * gap).exp_m1();
    Ok(match convention {
        HopConvention::Instantaneous => inst,
        HopConvention::Delayed => bar(inst),
    })
}

/// Which exponent a curve samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveKind {
    E1,
    Es { rate_nats: f64 },
    StreamEnvelope { rate_nats: f64 },
}

impl CurveKind {
    pub fn label(&self) -> String {
        match self {
            CurveKind::E1 => "e1".to_string(),
            CurveKind::Es { rate_nats } => format!("es:{}", fmt_f64(*rate_nats)),
            CurveKind::StreamEnvelope { rate_nats } => format!("envelope:{}", fmt_f64(*rate_nats)),
        }
    }
}

/// An exponent sampled on a caller-provided velocity grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCurve {
    pub kind: CurveKind,
    pub channel: ChannelParams,
    pub convention: HopConvention,
    pub samples: Vec<(f64, f64)>,
}

impl ExponentCurve {
    /// Samples `kind` at each velocity, interpreted under `convention`.
    /// Envelope samples at or above `P` are skipped.
    pub fn sample(channel: &ChannelParams, kind: CurveKind, convention: HopConvention, velocities: &[f64]) -> Result<Self> {
        let mut samples = Vec::with_capacity(velocities.len());
        for &raw in velocities {
            let v = Velocity::new(raw, convention)?.to_instantaneous();
            let value = match kind {
                CurveKind::E1 => e1(channel, v),
                CurveKind::Es { rate_nats } => es(channel, rate_nats, v),
                CurveKind::StreamEnvelope { rate_nats } => {
                    if v >= channel.snr() {
                        continue;
                    }
                    stream_envelope_exponent(channel, rate_nats, v)?.per_relay
                }
            };
            samples.push((raw, value));
        }
        Ok(Self {
            kind,
            channel: *channel,
            convention,
            samples,
        })
    }

    /// Writes `v,exponent,kind,convention` rows; `header` controls the header line.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "v,exponent,kind,convention")?;
        }
        let label = self.kind.label();
        for &(v, e) in &self.samples {
            writeln!(w, "{},{},{},{}", fmt_f64(v), fmt_f64(e), label, self.convention)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_channel_params;

    fn p10() -> ChannelParams {
        make_channel_params(10.0).unwrap()
    }

    #[test]
    fn entropy_and_divergence_edges() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!((binary_entropy(0.5).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_binary(0.3, 0.3).unwrap(), 0.0);
        assert!((kl_binary(0.0, 0.25).unwrap() - (4.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(kl_binary(1.0, 0.0).unwrap().is_infinite());
        assert!(kl_binary(-0.1, 0.5).is_err());
        assert!(kl_binary(0.5, 1.1).is_err());
    }

    #[test]
    fn e1_examples() {
        let ch = p10();
        assert_eq!(e1(&ch, 10.0), 0.0);
        assert!(e1(&ch, 10.0 - 1e-9) < 1e-9);
        assert!((e1(&ch, 1.0) - (121.0f64 / 40.0).ln()).abs() < 1e-14);
        assert!((e1(&ch, 1.0) - 1.10691).abs() < 1e-5);
        let v = 1e-6;
        assert!((v * e1(&ch, v) / (2.0 * ch.capacity_nats()) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn es_regions() {
        let ch = p10();
        let rate = 0.5;
        let eta = ch.eta(rate);
        assert!((eta - 0.5f64.exp() * 0.5f64.exp() / 11.0).abs() < 1e-15);
        let v0 = (1.0 - eta) / eta;
        let d = kl_binary(1.0 - eta, ch.snr_bar()).unwrap();
        let want = d / (1.0 - eta) + 2.0 * rate * (1.0 / 0.1 - eta / (1.0 - eta));
        assert!((es(&ch, rate, 0.1) - want).abs() < 1e-12);
        // junction
        let left = d / (1.0 - eta) + 2.0 * rate * (1.0 / v0 - eta / (1.0 - eta));
        assert!((left - e1(&ch, v0)).abs() < 1e-12);
        assert!((es(&ch, rate, v0 * (1.0 + 1e-12)) - es(&ch, rate, v0)).abs() < 1e-9);
        // above capacity: identical
        for i in 1..=100 {
            let v = 0.13 * i as f64;
            assert_eq!(es(&ch, 1.3, v), e1(&ch, v));
        }
        let v = 1e-6;
        assert!((v * es(&ch, rate, v) / (2.0 * rate) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn e_tilde_properties() {
        let ch = p10();
        let rate = 0.5;
        assert!((e_tilde(&ch, rate, 0.0) + ch.snr_bar().ln()).abs() < 1e-15);
        let ds = delta_star(&ch, rate).unwrap();
        let h = 1e-5;
        let slope = (e_tilde(&ch, rate, ds + h) - e_tilde(&ch, rate, ds - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-6);
        assert!(matches!(delta_star(&ch, 1.3), Err(Error::RateAtOrAboveCapacity { .. })));
    }

    #[test]
    fn e2_minimizer_cases() {
        let ch = p10();
        let rate = 0.5;
        let eta = ch.eta(rate);
        let v0 = (1.0 - eta) / eta;
        let ds = delta_star(&ch, rate).unwrap();
        assert!((e2_minimizer(&ch, rate, 0.5 * v0) - ds).abs() < 1e-8);
        // beyond the junction the edge is optimal; cross-check with golden section
        let v = 0.5 * (v0 + ch.snr());
        let dm = e2_minimizer(&ch, rate, v);
        assert_eq!(dm, 1.0 / v);
        let (x, _) = golden_section_min(|d| e_tilde(&ch, rate, d), 1e-12, 1.0 / v, 1e-12);
        assert!((x - 1.0 / v).abs() < 1e-5);
    }

    #[test]
    fn e2_matches_es_below_p() {
        let ch = p10();
        for rate in [0.1, 0.5, 1.0] {
            for i in 1..=100 {
                let v = ch.snr() * i as f64 / 100.0;
                let (a, b) = (e2(&ch, rate, v), es(&ch, rate, v));
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "R={rate} v={v}: {a} vs {b}");
                assert!(a <= e1(&ch, v) + 1e-12 || v >= ch.snr());
            }
        }
    }

    #[test]
    fn bound_examples() {
        assert!((packet_error_bound_chebyshev(0.01, 1) - 4.0 / 300.0).abs() < 1e-15);
        assert_eq!(packet_error_bound_chebyshev(0.0, 3), 0.0);
        assert!((packet_error_bound_chebyshev(0.1, 2) - 1.6 / 3.0).abs() < 1e-15);
        assert!(packet_error_bound_chebyshev(0.5, 4) == 1.0);

        assert!((packet_error_bound_gaussian(0.01, 1) - 2.0 * (-37.5f64).exp()).abs() < 1e-30);
        assert_eq!(packet_error_bound_gaussian(1e9, 1), 1.0);
        assert!((packet_error_bound_gaussian(3.0 / 8.0, 1) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);

        assert!((prefix_error_bound(0.03, 0) - 0.2).abs() < 1e-15);
        assert_eq!(prefix_error_bound(0.0, 5), 0.0);
        assert!((prefix_error_bound(1e-6, 3) - 2.0 / 3f64.sqrt() * 8.0 * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn gaussian_bound_dominated_in_small_mse_regime() {
        for psi in 1..=6u32 {
            let cap = 3.0 * 4f64.powi(-(psi as i32)) / 8.0;
            for k in 1..=200 {
                let mse = cap * k as f64 / 200.0;
                assert!(packet_error_bound_gaussian_raw(mse, psi) <= packet_error_bound_chebyshev_raw(mse, psi) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn iv_bounds() {
        let ch = p10();
        assert_eq!(iv_lower_bound_single(&ch, HopConvention::Instantaneous), 10.0);
        assert_eq!(iv_lower_bound_single(&ch, HopConvention::Delayed), ch.snr_bar());
        let s = iv_lower_bound_stream(&ch, 0.5, HopConvention::Instantaneous).unwrap();
        assert!((s - 3.04668).abs() < 1e-5);
        assert!((s - (11.0 * (-1.0f64).exp() - 1.0)).abs() < 1e-13);
        let d = iv_lower_bound_stream(&ch, 0.5, HopConvention::Delayed).unwrap();
        assert!((d - (1.0 - 1f64.exp() / 11.0)).abs() < 1e-14);
        let z = iv_lower_bound_stream(&ch, 1e-12, HopConvention::Instantaneous).unwrap();
        assert!((z - 10.0).abs() < 1e-9);
        assert!(iv_lower_bound_stream(&ch, 1.3, HopConvention::Instantaneous).is_err());
    }

    #[test]
    fn envelope_at_velocity_bound() {
        let ch = p10();
        let rate = 0.5;
        let eta = ch.eta(rate);
        let v0 = (1.0 - eta) / eta;
        let env = stream_envelope_exponent(&ch, rate, v0).unwrap();
        let d = kl_binary(1.0 - eta, ch.snr_bar()).unwrap();
        assert!((env.per_relay - d / (2.0 * (1.0 - eta))).abs() < 1e-8);
        assert!(env.per_relay > 0.0);
    }

    #[test]
    fn envelope_matches_first_region_closed_form() {
        let ch = p10();
        for rate in [0.1, 0.5, std::f64::consts::LN_2, 1.0] {
            let v0 = iv_lower_bound_stream(&ch, rate, HopConvention::Instantaneous).unwrap();
            for frac in [0.05, 0.25, 0.5, 0.9, 1.0] {
                let v = frac * v0;
                let env = stream_envelope_exponent(&ch, rate, v).unwrap();
                let cf = stream_envelope_first_region(&ch, rate, v).unwrap();
                assert!((env.per_relay - cf).abs() < 1e-8, "R={rate} v={v}: {} vs {cf}", env.per_relay);
            }
        }
    }

    #[test]
    fn envelope_vanishes_with_rate() {
        let ch = p10();
        for v in [0.5, 1.0, 5.0] {
            let mut last = f64::NAN;
            for rate in [0.5, 0.1, 1e-2, 1e-4, 1e-6] {
                let env = stream_envelope_exponent(&ch, rate, v).unwrap();
                assert!(env.per_relay <= 0.5 * e1(&ch, v) + 1e-12);
                last = env.per_relay;
            }
            assert!(last.abs() < 1e-3, "v={v}: {last}");
        }
    }

    #[test]
    fn curve_csv() {
        let ch = p10();
        let c = ExponentCurve::sample(&ch, CurveKind::E1, HopConvention::Delayed, &[0.5]).unwrap();
        assert!((c.samples[0].1 - e1(&ch, 1.0)).abs() < 1e-15);
        let mut out = Vec::new();
        c.write_csv(&mut out, true).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("v,exponent,kind,convention\n5e-1,"));
        assert!(text.trim_end().ends_with(",e1,delayed"));
    }

    proptest::proptest! {
        #[test]
        fn kl_nonnegative(p in 0.0f64..=1.0, q in 0.001f64..0.999) {
            let d = kl_binary(p, q).unwrap();
            proptest::prop_assert!(d >= 0.0);
            if (p - q).abs() > 1e-3 {
                proptest::prop_assert!(d > 0.0);
            }
        }

        #[test]
        fn e_tilde_convex(a in 0.0f64..20.0, b in 0.0f64..20.0, snr in 0.1f64..100.0, rate in 0.01f64..2.0) {
            let ch = make_channel_params(snr).unwrap();
            let mid = e_tilde(&ch, rate, 0.5 * (a + b));
            let avg = 0.5 * (e_tilde(&ch, rate, a) + e_tilde(&ch, rate, b));
            proptest::prop_assert!(mid <= avg + 1e-10 * (1.0 + avg.abs()));
        }

        #[test]
        fn exponents_monotone_and_ordered(snr in 0.1f64..100.0, rate in 0.01f64..2.0, x in 0.01f64..1.0, y in 0.01f64..1.0) {
            let ch = make_channel_params(snr).unwrap();
            let (lo, hi) = if x < y { (x * snr, y * snr) } else { (y * snr, x * snr) };
            proptest::prop_assert!(e1(&ch, lo) + 1e-12 >= e1(&ch, hi));
            proptest::prop_assert!(es(&ch, rate, lo) + 1e-12 >= es(&ch, rate, hi));
            proptest::prop_assert!(es(&ch, rate, lo) <= e1(&ch, lo) + 1e-10 * (1.0 + e1(&ch, lo)));
            let eta = ch.eta(rate);
            if eta < 1.0 && lo >= (1.0 - eta) / eta {
                proptest::prop_assert_eq!(es(&ch, rate, lo), e1(&ch, lo));
            }
        }
    }
}
