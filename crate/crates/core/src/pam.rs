//! Nested PAM mapping of bit strings, slicing decoders and error tallies.
//!
//! Bits map to `S^n = √3 Σ_{i<n} (-1)^{b_i} 2^{-(i+1)}` (natural labeling),
//! so every prefix is itself a coarser constellation point and uniform bits
//! give `S^∞` uniform on `[-√3, √3)` with unit variance.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::numeric::fmt_f64;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Bits of a packet stream: packet `τ` is `bits[τψ .. (τ+1)ψ]`, generated at `τT`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<bool>,
    packet_bits: u32,
    period: u32,
}

impl BitStream {
    pub fn new(bits: Vec<bool>, packet_bits: u32, period: u32) -> Result<Self> {
        if packet_bits == 0 || period == 0 {
            return Err(invalid("bit_stream", "packet_bits and period must be >= 1"));
        }
        if bits.len() % packet_bits as usize != 0 {
            return Err(Error::LengthMismatch {
                what: "bit stream is not a whole number of packets",
                expected: bits.len().next_multiple_of(packet_bits as usize),
                got: bits.len(),
            });
        }
        Ok(Self { bits, packet_bits, period })
    }

    /// `num_packets` packets of uniform random bits.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, packet_bits: u32, period: u32, num_packets: usize) -> Result<Self> {
        let bits = (0..num_packets * packet_bits as usize).map(|_| rng.random::<bool>()).collect();
        Self::new(bits, packet_bits, period)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn packet_bits(&self) -> u32 {
        self.packet_bits
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn num_packets(&self) -> usize {
        self.bits.len() / self.packet_bits as usize
    }

    pub fn packet(&self, tau: usize) -> &[bool] {
        let psi = self.packet_bits as usize;
        &self.bits[tau * psi..(tau + 1) * psi]
    }

    /// Time step at which bit `n` is generated.
    pub fn generation_time(&self, n: usize) -> usize {
        n / self.packet_bits as usize * self.period as usize
    }

    pub fn generation_times(&self) -> Vec<usize> {
        (0..self.bits.len()).map(|n| self.generation_time(n)).collect()
    }
}

/// A constellation point `S^n` with its depth and level spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PamPoint {
    pub value: f64,
    pub depth: u32,
    pub min_distance: f64,
}

/// Spacing `D_n = √3 · 2^{-n+1}` between adjacent levels of `S^n`.
pub fn min_distance(n: u32) -> f64 {
    SQRT3 * 2f64.powi(1 - n as i32)
}

/// Maps the first `n` bits to `S^n`.
pub fn encode(bits: &[bool], n: usize) -> Result<PamPoint> {
    if n > bits.len() {
        return Err(invalid("n", format!("depth {n} exceeds the {} available bits", bits.len())));
    }
    // dyadic partial sums are exact for n <= 53
    let mut acc = 0.0f64;
    let mut w = 0.5f64;
    for &b in &bits[..n] {
        acc += if b { -w } else { w };
        w *= 0.5;
    }
    Ok(PamPoint {
        value: SQRT3 * acc,
        depth: n as u32,
        min_distance: min_distance(n as u32),
    })
}

/// Nearest-point slicing by successive sign tests. A strictly positive
/// residual decodes 0; an exact tie goes to the lower level (bit 1).
pub fn decode_bits(estimate: f64, n: usize) -> Result<Vec<bool>> {
    if !estimate.is_finite() {
        return Err(invalid("estimate", format!("must be finite, got {estimate}")));
    }
    let mut out = Vec::with_capacity(n);
    decode_into(estimate, n, &mut out);
    Ok(out)
}

/// Allocation-free variant of [`decode_bits`] for hot loops; `out` is cleared.
pub fn decode_into(estimate: f64, n: usize, out: &mut Vec<bool>) {
    out.clear();
    let mut residual = estimate / SQRT3;
    let mut w = 0.5f64;
    for _ in 0..n {
        let bit = residual <= 0.0;
        residual += if bit { w } else { -w };
        out.push(bit);
        w *= 0.5;
    }
}

/// Decodes `n` bits after adding `alpha · u` to a finite-constellation
/// estimate, where `u` is the dither realization in `[-D_ψ/2, D_ψ/2)`.
pub fn dithered_decode_with(estimate_fin: f64, alpha: f64, packet_bits: u32, n: usize, u: f64) -> Result<Vec<bool>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    let half = 0.5 * min_distance(packet_bits);
    if !(-half..half).contains(&u) {
        return Err(invalid("dither", format!("must lie in [-{half}, {half}), got {u}")));
    }
    decode_bits(estimate_fin + alpha * u, n)
}

/// Randomized decoder: draws the dither uniformly, then slices.
pub fn dithered_decode<R: Rng + ?Sized>(estimate_fin: f64, alpha: f64, packet_bits: u32, n: usize, rng: &mut R) -> Result<Vec<bool>> {
    let half = 0.5 * min_distance(packet_bits);
    let u = rng.random_range(-half..half);
    dithered_decode_with(estimate_fin, alpha, packet_bits, n, u)
}

/// Counters for one `(relay, delay)` pair. Bit `n` is observed when it is
/// decoded exactly `delay` steps after its generation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DelayStats {
    /// Observations of bit `n`.
    pub bit_obs: Vec<u64>,
    /// Errors in bit `n`.
    pub bit_err: Vec<u64>,
    /// Errors anywhere in bits `0..=n`, at the time bit `n` is observed.
    pub prefix_err: Vec<u64>,
    /// Observations of packet `τ`.
    pub packet_obs: Vec<u64>,
    /// Errors anywhere in packet `τ`.
    pub packet_err: Vec<u64>,
}

impl DelayStats {
    fn ensure(&mut self, bits: usize, packets: usize) {
        if self.bit_obs.len() < bits {
            self.bit_obs.resize(bits, 0);
            self.bit_err.resize(bits, 0);
            self.prefix_err.resize(bits, 0);
        }
        if self.packet_obs.len() < packets {
            self.packet_obs.resize(packets, 0);
            self.packet_err.resize(packets, 0);
        }
    }

    fn merge(&mut self, other: &DelayStats) {
        self.ensure(other.bit_obs.len(), other.packet_obs.len());
        for (a, b) in [
            (&mut self.bit_obs, &other.bit_obs),
            (&mut self.bit_err, &other.bit_err),
            (&mut self.prefix_err, &other.prefix_err),
            (&mut self.packet_obs, &other.packet_obs),
            (&mut self.packet_err, &other.packet_err),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn rate(err: u64, obs: u64) -> f64 {
        if obs == 0 {
            0.0
        } else {
            err as f64 / obs as f64
        }
    }

    /// Maximum over bits of the empirical bit error probability.
    pub fn worst_bit_pe(&self) -> f64 {
        self.bit_obs
            .iter()
            .zip(&self.bit_err)
            .map(|(&o, &e)| Self::rate(e, o))
            .fold(0.0, f64::max)
    }

    /// Pooled bit error rate.
    pub fn mean_bit_pe(&self) -> f64 {
        Self::rate(self.bit_err.iter().sum(), self.bit_obs.iter().sum())
    }

    /// Maximum over observed prefixes of the empirical prefix error probability.
    pub fn worst_prefix_pe(&self) -> f64 {
        self.bit_obs
            .iter()
            .zip(&self.prefix_err)
            .map(|(&o, &e)| Self::rate(e, o))
            .fold(0.0, f64::max)
    }

    /// Maximum over packets of the empirical packet error probability.
    pub fn worst_packet_pe(&self) -> f64 {
        self.packet_obs
            .iter()
            .zip(&self.packet_err)
            .map(|(&o, &e)| Self::rate(e, o))
            .fold(0.0, f64::max)
    }

    pub fn trials(&self) -> u64 {
        self.bit_obs.iter().copied().max().unwrap_or(0)
    }
}

/// Error counters keyed by `(relay, delay)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ErrorStats {
    pub entries: BTreeMap<(usize, usize), DelayStats>,
}

impl ErrorStats {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one decode at node `r`, time `t`. Each decoded bit whose
    /// generation time is at most `t` contributes to the delay
    /// `t - generation_times[n]`; `packet_bits` groups bits into packets.
    /// Only delays listed in `tracked` (if given) are recorded.
    pub fn tally_errors(
        &mut self,
        decoded: &[bool],
        truth: &[bool],
        r: usize,
        t: usize,
        generation_times: &[usize],
        packet_bits: usize,
        tracked: Option<&[usize]>,
    ) -> Result<()> {
        if decoded.len() > truth.len() {
            return Err(Error::LengthMismatch {
                what: "decoded bits exceed ground truth",
                expected: truth.len(),
                got: decoded.len(),
            });
        }
        if generation_times.len() < decoded.len() {
            return Err(Error::LengthMismatch {
                what: "generation times shorter than decoded bits",
                expected: decoded.len(),
                got: generation_times.len(),
            });
        }
        if packet_bits == 0 {
            return Err(invalid("packet_bits", "must be at least 1"));
        }
        let mut prefix_wrong = false;
        let mut packet_wrong = false;
        for (n, (&d, &b)) in decoded.iter().zip(truth).enumerate() {
            let wrong = d != b;
            prefix_wrong |= wrong;
            if n % packet_bits == 0 {
                packet_wrong = false;
            }
            packet_wrong |= wrong;
            let gen = generation_times[n];
            if gen > t {
                continue;
            }
            let delay = t - gen;
            if tracked.is_some_and(|ds| !ds.contains(&delay)) {
                continue;
            }
            let tau = n / packet_bits;
            let entry = self.entries.entry((r, delay)).or_default();
            entry.ensure(n + 1, tau + 1);
            entry.bit_obs[n] += 1;
            entry.bit_err[n] += u64::from(wrong);
            entry.prefix_err[n] += u64::from(prefix_wrong);
            if (n + 1) % packet_bits == 0 {
                entry.packet_obs[tau] += 1;
                entry.packet_err[tau] += u64::from(packet_wrong);
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ErrorStats) {
        for (k, v) in &other.entries {
            self.entries.entry(*k).or_default().merge(v);
        }
    }

    pub fn get(&self, r: usize, delay: usize) -> Option<&DelayStats> {
        self.entries.get(&(r, delay))
    }

    /// Writes `r,delta,n_trials,bit_err,prefix_err,packet_err,worst_bit_pe`.
    /// `bit_err` is the pooled bit error rate; `prefix_err` and `packet_err`
    /// are the worst over prefixes and packets. With `censor`, rates backed by
    /// fewer than 10 errors print as `<10/n`.
    pub fn write_csv<W: Write>(&self, mut w: W, censor: bool) -> std::io::Result<()> {
        writeln!(w, "r,delta,n_trials,bit_err,prefix_err,packet_err,worst_bit_pe")?;
        for (&(r, delay), s) in &self.entries {
            let n = s.trials();
            let fmt = |p: f64| format_probability(p, n, censor);
            writeln!(
                w,
                "{r},{delay},{n},{},{},{},{}",
                fmt(s.mean_bit_pe()),
                fmt(s.worst_prefix_pe()),
                fmt(s.worst_packet_pe()),
                fmt(s.worst_bit_pe())
            )?;
        }
        Ok(())
    }
}

/// Formats an empirical probability from `n` trials, censoring values below
/// `10/n` as `<10/n` when requested.
pub fn format_probability(p: f64, n: u64, censor: bool) -> String {
    if censor && n > 0 {
        let floor = 10.0 / n as f64;
        if p < floor {
            return format!("<{}", fmt_f64(floor));
        }
    }
    fmt_f64(p)
}
