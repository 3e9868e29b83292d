//! The LMMSE lattice `M_r(t)` over node index and time.
//!
//! The grid is solved by the convex-combination recursion
//! `M_r(t) = P̄ M_{r-1}(t) + (1 - P̄) M_r(t-1)` with `M_r(-1) = 1` and a
//! pluggable transmitter boundary `M_0(t)`. Two copies are kept: the linear
//! values, which drive the simulator gains, and the natural logs, which stay
//! exact far below the double-precision underflow threshold.

use std::f64::consts::LN_2;
use std::io::Write;

use crate::channel::{ChannelParams, HopConvention, Velocity};
use crate::error::{invalid, Error, Result};
use crate::numeric::{fmt_f64, ln_add_exp, ln_binomial, log_sum_exp, LogValue};

/// Default cap on the number of stored cells.
pub const DEFAULT_CELL_CAP: usize = 50_000_000;

/// MSE of the transmitter estimate `Ŝ_0(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// The sample is fully known at `t = 0`.
    SingleSample,
    /// `M_0(t) = exp(-2R(t+1))`.
    ExponentialRefinement { rate_nats: f64 },
    /// Packet `τ` of `packet_bits` bits is generated and usable at `τ·period`,
    /// so `M_0(t) = 2^{-2ψ(⌊t/T⌋+1)}`.
    PacketStream { packet_bits: u32, period: u32 },
}

impl BoundaryCondition {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundaryCondition::SingleSample => Ok(()),
            BoundaryCondition::ExponentialRefinement { rate_nats } => {
                if rate_nats.is_finite() && rate_nats >= 0.0 {
                    Ok(())
                } else {
                    Err(invalid("rate_nats", format!("must be finite and >= 0, got {rate_nats}")))
                }
            }
            BoundaryCondition::PacketStream { packet_bits, period } => {
                if packet_bits == 0 || period == 0 {
                    Err(invalid("packet_stream", "packet_bits and period must be >= 1"))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// `ln M_0(t)` for `t >= 0`.
    pub fn ln_m0(&self, t: usize) -> f64 {
        match *self {
            BoundaryCondition::SingleSample => f64::NEG_INFINITY,
            BoundaryCondition::ExponentialRefinement { rate_nats } => -2.0 * rate_nats * (t as f64 + 1.0),
            BoundaryCondition::PacketStream { packet_bits, period } => {
                let revealed = (t / period as usize + 1) as f64 * f64::from(packet_bits);
                -2.0 * LN_2 * revealed
            }
        }
    }

    /// `M_0(t)` for `t >= 0`.
    pub fn m0(&self, t: usize) -> f64 {
        self.ln_m0(t).exp()
    }
}

/// Solved lattice for `0 <= r <= max_relay` and `-1 <= t <= max_time`.
#[derive(Debug, Clone, PartialEq)]
pub struct MseGrid {
    max_relay: usize,
    max_time: usize,
    boundary: BoundaryCondition,
    channel: ChannelParams,
    values: Vec<f64>,
    ln_values: Vec<f64>,
}

pub fn solve_grid(channel: &ChannelParams, boundary: BoundaryCondition, max_relay: usize, max_time: usize) -> Result<MseGrid> {
    solve_grid_capped(channel, boundary, max_relay, max_time, DEFAULT_CELL_CAP)
}

pub fn solve_grid_capped(
    channel: &ChannelParams,
    boundary: BoundaryCondition,
    max_relay: usize,
    max_time: usize,
    cell_cap: usize,
) -> Result<MseGrid> {
    boundary.validate()?;
    if max_relay < 1 {
        return Err(invalid("max_relay", "must be at least 1"));
    }
    let cells = (max_relay + 1)
        .checked_mul(max_time + 2)
        .ok_or(Error::GridTooLarge { cells: usize::MAX, cap: cell_cap })?;
    if cells > cell_cap {
        return Err(Error::GridTooLarge { cells, cap: cell_cap });
    }

    let pb = channel.snr_bar();
    let qb = channel.one_minus_snr_bar();
    let (ln_pb, ln_qb) = (pb.ln(), qb.ln());
    let width = max_time + 2;
    let mut values = vec![0.0; cells];
    let mut ln_values = vec![0.0; cells];

    for r in 0..=max_relay {
        values[r * width] = 1.0;
        ln_values[r * width] = 0.0;
    }
    for t in 0..=max_time {
        let ln_m0 = boundary.ln_m0(t);
        values[t + 1] = ln_m0.exp();
        ln_values[t + 1] = ln_m0;
    }
    for r in 1..=max_relay {
        for t in 0..=max_time {
            let up = (r - 1) * width + t + 1;
            let left = r * width + t;
            values[r * width + t + 1] = pb * values[up] + qb * values[left];
            ln_values[r * width + t + 1] = ln_add_exp(ln_pb + ln_values[up], ln_qb + ln_values[left]);
        }
    }

    Ok(MseGrid {
        max_relay,
        max_time,
        boundary,
        channel: *channel,
        values,
        ln_values,
    })
}

impl MseGrid {
    pub fn max_relay(&self) -> usize {
        self.max_relay
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    fn index(&self, r: usize, t: i64) -> Result<usize> {
        if r > self.max_relay || t < -1 || t > self.max_time as i64 {
            return Err(Error::OutOfGrid {
                relay: r,
                time: t,
                max_relay: self.max_relay,
                max_time: self.max_time,
            });
        }
        Ok(r * (self.max_time + 2) + (t + 1) as usize)
    }

    /// `M_r(t)`; `t = -1` is the initial condition.
    pub fn get(&self, r: usize, t: i64) -> Result<f64> {
        Ok(self.values[self.index(r, t)?])
    }

    /// `M_r(t)` carried in the log domain.
    pub fn get_log(&self, r: usize, t: i64) -> Result<LogValue> {
        Ok(LogValue::from_ln(self.ln_values[self.index(r, t)?]))
    }

    /// Unchecked linear access for hot loops; `t >= -1`.
    #[inline]
    pub(crate) fn at(&self, r: usize, t: i64) -> f64 {
        self.values[r * (self.max_time + 2) + (t + 1) as usize]
    }

    /// Writes `r,t,mse` rows in r-major order, including `t = -1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "r,t,mse")?;
        for r in 0..=self.max_relay {
            for t in -1..=self.max_time as i64 {
                writeln!(w, "{r},{t},{}", fmt_f64(self.at(r, t)))?;
            }
        }
        Ok(())
    }
}

/// `M_r(t)` for a sample known at `t = 0`:
/// `(1-P̄)^{t+1} Σ_{j=0}^{r-1} C(t+j, j) P̄^j`.
pub fn closed_form_single(channel: &ChannelParams, r: usize, t: usize) -> Result<LogValue> {
    if r < 1 {
        return Err(invalid("r", "must be at least 1"));
    }
    let ln_pb = channel.snr_bar().ln();
    let ln_qb = channel.one_minus_snr_bar().ln();
    let terms: Vec<f64> = (0..r as u64)
        .map(|j| ln_binomial(t as u64 + j, j) + j as f64 * ln_pb)
        .collect();
    Ok(LogValue::from_ln((t as f64 + 1.0) * ln_qb + log_sum_exp(&terms)))
}

/// Decomposition of the refinement-boundary MSE into the part inherited from
/// the unit prior (`mse_I`, equal to [`closed_form_single`]) and the part
/// carried by the transmitter's residual error (`mse_II`):
/// `mse_II = P̄^r Σ_{s=0}^{t} e^{-2R(t-s+1)} C(r-1+s, s) (1-P̄)^s`.
pub fn closed_form_streaming(channel: &ChannelParams, rate_nats: f64, r: usize, t: usize) -> Result<(LogValue, LogValue)> {
    if !rate_nats.is_finite() || rate_nats < 0.0 {
        return Err(invalid("rate_nats", format!("must be finite and >= 0, got {rate_nats}")));
    }
    let mse_i = closed_form_single(channel, r, t)?;
    let ln_pb = channel.snr_bar().ln();
    let ln_qb = channel.one_minus_snr_bar().ln();
    let terms: Vec<f64> = (0..=t as u64)
        .map(|s| -2.0 * rate_nats * ((t as u64 - s) as f64 + 1.0) + ln_binomial(r as u64 - 1 + s, s) + s as f64 * ln_qb)
        .collect();
    let mse_ii = LogValue::from_ln(r as f64 * ln_pb + log_sum_exp(&terms));
    Ok((mse_i, mse_ii))
}

/// Time index at which relay `r` is examined for velocity `v`.
///
/// Instantaneous hops use `t = ⌊r/v⌋`. Delayed hops use `t = ⌊r/v̄⌋`, and the
/// delayed lattice at `(r, t)` equals the instantaneous one at `(r, t - r)`;
/// this returns the instantaneous-lattice index, `None` if it is negative.
pub fn lattice_time_at_velocity(v: Velocity, r: usize) -> Option<usize> {
    let rf = r as f64;
    match v.convention() {
        HopConvention::Instantaneous => Some((rf / v.value()).floor() as usize),
        HopConvention::Delayed => {
            let t = (rf / v.value()).floor();
            let shifted = t - rf;
            (shifted >= 0.0).then_some(shifted as usize)
        }
    }
}

/// `M_r(t)` at the time a velocity-`v` front reaches relay `r`, from a grid.
/// Under delayed hops a relay not yet reached has MSE 1.
pub fn mse_at_velocity(grid: &MseGrid, v: Velocity, r: usize) -> Result<f64> {
    if r < 1 {
        return Err(invalid("r", "must be at least 1"));
    }
    match lattice_time_at_velocity(v, r) {
        Some(t) => grid.get(r, t as i64),
        None => Ok(1.0),
    }
}

/// Single-sample `M_r(t)` at velocity `v` from the closed form.
pub fn mse_at_velocity_closed_form(channel: &ChannelParams, v: Velocity, r: usize) -> Result<LogValue> {
    match lattice_time_at_velocity(v, r) {
        Some(t) => closed_form_single(channel, r, t),
        None => Ok(LogValue::from_ln(0.0)),
    }
}
