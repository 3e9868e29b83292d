//! Power-normalization and LMMSE gains from a solved MSE lattice.
//!
//! Hop `r` carries `X_r(t) = β_r(t)[Ŝ_r(t) - Ŝ_{r+1}(t-1)]` and node `r+1`
//! updates with `γ_{r+1}(t) Y_r(t)`. Both depend on the innovation variance
//! `D_r(t) = M_{r+1}(t-1) - M_r(t)`:
//! `β = √(P/D)` and `γ = √(P D)/(P+1)`, so `βγ = P̄`.

use crate::error::{Error, Result};
use crate::lattice::MseGrid;

/// Innovation variances at or below this make the hop silent.
pub const DEGENERATE_DIFF: f64 = 1e-300;

/// Negative innovation variances beyond this indicate a corrupted grid.
pub const CORRUPTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    hops: usize,
    max_time: usize,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    active: Vec<bool>,
    clamp_count: usize,
    silent_count: usize,
}

pub fn precompute_gains(grid: &MseGrid) -> Result<GainTable> {
    let snr = grid.channel().snr();
    let hops = grid.max_relay();
    let max_time = grid.max_time();
    let cells = hops * (max_time + 1);
    let mut beta = vec![0.0; cells];
    let mut gamma = vec![0.0; cells];
    let mut active = vec![false; cells];
    let mut clamp_count = 0;
    let mut silent_count = 0;

    for r in 0..hops {
        for t in 0..=max_time {
            let diff = grid.at(r + 1, t as i64 - 1) - grid.at(r, t as i64);
            if diff < -CORRUPTION_TOL {
                return Err(Error::CorruptedGrid {
                    relay: r,
                    next: r + 1,
                    time: t,
                    prev_time: t as i64 - 1,
                    diff,
                });
            }
            let i = r * (max_time + 1) + t;
            if diff <= DEGENERATE_DIFF {
                silent_count += 1;
                continue;
            }
            let mut b = (snr / diff).sqrt();
            // keep the expected power β²D at or below P despite rounding
            while b * b * diff > snr {
                b = b.next_down();
                clamp_count += 1;
            }
            beta[i] = b;
            gamma[i] = (snr * diff).sqrt() / (snr + 1.0);
            active[i] = true;
        }
    }
    Ok(GainTable {
        hops,
        max_time,
        beta,
        gamma,
        active,
        clamp_count,
        silent_count,
    })
}

impl GainTable {
    pub fn hops(&self) -> usize {
        self.hops
    }

    pub fn max_time(&self) -> usize {
        self.max_time
    }

    #[inline]
    fn idx(&self, r: usize, t: usize) -> usize {
        r * (self.max_time + 1) + t
    }

    /// `β_r(t)` of hop `r`; 0 on silent hops.
    #[inline]
    pub fn beta(&self, r: usize, t: usize) -> f64 {
        self.beta[self.idx(r, t)]
    }

    /// `γ_{r+1}(t)` applied by the receiver of hop `r`; 0 on silent hops.
    #[inline]
    pub fn gamma(&self, r: usize, t: usize) -> f64 {
        self.gamma[self.idx(r, t)]
    }

    #[inline]
    pub fn is_active(&self, r: usize, t: usize) -> bool {
        self.active[self.idx(r, t)]
    }

    /// Number of single-ulp reductions applied to `β` to respect the power limit.
    pub fn clamp_count(&self) -> usize {
        self.clamp_count
    }

    pub fn silent_count(&self) -> usize {
        self.silent_count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::make_channel_params;
    use crate::lattice::{solve_grid, BoundaryCondition};

    #[test]
    fn first_use_is_amplify_and_forward() {
        let ch = make_channel_params(10.0).unwrap();
        let g = solve_grid(&ch, BoundaryCondition::SingleSample, 3, 5).unwrap();
        let gains = precompute_gains(&g).unwrap();
        assert!((gains.beta(0, 0) - 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn product_is_snr_bar() {
        for snr in [0.1, 1.0, 10.0, 100.0] {
            let ch = make_channel_params(snr).unwrap();
            for b in [
                BoundaryCondition::SingleSample,
                BoundaryCondition::ExponentialRefinement { rate_nats: 0.4 },
                BoundaryCondition::PacketStream { packet_bits: 2, period: 3 },
            ] {
                let g = solve_grid(&ch, b, 6, 30).unwrap();
                let gains = precompute_gains(&g).unwrap();
                for r in 0..6 {
                    for t in 0..=30 {
                        if gains.is_active(r, t) {
                            let prod = gains.beta(r, t) * gains.gamma(r, t);
                            assert!((prod - ch.snr_bar()).abs() < 1e-12, "P={snr} r={r} t={t}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn gains_from_grid_values() {
        let ch = make_channel_params(10.0).unwrap();
        let g = solve_grid(&ch, BoundaryCondition::SingleSample, 2, 2).unwrap();
        let gains = precompute_gains(&g).unwrap();
        let diff = g.get(2, 0).unwrap() - g.get(1, 1).unwrap();
        assert!((gains.beta(1, 1) - (10.0 / diff).sqrt()).abs() < 1e-9 * gains.beta(1, 1));
        assert!((gains.gamma(1, 1) - (10.0 * diff).sqrt() / 11.0).abs() < 1e-15);
    }

    #[test]
    fn underflowed_cells_are_silent() {
        // at P = 1e6 the first row underflows quickly
        let ch = make_channel_params(1e6).unwrap();
        let g = solve_grid(&ch, BoundaryCondition::SingleSample, 2, 200).unwrap();
        let gains = precompute_gains(&g).unwrap();
        assert!(gains.silent_count() > 0);
        assert!(!gains.is_active(0, 150));
        assert_eq!(gains.beta(0, 150), 0.0);
    }
}
