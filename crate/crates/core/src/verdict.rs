//! Pass/fail outcomes of theory-vs-simulation checks.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::numeric::fmt_f64;

/// Family-wise false-alarm probability of a statistical verdict; the
/// two-sided 3σ level of a single Gaussian test.
pub const FAMILY_ALPHA: f64 = 0.0027;

/// One-sided slack, in binomial standard errors, allowed when comparing an
/// empirical error probability with an upper bound.
pub const BOUND_SIGMAS: f64 = 3.0;

/// Outcome of one family of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub checks: usize,
    /// Largest admissible statistic.
    pub threshold: f64,
    /// Largest observed statistic.
    pub worst: f64,
    pub worst_at: String,
    /// Checks beyond 3 standard errors, before any family-wise adjustment.
    pub exceed_3sigma: usize,
    pub passed: bool,
}

impl Verdict {
    /// A deterministic check passing when `worst <= limit`.
    pub fn tolerance(name: impl Into<String>, checks: usize, worst: f64, worst_at: impl Into<String>, limit: f64) -> Self {
        Verdict {
            name: name.into(),
            checks,
            threshold: limit,
            worst,
            worst_at: worst_at.into(),
            exceed_3sigma: 0,
            passed: worst <= limit,
        }
    }

    /// A yes/no check.
    pub fn flag(name: impl Into<String>, checks: usize, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            checks,
            threshold: 0.0,
            worst: if passed { 0.0 } else { 1.0 },
            worst_at: detail.into(),
            exceed_3sigma: 0,
            passed,
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {}: {} checks, worst {} at {} (limit {}), {} beyond 3 standard errors",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            fmt_f64(self.worst),
            if self.worst_at.is_empty() { "-" } else { &self.worst_at },
            fmt_f64(self.threshold),
            self.exceed_3sigma
        )
    }
}

/// Writes `check,passed,checks,worst,limit,worst_at,exceed_3sigma`.
pub fn write_verdicts_csv<W: Write>(verdicts: &[Verdict], mut w: W) -> std::io::Result<()> {
    writeln!(w, "check,passed,checks,worst,limit,worst_at,exceed_3sigma")?;
    for v in verdicts {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            v.name,
            v.passed,
            v.checks,
            fmt_f64(v.worst),
            fmt_f64(v.threshold),
            v.worst_at,
            v.exceed_3sigma
        )?;
    }
    Ok(())
}

/// Two-sided z threshold holding the family-wise false-alarm probability at
/// [`FAMILY_ALPHA`] over `checks` independent tests (Šidák correction).
pub fn family_threshold(checks: usize) -> f64 {
    let k = checks.max(1) as f64;
    let per_test = -((-FAMILY_ALPHA).ln_1p() / k).exp_m1();
    Normal::standard().inverse_cdf(1.0 - per_test / 2.0)
}

/// Collects two-sided z statistics of empirical means for one family.
#[derive(Debug, Clone)]
pub struct FamilyCheck {
    name: String,
    checks: usize,
    worst: f64,
    worst_at: String,
    exceed: usize,
}

impl FamilyCheck {
    pub fn new(name: impl Into<String>) -> Self {
        FamilyCheck {
            name: name.into(),
            checks: 0,
            worst: 0.0,
            worst_at: String::new(),
            exceed: 0,
        }
    }

    /// Adds one check of an empirical mean against its expected value.
    /// Deterministic cells (zero standard error) must match to 1e-12.
    pub fn push(&mut self, label: String, mean: f64, expected: f64, stderr: f64) {
        let diff = (mean - expected).abs();
        let z = if stderr > 0.0 {
            diff / stderr
        } else if diff <= 1e-12 * expected.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY
        };
        let z = if z.is_nan() { f64::INFINITY } else { z };
        self.checks += 1;
        if z > 3.0 {
            self.exceed += 1;
        }
        if z > self.worst || self.worst_at.is_empty() {
            self.worst = z;
            self.worst_at = label;
        }
    }

    pub fn finish(self) -> Verdict {
        let threshold = family_threshold(self.checks);
        Verdict {
            passed: self.worst <= threshold,
            name: self.name,
            checks: self.checks,
            threshold,
            worst: self.worst,
            worst_at: self.worst_at,
            exceed_3sigma: self.exceed,
        }
    }
}

/// Collects one-sided comparisons of empirical error probabilities with
/// upper bounds. A point passes when `p̂ <= b + 3√(b(1-b)/n)`; bounds at or
/// above 1 are vacuous and skipped.
#[derive(Debug, Clone)]
pub struct BoundCheck {
    name: String,
    checks: usize,
    worst: f64,
    worst_at: String,
}

impl BoundCheck {
    pub fn new(name: impl Into<String>) -> Self {
        BoundCheck {
            name: name.into(),
            checks: 0,
            worst: f64::NEG_INFINITY,
            worst_at: String::new(),
        }
    }

    /// Adds one point; returns whether it was checked.
    pub fn push(&mut self, label: String, errors: u64, trials: u64, bound: f64) -> bool {
        if !(bound < 1.0) || trials == 0 {
            return false;
        }
        let p = errors as f64 / trials as f64;
        let b = bound.max(0.0);
        let sd = (b * (1.0 - b) / trials as f64).sqrt();
        let z = if sd > 0.0 {
            (p - b) / sd
        } else if p <= b {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
        self.checks += 1;
        if z > self.worst || self.worst_at.is_empty() {
            self.worst = z;
            self.worst_at = label;
        }
        true
    }

    pub fn finish(self) -> Verdict {
        let worst = if self.checks == 0 { 0.0 } else { self.worst };
        Verdict {
            name: self.name,
            checks: self.checks,
            threshold: BOUND_SIGMAS,
            worst,
            worst_at: self.worst_at,
            exceed_3sigma: usize::from(worst > BOUND_SIGMAS),
            passed: worst <= BOUND_SIGMAS,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidak_threshold() {
        assert!((family_threshold(1) - 3.0).abs() < 1e-4);
        assert!(family_threshold(100) > 4.0);
        assert!(family_threshold(100) < 4.5);
    }

    #[test]
    fn family_flags_outliers() {
        let mut f = FamilyCheck::new("x");
        f.push("a".into(), 1.0, 1.0, 0.1);
        f.push("b".into(), 1.5, 1.0, 0.1);
        let v = f.finish();
        assert!(!v.passed);
        assert_eq!(v.worst_at, "b");
        assert_eq!(v.exceed_3sigma, 1);
    }

    #[test]
    fn deterministic_cells_need_exact_match() {
        let mut f = FamilyCheck::new("x");
        f.push("a".into(), 0.0, 0.0, 0.0);
        assert!(f.clone().finish().passed);
        f.push("b".into(), 1e-9, 0.0, 0.0);
        assert!(!f.finish().passed);
    }

    #[test]
    fn bound_check_allows_binomial_slack() {
        let mut c = BoundCheck::new("b");
        // bound 0.01 at n = 1e4: sd = 1e-3, so 130 errors is exactly 3 sd over
        assert!(c.push("a".into(), 129, 10_000, 0.01));
        assert!(c.clone().finish().passed);
        assert!(!c.push("vacuous".into(), 10_000, 10_000, 1.5));
        c.push("c".into(), 140, 10_000, 0.01);
        assert!(!c.finish().passed);
        let mut z = BoundCheck::new("z");
        z.push("zero".into(), 0, 100, 0.0);
        assert!(z.clone().finish().passed);
        z.push("zero".into(), 1, 100, 0.0);
        assert!(!z.finish().passed);
    }
}
