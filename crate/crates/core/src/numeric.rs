//! Small numerical kernels shared across modules.

use statrs::function::factorial;

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    factorial::ln_binomial(n, k)
}

/// `ln(e^a + e^b)`, with `-inf` as the additive identity.
pub fn ln_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Max-shifted `ln Σ exp(x_i)`; `-inf` for an empty or all-zero sum.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut acc = NeumaierSum::default();
    for &x in terms {
        acc.add((x - hi).exp());
    }
    hi + acc.value().ln()
}

/// A value carried both linearly and as its natural log, so quantities far
/// below the smallest normal double can still be compared.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    ln: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { ln: f64::NEG_INFINITY };

    pub fn from_ln(ln: f64) -> Self {
        Self { ln }
    }

    pub fn from_linear(x: f64) -> Self {
        debug_assert!(x >= 0.0);
        Self { ln: x.ln() }
    }

    pub fn ln(&self) -> f64 {
        self.ln
    }

    /// Linear value; may underflow to 0.
    pub fn linear(&self) -> f64 {
        self.ln.exp()
    }

    pub fn add(self, other: LogValue) -> LogValue {
        LogValue::from_ln(ln_add_exp(self.ln, other.ln))
    }
}

/// Relative discrepancy `|a - b| / max(|a|, |b|)` evaluated in the log domain:
/// `|expm1(ln a - ln b)|` with the larger value as reference.
pub fn log_rel_diff(a: LogValue, b: LogValue) -> f64 {
    if a.ln == b.ln {
        return 0.0;
    }
    if a.ln == f64::NEG_INFINITY || b.ln == f64::NEG_INFINITY {
        return 1.0;
    }
    let d = (a.ln - b.ln).abs();
    -(-d).exp_m1()
}

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..400 {
        if (b - a).abs() <= tol * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (mut x, mut fx) = if fc <= fd { (c, fc) } else { (d, fd) };
    for end in [a, b] {
        let fe = f(end);
        if fe < fx {
            x = end;
            fx = fe;
        }
    }
    (x, fx)
}

/// Bisection root of a continuous `f` with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol * (1.0 + mid.abs()) || mid == lo || mid == hi {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Formats a float with the shortest round-trip scientific representation.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_values() {
        assert!((ln_binomial(10, 3).exp() - 120.0).abs() < 1e-10);
        assert_eq!(ln_binomial(7, 0), 0.0);
        assert_eq!(ln_binomial(3, 5), f64::NEG_INFINITY);
        // C(400, 200) ~ 1.03e119
        let direct: f64 = (1..=200u64).map(|i| ((200 + i) as f64 / i as f64).ln()).sum();
        assert!((ln_binomial(400, 200) - direct).abs() < 1e-10);
    }

    #[test]
    fn lse_matches_naive() {
        let xs = [-1.0, 0.5, 2.0];
        let naive: f64 = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(&xs) - naive).abs() < 1e-14);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((ln_add_exp(f64::NEG_INFINITY, -3.0) + 3.0).abs() < 1e-15);
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let mut s = NeumaierSum::default();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn golden_section_quadratic() {
        let (x, fx) = golden_section_min(|x| (x - 1.3).powi(2) + 2.0, -5.0, 5.0, 1e-12);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisect_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-15);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn log_rel_diff_below_underflow() {
        let a = LogValue::from_ln(-1000.0);
        let b = LogValue::from_ln(-1000.0 + 1e-12);
        assert!(log_rel_diff(a, b) < 2e-12);
        assert_eq!(a.linear(), 0.0);
    }
}
