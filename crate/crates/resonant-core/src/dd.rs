//! Minimal double-double arithmetic used to refine Rayleigh quotients.
//!
//! Eigenvalues returned by the dense QR solver carry an absolute error of
//! order `eps * ||A||`. Gap parameters are differences of the smallest
//! eigenvalues, which can be orders of magnitude below the operator norm, so
//! a compensated Rayleigh quotient pass recovers them to near full precision.

/// Error-free sum: returns (hi, lo) with hi + lo == a + b exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Error-free product via FMA: returns (hi, lo) with hi + lo == a * b exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

/// Unevaluated sum of two doubles, |lo| <= ulp(hi)/2.
#[derive(Clone, Copy, Debug, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_prod(self, a: f64, b: f64) -> Dd {
        let (p, e) = two_prod(a, b);
        self.add(Dd { hi: p, lo: e })
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// Compensated dot product of two slices.
pub fn dot(a: &[f64], b: &[f64]) -> Dd {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Dd::ZERO;
    for i in 0..a.len() {
        acc = acc.add_prod(a[i], b[i]);
    }
    acc
}

/// Rayleigh quotient vᵀAv / vᵀv of a dense symmetric matrix, computed with
/// double-double accumulation throughout. `a` is column-major, n x n.
pub fn rayleigh_quotient(a: &[f64], n: usize, v: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(v.len(), n);
    // num = Σ_j v_j * (Σ_i a[i + j n] v_i), accumulated without rounding the
    // inner products to f64 first.
    let mut num = Dd::ZERO;
    for j in 0..n {
        let col = &a[j * n..(j + 1) * n];
        let av_j = dot(col, v);
        // num += v_j * av_j
        num = num.add_prod(v[j], av_j.hi);
        num = num.add_prod(v[j], av_j.lo);
    }
    let den = dot(v, v);
    num.to_f64() / den.to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_is_exact_on_cancelling_sum() {
        // 1e16 + 1 - 1e16 loses the 1 in plain f64 summation order dependent;
        // dd keeps it.
        let a = [1e16, 1.0, -1e16];
        let b = [1.0, 1.0, 1.0];
        assert_eq!(dot(&a, &b).to_f64(), 1.0);
    }

    #[test]
    fn rayleigh_quotient_diagonal() {
        // A = diag(2, 5), v = e2 -> RQ = 5 exactly.
        let a = [2.0, 0.0, 0.0, 5.0];
        let v = [0.0, 1.0];
        assert_eq!(rayleigh_quotient(&a, 2, &v), 5.0);
    }
}
