//! Exact binomial kernel: pmf, cdf, survival and quantile.
//!
//! Everything is computed with multiplicative recurrences on an
//! exponent-tracked float rather than through logarithms. Tail sums always
//! accumulate the smaller tail with positive terms and take complements for
//! the larger one, so results keep high relative accuracy near the mode and
//! high absolute accuracy deep in the tails. All paths are deterministic
//! sequences of IEEE-754 operations: the same inputs give bit-identical
//! outputs on every platform and thread.

use crate::error::{Error, Result};

/// Parameters of a binomial distribution `Bin(n, theta)`.
///
/// Invariants (enforced by [`BinomParams::new`]): `n >= 1` and
/// `0 < theta < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomParams {
    /// Number of trials.
    pub n: u64,
    /// Success probability.
    pub theta: f64,
}

impl BinomParams {
    /// Validates and builds binomial parameters.
    pub fn new(n: u64, theta: f64) -> Result<Self> {
        if n == 0 || !theta.is_finite() || theta <= 0.0 || theta >= 1.0 {
            return Err(Error::BadDistribution { n, theta });
        }
        Ok(BinomParams { n, theta })
    }
}

/// Probability mass function `P(T = x)` for `T ~ Bin(n, theta)`.
///
/// # Parameters
/// * `params` — distribution parameters.
/// * `x` — evaluation point; any value outside `0..=n` has mass zero.
pub fn pmf(params: &BinomParams, x: i64) -> f64 {
    if x < 0 || x as u64 > params.n {
        return 0.0;
    }
    pmf_scaled(params, x as u64).to_f64()
}

/// Cumulative distribution function `P(T <= x)`.
///
/// Returns 0 below the support and 1 at or above `n`. The smaller tail is
/// summed directly; the other side is obtained by complement, so the result
/// never suffers cancellation worse than one ulp of the larger tail.
pub fn cdf(params: &BinomParams, x: i64) -> f64 {
    if x < 0 {
        return 0.0;
    }
    if x as u64 >= params.n {
        return 1.0;
    }
    let x = x as u64;
    if lower_is_smaller(params, x) {
        lower_tail(params, x)
    } else {
        1.0 - upper_tail(params, x)
    }
}

/// Survival function `P(T > x)`, the exact complement of [`cdf`].
pub fn survival(params: &BinomParams, x: i64) -> f64 {
    if x < 0 {
        return 1.0;
    }
    if x as u64 >= params.n {
        return 0.0;
    }
    let x = x as u64;
    if lower_is_smaller(params, x) {
        1.0 - lower_tail(params, x)
    } else {
        upper_tail(params, x)
    }
}

/// Generalized inverse cdf: the smallest `x` with `cdf(x) >= q`.
///
/// Satisfies the adjunction `quantile(q) <= x` iff `q <= cdf(x)` for every
/// `x` in `0..=n` and `q` in `[0, 1]`.
///
/// # Errors
/// Rejects `q` outside `[0, 1]` or non-finite.
pub fn quantile(params: &BinomParams, q: f64) -> Result<u64> {
    if !q.is_finite() || !(0.0..=1.0).contains(&q) {
        return Err(Error::OutOfUnitRange {
            name: "q",
            value: q,
            range: "[0, 1]",
        });
    }
    // Bisection over the support; cdf(n) == 1 keeps the upper invariant.
    let mut lo = 0u64;
    let mut hi = params.n;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if cdf(params, mid as i64) >= q {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

// ===== exponent-tracked arithmetic =====

/// A non-negative float stored as `mantissa * 2^exp2` with `mantissa` in
/// `[1, 2)` (or exactly zero). Long products of per-trial factors stay far
/// from underflow without ever taking a logarithm.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    mantissa: f64,
    exp2: i64,
}

const MANTISSA_MASK: u64 = 0x000f_ffff_ffff_ffff;
const EXP_ONE_BITS: u64 = 1023u64 << 52;

impl Scaled {
    const ZERO: Scaled = Scaled {
        mantissa: 0.0,
        exp2: 0,
    };
    const ONE: Scaled = Scaled {
        mantissa: 1.0,
        exp2: 0,
    };

    /// Decomposes a finite non-negative `x` into mantissa and exponent.
    fn from_f64(x: f64) -> Scaled {
        debug_assert!(x.is_finite() && x >= 0.0);
        if x == 0.0 {
            return Scaled::ZERO;
        }
        // Lift subnormals into the normal range first; the scale is a power
        // of two, hence exact.
        let (x, pre) = if x < f64::MIN_POSITIVE {
            (x * pow2(64), -64i64)
        } else {
            (x, 0)
        };
        let bits = x.to_bits();
        let exp2 = ((bits >> 52) & 0x7ff) as i64 - 1023 + pre;
        let mantissa = f64::from_bits((bits & MANTISSA_MASK) | EXP_ONE_BITS);
        Scaled { mantissa, exp2 }
    }

    /// Multiplies by a plain positive factor and renormalizes.
    fn mul(self, factor: f64) -> Scaled {
        debug_assert!(factor.is_finite() && factor >= 0.0);
        if self.mantissa == 0.0 || factor == 0.0 {
            return Scaled::ZERO;
        }
        if factor < pow2(-512) {
            // Keep the intermediate product normal; the lift is exact.
            let mut out = self.mul(factor * pow2(512));
            out.exp2 -= 512;
            return out;
        }
        let mut out = Scaled::from_f64(self.mantissa * factor);
        out.exp2 += self.exp2;
        out
    }

    fn mul_scaled(self, other: Scaled) -> Scaled {
        if self.mantissa == 0.0 || other.mantissa == 0.0 {
            return Scaled::ZERO;
        }
        let mut out = Scaled::from_f64(self.mantissa * other.mantissa);
        out.exp2 += self.exp2 + other.exp2;
        out
    }

    /// Collapses back to `f64`, rounding to zero or saturating on the way
    /// out if the exponent left the representable range.
    fn to_f64(self) -> f64 {
        if self.mantissa == 0.0 {
            return 0.0;
        }
        match self.exp2 {
            e if e > 1023 => f64::INFINITY,
            e if e >= -1022 => self.mantissa * pow2(e),
            e if e >= -2044 => self.mantissa * pow2(-1022) * pow2(e + 1022),
            _ => 0.0,
        }
    }
}

/// Exact power of two for exponents in `[-1022, 1023]`.
fn pow2(e: i64) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// `base^k` for `base` in `(0, 1]` by binary exponentiation on [`Scaled`].
fn pow_scaled(base: f64, mut k: u64) -> Scaled {
    debug_assert!(base > 0.0 && base <= 1.0);
    let mut acc = Scaled::ONE;
    if k == 0 {
        return acc;
    }
    let mut b = Scaled::from_f64(base);
    loop {
        if k & 1 == 1 {
            acc = acc.mul_scaled(b);
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        b = b.mul_scaled(b);
    }
    acc
}

/// Mass function on the scaled representation, for `x` in `0..=n`.
///
/// The binomial coefficient is accumulated over its smaller side
/// (`C(n, x) == C(n, n - x)`) with one success/failure factor folded into
/// every step, and the leftover pure power is applied at the end.
fn pmf_scaled(params: &BinomParams, x: u64) -> Scaled {
    let n = params.n;
    let theta = params.theta;
    let (k, step_p, rem_p) = match x.cmp(&(n - x)) {
        std::cmp::Ordering::Less => (x, theta, 1.0 - theta),
        std::cmp::Ordering::Greater => (n - x, 1.0 - theta, theta),
        // At x = n - x the two sides are mirror images of each other, so
        // pick the factor roles by value: the mirrored evaluation
        // (theta <-> 1 - theta, x <-> n - x) then multiplies the identical
        // sequence and lands on identical bits.
        std::cmp::Ordering::Equal => {
            let q = 1.0 - theta;
            (x, theta.min(q), theta.max(q))
        }
    };
    let mut acc = Scaled::ONE;
    for i in 1..=k {
        let ratio = (n - k + i) as f64 / i as f64;
        acc = acc.mul(ratio * step_p);
    }
    acc.mul_scaled(pow_scaled(rem_p, n - k))
}

/// True when the lower tail at `x` carries less mass than the upper one.
fn lower_is_smaller(params: &BinomParams, x: u64) -> bool {
    (x as f64) < params.n as f64 * params.theta
}

// Relative weight below which further tail terms cannot move the sum.
const TAIL_EPS: f64 = 1e-19;

/// `P(T <= x)` summed term by term, for `x` below the mean.
///
/// Anchored at `pmf(x)` and extended downward with the exact pmf ratio
/// `f(j-1)/f(j) = j (1-theta) / ((n-j+1) theta)`; every ratio is < 1 on this
/// side of the mode, so the running product only decays.
fn lower_tail(params: &BinomParams, x: u64) -> f64 {
    let n = params.n as f64;
    let theta = params.theta;
    let q = 1.0 - theta;
    let mut acc = 1.0f64;
    let mut prod = 1.0f64;
    let mut j = x;
    while j >= 1 {
        let ratio = (j as f64 * q) / ((n - j as f64 + 1.0) * theta);
        prod *= ratio;
        acc += prod;
        if prod < acc * TAIL_EPS {
            break;
        }
        j -= 1;
    }
    pmf_scaled(params, x).mul(acc).to_f64()
}

/// `P(T > x)` summed term by term, for `x` at or above the mean.
///
/// Anchored at `pmf(x+1)` and extended upward with the exact pmf ratio
/// `f(j+1)/f(j) = (n-j) theta / ((j+1)(1-theta))`, again strictly decaying.
fn upper_tail(params: &BinomParams, x: u64) -> f64 {
    let n = params.n as f64;
    let theta = params.theta;
    let q = 1.0 - theta;
    let start = x + 1;
    let mut acc = 1.0f64;
    let mut prod = 1.0f64;
    let mut j = start;
    while j < params.n {
        let ratio = ((n - j as f64) * theta) / ((j as f64 + 1.0) * q);
        prod *= ratio;
        acc += prod;
        if prod < acc * TAIL_EPS {
            break;
        }
        j += 1;
    }
    pmf_scaled(params, start).mul(acc).to_f64()
}
