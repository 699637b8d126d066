//! Randomized p-values for the binomial interval null.
//!
//! The testing problem is `H: theta <= theta1 or theta >= theta2` against
//! `K: theta1 < theta < theta2` for `T ~ Bin(n, theta)`. Two p-values are
//! provided:
//!
//! * the UMP p-value, the larger of two one-sided randomized p-values that
//!   share a single uniform randomizer `U`;
//! * the two-stage p-value, which keeps `p_ump / c` when the UMP p-value
//!   falls below the tuning constant `c` and replaces it by a fresh uniform
//!   draw otherwise.
//!
//! Both sampling distributions are available in closed form ([`ump_cdf`],
//! [`rand2_cdf`]) and are exact for every `n`, not just asymptotically; the
//! Monte Carlo harness checks them against brute-force enumeration.

use serde::Serialize;

use crate::binom::{self, BinomParams};
use crate::error::{Error, Result};

/// A binomial equivalence testing problem.
///
/// Invariants (enforced by [`EquivProblem::new`]): `n >= 1` and
/// `0 < theta1 < theta2 < 1`; `delta` is always `theta2 - theta1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivProblem {
    /// Number of Bernoulli trials.
    pub n: u64,
    /// Lower equivalence bound.
    pub theta1: f64,
    /// Upper equivalence bound.
    pub theta2: f64,
    /// Interval width `theta2 - theta1`.
    pub delta: f64,
}

impl EquivProblem {
    /// Validates and builds a testing problem.
    pub fn new(n: u64, theta1: f64, theta2: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("sample size n must be at least 1"));
        }
        if !theta1.is_finite()
            || !theta2.is_finite()
            || theta1 <= 0.0
            || theta2 >= 1.0
            || theta1 >= theta2
        {
            return Err(Error::BadBounds { theta1, theta2 });
        }
        Ok(EquivProblem {
            n,
            theta1,
            theta2,
            delta: theta2 - theta1,
        })
    }

    /// `Bin(n, theta1)`, the boundary distribution of the lower null.
    pub fn dist1(&self) -> BinomParams {
        BinomParams {
            n: self.n,
            theta: self.theta1,
        }
    }

    /// `Bin(n, theta2)`, the boundary distribution of the upper null.
    pub fn dist2(&self) -> BinomParams {
        BinomParams {
            n: self.n,
            theta: self.theta2,
        }
    }
}

/// Critical and randomization constants of the level-`level_t` UMP test.
///
/// The test rejects for `c_n < T < d_n`, and randomizes with probability
/// `gamma_n` at `T = c_n` and `delta_n` at `T = d_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsBundle {
    /// Test level the constants were computed for.
    pub level_t: f64,
    /// Lower critical constant, the `(1 - level_t)`-quantile of `Bin(n, theta1)`.
    pub c_n: u64,
    /// Upper critical constant, the `level_t`-quantile of `Bin(n, theta2)`.
    pub d_n: u64,
    /// Randomization probability at `c_n`.
    pub gamma_n: f64,
    /// Randomization probability at `d_n`.
    pub delta_n: f64,
    /// True iff a raw randomization constant fell outside `[0, 1]` and was
    /// clamped. Quantile minimality keeps the raw values inside the unit
    /// interval, so this flag surfaces numerical trouble, not a regime.
    pub clamped: bool,
}

/// One complete randomized p-value evaluation at an observed count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PValueDraw {
    /// Observed number of successes.
    pub s: u64,
    /// Uniform randomizer shared by both one-sided p-values.
    pub u: f64,
    /// Second-stage uniform randomizer.
    pub u_tilde: f64,
    /// Two-stage tuning constant.
    pub c: f64,
    /// One-sided p-value against `theta >= theta2`.
    pub p_lower: f64,
    /// One-sided p-value against `theta <= theta1`.
    pub p_upper: f64,
    /// UMP p-value, `max(p_lower, p_upper)`.
    pub p_ump: f64,
    /// Two-stage p-value.
    pub p_rand2: f64,
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() || !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfUnitRange {
            name,
            value,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// The pair of one-sided randomized p-values at the interval bounds.
///
/// Both use the same uniform draw `u`:
///
/// * `p_upper` tests `theta <= theta1` and equals
///   `survival(Bin(n, theta1), s) + u * pmf(Bin(n, theta1), s)`;
/// * `p_lower` tests `theta >= theta2` and equals
///   `cdf(Bin(n, theta2), s - 1) + u * pmf(Bin(n, theta2), s)`.
///
/// Returns `(p_lower, p_upper)`.
///
/// # Errors
/// Rejects `s > n` and `u` outside `[0, 1]`.
pub fn one_sided_pvalues(problem: &EquivProblem, s: u64, u: f64) -> Result<(f64, f64)> {
    if s > problem.n {
        return Err(Error::OutOfSupport { s, n: problem.n });
    }
    check_unit("u", u)?;
    let d1 = problem.dist1();
    let d2 = problem.dist2();
    let s = s as i64;
    let p_upper = binom::survival(&d1, s) + u * binom::pmf(&d1, s);
    let p_lower = binom::cdf(&d2, s - 1) + u * binom::pmf(&d2, s);
    Ok((p_lower.clamp(0.0, 1.0), p_upper.clamp(0.0, 1.0)))
}

/// The UMP p-value: the larger of the two one-sided p-values at `(s, u)`.
///
/// # Errors
/// Same domain as [`one_sided_pvalues`].
pub fn ump_pvalue(problem: &EquivProblem, s: u64, u: f64) -> Result<f64> {
    let (p_lower, p_upper) = one_sided_pvalues(problem, s, u)?;
    Ok(p_lower.max(p_upper))
}

/// Critical and randomization constants at level `level_t`.
///
/// # Errors
/// Rejects `level_t` outside the open interval `(0, 1)`.
pub fn constants(problem: &EquivProblem, level_t: f64) -> Result<ConstantsBundle> {
    if !level_t.is_finite() || level_t <= 0.0 || level_t >= 1.0 {
        return Err(Error::OutOfUnitRange {
            name: "level_t",
            value: level_t,
            range: "(0, 1)",
        });
    }
    let d1 = problem.dist1();
    let d2 = problem.dist2();
    let q1 = 1.0 - level_t;
    let c_n = binom::quantile(&d1, q1)?;
    let d_n = binom::quantile(&d2, level_t)?;
    let gamma_raw = (binom::cdf(&d1, c_n as i64) - q1) / binom::pmf(&d1, c_n as i64);
    let delta_raw = (level_t - binom::cdf(&d2, d_n as i64 - 1)) / binom::pmf(&d2, d_n as i64);
    let clamped = !(0.0..=1.0).contains(&gamma_raw) || !(0.0..=1.0).contains(&delta_raw);
    Ok(ConstantsBundle {
        level_t,
        c_n,
        d_n,
        gamma_n: gamma_raw.clamp(0.0, 1.0),
        delta_n: delta_raw.clamp(0.0, 1.0),
        clamped,
    })
}

/// Exact sampling distribution of the UMP p-value: `Pr_theta(P <= t)`.
///
/// The event `{P <= t}` is the rejection event of the level-`t` UMP test:
/// the open band `c_n < T < d_n` plus the randomized boundary masses. When
/// the two critical constants collide only the overlap of the two boundary
/// randomization intervals survives, and when they cross the event is empty;
/// both corners arise at small `n` or small `t` and the formula here stays
/// exact through them.
///
/// # Errors
/// Rejects `theta` outside `(0, 1)` and `t` outside `[0, 1]`.
pub fn ump_cdf(problem: &EquivProblem, theta: f64, t: f64) -> Result<f64> {
    let dist = BinomParams::new(problem.n, theta)?;
    check_unit("t", t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(1.0);
    }
    let k = constants(problem, t)?;
    let v = if k.c_n < k.d_n {
        let band = binom::cdf(&dist, k.d_n as i64 - 1) - binom::cdf(&dist, k.c_n as i64);
        band + k.gamma_n * binom::pmf(&dist, k.c_n as i64)
            + k.delta_n * binom::pmf(&dist, k.d_n as i64)
    } else if k.c_n == k.d_n {
        k.gamma_n.min(k.delta_n) * binom::pmf(&dist, k.c_n as i64)
    } else {
        0.0
    };
    Ok(v.clamp(0.0, 1.0))
}

/// The two-stage p-value.
///
/// Keeps `p_ump / c` when `p_ump < c`; otherwise replaces the p-value by the
/// fresh uniform draw `u_tilde`. `c = 0` always yields `u_tilde`, and `c = 1`
/// yields `p_ump` itself.
///
/// All three arguments must lie in `[0, 1]`.
pub fn rand2_pvalue(p_ump: f64, u_tilde: f64, c: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_ump));
    debug_assert!((0.0..=1.0).contains(&u_tilde));
    debug_assert!((0.0..=1.0).contains(&c));
    if c == 0.0 || p_ump >= c {
        u_tilde
    } else {
        p_ump / c
    }
}

/// Exact sampling distribution of the two-stage p-value: `Pr_theta(P <= t)`.
///
/// Evaluates `t * (1 - F_ump(c)) + F_ump(t * c)` where `F_ump` is
/// [`ump_cdf`]. For `c = 0` this degenerates to the uniform CDF `t`, and for
/// `c = 1` it reproduces `ump_cdf` bit for bit.
///
/// # Errors
/// Rejects `theta` outside `(0, 1)` and `t` or `c` outside `[0, 1]`.
pub fn rand2_cdf(problem: &EquivProblem, theta: f64, t: f64, c: f64) -> Result<f64> {
    check_unit("t", t)?;
    check_unit("c", c)?;
    if t == 0.0 {
        // Still validate theta so the domain does not depend on t.
        BinomParams::new(problem.n, theta)?;
        return Ok(0.0);
    }
    if t == 1.0 {
        BinomParams::new(problem.n, theta)?;
        return Ok(1.0);
    }
    if c == 0.0 {
        BinomParams::new(problem.n, theta)?;
        return Ok(t);
    }
    let at_c = ump_cdf(problem, theta, c)?;
    let at_tc = ump_cdf(problem, theta, t * c)?;
    Ok((t * (1.0 - at_c) + at_tc).clamp(0.0, 1.0))
}

/// Evaluates every p-value of one draw in a single call.
///
/// # Errors
/// Same domains as the individual operations.
pub fn draw_pvalues(problem: &EquivProblem, s: u64, u: f64, u_tilde: f64, c: f64) -> Result<PValueDraw> {
    check_unit("u_tilde", u_tilde)?;
    check_unit("c", c)?;
    let (p_lower, p_upper) = one_sided_pvalues(problem, s, u)?;
    let p_ump = p_lower.max(p_upper);
    let p_rand2 = rand2_pvalue(p_ump, u_tilde, c);
    Ok(PValueDraw {
        s,
        u,
        u_tilde,
        c,
        p_lower,
        p_upper,
        p_ump,
        p_rand2,
    })
}
