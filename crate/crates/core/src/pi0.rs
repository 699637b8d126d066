//! Estimation of the number of true null hypotheses and the adaptive
//! Bonferroni correction built on it.
//!
//! The estimator is the line method: connect `(lambda, ecdf(lambda))` with
//! `(1, 1)`; the slope of that line estimates the fraction of true nulls,
//! `k0_hat = k * (1 - ecdf(lambda)) / (1 - lambda)`. The estimate stays
//! uncapped by default so that strongly conservative p-values are visible
//! as `k0_hat > k`.

use serde::Serialize;

use crate::binom::BinomParams;
use crate::error::{Error, Result};
use crate::exec;
use crate::pvalue::EquivProblem;
use crate::series::{CurveSeries, SeriesMeta};

/// One hypothesis of a simulated family: a ground-truth rate plus the
/// interval bounds it is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisConfig {
    /// Per-hypothesis sample size.
    pub n: u64,
    /// Ground-truth success probability the data are drawn from.
    pub theta_true: f64,
    /// Lower equivalence bound.
    pub theta1: f64,
    /// Upper equivalence bound.
    pub theta2: f64,
}

impl HypothesisConfig {
    /// The null is true when the ground truth sits outside the open
    /// interval `(theta1, theta2)`.
    pub fn null_is_true(&self) -> bool {
        self.theta_true <= self.theta1 || self.theta_true >= self.theta2
    }

    /// The testing problem this hypothesis is scored against.
    pub fn problem(&self) -> Result<EquivProblem> {
        EquivProblem::new(self.n, self.theta1, self.theta2)
    }
}

/// A family of binomial hypotheses with its ground-truth classification.
///
/// Construction validates every member, classifies each against its bounds
/// and freezes `k0`, so the counts can never drift out of sync with the
/// configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisFamily {
    configs: Vec<HypothesisConfig>,
    truth_mask: Vec<bool>,
    k0: usize,
}

impl HypothesisFamily {
    pub fn new(configs: Vec<HypothesisConfig>) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::Empty {
                what: "hypothesis family",
            });
        }
        for cfg in &configs {
            cfg.problem()?;
            BinomParams::new(cfg.n, cfg.theta_true)?;
        }
        let truth_mask: Vec<bool> = configs.iter().map(HypothesisConfig::null_is_true).collect();
        let k0 = truth_mask.iter().filter(|&&b| b).count();
        Ok(HypothesisFamily {
            configs,
            truth_mask,
            k0,
        })
    }

    /// Number of hypotheses.
    pub fn k(&self) -> usize {
        self.configs.len()
    }

    /// Number of true nulls.
    pub fn k0(&self) -> usize {
        self.k0
    }

    /// Per-hypothesis truth indicator (`true` means the null holds).
    pub fn truth_mask(&self) -> &[bool] {
        &self.truth_mask
    }

    pub fn configs(&self) -> &[HypothesisConfig] {
        &self.configs
    }
}

/// The line-method estimate of the number of true nulls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pi0Estimate {
    /// Tuning parameter the estimate was evaluated at.
    pub lambda: f64,
    /// Family size.
    pub k: usize,
    /// Empirical CDF of the p-values at `lambda`.
    pub ecdf_at_lambda: f64,
    /// Estimated count of true nulls; may exceed `k` unless capped.
    pub k0_hat: f64,
    /// Estimated proportion of true nulls, `k0_hat / k`.
    pub pi0_hat: f64,
    /// Y-intercept of the line through `(lambda, ecdf)` and `(1, 1)`;
    /// always exactly `1 - pi0_hat`.
    pub intercept: f64,
    /// True iff the raw estimate exceeded `k` and capping was requested.
    pub capped: bool,
}

fn validate_pvalues(pvalues: &[f64]) -> Result<()> {
    if pvalues.is_empty() {
        return Err(Error::Empty {
            what: "p-value list",
        });
    }
    for &p in pvalues {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfUnitRange {
                name: "p-value",
                value: p,
                range: "[0, 1]",
            });
        }
    }
    Ok(())
}

/// Empirical CDF: the fraction of p-values at or below `t`.
///
/// # Errors
/// Rejects an empty list, entries outside `[0, 1]`, and `t` outside `[0, 1]`.
pub fn ecdf(pvalues: &[f64], t: f64) -> Result<f64> {
    validate_pvalues(pvalues)?;
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfUnitRange {
            name: "t",
            value: t,
            range: "[0, 1]",
        });
    }
    let count = pvalues.iter().filter(|&&p| p <= t).count();
    Ok(count as f64 / pvalues.len() as f64)
}

/// Line-method estimate of the number of true nulls at tuning `lambda`.
///
/// With `cap_at_k` the estimate is truncated at the family size `k`; the
/// default reporting convention everywhere in this crate is uncapped.
///
/// The slope is computed first and `k0_hat = k * slope` second, so the
/// algebraic identity `k0_hat * (1 - lambda) = k * (1 - ecdf)` holds exactly
/// whenever `1 - lambda` is a power of two (in particular at the default
/// `lambda = 0.5`) and to a couple of ulps otherwise.
///
/// # Errors
/// Rejects `lambda` outside `[0, 1)` and invalid p-value lists.
pub fn schweder_k0(pvalues: &[f64], lambda: f64, cap_at_k: bool) -> Result<Pi0Estimate> {
    if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
        return Err(Error::OutOfUnitRange {
            name: "lambda",
            value: lambda,
            range: "[0, 1)",
        });
    }
    let ecdf_at_lambda = ecdf(pvalues, lambda)?;
    let k = pvalues.len();
    let slope = (1.0 - ecdf_at_lambda) / (1.0 - lambda);
    let mut k0_hat = k as f64 * slope;
    let mut capped = false;
    if cap_at_k && k0_hat > k as f64 {
        k0_hat = k as f64;
        capped = true;
    }
    let pi0_hat = k0_hat / k as f64;
    Ok(Pi0Estimate {
        lambda,
        k,
        ecdf_at_lambda,
        k0_hat,
        pi0_hat,
        intercept: 1.0 - pi0_hat,
        capped,
    })
}

/// Rejection decision of the adaptive Bonferroni plug-in procedure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveRejections {
    /// Per-test threshold `alpha / max(1, k0_hat)`.
    pub threshold: f64,
    /// `reject[i]` iff `pvalues[i] <= threshold`.
    pub reject: Vec<bool>,
}

/// Adaptive Bonferroni: test each hypothesis at level `alpha / max(1, k0_hat)`.
///
/// Domain: `alpha` in `[0, 1)` and `k0_hat` non-negative; with `k0_hat <= 1`
/// (including 0) the procedure degenerates to per-test level `alpha`.
pub fn adaptive_bonferroni(pvalues: &[f64], alpha: f64, k0_hat: f64) -> AdaptiveRejections {
    debug_assert!(alpha.is_finite() && (0.0..1.0).contains(&alpha));
    debug_assert!(k0_hat.is_finite() && k0_hat >= 0.0);
    let threshold = alpha / k0_hat.max(1.0);
    let reject = pvalues.iter().map(|&p| p <= threshold).collect();
    AdaptiveRejections { threshold, reject }
}

/// Mean true-null estimate per method over a grid of `lambda` values.
///
/// `generator` maps a replicate index to the family's p-values as
/// `(ump, rand2)` vectors; each replicate is evaluated once and scored at
/// every `lambda`. Replicates run in parallel (feature-gated) with the mean
/// always folded sequentially in replicate order. Estimates are uncapped.
///
/// # Errors
/// Rejects an empty or non-increasing grid, grid entries outside `[0, 1)`,
/// `reps = 0`, and any invalid p-values coming out of the generator.
pub fn lambda_sweep<G>(generator: G, lambda_grid: &[f64], reps: u64) -> Result<CurveSeries>
where
    G: Fn(u64) -> (Vec<f64>, Vec<f64>) + Sync + Send,
{
    if lambda_grid.is_empty() {
        return Err(Error::Empty { what: "lambda grid" });
    }
    for &l in lambda_grid {
        if !l.is_finite() || !(0.0..1.0).contains(&l) {
            return Err(Error::OutOfUnitRange {
                name: "lambda",
                value: l,
                range: "[0, 1)",
            });
        }
    }
    if reps == 0 {
        return Err(Error::config("reps must be at least 1"));
    }
    let per_rep: Vec<Result<(Vec<f64>, Vec<f64>)>> = exec::map_indexed(reps as usize, |rep| {
        let (ump, rand2) = generator(rep as u64);
        let score = |ps: &[f64]| -> Result<Vec<f64>> {
            lambda_grid
                .iter()
                .map(|&l| Ok(schweder_k0(ps, l, false)?.k0_hat))
                .collect()
        };
        Ok((score(&ump)?, score(&rand2)?))
    });
    let mut sum_ump = vec![0.0f64; lambda_grid.len()];
    let mut sum_rand2 = vec![0.0f64; lambda_grid.len()];
    for r in per_rep {
        let (u, r2) = r?;
        for i in 0..lambda_grid.len() {
            sum_ump[i] += u[i];
            sum_rand2[i] += r2[i];
        }
    }
    let mean = |s: Vec<f64>| -> Vec<f64> { s.into_iter().map(|v| v / reps as f64).collect() };
    let mut meta = SeriesMeta::new("lambda-sweep");
    meta.push("reps", reps);
    CurveSeries::new(
        meta,
        "lambda",
        lambda_grid.to_vec(),
        mean(sum_ump),
        mean(sum_rand2),
        None,
    )
}
