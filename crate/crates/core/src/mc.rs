//! Deterministic Monte Carlo: uniform streams, family samplers, study
//! tables, and brute-force enumeration oracles.
//!
//! Every stochastic quantity in the crate is a pure function of a master
//! seed. Randomness is carved into per-`(replicate, hypothesis)` streams up
//! front, so the draw consumed by one cell never depends on evaluation
//! order; parallel and sequential runs produce bit-identical output.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::binom::{self, BinomParams};
use crate::data::{self, RegionRecord};
use crate::error::{Error, Result};
use crate::exec;
use crate::pi0::{self, HypothesisFamily};
use crate::pvalue::{self, EquivProblem};
use crate::series::SeriesMeta;

// ===== uniform streams =====

// 2^-53: scales the top 53 bits of a word onto [0, 1).
const UNIFORM_SCALE: f64 = 1.0 / 9007199254740992.0;

/// A deterministic uniform stream on `[0, 1)` with 53-bit resolution.
pub struct UniformStream(ChaCha8Rng);

impl UniformStream {
    /// Next variate: the top 53 bits of the next 64-bit word.
    pub fn next_uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * UNIFORM_SCALE
    }
}

/// The uniform stream for one `(replicate, hypothesis)` cell.
///
/// The seed selects the ChaCha8 key; the 64-bit stream id packs the cell as
/// `rep << 32 | hyp`, so distinct cells never share output and the mapping
/// is independent of evaluation order.
///
/// # Panics
/// `rep` and `hyp` must both be below `2^32` for the packing to be
/// unambiguous.
pub fn rng_stream(seed: u64, rep: u64, hyp: u64) -> UniformStream {
    assert!(
        rep < (1 << 32) && hyp < (1 << 32),
        "stream ids must fit in 32 bits"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rep << 32) | hyp);
    UniformStream(rng)
}

// ===== enumeration oracles =====

/// Largest `n` the enumeration oracles accept.
pub const ORACLE_MAX_N: u64 = 1000;

/// Reference pmf table for `Bin(n, theta)`, indexed by outcome.
///
/// Deliberately independent of the production kernel: weights follow the
/// mode-anchored ratio recurrence and are normalized by their own sum, so no
/// binomial coefficient or power is ever formed. Relative error grows like
/// `n * epsilon`, far below the tolerances the oracles are compared at.
///
/// # Errors
/// Rejects invalid parameters and `n > ORACLE_MAX_N`.
pub fn naive_pmf_table(n: u64, theta: f64) -> Result<Vec<f64>> {
    BinomParams::new(n, theta)?;
    if n > ORACLE_MAX_N {
        return Err(Error::OracleGuard {
            n,
            max: ORACLE_MAX_N,
        });
    }
    let len = (n + 1) as usize;
    let mode = (((n + 1) as f64 * theta).floor().min(n as f64)) as usize;
    let mut w = vec![0.0f64; len];
    w[mode] = 1.0;
    for x in (1..=mode).rev() {
        w[x - 1] = w[x] * (x as f64 * (1.0 - theta)) / ((n - x as u64 + 1) as f64 * theta);
    }
    for x in mode..len - 1 {
        w[x + 1] = w[x] * ((n - x as u64) as f64 * theta) / ((x + 1) as f64 * (1.0 - theta));
    }
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / total).collect())
}

// Per-outcome intercept/slope of the one-sided p-values as functions of the
// shared uniform: p = intercept + slope * u.
struct AffinePvalues {
    /// `(survival at x under theta1, pmf at x under theta1)`.
    upper: Vec<(f64, f64)>,
    /// `(cdf at x - 1 under theta2, pmf at x under theta2)`.
    lower: Vec<(f64, f64)>,
}

fn affine_pvalues(problem: &EquivProblem) -> Result<AffinePvalues> {
    let f1 = naive_pmf_table(problem.n, problem.theta1)?;
    let f2 = naive_pmf_table(problem.n, problem.theta2)?;
    let len = f1.len();
    let mut upper = vec![(0.0, 0.0); len];
    let mut tail = 0.0;
    for x in (0..len).rev() {
        upper[x] = (tail, f1[x]);
        tail += f1[x];
    }
    let mut lower = vec![(0.0, 0.0); len];
    let mut head = 0.0;
    for (x, item) in lower.iter_mut().enumerate() {
        *item = (head, f2[x]);
        head += f2[x];
    }
    Ok(AffinePvalues { upper, lower })
}

// Lebesgue measure of {u in (0,1) : a + b*u <= y} for b >= 0.
fn measure_leq(a: f64, b: f64, y: f64) -> f64 {
    if b > 0.0 {
        ((y - a) / b).clamp(0.0, 1.0)
    } else if a <= y {
        1.0
    } else {
        0.0
    }
}

// Strict variant; differs from measure_leq only on the zero-slope branch.
fn measure_lt(a: f64, b: f64, y: f64) -> f64 {
    if b > 0.0 {
        ((y - a) / b).clamp(0.0, 1.0)
    } else if a < y {
        1.0
    } else {
        0.0
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !t.is_finite() || !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfUnitRange {
            name: "t",
            value: t,
            range: "[0, 1]",
        });
    }
    Ok(())
}

/// Law of the maximal one-sided p-value by direct enumeration:
/// `P_theta(P <= t)` summed over outcomes and the randomization measure.
///
/// Both one-sided p-values are affine and nondecreasing in the shared
/// uniform, so `{u : max <= t}` is the intersection of two down-sets and
/// its measure is the minimum of the per-constraint measures. Slow and
/// simple on purpose: this is the reference [`pvalue::ump_cdf`] is tested
/// against.
///
/// # Errors
/// Rejects out-of-domain arguments and `n > ORACLE_MAX_N`.
pub fn exact_ump_cdf_oracle(problem: &EquivProblem, theta: f64, t: f64) -> Result<f64> {
    check_threshold(t)?;
    let f = naive_pmf_table(problem.n, theta)?;
    let aff = affine_pvalues(problem)?;
    let mut acc = 0.0;
    for (x, &fx) in f.iter().enumerate() {
        let (au, bu) = aff.upper[x];
        let (al, bl) = aff.lower[x];
        let mu = measure_leq(au, bu, t).min(measure_leq(al, bl, t));
        acc += fx * mu;
    }
    Ok(acc)
}

/// Law of the two-stage p-value by direct enumeration:
/// `P_theta(P <= t)` over outcomes and both randomization variables.
///
/// Conditional on the outcome and the first-stage uniform, the second stage
/// contributes `t` when the maximal p-value reaches `c` and an indicator of
/// `p <= t * c` otherwise, which integrates to
/// `t * (1 - mu{p < c}) + mu{p < c, p <= t*c}` per outcome.
///
/// # Errors
/// Rejects out-of-domain arguments and `n > ORACLE_MAX_N`.
pub fn exact_rand2_cdf_oracle(problem: &EquivProblem, theta: f64, t: f64, c: f64) -> Result<f64> {
    check_threshold(t)?;
    if !c.is_finite() || !(0.0..=1.0).contains(&c) {
        return Err(Error::OutOfUnitRange {
            name: "c",
            value: c,
            range: "[0, 1]",
        });
    }
    let f = naive_pmf_table(problem.n, theta)?;
    if c == 0.0 {
        // The first stage never resolves, so the p-value is the second
        // uniform outright.
        return Ok(t);
    }
    let aff = affine_pvalues(problem)?;
    let mut acc = 0.0;
    for (x, &fx) in f.iter().enumerate() {
        let (au, bu) = aff.upper[x];
        let (al, bl) = aff.lower[x];
        let mu_lt_c = measure_lt(au, bu, c).min(measure_lt(al, bl, c));
        // For t < 1 the scaled event {p <= t*c} already implies p < c; at
        // t = 1 the two coincide, keeping the total at exactly one.
        let carried = if t < 1.0 {
            measure_leq(au, bu, t * c).min(measure_leq(al, bl, t * c))
        } else {
            mu_lt_c
        };
        acc += fx * (t * (1.0 - mu_lt_c) + carried);
    }
    Ok(acc)
}

/// Worst-case disagreement between the analytic CDFs and the enumeration
/// oracles over a fixed validation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleSweep {
    /// Number of individual comparisons performed.
    pub cases: u64,
    /// Largest `|analytic - oracle|` for the one-stage law.
    pub max_ump_deviation: f64,
    /// Largest `|analytic - oracle|` for the two-stage law.
    pub max_rand2_deviation: f64,
}

/// Cross-validates both analytic CDFs against the enumeration oracles.
///
/// The sweep covers every `n` in `1..=max_n`, three bound pairs, nine
/// evaluation parameters, a 99-point threshold grid, and three second-stage
/// constants. Work is split across bound-pair/sample-size combinations.
///
/// # Parameters
///
/// - `max_n`: largest sample size in the sweep; at least 1.
///
/// # Errors
///
/// Returns an error only if `max_n` is 0 or exceeds the oracle guard.
pub fn oracle_deviation_sweep(max_n: u64) -> Result<OracleSweep> {
    const PAIRS: [(f64, f64); 3] = [(0.25, 0.75), (0.3, 0.75), (0.15, 0.45)];
    const STAGE_CS: [f64; 3] = [0.25, 0.5, 1.0];
    if max_n == 0 {
        return Err(Error::config("oracle sweep needs max_n >= 1"));
    }
    let thetas: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let t_grid: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();
    let combos: Vec<(u64, f64, f64)> = (1..=max_n)
        .flat_map(|n| PAIRS.iter().map(move |&(a, b)| (n, a, b)))
        .collect();
    let per_combo = exec::map_indexed(combos.len(), |i| -> Result<(u64, f64, f64)> {
        let (n, theta1, theta2) = combos[i];
        let problem = EquivProblem::new(n, theta1, theta2)?;
        let mut cases = 0u64;
        let mut worst_ump = 0.0f64;
        let mut worst_rand2 = 0.0f64;
        for &theta in &thetas {
            for &t in &t_grid {
                let oracle = exact_ump_cdf_oracle(&problem, theta, t)?;
                let analytic = pvalue::ump_cdf(&problem, theta, t)?;
                worst_ump = worst_ump.max((oracle - analytic).abs());
                cases += 1;
                for &c in &STAGE_CS {
                    let oracle = exact_rand2_cdf_oracle(&problem, theta, t, c)?;
                    let analytic = pvalue::rand2_cdf(&problem, theta, t, c)?;
                    worst_rand2 = worst_rand2.max((oracle - analytic).abs());
                    cases += 1;
                }
            }
        }
        Ok((cases, worst_ump, worst_rand2))
    });
    let mut sweep = OracleSweep {
        cases: 0,
        max_ump_deviation: 0.0,
        max_rand2_deviation: 0.0,
    };
    for item in per_combo {
        let (cases, ump, rand2) = item?;
        sweep.cases += cases;
        sweep.max_ump_deviation = sweep.max_ump_deviation.max(ump);
        sweep.max_rand2_deviation = sweep.max_rand2_deviation.max(rand2);
    }
    Ok(sweep)
}

// ===== simulation configuration =====

/// Configuration shared by every Monte Carlo study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationSpec {
    /// Master seed; a study is a pure function of it.
    pub seed: u64,
    /// Number of replicates.
    pub reps: u64,
    /// Second-stage constant of the two-stage p-value.
    pub c: f64,
    /// Tuning point of the true-null line estimator.
    pub lambda: f64,
    /// Family-wise level for adaptive rejection.
    pub alpha: f64,
}

impl SimulationSpec {
    /// Validates and builds a study configuration.
    ///
    /// # Errors
    /// Rejects `reps` outside `1..=2^32 - 1` (replicate ids share a 32-bit
    /// field with hypothesis ids), `c` outside `[0, 1]`, `lambda` outside
    /// `[0, 1)`, and `alpha` outside `[0, 1)`.
    pub fn new(seed: u64, reps: u64, c: f64, lambda: f64, alpha: f64) -> Result<Self> {
        if reps == 0 || reps >= (1 << 32) {
            return Err(Error::config(format!(
                "reps = {reps} must lie in 1..=2^32 - 1"
            )));
        }
        if !c.is_finite() || !(0.0..=1.0).contains(&c) {
            return Err(Error::OutOfUnitRange {
                name: "c",
                value: c,
                range: "[0, 1]",
            });
        }
        if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
            return Err(Error::OutOfUnitRange {
                name: "lambda",
                value: lambda,
                range: "[0, 1)",
            });
        }
        if !alpha.is_finite() || !(0.0..1.0).contains(&alpha) {
            return Err(Error::OutOfUnitRange {
                name: "alpha",
                value: alpha,
                range: "[0, 1)",
            });
        }
        Ok(SimulationSpec {
            seed,
            reps,
            c,
            lambda,
            alpha,
        })
    }
}

// ===== family sampler =====

/// One replicate's p-values for both methods across the family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodDraws {
    pub ump: Vec<f64>,
    pub rand2: Vec<f64>,
}

// The per-hypothesis lookup window spans this many true-distribution
// standard deviations on each side of the mean (plus a small pad so tiny
// families are covered whole). Outcomes land outside with probability
// around 1e-35, where the slow kernel path takes over.
const WINDOW_SIGMAS: f64 = 12.5;
const WINDOW_PAD: f64 = 6.0;

struct HypTables {
    problem: EquivProblem,
    dist_true: BinomParams,
    /// First outcome covered by the window tables; only read by tests,
    /// since lookups index relative to the window.
    #[cfg_attr(not(test), allow(dead_code))]
    lo: u64,
    /// CDF under the true parameter just below the window, `F(lo - 1)`.
    cdf_below: f64,
    /// CDF under the true parameter on `lo..=hi`.
    cum: Vec<f64>,
    /// Survival at `x` under `theta1` (intercept of the upper p-value).
    sf1: Vec<f64>,
    /// pmf at `x` under `theta1` (slope of the upper p-value).
    pmf1: Vec<f64>,
    /// CDF at `x - 1` under `theta2` (intercept of the lower p-value).
    cdf2_prev: Vec<f64>,
    /// pmf at `x` under `theta2` (slope of the lower p-value).
    pmf2: Vec<f64>,
}

// pmf on lo..=hi from one kernel anchor plus the ascending ratio
// recurrence. An anchor that underflows to zero keeps the whole table at
// zero, which is absolutely accurate and exactly what the p-value tables
// need in far-tail windows.
fn window_pmf(params: &BinomParams, lo: u64, hi: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity((hi - lo + 1) as usize);
    out.push(binom::pmf(params, lo as i64));
    let theta = params.theta;
    for x in lo..hi {
        let prev = *out.last().expect("seeded above");
        out.push(prev * ((params.n - x) as f64 * theta) / ((x + 1) as f64 * (1.0 - theta)));
    }
    out
}

impl HypTables {
    fn new(n: u64, theta_true: f64, theta1: f64, theta2: f64) -> Result<Self> {
        let problem = EquivProblem::new(n, theta1, theta2)?;
        let dist_true = BinomParams::new(n, theta_true)?;
        let mean = n as f64 * theta_true;
        let half = WINDOW_SIGMAS * (mean * (1.0 - theta_true)).sqrt() + WINDOW_PAD;
        let lo = (mean - half).floor().max(0.0) as u64;
        let hi = (((mean + half).ceil()) as u64).min(n);
        let len = (hi - lo + 1) as usize;

        let f_true = window_pmf(&dist_true, lo, hi);
        let mut cum = Vec::with_capacity(len);
        cum.push(binom::cdf(&dist_true, lo as i64));
        for &f in &f_true[1..] {
            cum.push(cum.last().expect("seeded above") + f);
        }
        let cdf_below = binom::cdf(&dist_true, lo as i64 - 1);

        let pmf1 = window_pmf(&problem.dist1(), lo, hi);
        let mut sf1 = vec![0.0f64; len];
        sf1[len - 1] = binom::survival(&problem.dist1(), hi as i64);
        for j in (0..len - 1).rev() {
            sf1[j] = sf1[j + 1] + pmf1[j + 1];
        }

        let pmf2 = window_pmf(&problem.dist2(), lo, hi);
        let mut cdf2_prev = Vec::with_capacity(len);
        cdf2_prev.push(binom::cdf(&problem.dist2(), lo as i64 - 1));
        for &f in &pmf2[..len - 1] {
            cdf2_prev.push(cdf2_prev.last().expect("seeded above") + f);
        }

        Ok(HypTables {
            problem,
            dist_true,
            lo,
            cdf_below,
            cum,
            sf1,
            pmf1,
            cdf2_prev,
            pmf2,
        })
    }

    // Inverts the outcome variate and evaluates both one-sided p-values.
    // Inside the window everything is a table lookup; outside (or at the
    // window's lower CDF boundary) the kernel quantile and the reference
    // p-value path take over.
    fn pvalues_at(&self, v: f64, u: f64) -> Result<(f64, f64)> {
        let last = *self.cum.last().expect("window is never empty");
        if v > self.cdf_below && v <= last {
            let idx = self.cum.partition_point(|&cv| cv < v);
            let p_lower = (self.cdf2_prev[idx] + u * self.pmf2[idx]).clamp(0.0, 1.0);
            let p_upper = (self.sf1[idx] + u * self.pmf1[idx]).clamp(0.0, 1.0);
            Ok((p_lower, p_upper))
        } else {
            let x = binom::quantile(&self.dist_true, v)?;
            pvalue::one_sided_pvalues(&self.problem, x, u)
        }
    }

    #[cfg(test)]
    fn window(&self) -> (u64, u64) {
        (self.lo, self.lo + (self.cum.len() - 1) as u64)
    }
}

/// Precomputed per-hypothesis tables for fast replicate generation.
///
/// Construction is the expensive step; [`FamilySampler::draw`] is then a
/// binary search plus a handful of lookups per hypothesis.
pub struct FamilySampler {
    tables: Vec<HypTables>,
}

impl FamilySampler {
    /// Builds lookup tables for every member of the family.
    ///
    /// # Errors
    /// Propagates invalid member configurations; rejects families with
    /// `2^32` or more members (hypothesis ids share a 32-bit field with
    /// replicate ids).
    pub fn new(family: &HypothesisFamily) -> Result<Self> {
        if family.k() as u64 >= (1 << 32) {
            return Err(Error::config("families must have fewer than 2^32 members"));
        }
        let tables = family
            .configs()
            .iter()
            .map(|cfg| HypTables::new(cfg.n, cfg.theta_true, cfg.theta1, cfg.theta2))
            .collect::<Result<Vec<_>>>()?;
        Ok(FamilySampler { tables })
    }

    /// Number of hypotheses.
    pub fn k(&self) -> usize {
        self.tables.len()
    }

    /// Both methods' p-values for one replicate.
    ///
    /// Hypothesis `i` consumes exactly three uniforms from stream
    /// `(rep, i)`: the outcome variate, the shared one-sided randomizer,
    /// and the second-stage randomizer, in that order.
    ///
    /// # Errors
    /// Propagates slow-path kernel failures (not reachable with in-range
    /// uniforms).
    pub fn draw(&self, spec: &SimulationSpec, rep: u64) -> Result<MethodDraws> {
        let mut ump = Vec::with_capacity(self.tables.len());
        let mut rand2 = Vec::with_capacity(self.tables.len());
        for (i, tables) in self.tables.iter().enumerate() {
            let mut rng = rng_stream(spec.seed, rep, i as u64);
            let v = rng.next_uniform();
            let u = rng.next_uniform();
            let u_tilde = rng.next_uniform();
            let (p_lower, p_upper) = tables.pvalues_at(v, u)?;
            let p_ump = p_lower.max(p_upper);
            ump.push(p_ump);
            rand2.push(pvalue::rand2_pvalue(p_ump, u_tilde, spec.c));
        }
        Ok(MethodDraws { ump, rand2 })
    }
}

/// One replicate of the whole family: builds the tables and draws once.
///
/// Convenience wrapper; replicate loops should build a [`FamilySampler`]
/// once and call [`FamilySampler::draw`] per replicate instead.
///
/// # Errors
/// Propagates sampler construction and draw failures.
pub fn simulate_family(
    family: &HypothesisFamily,
    spec: &SimulationSpec,
    rep: u64,
) -> Result<MethodDraws> {
    FamilySampler::new(family)?.draw(spec, rep)
}

// ===== study table =====

/// One row of a recovery-study table: the family's true-null count and each
/// method's mean estimate of it, with Monte Carlo standard errors of the
/// means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableRow {
    pub theta1: f64,
    pub theta2: f64,
    pub delta: f64,
    pub k0: usize,
    pub k0_hat_ump: f64,
    pub k0_hat_rand2: f64,
    pub stderr_ump: f64,
    pub stderr_rand2: f64,
}

// Mean and standard error of the mean (two-pass; zero for one value).
fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (r * (r - 1.0))).sqrt())
}

/// Full study pipeline for one equivalence interval: builds the family from
/// regional records, simulates `spec.reps` replicates, and averages the
/// line-method true-null estimates per method.
///
/// Replicates run in parallel when the `parallel` feature is on; the means
/// are folded in replicate order, so output is identical either way.
///
/// # Errors
/// Propagates family construction, sampling, and estimator failures.
pub fn algorithm1_run(
    regions: &[RegionRecord],
    theta1: f64,
    theta2: f64,
    spec: &SimulationSpec,
) -> Result<TableRow> {
    let family = data::build_family(regions, theta1, theta2)?;
    let sampler = FamilySampler::new(&family)?;
    let per_rep: Vec<Result<(f64, f64)>> = exec::map_indexed(spec.reps as usize, |rep| {
        let draws = sampler.draw(spec, rep as u64)?;
        Ok((
            pi0::schweder_k0(&draws.ump, spec.lambda, false)?.k0_hat,
            pi0::schweder_k0(&draws.rand2, spec.lambda, false)?.k0_hat,
        ))
    });
    let mut ump = Vec::with_capacity(per_rep.len());
    let mut rand2 = Vec::with_capacity(per_rep.len());
    for r in per_rep {
        let (a, b) = r?;
        ump.push(a);
        rand2.push(b);
    }
    let (k0_hat_ump, stderr_ump) = mean_and_stderr(&ump);
    let (k0_hat_rand2, stderr_rand2) = mean_and_stderr(&rand2);
    Ok(TableRow {
        theta1,
        theta2,
        delta: theta2 - theta1,
        k0: family.k0(),
        k0_hat_ump,
        k0_hat_rand2,
        stderr_ump,
        stderr_rand2,
    })
}

/// Writes study rows as CSV with a provenance header.
///
/// Bound columns echo their input form; computed columns use six decimals.
///
/// # Errors
/// Propagates write failures.
pub fn write_table_csv<W: Write>(rows: &[TableRow], meta: &SeriesMeta, w: &mut W) -> Result<()> {
    meta.write_header(w)?;
    writeln!(
        w,
        "theta1,theta2,delta,k0,k0_hat_ump,k0_hat_rand2,stderr_ump,stderr_rand2"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.6},{},{:.6},{:.6},{:.6},{:.6}",
            r.theta1,
            r.theta2,
            r.delta,
            r.k0,
            r.k0_hat_ump,
            r.k0_hat_rand2,
            r.stderr_ump,
            r.stderr_rand2
        )?;
    }
    Ok(())
}

/// Writes study rows as one JSON document with full-precision values and
/// the provenance block under `"provenance"`.
///
/// # Errors
/// Propagates serialization and write failures.
pub fn write_table_json<W: Write>(rows: &[TableRow], meta: &SeriesMeta, w: &mut W) -> Result<()> {
    let doc = serde_json::json!({
        "provenance": meta.json_params(),
        "rows": rows,
    });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}

// ===== family-wise error =====

/// Family-wise error estimate of the adaptive pipeline under each method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FwerEstimate {
    pub fwer_ump: f64,
    pub stderr_ump: f64,
    pub fwer_rand2: f64,
    pub stderr_rand2: f64,
}

/// Estimates the probability of at least one false rejection when the line
/// estimator feeds the adaptive Bonferroni rule at level `spec.alpha`.
///
/// A replicate scores when any hypothesis whose null actually holds is
/// rejected. Standard errors are the binomial `sqrt(p(1 - p) / reps)`.
///
/// # Errors
/// Propagates sampler and estimator failures.
pub fn fwer_estimate(family: &HypothesisFamily, spec: &SimulationSpec) -> Result<FwerEstimate> {
    let sampler = FamilySampler::new(family)?;
    let mask = family.truth_mask();
    let per_rep: Vec<Result<(bool, bool)>> = exec::map_indexed(spec.reps as usize, |rep| {
        let draws = sampler.draw(spec, rep as u64)?;
        let false_rejection = |ps: &[f64]| -> Result<bool> {
            let k0_hat = pi0::schweder_k0(ps, spec.lambda, false)?.k0_hat;
            let out = pi0::adaptive_bonferroni(ps, spec.alpha, k0_hat);
            Ok(out
                .reject
                .iter()
                .zip(mask)
                .any(|(&rejected, &null)| rejected && null))
        };
        Ok((false_rejection(&draws.ump)?, false_rejection(&draws.rand2)?))
    });
    let mut hits_ump = 0u64;
    let mut hits_rand2 = 0u64;
    for r in per_rep {
        let (a, b) = r?;
        hits_ump += u64::from(a);
        hits_rand2 += u64::from(b);
    }
    let reps = spec.reps as f64;
    let fwer_ump = hits_ump as f64 / reps;
    let fwer_rand2 = hits_rand2 as f64 / reps;
    let se = |p: f64| (p * (1.0 - p) / reps).sqrt();
    Ok(FwerEstimate {
        fwer_ump,
        stderr_ump: se(fwer_ump),
        fwer_rand2,
        stderr_rand2: se(fwer_rand2),
    })
}

// ===== goodness of fit =====

/// Kolmogorov-Smirnov distance between a sample and the uniform law on
/// `[0, 1]`.
///
/// # Errors
/// Rejects an empty sample and values outside `[0, 1]`.
pub fn ks_uniform_statistic(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty { what: "sample" });
    }
    for &v in values {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfUnitRange {
                name: "sample value",
                value: v,
                range: "[0, 1]",
            });
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("values are finite"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - x).max(x - i as f64 / n);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pi0::HypothesisConfig;

    fn spec(seed: u64, reps: u64) -> SimulationSpec {
        SimulationSpec::new(seed, reps, 0.5, 0.5, 0.05).unwrap()
    }

    // ===== streams =====

    #[test]
    fn streams_are_deterministic() {
        let take = |seed, rep, hyp| {
            let mut s = rng_stream(seed, rep, hyp);
            (0..5).map(|_| s.next_uniform()).collect::<Vec<_>>()
        };
        assert_eq!(take(7, 3, 5), take(7, 3, 5));
        assert_ne!(take(7, 3, 5), take(7, 3, 6));
        assert_ne!(take(7, 3, 5), take(7, 4, 5));
        assert_ne!(take(7, 3, 5), take(8, 3, 5));
    }

    #[test]
    fn stream_cells_do_not_collide() {
        let mut firsts = Vec::new();
        for rep in 0..4u64 {
            for hyp in 0..4u64 {
                firsts.push(rng_stream(42, rep, hyp).next_uniform());
            }
        }
        for i in 0..firsts.len() {
            for j in i + 1..firsts.len() {
                assert_ne!(firsts[i], firsts[j], "cells {i} and {j} collide");
            }
        }
    }

    #[test]
    fn uniforms_stay_in_the_half_open_interval() {
        let mut s = rng_stream(1, 0, 0);
        for _ in 0..1000 {
            let v = s.next_uniform();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    #[should_panic(expected = "32 bits")]
    fn stream_ids_must_fit() {
        rng_stream(0, 1 << 32, 0);
    }

    // ===== oracles =====

    #[test]
    fn naive_table_matches_kernel_and_sums_to_one() {
        let table = naive_pmf_table(50, 0.3).unwrap();
        let params = BinomParams::new(50, 0.3).unwrap();
        let total: f64 = table.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
        for (x, &f) in table.iter().enumerate() {
            let reference = binom::pmf(&params, x as i64);
            assert!(
                (f - reference).abs() <= 1e-12 * reference.max(1e-300),
                "x = {x}"
            );
        }
    }

    #[test]
    fn oracle_guard_rejects_large_n() {
        assert!(matches!(
            naive_pmf_table(1001, 0.5),
            Err(Error::OracleGuard { .. })
        ));
        assert!(naive_pmf_table(1000, 0.5).is_ok());
    }

    #[test]
    fn ump_oracle_bernoulli_hand_value() {
        // Bounds (0.25, 0.75) at n = 1: both outcomes give the maximal
        // p-value 0.25 + 0.75 u, so the law is ((t - 0.25) / 0.75) clamped,
        // independent of theta. At t = 0.625 that is exactly one half.
        let problem = EquivProblem::new(1, 0.25, 0.75).unwrap();
        let got = exact_ump_cdf_oracle(&problem, 0.5, 0.625).unwrap();
        assert!((got - 0.5).abs() <= 1e-14);
        assert_eq!(exact_ump_cdf_oracle(&problem, 0.5, 0.25).unwrap(), 0.0);
        assert_eq!(exact_ump_cdf_oracle(&problem, 0.5, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn oracles_match_analytic_cdfs_spot_check() {
        let problem = EquivProblem::new(8, 0.25, 0.75).unwrap();
        for theta in [0.3, 0.5, 0.7] {
            for t in [0.05, 0.3, 0.625, 0.9] {
                let oracle = exact_ump_cdf_oracle(&problem, theta, t).unwrap();
                let analytic = pvalue::ump_cdf(&problem, theta, t).unwrap();
                assert!(
                    (oracle - analytic).abs() <= 1e-12,
                    "ump theta={theta} t={t}: {oracle} vs {analytic}"
                );
                for c in [0.25, 0.5, 1.0] {
                    let oracle = exact_rand2_cdf_oracle(&problem, theta, t, c).unwrap();
                    let analytic = pvalue::rand2_cdf(&problem, theta, t, c).unwrap();
                    assert!(
                        (oracle - analytic).abs() <= 1e-12,
                        "rand2 theta={theta} t={t} c={c}: {oracle} vs {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn rand2_oracle_degenerations() {
        let problem = EquivProblem::new(6, 0.3, 0.7).unwrap();
        for t in [0.0, 0.2, 0.7, 1.0] {
            let at_c1 = exact_rand2_cdf_oracle(&problem, 0.5, t, 1.0).unwrap();
            let ump = exact_ump_cdf_oracle(&problem, 0.5, t).unwrap();
            assert!((at_c1 - ump).abs() <= 1e-14, "t = {t}");
            assert_eq!(exact_rand2_cdf_oracle(&problem, 0.5, t, 0.0).unwrap(), t);
        }
    }

    // ===== simulation spec =====

    #[test]
    fn spec_validation() {
        assert!(SimulationSpec::new(1, 0, 0.5, 0.5, 0.05).is_err());
        assert!(SimulationSpec::new(1, 1 << 32, 0.5, 0.5, 0.05).is_err());
        assert!(SimulationSpec::new(1, 10, 1.5, 0.5, 0.05).is_err());
        assert!(SimulationSpec::new(1, 10, 0.5, 1.0, 0.05).is_err());
        assert!(SimulationSpec::new(1, 10, 0.5, 0.5, 1.0).is_err());
        assert!(SimulationSpec::new(1, 10, 0.0, 0.0, 0.0).is_ok());
    }

    // ===== sampler =====

    fn small_family() -> HypothesisFamily {
        HypothesisFamily::new(vec![
            HypothesisConfig {
                n: 40,
                theta_true: 0.5,
                theta1: 0.25,
                theta2: 0.75,
            },
            HypothesisConfig {
                n: 60,
                theta_true: 0.2,
                theta1: 0.25,
                theta2: 0.75,
            },
            HypothesisConfig {
                n: 55,
                theta_true: 0.62,
                theta1: 0.25,
                theta2: 0.75,
            },
        ])
        .unwrap()
    }

    #[test]
    fn small_n_window_covers_whole_support() {
        let tables = HypTables::new(40, 0.5, 0.25, 0.75).unwrap();
        assert_eq!(tables.window(), (0, 40));
        assert_eq!(tables.cdf_below, 0.0);
        assert_eq!(*tables.cum.last().unwrap(), 1.0);
    }

    #[test]
    fn table_path_matches_kernel_path() {
        // Window covers the full support here, so every draw goes through
        // the tables; replay the same uniforms through the slow path.
        let tables = HypTables::new(40, 0.5, 0.25, 0.75).unwrap();
        let problem = EquivProblem::new(40, 0.25, 0.75).unwrap();
        let dist = BinomParams::new(40, 0.5).unwrap();
        let mut s = rng_stream(11, 0, 0);
        for _ in 0..200 {
            let v = s.next_uniform();
            let u = s.next_uniform();
            let (pl, pu) = tables.pvalues_at(v, u).unwrap();
            let x = binom::quantile(&dist, v).unwrap();
            let (rl, ru) = pvalue::one_sided_pvalues(&problem, x, u).unwrap();
            assert!((pl - rl).abs() <= 1e-12, "lower at v={v}");
            assert!((pu - ru).abs() <= 1e-12, "upper at v={v}");
        }
    }

    #[test]
    fn draw_replays_the_documented_stream_layout() {
        let family = HypothesisFamily::new(vec![HypothesisConfig {
            n: 40,
            theta_true: 0.5,
            theta1: 0.25,
            theta2: 0.75,
        }])
        .unwrap();
        let sp = spec(99, 1);
        let draws = FamilySampler::new(&family).unwrap().draw(&sp, 17).unwrap();

        let mut rng = rng_stream(sp.seed, 17, 0);
        let v = rng.next_uniform();
        let u = rng.next_uniform();
        let u_tilde = rng.next_uniform();
        let problem = EquivProblem::new(40, 0.25, 0.75).unwrap();
        let x = binom::quantile(&BinomParams::new(40, 0.5).unwrap(), v).unwrap();
        let reference = pvalue::draw_pvalues(&problem, x, u, u_tilde, sp.c).unwrap();
        assert!((draws.ump[0] - reference.p_ump).abs() <= 1e-12);
        assert!((draws.rand2[0] - reference.p_rand2).abs() <= 1e-12);
    }

    #[test]
    fn simulate_family_equals_sampler_draw() {
        let family = small_family();
        let sp = spec(5, 3);
        let direct = simulate_family(&family, &sp, 2).unwrap();
        let via_sampler = FamilySampler::new(&family).unwrap().draw(&sp, 2).unwrap();
        assert_eq!(direct, via_sampler);
    }

    // ===== aggregation =====

    #[test]
    fn mean_and_stderr_hand_values() {
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 12.0).sqrt()).abs() <= 1e-15);
        assert_eq!(mean_and_stderr(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn fwer_is_zero_without_true_nulls() {
        let family = small_family_all_alternative();
        let out = fwer_estimate(&family, &spec(3, 40)).unwrap();
        assert_eq!(out.fwer_ump, 0.0);
        assert_eq!(out.fwer_rand2, 0.0);
        assert_eq!(out.stderr_ump, 0.0);
    }

    fn small_family_all_alternative() -> HypothesisFamily {
        HypothesisFamily::new(vec![
            HypothesisConfig {
                n: 40,
                theta_true: 0.5,
                theta1: 0.25,
                theta2: 0.75,
            },
            HypothesisConfig {
                n: 60,
                theta_true: 0.6,
                theta1: 0.25,
                theta2: 0.75,
            },
        ])
        .unwrap()
    }

    #[test]
    fn fwer_is_zero_at_alpha_zero() {
        let family = small_family();
        let sp = SimulationSpec::new(3, 40, 0.5, 0.5, 0.0).unwrap();
        let out = fwer_estimate(&family, &sp).unwrap();
        assert_eq!(out.fwer_ump, 0.0);
        assert_eq!(out.fwer_rand2, 0.0);
    }

    // ===== goodness of fit =====

    #[test]
    fn ks_hand_value() {
        let d = ks_uniform_statistic(&[0.25, 0.75]).unwrap();
        assert!((d - 0.25).abs() <= 1e-15);
        assert!(ks_uniform_statistic(&[]).is_err());
        assert!(ks_uniform_statistic(&[1.5]).is_err());
    }

    #[test]
    fn stream_uniforms_pass_ks_at_one_percent() {
        let mut s = rng_stream(2024, 0, 0);
        let sample: Vec<f64> = (0..50_000).map(|_| s.next_uniform()).collect();
        let d = ks_uniform_statistic(&sample).unwrap();
        let critical = 1.628 / (sample.len() as f64).sqrt();
        assert!(d < critical, "D = {d}, critical = {critical}");
    }

    // ===== table output =====

    #[test]
    fn table_csv_layout_is_stable() {
        let rows = [TableRow {
            theta1: 0.25,
            theta2: 0.75,
            delta: 0.5,
            k0: 3,
            k0_hat_ump: 6.0,
            k0_hat_rand2: 3.25,
            stderr_ump: 0.125,
            stderr_rand2: 0.0625,
        }];
        let mut meta = SeriesMeta::new("study-table");
        meta.push("reps", 16u64);
        let mut buf = Vec::new();
        write_table_csv(&rows, &meta, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# kind = study-table\n\
             # reps = 16\n\
             theta1,theta2,delta,k0,k0_hat_ump,k0_hat_rand2,stderr_ump,stderr_rand2\n\
             0.25,0.75,0.500000,3,6.000000,3.250000,0.125000,0.062500\n"
        );
    }
}
