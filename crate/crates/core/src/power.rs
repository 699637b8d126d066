//! Power and conservativity curves over sample size, true parameter, and
//! interval width.
//!
//! Every producer returns a [`CurveSeries`] with one column per p-value
//! method. Grid points are independent and evaluated through
//! [`exec::map_indexed`], so curves build in parallel when the `parallel`
//! feature is on, with identical output either way.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::pvalue::{self, EquivProblem};
use crate::series::{CurveSeries, FlagColumn, SeriesMeta};

/// Power of both p-values at a fixed alternative, over a sample-size range.
///
/// For each `n` in `n_lo..=n_hi` the curve holds
/// `Pr_theta(P <= level_t)` for the UMP and two-stage p-values.
///
/// # Errors
/// Rejects `theta` outside the open interval `(theta1, theta2)` (power
/// curves are for alternatives), an empty range, and `n_lo = 0`.
pub fn power_vs_n(
    theta1: f64,
    theta2: f64,
    theta: f64,
    c: f64,
    level_t: f64,
    n_lo: u64,
    n_hi: u64,
) -> Result<CurveSeries> {
    // Validate the bounds themselves before the range checks.
    EquivProblem::new(1, theta1, theta2)?;
    if !(theta > theta1 && theta < theta2) {
        return Err(Error::config(format!(
            "theta = {theta} must lie strictly inside ({theta1}, {theta2}) for a power curve"
        )));
    }
    if n_lo == 0 || n_lo > n_hi {
        return Err(Error::config(format!(
            "sample-size range {n_lo}..={n_hi} must be non-empty and start at 1 or above"
        )));
    }
    let len = (n_hi - n_lo + 1) as usize;
    let points: Vec<Result<(f64, f64)>> = exec::map_indexed(len, |i| {
        let n = n_lo + i as u64;
        let problem = EquivProblem::new(n, theta1, theta2)?;
        Ok((
            pvalue::ump_cdf(&problem, theta, level_t)?,
            pvalue::rand2_cdf(&problem, theta, level_t, c)?,
        ))
    });
    let mut x = Vec::with_capacity(len);
    let mut ump = Vec::with_capacity(len);
    let mut rand2 = Vec::with_capacity(len);
    for (i, p) in points.into_iter().enumerate() {
        let (u, r) = p?;
        x.push((n_lo + i as u64) as f64);
        ump.push(u);
        rand2.push(r);
    }
    let mut meta = SeriesMeta::new("power-vs-n");
    meta.push("theta1", theta1);
    meta.push("theta2", theta2);
    meta.push("theta", theta);
    meta.push("c", c);
    meta.push("level_t", level_t);
    CurveSeries::new(meta, "n", x, ump, rand2, None)
}

/// One downward step in a power curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonMonotoneStep {
    /// Abscissa at which the curve has dropped (the right end of the step).
    pub x: f64,
    /// Drop magnitude, `value(x_prev) - value(x)`, always positive.
    pub drop: f64,
}

/// Downward steps of both method curves.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct NonMonotoneReport {
    pub ump: Vec<NonMonotoneStep>,
    pub rand2: Vec<NonMonotoneStep>,
}

// Drops smaller than this are treated as ties, not violations.
const MONOTONE_TOL: f64 = 1e-12;

/// Locates every strict decrease in each method curve of a series.
///
/// A step counts when `value(x_{i+1}) < value(x_i) - 1e-12`; ties and
/// rounding-level wiggles are not reported.
pub fn detect_nonmonotone(series: &CurveSeries) -> NonMonotoneReport {
    let scan = |values: &[f64]| -> Vec<NonMonotoneStep> {
        let mut steps = Vec::new();
        for i in 1..values.len() {
            if values[i] < values[i - 1] - MONOTONE_TOL {
                steps.push(NonMonotoneStep {
                    x: series.x[i],
                    drop: values[i - 1] - values[i],
                });
            }
        }
        steps
    };
    NonMonotoneReport {
        ump: scan(&series.ump),
        rand2: scan(&series.rand2),
    }
}

/// Both analytic CDFs on a grid of thresholds `t`.
///
/// Under a null-side `theta` this is a conservativity profile; under an
/// alternative it is a power profile.
///
/// # Errors
/// Rejects an empty or non-increasing grid and out-of-domain parameters.
pub fn cdf_curve(problem: &EquivProblem, theta: f64, c: f64, t_grid: &[f64]) -> Result<CurveSeries> {
    let points: Vec<Result<(f64, f64)>> = exec::map_indexed(t_grid.len(), |i| {
        let t = t_grid[i];
        Ok((
            pvalue::ump_cdf(problem, theta, t)?,
            pvalue::rand2_cdf(problem, theta, t, c)?,
        ))
    });
    let mut ump = Vec::with_capacity(t_grid.len());
    let mut rand2 = Vec::with_capacity(t_grid.len());
    for p in points {
        let (u, r) = p?;
        ump.push(u);
        rand2.push(r);
    }
    let mut meta = SeriesMeta::new("cdf-curve");
    meta.push("n", problem.n);
    meta.push("theta1", problem.theta1);
    meta.push("theta2", problem.theta2);
    meta.push("theta", theta);
    meta.push("c", c);
    CurveSeries::new(meta, "t", t_grid.to_vec(), ump, rand2, None)
}

/// Result of a grid search for the power-maximizing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaxPowerResult {
    /// Method the search was run for.
    pub method_tag: &'static str,
    /// Grid point with the largest power; ties go to the smaller theta.
    pub argmax_theta: f64,
    /// Power at `argmax_theta`.
    pub max_power: f64,
    /// Grid resolution used for the scan.
    pub grid_step: f64,
}

/// Grid search for the parameter maximizing each method's power.
///
/// Scans `theta = theta1 + i * grid_step` for `i >= 1` while `theta < theta2`
/// and keeps the first maximum encountered, so ties resolve toward the
/// smaller parameter. Returns `(ump, rand2)` results.
///
/// # Errors
/// Rejects `grid_step` outside `(0, theta2 - theta1)` and grids that end up
/// empty.
pub fn argmax_power_theta(
    problem: &EquivProblem,
    c: f64,
    level_t: f64,
    grid_step: f64,
) -> Result<(MaxPowerResult, MaxPowerResult)> {
    if !grid_step.is_finite() || grid_step <= 0.0 || grid_step >= problem.delta {
        return Err(Error::config(format!(
            "grid_step = {grid_step} must lie in (0, {})",
            problem.delta
        )));
    }
    let mut grid = Vec::new();
    let mut i = 1u64;
    loop {
        let theta = problem.theta1 + i as f64 * grid_step;
        if theta >= problem.theta2 {
            break;
        }
        grid.push(theta);
        i += 1;
    }
    if grid.is_empty() {
        return Err(Error::Empty { what: "theta grid" });
    }
    let points: Vec<Result<(f64, f64)>> = exec::map_indexed(grid.len(), |j| {
        let theta = grid[j];
        Ok((
            pvalue::ump_cdf(problem, theta, level_t)?,
            pvalue::rand2_cdf(problem, theta, level_t, c)?,
        ))
    });
    let mut best_ump = (grid[0], f64::NEG_INFINITY);
    let mut best_rand2 = (grid[0], f64::NEG_INFINITY);
    for (j, p) in points.into_iter().enumerate() {
        let (u, r) = p?;
        if u > best_ump.1 {
            best_ump = (grid[j], u);
        }
        if r > best_rand2.1 {
            best_rand2 = (grid[j], r);
        }
    }
    Ok((
        MaxPowerResult {
            method_tag: "UMP",
            argmax_theta: best_ump.0,
            max_power: best_ump.1,
            grid_step,
        },
        MaxPowerResult {
            method_tag: "RAND2",
            argmax_theta: best_rand2.0,
            max_power: best_rand2.1,
            grid_step,
        },
    ))
}

/// How the interval bounds are derived from a width `delta` when sweeping
/// power against the equivalence limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CenteringRule {
    /// `theta1 = (1 - delta) / 2`, `theta2 = (1 + delta) / 2`: the interval
    /// is centered at 1/2 regardless of the alternative under study.
    SymmetricAboutHalf,
    /// The interval pivots around the alternative `theta`: bounds are chosen
    /// so that every feasible width `delta` in `(min(theta, 1-theta),
    /// 1 - min(theta, 1-theta))` yields an interval with `theta` strictly
    /// inside, sliding from `theta` hugging the lower bound to `theta`
    /// hugging the upper one as `delta` grows.
    PivotThroughTheta,
}

impl CenteringRule {
    /// The interval bounds for one width.
    ///
    /// # Errors
    /// Rejects widths outside the rule's feasible range (for the pivot rule
    /// also `theta = 0.5`, where the construction degenerates).
    pub fn bounds(self, delta: f64, theta: f64) -> Result<(f64, f64)> {
        match self {
            CenteringRule::SymmetricAboutHalf => {
                if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
                    return Err(Error::config(format!(
                        "width delta = {delta} must lie in (0, 1) for symmetric centering"
                    )));
                }
                Ok(((1.0 - delta) / 2.0, (1.0 + delta) / 2.0))
            }
            CenteringRule::PivotThroughTheta => {
                if theta == 0.5 {
                    return Err(Error::config(
                        "pivot centering is undefined at theta = 0.5; use the symmetric rule",
                    ));
                }
                if theta < 0.5 {
                    let theta1 = theta * (delta - theta) / (1.0 - 2.0 * theta);
                    let theta2 = theta1 + delta;
                    if !(theta1 > 0.0 && theta2 < 1.0) {
                        let lo = theta.min(1.0 - theta);
                        return Err(Error::config(format!(
                            "width delta = {delta} outside the feasible range ({lo}, {}) \
                             for pivot centering at theta = {theta}",
                            1.0 - lo
                        )));
                    }
                    Ok((theta1, theta2))
                } else {
                    let (a, b) = CenteringRule::PivotThroughTheta.bounds(delta, 1.0 - theta)?;
                    Ok((1.0 - b, 1.0 - a))
                }
            }
        }
    }
}

impl fmt::Display for CenteringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CenteringRule::SymmetricAboutHalf => write!(f, "symmetric"),
            CenteringRule::PivotThroughTheta => write!(f, "pivot"),
        }
    }
}

impl FromStr for CenteringRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(CenteringRule::SymmetricAboutHalf),
            "pivot" => Ok(CenteringRule::PivotThroughTheta),
            other => Err(Error::config(format!(
                "unknown centering rule '{other}' (expected 'symmetric' or 'pivot')"
            ))),
        }
    }
}

/// Power of both p-values at a fixed alternative, over interval widths.
///
/// For each `delta` the bounds come from the centering rule; grid points
/// whose interval does not contain `theta` are evaluated anyway and flagged
/// `null_side = true` rather than dropped.
///
/// # Errors
/// Rejects `theta` outside `(0, 1)`, infeasible widths under the chosen
/// rule, and empty or non-increasing grids.
pub fn power_vs_delta(
    n: u64,
    theta: f64,
    c: f64,
    level_t: f64,
    delta_grid: &[f64],
    centering: CenteringRule,
) -> Result<CurveSeries> {
    if !theta.is_finite() || theta <= 0.0 || theta >= 1.0 {
        return Err(Error::OutOfUnitRange {
            name: "theta",
            value: theta,
            range: "(0, 1)",
        });
    }
    let points: Vec<Result<(f64, f64, bool)>> = exec::map_indexed(delta_grid.len(), |i| {
        let delta = delta_grid[i];
        let (theta1, theta2) = centering.bounds(delta, theta)?;
        let problem = EquivProblem::new(n, theta1, theta2)?;
        let null_side = !(theta > theta1 && theta < theta2);
        Ok((
            pvalue::ump_cdf(&problem, theta, level_t)?,
            pvalue::rand2_cdf(&problem, theta, level_t, c)?,
            null_side,
        ))
    });
    let mut ump = Vec::with_capacity(delta_grid.len());
    let mut rand2 = Vec::with_capacity(delta_grid.len());
    let mut flags = Vec::with_capacity(delta_grid.len());
    for p in points {
        let (u, r, f) = p?;
        ump.push(u);
        rand2.push(r);
        flags.push(f);
    }
    let mut meta = SeriesMeta::new("power-vs-delta");
    meta.push("n", n);
    meta.push("theta", theta);
    meta.push("c", c);
    meta.push("level_t", level_t);
    meta.push("centering", centering);
    CurveSeries::new(
        meta,
        "delta",
        delta_grid.to_vec(),
        ump,
        rand2,
        Some(FlagColumn {
            label: "null_side".into(),
            values: flags,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pvalue::ump_cdf;
    use crate::series::SeriesMeta;

    // ===== power_vs_n =====

    #[test]
    fn power_vs_n_rejects_null_side_theta() {
        assert!(power_vs_n(0.25, 0.75, 0.2, 0.5, 0.05, 20, 30).is_err());
        assert!(power_vs_n(0.25, 0.75, 0.25, 0.5, 0.05, 20, 30).is_err());
        assert!(power_vs_n(0.25, 0.75, 0.5, 0.5, 0.05, 30, 20).is_err());
        assert!(power_vs_n(0.25, 0.75, 0.5, 0.5, 0.05, 0, 20).is_err());
    }

    #[test]
    fn power_vs_n_shape_and_monotone_case() {
        let s = power_vs_n(0.25, 0.75, 0.5, 0.5, 0.05, 20, 120).unwrap();
        assert_eq!(s.len(), 101);
        assert_eq!(s.x[0], 20.0);
        assert_eq!(s.x[100], 120.0);
        let report = detect_nonmonotone(&s);
        assert!(report.ump.is_empty(), "ump drops: {:?}", report.ump);
        assert!(report.rand2.is_empty(), "rand2 drops: {:?}", report.rand2);
    }

    // ===== detect_nonmonotone =====

    fn series_from(values: Vec<f64>) -> CurveSeries {
        let x: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        CurveSeries::new(
            SeriesMeta::new("test"),
            "n",
            x,
            values.clone(),
            values,
            None,
        )
        .unwrap()
    }

    #[test]
    fn detect_nonmonotone_finds_drops() {
        let s = series_from(vec![0.1, 0.2, 0.15, 0.3]);
        let report = detect_nonmonotone(&s);
        assert_eq!(report.ump.len(), 1);
        assert_eq!(report.ump[0].x, 2.0);
        assert!((report.ump[0].drop - 0.05).abs() <= 1e-15);
    }

    #[test]
    fn detect_nonmonotone_ignores_ties_and_monotone() {
        assert!(detect_nonmonotone(&series_from(vec![0.1, 0.1, 0.2])).ump.is_empty());
        assert!(detect_nonmonotone(&series_from(vec![0.1, 0.2, 0.3])).ump.is_empty());
        // A sub-tolerance wiggle is a tie, not a drop.
        assert!(detect_nonmonotone(&series_from(vec![0.2, 0.2 - 1e-14])).ump.is_empty());
    }

    // ===== cdf_curve =====

    #[test]
    fn cdf_curve_single_point() {
        let p = EquivProblem::new(50, 0.25, 0.75).unwrap();
        let s = cdf_curve(&p, 0.9, 0.5, &[0.5]).unwrap();
        assert_eq!(s.len(), 1);
        assert!((0.0..=1.0).contains(&s.ump[0]));
        assert!((0.0..=1.0).contains(&s.rand2[0]));
    }

    #[test]
    fn cdf_curve_rejects_bad_grid() {
        let p = EquivProblem::new(50, 0.25, 0.75).unwrap();
        assert!(cdf_curve(&p, 0.5, 0.5, &[]).is_err());
        assert!(cdf_curve(&p, 0.5, 0.5, &[0.5, 0.2]).is_err());
    }

    // ===== argmax =====

    #[test]
    fn argmax_rejects_bad_step() {
        let p = EquivProblem::new(50, 0.25, 0.75).unwrap();
        assert!(argmax_power_theta(&p, 0.5, 0.05, 0.0).is_err());
        assert!(argmax_power_theta(&p, 0.5, 0.05, 0.6).is_err());
    }

    #[test]
    fn symmetric_problem_has_symmetric_ump_power() {
        let p = EquivProblem::new(50, 0.25, 0.75).unwrap();
        for h in [0.05, 0.1, 0.15, 0.2] {
            let lo = ump_cdf(&p, 0.5 - h, 0.05).unwrap();
            let hi = ump_cdf(&p, 0.5 + h, 0.05).unwrap();
            assert!((lo - hi).abs() <= 1e-9, "h={h}: {lo} vs {hi}");
        }
    }

    #[test]
    fn argmax_reports_both_methods() {
        let p = EquivProblem::new(50, 0.25, 0.75).unwrap();
        let (ump, rand2) = argmax_power_theta(&p, 0.5, 0.05, 0.05).unwrap();
        assert_eq!(ump.method_tag, "UMP");
        assert_eq!(rand2.method_tag, "RAND2");
        assert!(ump.argmax_theta > 0.25 && ump.argmax_theta < 0.75);
        assert!(ump.max_power >= rand2.max_power - 1e-12);
    }

    // ===== centering rules =====

    #[test]
    fn symmetric_centering_hand_values() {
        let (a, b) = CenteringRule::SymmetricAboutHalf.bounds(0.5, 0.2).unwrap();
        assert_eq!(a, 0.25);
        assert_eq!(b, 0.75);
        assert!(CenteringRule::SymmetricAboutHalf.bounds(1.0, 0.2).is_err());
        assert!(CenteringRule::SymmetricAboutHalf.bounds(0.0, 0.2).is_err());
    }

    #[test]
    fn pivot_centering_hand_values() {
        // theta = 0.2, delta = 0.32: theta1 = 0.2 * 0.12 / 0.6 = 0.04.
        let (a, b) = CenteringRule::PivotThroughTheta.bounds(0.32, 0.2).unwrap();
        assert!((a - 0.04).abs() <= 1e-15);
        assert!((b - 0.36).abs() <= 1e-15);
        // Mirrored parameter gives mirrored bounds.
        let (am, bm) = CenteringRule::PivotThroughTheta.bounds(0.32, 0.8).unwrap();
        assert!((am - (1.0 - 0.36)).abs() <= 1e-15);
        assert!((bm - (1.0 - 0.04)).abs() <= 1e-15);
    }

    #[test]
    fn pivot_centering_feasible_range() {
        // Feasible widths are the open interval (theta, 1 - theta).
        assert!(CenteringRule::PivotThroughTheta.bounds(0.2, 0.2).is_err());
        assert!(CenteringRule::PivotThroughTheta.bounds(0.8, 0.2).is_err());
        assert!(CenteringRule::PivotThroughTheta.bounds(0.21, 0.2).is_ok());
        assert!(CenteringRule::PivotThroughTheta.bounds(0.79, 0.2).is_ok());
        assert!(CenteringRule::PivotThroughTheta.bounds(0.5, 0.5).is_err());
    }

    #[test]
    fn pivot_keeps_theta_interior() {
        for theta in [0.2f64, 0.3, 0.48, 0.7] {
            let lo = theta.min(1.0 - theta);
            for i in 1..20 {
                let delta = lo + (1.0 - 2.0 * lo) * i as f64 / 20.0;
                let (a, b) = CenteringRule::PivotThroughTheta.bounds(delta, theta).unwrap();
                assert!(a < theta && theta < b, "theta={theta}, delta={delta}");
                assert!((b - a - delta).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn centering_parses_and_displays() {
        assert_eq!(
            "symmetric".parse::<CenteringRule>().unwrap(),
            CenteringRule::SymmetricAboutHalf
        );
        assert_eq!(
            "pivot".parse::<CenteringRule>().unwrap(),
            CenteringRule::PivotThroughTheta
        );
        assert!("midpoint".parse::<CenteringRule>().is_err());
        assert_eq!(CenteringRule::SymmetricAboutHalf.to_string(), "symmetric");
    }

    // ===== power_vs_delta =====

    #[test]
    fn power_vs_delta_flags_null_side_points() {
        let s = power_vs_delta(
            50,
            0.2,
            0.5,
            0.05,
            &[0.3, 0.7],
            CenteringRule::SymmetricAboutHalf,
        )
        .unwrap();
        let flags = &s.flags.as_ref().unwrap().values;
        // delta = 0.3 -> (0.35, 0.65): theta = 0.2 is null-side.
        assert_eq!(flags, &[true, false]);
    }

    #[test]
    fn power_vs_delta_pivot_is_always_alternative() {
        let grid: Vec<f64> = (1..10).map(|i| 0.2 + 0.06 * i as f64).collect();
        let s = power_vs_delta(50, 0.2, 0.5, 0.05, &grid, CenteringRule::PivotThroughTheta).unwrap();
        assert!(s.flags.unwrap().values.iter().all(|&f| !f));
    }
}
