//! Cross-validation matrix behind the `verify` command.

use std::f64::consts::PI;
use std::time::Instant;

use walkmax::asymptotics::{
    abel_limit_estimate, finite_n_moment, finite_size_convergence, limit_constants,
    limiting_density, one_term_bounds, theta_identity_check, theta_sum, ThetaBranch,
};
use walkmax::closed_form::{first_passage_pmf, max_pmf, position_distribution, position_moments};
use walkmax::model::{
    enumerate_paths_oracle, joint_distribution_f64, marginal_max, marginal_position, JointTableIter,
};
use walkmax::monte_carlo::{chi_squared_max, run, SimConfig};
use walkmax::Result;

use crate::commands::log_grid;
use crate::envelope::{Check, Envelope};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

fn timed(f: impl FnOnce() -> Result<Check>) -> Result<Check> {
    let start = Instant::now();
    let check = f()?;
    Ok(check.timed(start.elapsed().as_secs_f64()))
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

pub fn oracle_equivalence(max_n: u64) -> Result<Check> {
    let mut mismatches = 0u32;
    for (n, table) in (1..=max_n).zip(JointTableIter::new()) {
        if table != enumerate_paths_oracle(n)? {
            mismatches += 1;
        }
    }
    Ok(Check::at_most(
        format!("recursion equals enumeration, n <= {max_n}"),
        mismatches.into(),
        0.0,
    ))
}

pub fn position_law(max_n: u64) -> Result<Check> {
    let mut mismatches = 0u32;
    for (n, table) in (1..=max_n).zip(JointTableIter::new()) {
        let dp = marginal_position(&table);
        let closed = position_distribution(n)?;
        if dp.iter().ne(closed.iter()) {
            mismatches += 1;
        }
    }
    Ok(Check::at_most(
        format!("position marginal equals binomial law, n <= {max_n}"),
        mismatches.into(),
        0.0,
    ))
}

/// Worst relative deviation of `E(S)/√n` and `Var(S)/n` from their limits.
pub fn position_moment_limits(n: u64) -> Result<Check> {
    let m = position_moments(n)?;
    let nf = n as f64;
    let mean_dev = (m.mean_f64() / nf.sqrt() / (2.0 / PI).sqrt() - 1.0).abs();
    let var_dev = (m.variance_f64() / nf / (1.0 - 2.0 / PI) - 1.0).abs();
    Ok(Check::at_most(
        format!("position moments near limits at n = {n}"),
        mean_dev.max(var_dev),
        0.01,
    ))
}

pub fn trig_vs_dp(max_n: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for (n, table) in (1..=max_n).zip(JointTableIter::new()) {
        for (a, p) in marginal_max(&table).iter() {
            worst = worst.max((max_pmf(n, a) - p.to_f64()).abs());
        }
    }
    Ok(Check::at_most(
        format!("trigonometric law equals exact recursion, N <= {max_n}"),
        worst,
        1e-12,
    ))
}

pub fn trig_vs_float_dp(n: u64) -> Result<Check> {
    let dist = joint_distribution_f64(n)?.marginal_max();
    let worst = dist
        .iter()
        .map(|(a, &q)| (max_pmf(n, a) - q).abs())
        .fold(0.0, f64::max);
    Ok(Check::at_most(
        format!("trigonometric law equals float recursion, N = {n}"),
        worst,
        1e-10,
    ))
}

pub fn constants() -> Result<Vec<Check>> {
    let start = Instant::now();
    let c = limit_constants()?;
    let secs = start.elapsed().as_secs_f64();
    Ok([
        ("mean constant", c.mean_max, 1.253314),
        ("second moment constant", c.second_moment_max, 1.831931),
        ("variance constant", c.var_max, 0.261130),
    ]
    .into_iter()
    .map(|(name, v, published)| {
        Check::at_most(
            format!("{name} vs {published}"),
            (v - published).abs(),
            5e-6,
        )
        .timed(secs)
    })
    .collect())
}

/// Relative deviation of the larger of the two scaled moments at `N`.
pub fn finite_moments(n: u64) -> Result<Vec<Check>> {
    let start = Instant::now();
    let m1 = finite_n_moment(n, 1)?.value;
    let m2 = finite_n_moment(n, 2)?.value;
    let secs = start.elapsed().as_secs_f64();
    let mean_dev = (m1 / 1.2533 - 1.0).abs();
    let var_dev = ((m2 - m1 * m1) / 0.26113 - 1.0).abs();
    Ok(vec![
        Check::at_most(
            format!("E(A)/sqrt(N) at N = {n}, relative"),
            mean_dev,
            0.005,
        )
        .timed(secs),
        Check::at_most(format!("Var(A)/N at N = {n}, relative"), var_dev, 0.02).timed(secs),
    ])
}

pub fn branch_agreement(gammas: &[f64]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for &g in gammas {
        let d = theta_sum(g, ThetaBranch::Direct)?.value;
        let r = theta_sum(g, ThetaBranch::Resummed)?.value;
        worst = worst.max((d - r).abs());
    }
    Ok(Check::at_most(
        "direct and resummed theta series agree",
        worst,
        1e-12,
    ))
}

/// Worst `residual / max(|lhs|, 1e−300)`, against the `1e−13` contract.
pub fn theta_identity(gammas: &[f64]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for &g in gammas {
        let r = theta_identity_check(g)?;
        worst = worst.max(r.residual / r.lhs.abs().max(1e-300));
    }
    Ok(Check::at_most(
        format!("theta identity on {} points", gammas.len()),
        worst,
        1e-13,
    ))
}

/// Worst excursion outside `[(1−α)T, T]`, relative to `T`; also checks `α ≤ 0.0056`.
pub fn one_term_bracket(gammas: &[f64]) -> Result<Check> {
    let mut worst: f64 = 0.0;
    for &g in gammas {
        let p = limiting_density(g)?;
        let b = one_term_bounds(g)?;
        let excursion = ((b.lower - p.density).max(p.density - b.upper)).max(0.0) / b.upper;
        worst = worst.max(excursion);
        if b.alpha > 0.0056 {
            worst = f64::INFINITY;
        }
    }
    Ok(Check::at_most(
        "one-term bounds bracket the density",
        worst,
        1e-15,
    ))
}

pub fn limit_law(gammas: &[f64]) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for &g in gammas {
        let p50 = finite_size_convergence(50, g)?;
        let p100 = finite_size_convergence(100, g)?;
        checks.push(Check::at_most(
            format!("finite-size gap at a = 50, gamma = {g}"),
            p50.gap,
            0.02,
        ));
        checks.push(Check::at_most(
            format!("gap ratio a = 100 over a = 50, gamma = {g}"),
            p100.gap / p50.gap,
            0.6,
        ));
    }
    Ok(checks)
}

pub fn monte_carlo(n: u64, trials: u64, seed: u64) -> Result<Vec<Check>> {
    let start = Instant::now();
    let config = SimConfig::new(n, trials, seed);
    let summary = run(config)?;
    let mut single = run(config.with_workers(1))?;
    single.config = summary.config;
    let secs = start.elapsed().as_secs_f64();
    let chi = chi_squared_max(&summary)?;
    let exact = walkmax::closed_form::max_distribution(n)?.mean();
    let z = (summary.mean_a - exact).abs() / summary.std_error_a();
    Ok(vec![
        Check::at_least(
            format!("chi-squared p-value, n = {n}, {trials} walks"),
            chi.p_value,
            1e-3,
        )
        .timed(secs),
        Check::at_most("simulated mean of A in standard errors", z, 4.0).timed(secs),
        Check::at_most(
            "identical across worker counts",
            flag(summary == single),
            0.0,
        )
        .timed(secs),
    ])
}

pub fn abel(grid: &[f64]) -> Result<Check> {
    let est = abel_limit_estimate(1, grid)?;
    Ok(Check::at_most(
        "Abel-extrapolated mean constant",
        (est.extrapolated - (PI / 2.0).sqrt()).abs(),
        1e-3,
    ))
}

pub fn first_passage() -> Result<Vec<Check>> {
    let start = Instant::now();
    let total: f64 = (1..=2000).map(|n| first_passage_pmf(n, 3)).sum();
    let secs = start.elapsed().as_secs_f64();
    Ok(vec![
        Check::at_least("first passage to 3 by step 2000", total, 0.98).timed(secs),
        Check::at_most(
            "first passage to 3 at step 3 minus 1/4",
            (first_passage_pmf(3, 3) - 0.25).abs(),
            1e-12,
        ),
    ])
}

pub const DUALITY_GAMMAS: [f64; 5] = [0.5, 0.8, 1.0, 1.25, 2.0];

pub fn cmd_verify(level: Level) -> Result<Envelope> {
    let full = level == Level::Full;
    let mut env = Envelope::new(
        "verify",
        &["name", "passed", "measured", "bound", "seconds"],
    )
    .param("level", format!("{level:?}").to_lowercase());
    let grid50 = log_grid(0.05, 20.0, 50);
    let mut checks = vec![
        timed(|| oracle_equivalence(if full { 16 } else { 12 }))?,
        timed(|| position_law(if full { 400 } else { 100 }))?,
        timed(|| position_moment_limits(10_000))?,
        timed(|| trig_vs_dp(if full { 64 } else { 40 }))?,
    ];
    if full {
        checks.push(timed(|| trig_vs_float_dp(500))?);
    }
    checks.extend(constants()?);
    if full {
        checks.extend(finite_moments(1_000_000)?);
    }
    checks.push(timed(|| branch_agreement(&DUALITY_GAMMAS))?);
    let identity_grid: &[f64] = if full { &grid50 } else { &DUALITY_GAMMAS };
    checks.push(timed(|| theta_identity(identity_grid))?);
    checks.push(timed(|| one_term_bracket(&grid50))?);
    if full {
        checks.extend(limit_law(&[0.5, 1.0, 2.0])?);
        checks.extend(monte_carlo(1000, 1_000_000, 20_240_601)?);
    } else {
        checks.extend(monte_carlo(100, 100_000, 20_240_601)?);
    }
    checks.push(timed(|| abel(&[0.9, 0.99, 0.999, 0.9999]))?);
    checks.extend(first_passage()?);
    for c in &checks {
        env.push_row(vec![
            c.name.as_str().into(),
            if c.passed { "true" } else { "false" }.into(),
            c.measured.into(),
            c.bound.into(),
            c.seconds.into(),
        ]);
    }
    env.checks = checks;
    Ok(env)
}
