use std::time::Instant;

use walkmax::asymptotics::{
    limit_constants, limit_moment, limiting_density, one_term_bounds, ThetaBranch,
};
use walkmax::closed_form::max_distribution;
use walkmax::model::{
    joint_distribution_capped, joint_distribution_f64, marginal_max, marginal_position,
    EXACT_MAX_STEPS,
};
use walkmax::monte_carlo::{chi_squared_max, histogram_rows, run, SimConfig};
use walkmax::{DyadicProb, Error, Result};

use crate::envelope::{Cell, Check, Envelope};

/// Largest `N` accepted by the trigonometric route.
pub const TRIG_MAX_STEPS: u64 = 10_000_000;

fn exact_cells(p: &DyadicProb) -> [Cell; 3] {
    [
        Cell::Text(p.numerator().to_string()),
        Cell::Int(p.log2_denominator()),
        Cell::Float(p.to_f64()),
    ]
}

fn fraction(p: &DyadicProb) -> Cell {
    Cell::Text(p.to_string())
}

/// Joint law and both marginals after `n` steps.
pub fn cmd_dist(n: u64, float: bool) -> Result<Envelope> {
    let mut env = Envelope::new(
        "dist",
        &[
            "table",
            "n",
            "x",
            "a",
            "fraction",
            "numerator",
            "log2_denominator",
            "float_value",
        ],
    )
    .param("n", n)
    .param("float", float);
    if float {
        let t = joint_distribution_f64(n)?;
        let mut pos = vec![0.0; n as usize + 1];
        for a in 1..=n {
            for x in (n % 2..=a).step_by(2) {
                let p = t.get(x, a);
                if p != 0.0 {
                    pos[x as usize] += p;
                    env.push_row(float_row("joint", n, Some(x), Some(a), p));
                }
            }
        }
        for (x, &p) in pos.iter().enumerate().filter(|(_, &p)| p != 0.0) {
            env.push_row(float_row("position", n, Some(x as u64), None, p));
        }
        for (a, &p) in t.marginal_max().iter().filter(|(_, &p)| p != 0.0) {
            env.push_row(float_row("max", n, None, Some(a), p));
        }
        env.checks.push(Check::at_most(
            "normalization",
            (t.total() - 1.0).abs(),
            1e-12,
        ));
        return Ok(env);
    }
    let t = joint_distribution_capped(n, EXACT_MAX_STEPS)?;
    let mut rows: Vec<(&str, Option<u64>, Option<u64>, DyadicProb)> = t
        .entries()
        .map(|((x, a), p)| ("joint", Some(x), Some(a), p))
        .collect();
    let pos = marginal_position(&t);
    rows.extend(
        pos.iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(x, p)| ("position", Some(x), None, p.clone())),
    );
    let max = marginal_max(&t);
    rows.extend(
        max.iter()
            .filter(|(_, p)| !p.is_zero())
            .map(|(a, p)| ("max", None, Some(a), p.clone())),
    );
    for (table, x, a, p) in rows {
        let mut row = vec![
            Cell::from(table),
            Cell::Int(n),
            x.into(),
            a.into(),
            fraction(&p),
        ];
        row.extend(exact_cells(&p));
        env.push_row(row);
    }
    env.checks.push(Check::at_most(
        "normalization",
        if t.total() == DyadicProb::one() {
            0.0
        } else {
            1.0
        },
        0.0,
    ));
    Ok(env)
}

fn float_row(table: &str, n: u64, x: Option<u64>, a: Option<u64>, p: f64) -> Vec<Cell> {
    vec![
        table.into(),
        Cell::Int(n),
        x.into(),
        a.into(),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Float(p),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Route {
    Dp,
    Trig,
}

/// `Q_N(·)` by the dynamic program or the trigonometric sum.
pub fn cmd_maxdist(n: u64, route: Route, float: bool) -> Result<Envelope> {
    let mut env = Envelope::new(
        "maxdist",
        &[
            "N",
            "a",
            "Q",
            "route",
            "fraction",
            "numerator",
            "log2_denominator",
        ],
    )
    .param("n", n)
    .param("route", format!("{route:?}").to_lowercase())
    .param("float", float);
    let total = match (route, float) {
        (Route::Trig, _) => {
            if n > TRIG_MAX_STEPS {
                return Err(Error::ExactCap {
                    n,
                    cap: TRIG_MAX_STEPS,
                });
            }
            let dist = max_distribution(n)?;
            for (a, &q) in dist.iter() {
                env.push_row(vec![
                    Cell::Int(n),
                    Cell::Int(a),
                    Cell::Float(q),
                    "trig".into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            env.metric("tail_bound", dist.tail_bound());
            dist.total()
        }
        (Route::Dp, true) => {
            let dist = joint_distribution_f64(n)?.marginal_max();
            for (a, &q) in dist.iter() {
                env.push_row(vec![
                    Cell::Int(n),
                    Cell::Int(a),
                    Cell::Float(q),
                    "dp".into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                ]);
            }
            dist.total()
        }
        (Route::Dp, false) => {
            let dist = marginal_max(&joint_distribution_capped(n, EXACT_MAX_STEPS)?);
            for (a, p) in dist.iter() {
                env.push_row(vec![
                    Cell::Int(n),
                    Cell::Int(a),
                    Cell::Float(p.to_f64()),
                    "dp".into(),
                    fraction(p),
                    Cell::Text(p.numerator().to_string()),
                    Cell::Int(p.log2_denominator()),
                ]);
            }
            dist.total().to_f64()
        }
    };
    env.metric("total", total);
    env.checks
        .push(Check::at_most("normalization", (total - 1.0).abs(), 1e-10));
    Ok(env)
}

/// Published values the constants table is compared against, to 5 decimals.
const PUBLISHED: [(&str, f64); 5] = [
    ("mean_position", 0.797885),
    ("var_position", 0.363380),
    ("mean_max", 1.253314),
    ("second_moment_max", 1.831931),
    ("var_max", 0.261130),
];

/// Limiting moment constants of `S_n` and `A_n`.
pub fn cmd_constants() -> Result<Envelope> {
    let start = Instant::now();
    let c = limit_constants()?;
    let m1 = limit_moment(1)?;
    let m2 = limit_moment(2)?;
    let mut env = Envelope::new("constants", &["name", "value", "route", "error_estimate"]);
    let values = [
        (c.mean_position, "closed_form", 0.0),
        (c.var_position, "closed_form", 0.0),
        (c.mean_max, "quadrature", m1.error_estimate),
        (c.second_moment_max, "quadrature", m2.error_estimate),
        (
            c.var_max,
            "quadrature",
            m2.error_estimate + 2.0 * c.mean_max * m1.error_estimate,
        ),
    ];
    let elapsed = start.elapsed().as_secs_f64();
    for ((name, published), (value, route, err)) in PUBLISHED.iter().zip(values) {
        env.push_row(vec![(*name).into(), value.into(), route.into(), err.into()]);
        env.checks.push(
            Check::at_most(
                format!("{name} matches {published}"),
                (value - published).abs(),
                5e-6,
            )
            .timed(elapsed),
        );
    }
    Ok(env)
}

/// Log-spaced grid of `steps` points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (steps - 1) as f64;
    (0..steps).map(|i| lo * (ratio * i as f64).exp()).collect()
}

/// Limiting density of `a·Q_N(a)` on a grid of `γ`, with one-term bounds.
pub fn cmd_density(gammas: &[f64]) -> Result<Envelope> {
    let mut env = Envelope::new(
        "density",
        &[
            "gamma",
            "theta_sum",
            "density",
            "branch",
            "lower_bound",
            "upper_bound",
            "alpha",
            "terms",
        ],
    )
    .param("points", gammas.len());
    let mut worst: f64 = 0.0;
    for &g in gammas {
        let p = limiting_density(g)?;
        let b = one_term_bounds(g)?;
        let branch = match p.branch {
            ThetaBranch::Direct => "direct",
            ThetaBranch::Resummed => "resummed",
        };
        // Relative excursion outside the bracket, zero when inside.
        let excursion = ((b.lower - p.density).max(p.density - b.upper)).max(0.0) / b.upper;
        worst = worst.max(excursion);
        env.push_row(vec![
            g.into(),
            p.theta_sum.into(),
            p.density.into(),
            branch.into(),
            b.lower.into(),
            b.upper.into(),
            b.alpha.into(),
            u64::from(p.terms_used).into(),
        ]);
    }
    env.checks
        .push(Check::at_most("bounds bracket density", worst, 1e-15));
    Ok(env)
}

/// Simulation summary with a histogram of the maximum against its exact law.
pub fn cmd_simulate(n: u64, trials: u64, seed: u64, workers: usize) -> Result<Envelope> {
    let summary = run(SimConfig::new(n, trials, seed).with_workers(workers))?;
    let mut env = Envelope::new(
        "simulate",
        &["a", "count", "empirical_prob", "exact_prob", "z_score"],
    )
    .param("n", n)
    .param("trials", trials)
    .param("seed", seed);
    for r in histogram_rows(&summary)? {
        env.push_row(vec![
            r.a.into(),
            r.count.into(),
            r.empirical_prob.into(),
            r.exact_prob.into(),
            r.z_score.into(),
        ]);
    }
    env.metric("mean_s", summary.mean_s);
    env.metric("var_s", summary.var_s);
    env.metric("mean_a", summary.mean_a);
    env.metric("var_a", summary.var_a);
    if let (Some(s), Some(a)) = (summary.ci_halfwidth_s, summary.ci_halfwidth_a) {
        env.metric("ci99_halfwidth_s", s);
        env.metric("ci99_halfwidth_a", a);
    }
    let chi = chi_squared_max(&summary)?;
    env.metric("chi_squared", chi.statistic);
    env.metric("chi_squared_dof", chi.dof as f64);
    env.metric("chi_squared_p", chi.p_value);
    let exact_mean = max_distribution(n)?.mean();
    env.metric("exact_mean_a", exact_mean);
    env.checks
        .push(Check::at_least("chi-squared p-value", chi.p_value, 1e-3));
    let se = summary.std_error_a();
    let z = if se > 0.0 {
        (summary.mean_a - exact_mean).abs() / se
    } else if (summary.mean_a - exact_mean).abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY
    };
    env.checks
        .push(Check::at_most("mean of A in standard errors", z, 4.0));
    Ok(env)
}
