//! Large-`n` behavior of `A_n`: limiting moments through the Abel-smoothed
//! limit, and the limiting density of `a·Q_N(a)` at fixed `γ = 2a²/(πN)`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::closed_form::{factorial_level_sum, gf_theta, max_distribution, max_pmf};
use crate::ddouble::{self, DoubleDouble};
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::quad;

/// Quadrature target for each of the two pieces of the moment integral.
const QUAD_TOL: f64 = 1e-13;
const QUAD_MAX_SEGMENTS: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentRoute {
    /// Closed form in terms of `∫₀^∞ b^{k−1}/cosh b db`.
    Integral,
    /// Extrapolated generating-function limit as `λ → 1⁻`.
    Abel,
    /// Direct summation of the finite-`N` law.
    FiniteN,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub k: u32,
    pub value: f64,
    pub route: MomentRoute,
    pub error_estimate: f64,
}

/// `Γ(k/2 + 1)`: a factorial for even `k`, `√π Π_{i<m}(i + ½)` with
/// `m = (k+1)/2` for odd `k`.
pub fn half_factorial(k: u32) -> f64 {
    if k.is_multiple_of(2) {
        (1..=k / 2).map(f64::from).product()
    } else {
        let m = k.div_ceil(2);
        PI.sqrt() * (0..m).map(|i| f64::from(i) + 0.5).product::<f64>()
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `∫₀^∞ b^{k−1}/cosh b db`, split at 1; the tail uses `b = 1 − ln u`, under
/// which `cosh(b)·u = (e + u²/e)/2`.
pub fn moment_integral(k: u32) -> Result<quad::QuadResult> {
    if k == 0 {
        return Err(Error::ZeroOrder);
    }
    let p = (k - 1) as i32;
    let head = quad::integrate(
        |b: f64| b.powi(p) / b.cosh(),
        0.0,
        1.0,
        QUAD_TOL,
        QUAD_MAX_SEGMENTS,
    )?;
    let tail = quad::integrate(
        |u: f64| {
            let b = 1.0 - u.ln();
            2.0 * b.powi(p) / (E + u * u / E)
        },
        0.0,
        1.0,
        QUAD_TOL,
        QUAD_MAX_SEGMENTS,
    )?;
    Ok(quad::QuadResult {
        value: head.value + tail.value,
        error: head.error + tail.error,
        intervals: head.intervals + tail.intervals,
    })
}

/// `lim* n^{−k/2} E[C(A_n,k)] = ∫₀^∞ b^{k−1}/cosh b db / (2^{k/2} Γ(k/2+1) (k−1)!)`.
pub fn limit_factorial_moment(k: u32) -> Result<MomentReport> {
    let int = moment_integral(k)?;
    let scale = 2f64.powf(f64::from(k) / 2.0) * half_factorial(k) * factorial(k - 1);
    Ok(MomentReport {
        k,
        value: int.value / scale,
        route: MomentRoute::Integral,
        error_estimate: int.error / scale,
    })
}

/// `lim* n^{−k/2} E[A_n^k] = k ∫₀^∞ b^{k−1}/cosh b db / (2^{k/2} Γ(k/2+1))`.
pub fn limit_moment(k: u32) -> Result<MomentReport> {
    let int = moment_integral(k)?;
    let scale = f64::from(k) / (2f64.powf(f64::from(k) / 2.0) * half_factorial(k));
    Ok(MomentReport {
        k,
        value: int.value * scale,
        route: MomentRoute::Integral,
        error_estimate: int.error * scale,
    })
}

/// Limiting constants for `S_n` and `A_n` side by side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    /// `lim E(S_n)/√n = √(2/π)`.
    pub mean_position: f64,
    /// `lim Var(S_n)/n = 1 − 2/π`.
    pub var_position: f64,
    /// `lim* E(A_n)/√n = √(π/2)`.
    pub mean_max: f64,
    /// `lim* E(A_n²)/n = 2G`.
    pub second_moment_max: f64,
    /// `lim* Var(A_n)/n = 2G − π/2`.
    pub var_max: f64,
}

pub fn limit_constants() -> Result<LimitConstants> {
    let m1 = limit_moment(1)?.value;
    let m2 = limit_moment(2)?.value;
    Ok(LimitConstants {
        mean_position: (2.0 / PI).sqrt(),
        var_position: 1.0 - 2.0 / PI,
        mean_max: m1,
        second_moment_max: m2,
        var_max: m2 - m1 * m1,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbelPoint {
    pub lambda: f64,
    /// `t = −ln θ`, the extrapolation variable.
    pub t: f64,
    pub estimate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbelEstimate {
    pub k: u32,
    pub points: Vec<AbelPoint>,
    pub extrapolated: f64,
    pub error_estimate: f64,
    /// Integral-route value of the same limit.
    pub reference: f64,
}

impl AbelEstimate {
    pub fn deviation(&self) -> f64 {
        (self.extrapolated - self.reference).abs()
    }
}

/// Largest tolerated change between the last two Richardson diagonals.
const ABEL_DIVERGENCE: f64 = 1e-2;

/// Evaluates `((1−λ)/λ)^{k/2} Σ_a C(a−1,k−1) 2/(θ^a+θ^−a) / Γ(k/2+1)` on a
/// grid approaching 1 and extrapolates to `λ = 1`.
///
/// With `θ = e^{−t}` the summand is `C(a−1,k−1)/cosh(at)` and
/// `(1−λ)/λ = cosh t − 1`; the estimate is smooth in `t`, so the grid values
/// are extrapolated to `t = 0` by Neville's polynomial scheme.
pub fn abel_limit_estimate(k: u32, lambda_grid: &[f64]) -> Result<AbelEstimate> {
    if k == 0 {
        return Err(Error::ZeroOrder);
    }
    if lambda_grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least two points".into()));
    }
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid(
            "grid must be strictly increasing".into(),
        ));
    }
    let points = lambda_grid
        .iter()
        .map(|&lambda| {
            let g = gf_theta(lambda)?;
            let sum = factorial_level_sum(g.theta, u64::from(k), None);
            let prefactor = ((1.0 - lambda) / lambda).powf(f64::from(k) / 2.0);
            Ok(AbelPoint {
                lambda,
                t: -g.theta.ln(),
                estimate: prefactor * sum.value / half_factorial(k),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // Neville table evaluated at t = 0; keep the last two diagonals.
    let mut column: Vec<f64> = points.iter().map(|p| p.estimate).collect();
    let ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    let mut previous = *column.last().expect("non-empty");
    for level in 1..column.len() {
        previous = *column.last().expect("non-empty");
        for i in (level..column.len()).rev() {
            let (ti, tj) = (ts[i], ts[i - level]);
            column[i] = (ti * column[i - 1] - tj * column[i]) / (ti - tj);
        }
    }
    let extrapolated = *column.last().expect("non-empty");
    let error_estimate = (extrapolated - previous).abs();
    if !extrapolated.is_finite() || error_estimate > ABEL_DIVERGENCE {
        return Err(Error::ExtrapolationDiverged(error_estimate));
    }
    Ok(AbelEstimate {
        k,
        points,
        extrapolated,
        error_estimate,
        reference: limit_factorial_moment(k)?.value,
    })
}

/// `E[A_N^k] / N^{k/2}` from the trigonometric law at finite `N`.
pub fn finite_n_moment(n: u64, k: u32) -> Result<MomentReport> {
    let dist = max_distribution(n)?;
    let scale = (n as f64).powf(f64::from(k) / 2.0);
    Ok(MomentReport {
        k,
        value: dist.raw_moment(k as i32) / scale,
        route: MomentRoute::FiniteN,
        error_estimate: dist.tail_bound() * (n as f64).powi(k as i32) / scale,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaBranch {
    /// `Σ_j (−1)^j ((2j+1)/γ) e^{−π(2j+1)²/4γ}`: fast for small `γ`.
    Direct,
    /// `√γ Σ_j (−1)^j (2j+1) e^{−πγ(2j+1)²/4}`: fast for large `γ`.
    Resummed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSum {
    pub value: f64,
    pub terms: u32,
    /// Magnitude of the first omitted term.
    pub truncation_bound: f64,
}

const SERIES_MAX_TERMS: u32 = 100_000;

/// One-sided theta sum `Σ_{j≥0}` on the requested branch, stopped when the
/// next term drops below `1e−16` of the partial sum.
pub fn theta_sum(gamma: f64, branch: ThetaBranch) -> Result<SeriesSum> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let term = |j: u32| -> f64 {
        let odd = f64::from(2 * j + 1);
        match branch {
            ThetaBranch::Direct => odd / gamma * (-PI / (4.0 * gamma) * odd * odd).exp(),
            ThetaBranch::Resummed => gamma.sqrt() * odd * (-PI * gamma / 4.0 * odd * odd).exp(),
        }
    };
    let mut acc = KahanSum::new();
    let mut j = 0u32;
    let mut next = term(0);
    loop {
        acc.add(if j.is_multiple_of(2) { next } else { -next });
        j += 1;
        next = term(j);
        let past_peak = next < term(j - 1);
        if past_peak && (next == 0.0 || next < 1e-16 * acc.value().abs()) {
            break;
        }
        if j >= SERIES_MAX_TERMS {
            break;
        }
    }
    Ok(SeriesSum {
        value: acc.value(),
        terms: j,
        truncation_bound: next,
    })
}

/// Limiting value of `a·Q_N(a)` as `a, N → ∞` with `2a²/(πN) → γ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub gamma: f64,
    /// The one-sided theta sum `Σ_{j≥0}` on the selected branch.
    pub theta_sum: f64,
    /// `lim a·Q_N(a) = 2 · theta_sum`: the trigonometric sums for `Q_N(a)` run
    /// over `j` and its mirror `b−1−j`, and both ends contribute the same
    /// Gaussian limit.
    pub density: f64,
    pub branch: ThetaBranch,
    pub terms_used: u32,
    /// Bound on the truncation error of `density`.
    pub truncation_bound: f64,
}

/// Branch switches at the self-dual point `γ = 1`.
pub fn limiting_density(gamma: f64) -> Result<ThetaPoint> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let branch = if gamma < 1.0 {
        ThetaBranch::Direct
    } else {
        ThetaBranch::Resummed
    };
    let s = theta_sum(gamma, branch)?;
    Ok(ThetaPoint {
        gamma,
        theta_sum: s.value,
        density: 2.0 * s.value,
        branch,
        terms_used: s.terms,
        truncation_bound: 2.0 * s.truncation_bound,
    })
}

/// One-term bracket `(1−α)·T ≤ lim a·Q_N(a) ≤ T`, in density units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneTermBounds {
    pub lower: f64,
    pub upper: f64,
    /// `3e^{−2π/γ}` for `γ ≤ 1`, `3e^{−2πγ}` for `γ ≥ 1`; at most `3e^{−2π}`.
    pub alpha: f64,
}

pub fn one_term_bounds(gamma: f64) -> Result<OneTermBounds> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let (upper, alpha) = if gamma <= 1.0 {
        (
            2.0 / gamma * (-PI / (4.0 * gamma)).exp(),
            3.0 * (-2.0 * PI / gamma).exp(),
        )
    } else {
        (
            2.0 * gamma.sqrt() * (-PI * gamma / 4.0).exp(),
            3.0 * (-2.0 * PI * gamma).exp(),
        )
    };
    Ok(OneTermBounds {
        lower: (1.0 - alpha) * upper,
        upper,
        alpha,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaResidual {
    pub gamma: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|`, computed before rounding either side to `f64`.
    pub residual: f64,
    pub lhs_terms: u32,
    pub rhs_terms: u32,
}

impl ThetaResidual {
    /// `residual ≤ 1e−13 · max(|lhs|, 1e−300)`.
    pub fn within_contract(&self) -> bool {
        self.residual <= 1e-13 * self.lhs.abs().max(1e-300)
    }
}

/// Two-sided sum `Σ_{n∈ℤ} (−1)^n (n+½) e^{−c(n+½)²}` in double-double; the
/// terms for `n` and `−1−n` coincide, so it is twice the sum over `n ≥ 0`.
fn bilateral_half_odd_sum(c: DoubleDouble) -> (DoubleDouble, u32) {
    let mut acc = DoubleDouble::ZERO;
    let mut n = 0u32;
    loop {
        let x = f64::from(n) + 0.5;
        let term = (-(c.mul_f64(x * x))).exp().mul_f64(x);
        acc = if n.is_multiple_of(2) {
            acc + term
        } else {
            acc - term
        };
        n += 1;
        let peak_passed = f64::from(n) + 0.5 > (0.5 / c.hi()).sqrt();
        if peak_passed && (term.hi() == 0.0 || term.hi() < 1e-34 * acc.abs().hi()) {
            break;
        }
        if n >= SERIES_MAX_TERMS {
            break;
        }
    }
    (acc.mul_f64(2.0), n)
}

/// Checks `γ^{3/2} Σ_n (−1)^n (n+½) e^{−πγ(n+½)²} = Σ_k (−1)^k (k+½) e^{−(π/γ)(k+½)²}`,
/// both sides summed over all integers in double-double arithmetic.
pub fn theta_identity_check(gamma: f64) -> Result<ThetaResidual> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::GammaOutOfRange(gamma));
    }
    let (lhs_sum, lhs_terms) = bilateral_half_odd_sum(ddouble::PI.mul_f64(gamma));
    let (rhs, rhs_terms) = bilateral_half_odd_sum(ddouble::PI.div_f64(gamma));
    let lhs = lhs_sum * DoubleDouble::sqrt_f64(gamma).mul_f64(gamma);
    Ok(ThetaResidual {
        gamma,
        lhs: lhs.to_f64(),
        rhs: rhs.to_f64(),
        residual: (lhs - rhs).abs().to_f64(),
        lhs_terms,
        rhs_terms,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteSizePoint {
    pub a: u64,
    pub gamma: f64,
    /// Step count `round(2a²/(πγ))`, raised by one when needed so `N ≡ a (mod 2)`.
    pub n: u64,
    /// `a·Q_N(a)`.
    pub finite: f64,
    pub limit: f64,
    pub gap: f64,
}

/// Compares `a·Q_N(a)` at `N ≈ 2a²/(πγ)` with its limit.
pub fn finite_size_convergence(a: u64, gamma: f64) -> Result<FiniteSizePoint> {
    if a < 2 {
        return Err(Error::LevelTooSmall { a, min: 2 });
    }
    let limit = limiting_density(gamma)?.density;
    let mut n = (2.0 * (a as f64).powi(2) / (PI * gamma)).round() as u64;
    if (n + a) % 2 == 1 {
        n += 1;
    }
    if n < a {
        return Err(Error::StepsBelowLevel { a, gamma, n });
    }
    let finite = a as f64 * max_pmf(n, a);
    Ok(FiniteSizePoint {
        a,
        gamma,
        n,
        finite,
        limit,
        gap: (finite - limit).abs(),
    })
}

/// `√(π/2)`, the mean constant of the maximum.
pub const MEAN_MAX_CONSTANT: f64 = 1.2533141373155002;

/// Catalan's constant.
pub const CATALAN: f64 = 0.915_965_594_177_219_015_054_603_514_932_384_110_774;
