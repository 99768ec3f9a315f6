//! Closed-form evaluators: the position law, generating functions in λ, and
//! the trigonometric extraction of `Q_N(a) = P{A_N = a}`.
//!
//! Generating functions are parameterized by the root `θ ∈ (0,1)` of
//! `u² − 2u/λ + 1 = 0`. The recurring kernel is
//! `1/(θ^m + θ^−m) = θ^m / (1 + θ^{2m})`, whose `λ^n` coefficient has the
//! finite trigonometric form evaluated by [`sech_coef`].

use std::f64::consts::PI;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicProb;
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::model::{MaxDist, PosDist};

/// Default target for truncated sums over levels.
pub const TAIL_TARGET: f64 = 1e-14;

/// The root pair `θ < 1 < 1/θ` attached to a generating-function argument λ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GfPoint {
    pub lambda: f64,
    pub theta: f64,
    pub theta_inv: f64,
}

/// `λ^n` coefficient of `1/(θ^a + θ^−a)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigCoef {
    pub n: u64,
    pub a: u64,
    pub value: f64,
}

/// A truncated series over levels with a bound on what was dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncated {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: u64,
}

/// Exact mean and variance of `S_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionMoments {
    pub n: u64,
    pub mean: BigRational,
    pub variance: BigRational,
}

impl PositionMoments {
    pub fn mean_f64(&self) -> f64 {
        self.mean.to_f64().unwrap_or(f64::NAN)
    }

    pub fn variance_f64(&self) -> f64 {
        self.variance.to_f64().unwrap_or(f64::NAN)
    }
}

pub(crate) fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// `P{S_n = x}`: `C(2m,m)/2^{2m}` at the origin, `2C(2m,m−y)/2^{2m}` at
/// `x = 2y > 0`, and `C(2m+1,m−y)/2^{2m}` at `x = 2y+1`.
pub fn position_pmf(n: u64, x: u64) -> Result<DyadicProb> {
    if n == 0 {
        return Err(Error::ZeroSteps(n));
    }
    if x > n || x % 2 != n % 2 {
        return Ok(DyadicProb::zero());
    }
    let m = n / 2;
    let y = x / 2;
    let (num, d) = if n.is_multiple_of(2) {
        let c = binomial(n, m - y);
        (if x == 0 { c } else { c << 1u32 }, n)
    } else {
        (binomial(n, m - y), n - 1)
    };
    Ok(DyadicProb::from_parts(num, d))
}

/// The whole position law, built from one row of binomial coefficients.
pub fn position_distribution(n: u64) -> Result<PosDist> {
    if n == 0 {
        return Err(Error::ZeroSteps(n));
    }
    let mut row = Vec::with_capacity(n as usize + 1);
    let mut c = BigUint::one();
    for k in 0..=n {
        row.push(c.clone());
        c = c * (n - k) / (k + 1);
    }
    let m = n / 2;
    let pmf = (0..=n)
        .map(|x| {
            if x % 2 != n % 2 {
                return DyadicProb::zero();
            }
            let c = row[(m - x / 2) as usize].clone();
            if n % 2 == 1 {
                DyadicProb::from_parts(c, n - 1)
            } else if x == 0 {
                DyadicProb::from_parts(c, n)
            } else {
                DyadicProb::from_parts(c, n - 1)
            }
        })
        .collect();
    Ok(PosDist::from_pmf(n, pmf))
}

/// Exact mean and variance of `S_n` by direct summation of the position law.
pub fn position_moments(n: u64) -> Result<PositionMoments> {
    let dist = position_distribution(n)?;
    let (mut first, mut second) = (BigUint::zero(), BigUint::zero());
    for (x, p) in dist.iter().filter(|(_, p)| !p.is_zero()) {
        let w = p.numerator_over(n);
        second += &w * (x * x);
        first += w * x;
    }
    let den = BigInt::one() << n;
    let mean = BigRational::new(first.into(), den.clone());
    let second = BigRational::new(second.into(), den);
    let variance = second - &mean * &mean;
    Ok(PositionMoments { n, mean, variance })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::LambdaOutOfRange(lambda))
    }
}

/// `θ = (1 − √(1−λ²))/λ`, evaluated as `λ/(1 + √(1−λ²))` to avoid
/// cancellation at small λ.
pub fn gf_theta(lambda: f64) -> Result<GfPoint> {
    check_lambda(lambda)?;
    let root = ((1.0 - lambda) * (1.0 + lambda)).sqrt();
    Ok(GfPoint {
        lambda,
        theta: lambda / (1.0 + root),
        theta_inv: (1.0 + root) / lambda,
    })
}

/// `1/(θ^m + θ^−m)`, computed without forming `θ^−m`.
pub(crate) fn inv_theta_sum(theta: f64, m: u64) -> f64 {
    let tm = theta.powf(m as f64);
    tm / (1.0 + tm * tm)
}

/// `Σ_n λ^n P_n(a,a) = (4/λ)/(θ^{a+1} + θ^−(a+1))`.
pub fn gf_hit_own_max(lambda: f64, a: u64) -> Result<f64> {
    if a == 0 {
        return Err(Error::ZeroLevel(a));
    }
    let g = gf_theta(lambda)?;
    Ok(4.0 / lambda * inv_theta_sum(g.theta, a + 1))
}

/// `Σ_n λ^n Q_n(a)`, from
/// `(1−λ) Σ_n λ^n Q_n(a) = 2/(θ^a+θ^−a) − 2/(θ^{a+1}+θ^−(a+1))`.
pub fn gf_max_marginal(lambda: f64, a: u64) -> Result<f64> {
    if a == 0 {
        return Err(Error::ZeroLevel(a));
    }
    let g = gf_theta(lambda)?;
    let diff = 2.0 * (inv_theta_sum(g.theta, a) - inv_theta_sum(g.theta, a + 1));
    Ok(diff / (1.0 - lambda))
}

fn default_levels(theta: f64, target: f64) -> u64 {
    (target.ln() / theta.ln()).ceil().max(1.0) as u64
}

/// `Q(λ,z) = Σ_{n,a} λ^n z^a Q_n(a)
///         = λ/(1−λ) − (1−z)/(1−λ) Σ_{a≥1} z^{a−1} 2/(θ^a+θ^−a)`,
/// summed to `a_max` (default: where `θ^a` drops below [`TAIL_TARGET`]).
pub fn gf_double_q(lambda: f64, z: f64, a_max: Option<u64>) -> Result<Truncated> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::ZOutOfRange(z));
    }
    let g = gf_theta(lambda)?;
    let a_max = a_max.unwrap_or_else(|| default_levels(g.theta, TAIL_TARGET));
    let mut acc = KahanSum::new();
    let mut zp = 1.0;
    for a in 1..=a_max {
        acc.add(zp * 2.0 * inv_theta_sum(g.theta, a));
        zp *= z;
    }
    let scale = (1.0 - z) / (1.0 - lambda);
    let r = z * g.theta;
    let tail = if scale > 0.0 && r < 1.0 {
        2.0 * g.theta * r.powf(a_max as f64) / (1.0 - r) * scale
    } else {
        0.0
    };
    Ok(Truncated {
        value: lambda / (1.0 - lambda) - scale * acc.value(),
        tail_bound: tail,
        terms: a_max,
    })
}

/// `C(a, j)` in floating point.
fn binomial_f64(a: u64, j: u64) -> f64 {
    if j > a {
        return 0.0;
    }
    (0..j).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64)
}

/// `Σ_{a≥1} C(a−1,k−1) 2/(θ^a+θ^−a)` with its tail bound. With no explicit
/// cutoff the sum runs until the tail bound drops below `1e−16` of the
/// partial sum.
pub(crate) fn factorial_level_sum(theta: f64, k: u64, a_max: Option<u64>) -> Truncated {
    let j = k - 1;
    // Majorant terms C(b−1,j)·2θ^b have ratio θ·b/(b−j), decreasing in b.
    let tail_after = |a: u64| -> f64 {
        let next = a + 1;
        if next <= j {
            return f64::INFINITY;
        }
        let ratio = theta * next as f64 / (next - j) as f64;
        if ratio >= 1.0 {
            return f64::INFINITY;
        }
        2.0 * binomial_f64(a, j) * theta.powf(next as f64) / (1.0 - ratio)
    };
    let mut acc = KahanSum::new();
    let mut a = 0u64;
    loop {
        a += 1;
        acc.add(binomial_f64(a - 1, j) * 2.0 * inv_theta_sum(theta, a));
        match a_max {
            Some(m) if a >= m => break,
            Some(_) => {}
            None => {
                let tail = tail_after(a);
                if tail.is_finite() && tail <= 1e-16 * acc.value().abs() {
                    break;
                }
            }
        }
    }
    Truncated {
        value: acc.value(),
        tail_bound: tail_after(a),
        terms: a,
    }
}

/// `Σ_n λ^n E[C(A_n,k)] = (1/(1−λ)) Σ_{a≥1} C(a−1,k−1) 2/(θ^a+θ^−a)`,
/// by summation by parts against `(1−λ) Σ_n λ^n Q_n(a)`.
pub fn factorial_moment_gf(lambda: f64, k: u64, a_max: Option<u64>) -> Result<Truncated> {
    if k == 0 {
        return Err(Error::ZeroOrder);
    }
    let g = gf_theta(lambda)?;
    let t = factorial_level_sum(g.theta, k, a_max);
    Ok(Truncated {
        value: t.value / (1.0 - lambda),
        tail_bound: t.tail_bound / (1.0 - lambda),
        terms: t.terms,
    })
}

/// `cos^m(φ_j)` with `φ_j = π(2j+1)/(2b)`, through logarithms so large `m`
/// cannot underflow term by term. `cos^0 = 1`, including at `φ = π/2`.
fn cos_pow(j: u64, b: u64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let odd = 2 * j + 1;
    if odd == b {
        return 0.0;
    }
    // |cos φ| = cos ψ with ψ = min(φ, π − φ).
    let mirrored = odd.min(2 * b - odd);
    let psi = PI * mirrored as f64 / (2 * b) as f64;
    let half = (0.5 * psi).sin();
    let mag = (m as f64 * (-2.0 * half * half).ln_1p()).exp();
    if odd > b && m % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// `λ^n` coefficient of `1/(θ^a + θ^−a)`:
/// `(1/2a) Σ_{j=0}^{a−1} (−1)^j sin(π(2j+1)/2a) cos^{n−1}(π(2j+1)/2a)`,
/// zero whenever `n + a` is odd.
pub fn sech_coef(n: u64, a: u64) -> TrigCoef {
    let value = if a == 0 {
        if n == 0 {
            0.5
        } else {
            0.0
        }
    } else if n == 0 || (n + a) % 2 == 1 {
        0.0
    } else {
        let mut acc = KahanSum::new();
        for j in 0..a {
            let phi = PI * (2 * j + 1) as f64 / (2 * a) as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc.add(sign * phi.sin() * cos_pow(j, a, n - 1));
        }
        acc.value() / (2 * a) as f64
    };
    TrigCoef { n, a, value }
}

/// Terms of the half-range form of [`sech_coef`] (doubled, `j < a/2`), which
/// alternate strictly in sign. Valid for `n ≥ 2` with `n ≡ a (mod 2)`.
pub fn sech_coef_half_range_terms(n: u64, a: u64) -> Vec<f64> {
    (0..a / 2)
        .map(|j| {
            let phi = PI * (2 * j + 1) as f64 / (2 * a) as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * phi.sin() * cos_pow(j, a, n - 1) / a as f64
        })
        .collect()
}

/// `Σ_{j=0}^{b−1} (−1)^j cos^m(φ_j)/sin(φ_j)` with `φ_j = π(2j+1)/(2b)`,
/// for `m ≡ b + 1 (mod 2)`.
///
/// Under that parity the terms `j` and `b−1−j` coincide, so the lower half is
/// summed and doubled. There the terms alternate and shrink in magnitude, so
/// the sum stops once a term is negligible against the partial sum.
fn cot_pow_sum(b: u64, m: u64) -> f64 {
    debug_assert!(m >= 1 && (m + b) % 2 == 1);
    let mut acc = KahanSum::new();
    for j in 0..b / 2 {
        let phi = PI * (2 * j + 1) as f64 / (2 * b) as f64;
        let half = (0.5 * phi).sin();
        let log_mag = m as f64 * (-2.0 * half * half).ln_1p() - phi.sin().ln();
        let term = log_mag.exp();
        if term == 0.0 || term < 1e-20 * acc.value().abs() {
            break;
        }
        acc.add(if j % 2 == 0 { term } else { -term });
    }
    2.0 * acc.value()
}

/// `Q_N(a) = P{A_N = a}` from the closed trigonometric form obtained by
/// summing the increments `Q_n(a) − Q_{n−1}(a)` over `n > N`:
///
/// * `N ≡ a`:   `T(a+1, N)/(a+1) − T(a, N+1)/a`
/// * `N ≢ a`:   `T(a+1, N+1)/(a+1) − T(a, N)/a`
///
/// with `T(b, m) = Σ_{j=0}^{b−1} (−1)^j cos^m(π(2j+1)/2b) / sin(π(2j+1)/2b)`.
/// The formula vanishes up to rounding for `N < a`. `Q_0 ≡ 0`.
pub fn max_pmf(n: u64, a: u64) -> f64 {
    if n == 0 || a == 0 {
        return 0.0;
    }
    let (upper, lower) = if (n + a).is_multiple_of(2) {
        (cot_pow_sum(a + 1, n), cot_pow_sum(a, n + 1))
    } else {
        (cot_pow_sum(a + 1, n + 1), cot_pow_sum(a, n))
    };
    upper / (a + 1) as f64 - lower / a as f64
}

/// `Q_n(a) − Q_{n−1}(a) = 2(−1)^{n+a} c_n(b)` where `c_n(b)` is [`sech_coef`]
/// and `b = a` if `a ≡ n`, `a + 1` otherwise.
pub fn max_pmf_delta(n: u64, a: u64) -> f64 {
    if n == 0 || a == 0 {
        return 0.0;
    }
    if (n + a).is_multiple_of(2) {
        2.0 * sech_coef(n, a).value
    } else {
        -2.0 * sech_coef(n, a + 1).value
    }
}

/// Probability that level `a` is first reached at step `n`:
/// `P{A_n ≥ a} − P{A_{n−1} ≥ a}`, assembled from [`max_pmf`].
pub fn first_passage_pmf(n: u64, a: u64) -> f64 {
    if n == 0 || a == 0 {
        return 0.0;
    }
    let mut acc = KahanSum::new();
    if n == 1 {
        acc.add(1.0);
    }
    for b in 1..a {
        acc.add(max_pmf(n - 1, b));
        acc.add(-max_pmf(n, b));
    }
    acc.value()
}

/// Mass-tail target for [`max_distribution`].
const MAX_DIST_TAIL: f64 = 1e-30;

/// `Q_N(·)` by the trigonometric route, for levels `1..=min(N, a_cut)`.
///
/// `A_N` has the law of `max_{k≤N} |W_k|` for a simple walk `W`, so
/// `P{A_N ≥ a} ≤ 4 exp(−a²/2N)`; `a_cut` is the first level where that bound
/// falls below `1e−30`, and the bound is recorded as the tail.
pub fn max_distribution(n: u64) -> Result<MaxDist<f64>> {
    if n == 0 {
        return Err(Error::ZeroSteps(n));
    }
    let cut = (2.0 * n as f64 * (4.0 / MAX_DIST_TAIL).ln()).sqrt().ceil() as u64;
    let top = n.min(cut);
    let tail = if top == n {
        0.0
    } else {
        4.0 * (-((top + 1) as f64).powi(2) / (2.0 * n as f64)).exp()
    };
    let pmf = {
        use rayon::prelude::*;
        (1..=top).into_par_iter().map(|a| max_pmf(n, a)).collect()
    };
    Ok(MaxDist::from_pmf(n, pmf, tail))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{joint_distribution, marginal_max, marginal_position, JointTableIter};
    use proptest::prelude::*;

    /// Truncated power series in λ with f64 coefficients; an oracle for
    /// generating-function coefficients that never touches trigonometry.
    #[derive(Clone, Debug)]
    struct Series(Vec<f64>);

    impl Series {
        const DEG: usize = 48;

        fn lambda() -> Series {
            let mut c = vec![0.0; Self::DEG];
            c[1] = 1.0;
            Series(c)
        }

        fn constant(v: f64) -> Series {
            let mut c = vec![0.0; Self::DEG];
            c[0] = v;
            Series(c)
        }

        fn add(&self, o: &Series) -> Series {
            Series(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
        }

        fn mul(&self, o: &Series) -> Series {
            let mut c = vec![0.0; Self::DEG];
            for (i, a) in self.0.iter().enumerate() {
                for (j, b) in o.0.iter().enumerate().take(Self::DEG - i) {
                    c[i + j] += a * b;
                }
            }
            Series(c)
        }

        fn scale(&self, s: f64) -> Series {
            Series(self.0.iter().map(|a| a * s).collect())
        }

        /// `1/f` for `f(0) ≠ 0`.
        fn recip(&self) -> Series {
            let mut r = vec![0.0; Self::DEG];
            r[0] = 1.0 / self.0[0];
            for k in 1..Self::DEG {
                let s: f64 = (1..=k).map(|i| self.0[i] * r[k - i]).sum();
                r[k] = -s / self.0[0];
            }
            Series(r)
        }

        /// `√f` for `f(0) = 1`.
        fn sqrt(&self) -> Series {
            let mut r = vec![0.0; Self::DEG];
            r[0] = 1.0;
            for k in 1..Self::DEG {
                let s: f64 = (1..k).map(|i| r[i] * r[k - i]).sum();
                r[k] = (self.0[k] - s) / 2.0;
            }
            Series(r)
        }

        fn pow(&self, m: u64) -> Series {
            (0..m).fold(Series::constant(1.0), |acc, _| acc.mul(self))
        }

        /// `θ(λ) = λ / (1 + √(1 − λ²))`.
        fn theta() -> Series {
            let l = Series::lambda();
            let root = Series::constant(1.0).add(&l.mul(&l).scale(-1.0)).sqrt();
            l.mul(&Series::constant(1.0).add(&root).recip())
        }

        /// `1/(θ^a + θ^−a) = θ^a/(1 + θ^{2a})`.
        fn inv_theta_sum(a: u64) -> Series {
            let ta = Series::theta().pow(a);
            ta.mul(&Series::constant(1.0).add(&ta.mul(&ta)).recip())
        }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn position_pmf_values() {
        assert_eq!(position_pmf(4, 0).unwrap().to_f64(), 6.0 / 16.0);
        assert_eq!(position_pmf(3, 3).unwrap().to_f64(), 0.25);
        assert!(position_pmf(5, 2).unwrap().is_zero());
        assert!(position_pmf(3, 5).unwrap().is_zero());
        assert!(position_pmf(0, 0).is_err());
    }

    #[test]
    fn position_distribution_agrees_with_pointwise_formula_and_dp() {
        for n in 1..=30 {
            let d = position_distribution(n).unwrap();
            for x in 0..=n {
                assert_eq!(d.get(x), position_pmf(n, x).unwrap());
            }
        }
        let dp = marginal_position(&joint_distribution(6).unwrap());
        assert_eq!(dp, position_distribution(6).unwrap());
    }

    #[test]
    fn position_law_is_normalized_through_one_thousand() {
        for n in (1..=1000).step_by(37).chain([999, 1000]) {
            assert_eq!(position_distribution(n).unwrap().total(), DyadicProb::one());
        }
    }

    #[test]
    fn position_moments_small_cases() {
        let m1 = position_moments(1).unwrap();
        assert_eq!(m1.mean, BigRational::one());
        assert!(m1.variance.is_zero());
        let m2 = position_moments(2).unwrap();
        assert_eq!(m2.mean, BigRational::one());
        assert_eq!(m2.variance, BigRational::one());
    }

    #[test]
    fn theta_root_properties() {
        let g = gf_theta(0.6).unwrap();
        assert!(close(g.theta, 1.0 / 3.0, 1e-15));
        assert!(close(gf_theta(1.0 - 1e-12).unwrap().theta, 1.0, 2e-6));
        assert!(gf_theta(0.0).is_err());
        assert!(gf_theta(1.0).is_err());
        assert!(gf_theta(f64::NAN).is_err());
        let tiny = gf_theta(1e-10).unwrap();
        assert!(close(tiny.theta, 5e-11, 1e-25));
    }

    proptest! {
        #[test]
        fn theta_solves_its_quadratic(lambda in 1e-6f64..0.999_999) {
            let g = gf_theta(lambda).unwrap();
            prop_assert!((g.theta * g.theta_inv - 1.0).abs() < 1e-14);
            prop_assert!((g.theta + g.theta_inv - 2.0 / lambda).abs() <= 1e-14 * 2.0 / lambda);
            prop_assert!(g.theta > 0.0 && g.theta < 1.0);
        }

        #[test]
        fn marginal_gf_identity(lambda in 0.01f64..0.99, a in 1u64..60) {
            let g = gf_theta(lambda).unwrap();
            let lhs = (1.0 - lambda) * gf_max_marginal(lambda, a).unwrap();
            let rhs = 2.0 / (g.theta.powi(a as i32) + g.theta_inv.powi(a as i32))
                - 2.0 / (g.theta.powi(a as i32 + 1) + g.theta_inv.powi(a as i32 + 1));
            prop_assert!((lhs - rhs).abs() <= 1e-14 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn hit_own_max_closed_form_and_recurrence() {
        for &lambda in &[0.1, 0.5, 0.9, 0.99] {
            let a1 = gf_hit_own_max(lambda, 1).unwrap();
            assert!(close(
                a1,
                lambda / (1.0 - lambda * lambda / 2.0),
                1e-14 * a1
            ));
            let g = gf_theta(lambda).unwrap();
            for a in 2..30u64 {
                let s = |m: u64| g.theta.powi(m as i32) + g.theta_inv.powi(m as i32);
                let rec = s(a) / s(a + 1) * gf_hit_own_max(lambda, a - 1).unwrap();
                let direct = gf_hit_own_max(lambda, a).unwrap();
                assert!(close(rec, direct, 1e-13 * direct));
            }
        }
        assert!(gf_hit_own_max(0.5, 0).is_err());
    }

    #[test]
    fn hit_own_max_taylor_coefficients_match_dp() {
        // (4/λ)/(θ³ + θ^−3): shift the series of 4/(θ³+θ^−3) down by one.
        let s = Series::inv_theta_sum(3).scale(4.0);
        for t in JointTableIter::new().take(20) {
            let n = t.n() as usize;
            assert!(close(s.0[n + 1], t.get(2, 2).to_f64(), 1e-10), "n = {n}");
        }
    }

    #[test]
    fn marginal_gf_matches_dp_partial_sums() {
        let lambda: f64 = 0.3;
        let dists: Vec<_> = JointTableIter::new()
            .take(30)
            .map(|t| marginal_max(&t))
            .collect();
        for a in 1..=3u64 {
            let partial: f64 = dists
                .iter()
                .map(|d| lambda.powi(d.n() as i32) * d.get(a).map_or(0.0, DyadicProb::to_f64))
                .sum();
            let bound = lambda.powi(31) / (1.0 - lambda);
            let gf = gf_max_marginal(lambda, a).unwrap();
            assert!(
                gf - partial >= -1e-15 && gf - partial <= bound + 1e-15,
                "a = {a}"
            );
        }
    }

    #[test]
    fn marginal_gf_sums_and_decays() {
        for &lambda in &[0.2, 0.7, 0.95] {
            let total: f64 = (1..5000).map(|a| gf_max_marginal(lambda, a).unwrap()).sum();
            assert!(close(total, lambda / (1.0 - lambda), 1e-12));
            assert!(gf_max_marginal(lambda, 2000).unwrap() < 1e-20);
        }
    }

    #[test]
    fn double_gf_boundary_values() {
        let lambda = 0.4;
        let one = gf_double_q(lambda, 1.0, None).unwrap();
        assert!(close(one.value, lambda / (1.0 - lambda), 1e-15));
        assert_eq!(one.tail_bound, 0.0);
        // z = 0 kills every level a ≥ 1.
        let zero = gf_double_q(lambda, 0.0, None).unwrap();
        assert!(close(zero.value, 0.0, 1e-15));
        assert!(gf_double_q(lambda, 1.5, None).is_err());
        assert!(gf_double_q(1.5, 0.5, None).is_err());
        // Matches the direct double sum Σ_a z^a gf_max_marginal(λ, a).
        let z: f64 = 0.6;
        let direct: f64 = (1..400)
            .map(|a| z.powi(a as i32) * gf_max_marginal(lambda, a).unwrap())
            .sum();
        let q = gf_double_q(lambda, z, None).unwrap();
        assert!(close(q.value, direct, 1e-13));
        assert!(q.tail_bound < 1e-13);
    }

    #[test]
    fn double_gf_derivative_is_mean_gf() {
        let lambda: f64 = 0.25;
        let h = 1e-5;
        let q = |z: f64| gf_double_q(lambda, z, Some(200)).unwrap().value;
        // One-sided second-order difference at z = 1.
        let deriv = (3.0 * q(1.0) - 4.0 * q(1.0 - h) + q(1.0 - 2.0 * h)) / (2.0 * h);
        let dp: f64 = JointTableIter::new()
            .take(20)
            .map(|t| lambda.powi(t.n() as i32) * marginal_max(&t).to_f64().mean())
            .sum();
        let tail = lambda.powi(21) * 21.0 / (1.0 - lambda).powi(2);
        assert!(close(deriv, dp, 1e-6 + tail), "{deriv} vs {dp}");
        let fm = factorial_moment_gf(lambda, 1, None).unwrap().value;
        assert!(close(deriv, fm, 1e-6));
    }

    #[test]
    fn factorial_moment_gf_matches_dp() {
        let lambda: f64 = 0.25;
        let dists: Vec<_> = JointTableIter::new()
            .take(25)
            .map(|t| marginal_max(&t).to_f64())
            .collect();
        let mean_gf: f64 = dists
            .iter()
            .map(|d| lambda.powi(d.n() as i32) * d.mean())
            .sum();
        let fm = factorial_moment_gf(lambda, 1, None).unwrap();
        assert!(close(fm.value, mean_gf, 1e-8));
        assert!(fm.tail_bound < 1e-15);
        // k = 2: E[C(A,2)].
        let c2: f64 = dists
            .iter()
            .map(|d| {
                let e: f64 = d
                    .iter()
                    .map(|(a, p)| (a * (a.saturating_sub(1))) as f64 / 2.0 * p)
                    .sum();
                lambda.powi(d.n() as i32) * e
            })
            .sum();
        assert!(close(
            factorial_moment_gf(lambda, 2, None).unwrap().value,
            c2,
            1e-8
        ));
        assert!(factorial_moment_gf(lambda, 0, None).is_err());
    }

    #[test]
    fn factorial_moment_gf_is_increasing_in_lambda() {
        for k in 1..=3 {
            let vals: Vec<f64> = (1..99)
                .map(|i| {
                    factorial_moment_gf(i as f64 / 100.0, k, None)
                        .unwrap()
                        .value
                })
                .collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]), "k = {k}");
        }
    }

    #[test]
    fn sech_coef_small_cases() {
        assert!(close(sech_coef(1, 1).value, 0.5, 1e-16));
        for n in 2..20 {
            assert!(sech_coef(n, 1).value.abs() < 1e-16);
        }
        assert!(sech_coef(1, 3).value.abs() < 1e-16);
        assert_eq!(sech_coef(5, 2).value, 0.0);
    }

    #[test]
    fn sech_coef_matches_series_oracle() {
        for a in 1..=8u64 {
            let s = Series::inv_theta_sum(a);
            for n in 1..40u64 {
                let c = sech_coef(n, a).value;
                assert!(
                    close(c, s.0[n as usize], 1e-12),
                    "n = {n}, a = {a}: {c} vs {}",
                    s.0[n as usize]
                );
            }
        }
        // λ^4 in 1/(θ²+θ^−2) = λ²/(4 − 2λ²) is 1/8.
        assert!(close(sech_coef(4, 2).value, 0.125, 1e-15));
    }

    #[test]
    fn half_range_form_agrees_and_alternates() {
        for a in 2..=40u64 {
            for n in (a % 2 + 2..200).step_by(2) {
                let terms = sech_coef_half_range_terms(n, a);
                let half: f64 = terms.iter().sum();
                assert!(
                    close(half, sech_coef(n, a).value, 1e-14),
                    "n = {n}, a = {a}"
                );
                for w in terms.windows(2) {
                    if w[0] != 0.0 && w[1] != 0.0 {
                        assert!(w[0].signum() != w[1].signum());
                    }
                }
            }
        }
    }

    #[test]
    fn sech_coef_vanishes_off_parity() {
        for n in 1..50 {
            for a in 1..50 {
                if (n + a) % 2 == 1 {
                    assert_eq!(sech_coef(n, a).value, 0.0);
                }
            }
        }
    }

    #[test]
    fn max_pmf_small_values() {
        assert!(close(max_pmf(1, 1), 1.0, 1e-15));
        assert!(close(max_pmf(3, 2), 0.25, 1e-15));
        assert_eq!(max_pmf(0, 1), 0.0);
    }

    #[test]
    fn max_pmf_vanishes_below_level() {
        for n in 1..60 {
            for a in n + 1..n + 40 {
                assert!(max_pmf(n, a).abs() <= 1e-10, "N = {n}, a = {a}");
            }
        }
    }

    #[test]
    fn max_pmf_matches_exact_dp() {
        for t in JointTableIter::new().take(64) {
            let exact = marginal_max(&t);
            for (a, p) in exact.iter() {
                assert!(
                    close(max_pmf(t.n(), a), p.to_f64(), 1e-12),
                    "N = {}, a = {a}",
                    t.n()
                );
            }
        }
    }

    #[test]
    fn max_pmf_is_normalized() {
        for n in [10, 50, 200] {
            let total: f64 = (1..=n).map(|a| max_pmf(n, a)).sum();
            assert!(close(total, 1.0, 1e-10));
        }
    }

    #[test]
    fn half_range_cot_sum_matches_full_range() {
        for b in 1..40u64 {
            for m in (1..300).filter(|m| (m + b) % 2 == 1) {
                let full: f64 = (0..b)
                    .map(|j| {
                        let phi = PI * (2 * j + 1) as f64 / (2 * b) as f64;
                        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                        sign * cos_pow(j, b, m) / phi.sin()
                    })
                    .sum();
                assert!(close(cot_pow_sum(b, m), full, 1e-12 * (1.0 + full.abs())));
            }
        }
    }

    #[test]
    fn delta_is_consistent() {
        assert!(close(max_pmf_delta(1, 1), 1.0, 1e-15));
        for n in 1..=100 {
            for a in 1..=n.min(60) {
                let diff = max_pmf(n, a) - max_pmf(n - 1, a);
                assert!(close(max_pmf_delta(n, a), diff, 1e-10), "n = {n}, a = {a}");
            }
        }
        let dists: Vec<_> = JointTableIter::new()
            .take(40)
            .map(|t| marginal_max(&t).to_f64())
            .collect();
        for w in dists.windows(2) {
            let n = w[1].n();
            for a in 1..=n {
                let prev = w[0].get(a).copied().unwrap_or(0.0);
                let diff = w[1].get(a).copied().unwrap_or(0.0) - prev;
                assert!(close(max_pmf_delta(n, a), diff, 1e-12));
            }
        }
    }

    #[test]
    fn first_passage_values() {
        assert!(close(first_passage_pmf(1, 1), 1.0, 1e-15));
        assert!(close(first_passage_pmf(3, 3), 0.25, 1e-12));
        assert!(first_passage_pmf(2, 1).abs() < 1e-15);
        // Generating function of the first passage to a is 2/(θ^a + θ^−a).
        for n in 1..80 {
            for a in 1..12 {
                let gf = 2.0 * sech_coef(n, a).value;
                assert!(
                    close(first_passage_pmf(n, a), gf, 1e-12),
                    "n = {n}, a = {a}"
                );
            }
        }
    }

    #[test]
    fn first_passage_matches_dp() {
        let dists: Vec<_> = JointTableIter::new()
            .take(30)
            .map(|t| marginal_max(&t))
            .collect();
        for w in dists.windows(2) {
            let n = w[1].n();
            for a in 1..=n {
                // P{A_n ≥ a} − P{A_{n−1} ≥ a} = P{A_{n−1} < a} − P{A_n < a}.
                let exact = w[0].cdf(a - 1).to_f64() - w[1].cdf(a - 1).to_f64();
                assert!(close(first_passage_pmf(n, a), exact, 1e-12));
            }
        }
    }

    #[test]
    fn max_distribution_truncates_with_bound() {
        let d = max_distribution(40).unwrap();
        assert_eq!(d.max_level(), 40);
        assert_eq!(d.tail_bound(), 0.0);
        let big = max_distribution(100_000).unwrap();
        assert!(big.max_level() < 100_000);
        assert!(big.tail_bound() <= 1e-30);
        assert!(close(big.total(), 1.0, 1e-10));
        assert!(max_distribution(0).is_err());
    }
}
