//! The joint law of position and running maximum of the reflected walk.
//!
//! The walk starts at the origin and is forced to 1 on its first step; from 0
//! it always moves to 1, elsewhere it moves ±1 with probability 1/2. After `n`
//! steps the pair `(S_n, A_n)` lives on the wedge `0 <= x <= a <= n` with
//! `x ≡ n (mod 2)`, and every probability is a dyadic rational with
//! denominator dividing `2^(n-1)`.

use std::collections::HashMap;
use std::ops::AddAssign;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::dyadic::DyadicProb;
use crate::error::{Error, Result};

/// Largest step count accepted by [`enumerate_paths_oracle`].
pub const ORACLE_MAX_STEPS: u64 = 24;

/// Default cap on exact tables; beyond it use [`FloatJointTable`].
pub const EXACT_MAX_STEPS: u64 = 4096;

/// Storage for one wedge: `rows[a - 1][i]` is the mass at `x = (n mod 2) + 2i`.
type Rows<T> = Vec<Vec<T>>;

fn row_len(n: u64, a: u64) -> usize {
    let p = n % 2;
    ((a - p) / 2 + 1) as usize
}

fn slot(n: u64, x: u64, a: u64) -> Option<(usize, usize)> {
    if a == 0 || a > n || x > a || x % 2 != n % 2 {
        return None;
    }
    Some(((a - 1) as usize, ((x - n % 2) / 2) as usize))
}

fn read<T>(rows: &Rows<T>, n: u64, x: u64, a: u64) -> Option<&T> {
    slot(n, x, a).map(|(r, i)| &rows[r][i])
}

/// Mass type carried by the recursion: exact weights over a shared power of
/// two, or plain probabilities.
trait Mass: Clone + Zero + for<'a> AddAssign<&'a Self> {
    /// Applies the factor 1/2 common to every transition.
    fn halve(self) -> Self;
}

impl Mass for BigUint {
    // The table's exponent is bumped instead.
    fn halve(self) -> Self {
        self
    }
}

impl Mass for f64 {
    fn halve(self) -> Self {
        0.5 * self
    }
}

/// One application of
/// `P_{n+1}(x,a) = ½(1 + δ_{x,1} − δ_{x,a+1}) P_n(x−1,a) + ½ P_n(x+1,a) + ½ δ_{x,a} P_n(a−1,a−1)(1 − δ_{a,1})`
/// over the wedge for `n + 1`. Keys with `x = a + 1` are never stored, so the
/// `δ_{x,a+1}` term only expresses that the mass at `x = a` leaves level `a`.
fn step_rows<T: Mass>(rows: &Rows<T>, n: u64) -> Rows<T> {
    let next = n + 1;
    let p = next % 2;
    (1..=next)
        .map(|a| {
            (0..row_len(next, a))
                .map(|i| {
                    let x = p + 2 * i as u64;
                    let mut acc = T::zero();
                    if x >= 1 {
                        if let Some(w) = read(rows, n, x - 1, a) {
                            acc += w;
                            if x == 1 {
                                acc += w;
                            }
                        }
                    }
                    if let Some(w) = read(rows, n, x + 1, a) {
                        acc += w;
                    }
                    if x == a && a >= 2 {
                        if let Some(w) = read(rows, n, a - 1, a - 1) {
                            acc += w;
                        }
                    }
                    acc.halve()
                })
                .collect()
        })
        .collect()
}

/// Exact joint law `P{S_n = x, A_n = a}` for one step count.
#[derive(Clone, Debug)]
pub struct JointTable {
    n: u64,
    log2_den: u64,
    rows: Rows<BigUint>,
}

impl JointTable {
    /// The law after the forced first step: all mass at `(1, 1)`.
    pub fn initial() -> Self {
        JointTable {
            n: 1,
            log2_den: 0,
            rows: vec![vec![BigUint::one()]],
        }
    }

    /// Builds a table from explicit entries, checking the wedge, parity and
    /// exact normalization. Missing keys are zero.
    pub fn from_entries<I>(n: u64, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((u64, u64), DyadicProb)>,
    {
        if n == 0 {
            return Err(Error::ZeroSteps(0));
        }
        let entries: Vec<_> = entries.into_iter().collect();
        let d = entries
            .iter()
            .map(|(_, p)| p.log2_denominator())
            .max()
            .unwrap_or(0);
        let mut rows: Rows<BigUint> = (1..=n)
            .map(|a| vec![BigUint::zero(); row_len(n, a)])
            .collect();
        let mut total = BigUint::zero();
        for ((x, a), p) in entries {
            let (r, i) = slot(n, x, a).ok_or(Error::OutsideWedge { n, x, a })?;
            let w = p.numerator_over(d);
            total += &w;
            rows[r][i] += w;
        }
        if total != BigUint::one() << d {
            let value = DyadicProb::from_parts(total, d).to_f64();
            return Err(Error::NotNormalized(value));
        }
        Ok(JointTable {
            n,
            log2_den: d,
            rows,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `P{S_n = x, A_n = a}`; zero off the wedge.
    pub fn get(&self, x: u64, a: u64) -> DyadicProb {
        read(&self.rows, self.n, x, a)
            .map(|w| DyadicProb::from_parts(w.clone(), self.log2_den))
            .unwrap_or_default()
    }

    /// Non-zero entries in `(a, x)` order.
    pub fn entries(&self) -> impl Iterator<Item = ((u64, u64), DyadicProb)> + '_ {
        let p = self.n % 2;
        self.rows.iter().enumerate().flat_map(move |(r, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, w)| !w.is_zero())
                .map(move |(i, w)| {
                    let key = (p + 2 * i as u64, r as u64 + 1);
                    (key, DyadicProb::from_parts(w.clone(), self.log2_den))
                })
        })
    }

    /// Sum of all entries; exactly one for every table built by this crate.
    pub fn total(&self) -> DyadicProb {
        let sum = self
            .rows
            .iter()
            .flatten()
            .fold(BigUint::zero(), |acc, w| acc + w);
        DyadicProb::from_parts(sum, self.log2_den)
    }

    /// Number of stored wedge keys, including those with zero mass.
    pub fn stored_keys(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    fn weights_over(&self, d: u64) -> impl Iterator<Item = BigUint> + '_ {
        let shift = d - self.log2_den;
        self.rows.iter().flatten().map(move |w| w << shift)
    }
}

impl PartialEq for JointTable {
    fn eq(&self, other: &Self) -> bool {
        if self.n != other.n {
            return false;
        }
        let d = self.log2_den.max(other.log2_den);
        self.weights_over(d).eq(other.weights_over(d))
    }
}

impl Eq for JointTable {}

/// Advances the exact joint law by one step.
pub fn step_joint(t: &JointTable) -> JointTable {
    JointTable {
        n: t.n + 1,
        log2_den: t.log2_den + 1,
        rows: step_rows(&t.rows, t.n),
    }
}

/// Exact joint law after `n` steps, capped at [`EXACT_MAX_STEPS`].
pub fn joint_distribution(n: u64) -> Result<JointTable> {
    joint_distribution_capped(n, EXACT_MAX_STEPS)
}

pub fn joint_distribution_capped(n: u64, cap: u64) -> Result<JointTable> {
    if n == 0 {
        return Err(Error::ZeroSteps(n));
    }
    if n > cap {
        return Err(Error::ExactCap { n, cap });
    }
    Ok(JointTableIter::new()
        .nth((n - 1) as usize)
        .expect("unbounded"))
}

/// Successive exact tables `P_1, P_2, ...`.
#[derive(Clone, Debug)]
pub struct JointTableIter {
    next: Option<JointTable>,
}

impl JointTableIter {
    pub fn new() -> Self {
        JointTableIter {
            next: Some(JointTable::initial()),
        }
    }
}

impl Default for JointTableIter {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for JointTableIter {
    type Item = JointTable;

    fn next(&mut self) -> Option<JointTable> {
        let current = self.next.take()?;
        self.next = Some(step_joint(&current));
        Some(current)
    }
}

/// Law of `S_n`, indexed by position `0..=n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PosDist {
    n: u64,
    pmf: Vec<DyadicProb>,
}

impl PosDist {
    pub(crate) fn from_pmf(n: u64, pmf: Vec<DyadicProb>) -> Self {
        debug_assert_eq!(pmf.len() as u64, n + 1);
        PosDist { n, pmf }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn get(&self, x: u64) -> DyadicProb {
        self.pmf.get(x as usize).cloned().unwrap_or_default()
    }

    /// `(x, P{S_n = x})` over the full range `0..=n`, zeros included.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &DyadicProb)> {
        self.pmf.iter().enumerate().map(|(x, p)| (x as u64, p))
    }

    pub fn total(&self) -> DyadicProb {
        self.pmf.iter().sum()
    }
}

/// Law of `A_n`, stored for levels `1..=len`.
///
/// Exact when `P = DyadicProb`; the trigonometric route produces `MaxDist<f64>`
/// truncated where the remaining mass is below `tail_bound`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxDist<P = DyadicProb> {
    n: u64,
    pmf: Vec<P>,
    tail_bound: f64,
}

impl<P> MaxDist<P> {
    pub(crate) fn from_pmf(n: u64, pmf: Vec<P>, tail_bound: f64) -> Self {
        MaxDist { n, pmf, tail_bound }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `P{A_n = a}` for stored levels.
    pub fn get(&self, a: u64) -> Option<&P> {
        a.checked_sub(1).and_then(|i| self.pmf.get(i as usize))
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &P)> {
        self.pmf.iter().enumerate().map(|(i, p)| (i as u64 + 1, p))
    }

    /// Highest stored level.
    pub fn max_level(&self) -> u64 {
        self.pmf.len() as u64
    }

    /// Bound on the mass above [`max_level`](Self::max_level).
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }
}

impl MaxDist<DyadicProb> {
    pub fn total(&self) -> DyadicProb {
        self.pmf.iter().sum()
    }

    pub fn to_f64(&self) -> MaxDist<f64> {
        MaxDist {
            n: self.n,
            pmf: self.pmf.iter().map(DyadicProb::to_f64).collect(),
            tail_bound: 0.0,
        }
    }

    /// `P{A_n <= a}`.
    pub fn cdf(&self, a: u64) -> DyadicProb {
        self.pmf.iter().take(a as usize).sum()
    }
}

impl MaxDist<f64> {
    pub fn total(&self) -> f64 {
        crate::kahan::sum(self.pmf.iter().copied())
    }

    /// `E[A_n^k]` over the stored levels.
    pub fn raw_moment(&self, k: i32) -> f64 {
        crate::kahan::sum(self.iter().map(|(a, &p)| (a as f64).powi(k) * p))
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        crate::kahan::sum(self.iter().map(|(a, &p)| (a as f64 - mean).powi(2) * p))
    }
}

/// Sums the joint law over `a`.
pub fn marginal_position(t: &JointTable) -> PosDist {
    let n = t.n;
    let mut weights = vec![BigUint::zero(); n as usize + 1];
    for row in &t.rows {
        for (i, w) in row.iter().enumerate() {
            weights[(n % 2 + 2 * i as u64) as usize] += w;
        }
    }
    let pmf = weights
        .into_iter()
        .map(|w| DyadicProb::from_parts(w, t.log2_den))
        .collect();
    PosDist { n, pmf }
}

/// Sums the joint law over `x`.
pub fn marginal_max(t: &JointTable) -> MaxDist {
    let pmf = t
        .rows
        .iter()
        .map(|row| {
            let w = row.iter().fold(BigUint::zero(), |acc, w| acc + w);
            DyadicProb::from_parts(w, t.log2_den)
        })
        .collect();
    MaxDist::from_pmf(t.n, pmf, 0.0)
}

/// Builds the joint law by walking every sign sequence of length `n - 1`.
///
/// Each sequence has probability `2^-(n-1)`; a sign drawn while the walker sits
/// at 0 is ignored, since the step from 0 is forced. Shares no code with the
/// recursion in [`step_joint`].
pub fn enumerate_paths_oracle(n: u64) -> Result<JointTable> {
    if n == 0 {
        return Err(Error::ZeroSteps(n));
    }
    if n > ORACLE_MAX_STEPS {
        return Err(Error::EnumerationCap {
            n,
            cap: ORACLE_MAX_STEPS,
        });
    }
    let free = n - 1;
    let sequences: u64 = 1 << free;
    let chunk = 1u64 << 12;
    let counts = (0..sequences.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut local: HashMap<(u64, u64), u64> = HashMap::new();
            for signs in (c * chunk)..((c + 1) * chunk).min(sequences) {
                let (mut pos, mut max) = (1u64, 1u64);
                for step in 0..free {
                    if pos == 0 || (signs >> step) & 1 == 1 {
                        pos += 1;
                    } else {
                        pos -= 1;
                    }
                    max = max.max(pos);
                }
                *local.entry((pos, max)).or_insert(0) += 1;
            }
            local
        })
        .reduce(HashMap::new, |mut acc, part| {
            for (k, v) in part {
                *acc.entry(k).or_insert(0) += v;
            }
            acc
        });
    JointTable::from_entries(
        n,
        counts
            .into_iter()
            .map(|(k, c)| (k, DyadicProb::from_parts(BigUint::from(c), free))),
    )
}

/// Floating-point joint law, same recursion as [`step_joint`]. Meant for step
/// counts where exact tables are too large.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatJointTable {
    n: u64,
    rows: Rows<f64>,
}

impl FloatJointTable {
    pub fn initial() -> Self {
        FloatJointTable {
            n: 1,
            rows: vec![vec![1.0]],
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn get(&self, x: u64, a: u64) -> f64 {
        read(&self.rows, self.n, x, a).copied().unwrap_or(0.0)
    }

    pub fn step(&self) -> Self {
        FloatJointTable {
            n: self.n + 1,
            rows: step_rows(&self.rows, self.n),
        }
    }

    pub fn marginal_max(&self) -> MaxDist<f64> {
        let pmf = self
            .rows
            .iter()
            .map(|row| crate::kahan::sum(row.iter().copied()))
            .collect();
        MaxDist::from_pmf(self.n, pmf, 0.0)
    }

    pub fn total(&self) -> f64 {
        crate::kahan::sum(self.rows.iter().flatten().copied())
    }
}

/// Floating-point joint law after `n` steps.
pub fn joint_distribution_f64(n: u64) -> Result<FloatJointTable> {
    if n == 0 {
        return Err(Error::ZeroSteps(n));
    }
    let mut t = FloatJointTable::initial();
    while t.n < n {
        t = t.step();
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(num: u64, d: u64) -> DyadicProb {
        DyadicProb::new(BigUint::from(num), d).unwrap()
    }

    fn table(n: u64, entries: &[((u64, u64), DyadicProb)]) -> JointTable {
        JointTable::from_entries(n, entries.iter().cloned()).unwrap()
    }

    #[test]
    fn first_steps_match_hand_enumeration() {
        let p1 = JointTable::initial();
        assert_eq!(p1, table(1, &[((1, 1), DyadicProb::one())]));
        let p2 = step_joint(&p1);
        assert_eq!(p2, table(2, &[((0, 1), q(1, 1)), ((2, 2), q(1, 1))]));
        let p3 = step_joint(&p2);
        assert_eq!(
            p3,
            table(
                3,
                &[((1, 1), q(1, 1)), ((1, 2), q(1, 2)), ((3, 3), q(1, 2))]
            )
        );
        assert_eq!(joint_distribution(3).unwrap(), p3);
    }

    #[test]
    fn rejects_zero_steps() {
        assert_eq!(joint_distribution(0), Err(Error::ZeroSteps(0)));
        assert!(enumerate_paths_oracle(0).is_err());
        assert!(joint_distribution_f64(0).is_err());
    }

    #[test]
    fn exact_cap_is_enforced() {
        assert_eq!(
            joint_distribution_capped(10, 8),
            Err(Error::ExactCap { n: 10, cap: 8 })
        );
        assert!(enumerate_paths_oracle(ORACLE_MAX_STEPS + 1).is_err());
    }

    #[test]
    fn origin_mass_at_four_steps() {
        let t = joint_distribution(4).unwrap();
        let at_origin: DyadicProb = (1..=4).map(|a| t.get(0, a)).sum();
        assert_eq!(at_origin, q(3, 3));
    }

    #[test]
    fn from_entries_validates() {
        assert!(matches!(
            JointTable::from_entries(2, [((1, 1), DyadicProb::one())]),
            Err(Error::OutsideWedge { .. })
        ));
        assert!(matches!(
            JointTable::from_entries(3, [((3, 2), DyadicProb::one())]),
            Err(Error::OutsideWedge { .. })
        ));
        assert!(matches!(
            JointTable::from_entries(2, [((0, 1), q(1, 1))]),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn marginals_of_small_tables() {
        let p1 = joint_distribution(1).unwrap();
        assert_eq!(marginal_position(&p1).get(1), DyadicProb::one());
        assert_eq!(marginal_max(&p1).get(1), Some(&DyadicProb::one()));

        let p2 = marginal_position(&joint_distribution(2).unwrap());
        assert_eq!(p2.get(0), q(1, 1));
        assert_eq!(p2.get(2), q(1, 1));

        let m3 = marginal_max(&joint_distribution(3).unwrap());
        let got: Vec<_> = m3.iter().map(|(a, p)| (a, p.clone())).collect();
        assert_eq!(got, vec![(1, q(1, 1)), (2, q(1, 2)), (3, q(1, 2))]);
    }

    #[test]
    fn oracle_matches_recursion_through_sixteen() {
        for (n, t) in JointTableIter::new().take(16).enumerate() {
            let oracle = enumerate_paths_oracle(n as u64 + 1).unwrap();
            assert_eq!(oracle, t, "n = {}", n + 1);
        }
    }

    #[test]
    #[ignore = "extended suite: 2^23 paths"]
    fn oracle_matches_recursion_through_twenty_four() {
        for (n, t) in JointTableIter::new().take(24).enumerate().skip(16) {
            assert_eq!(enumerate_paths_oracle(n as u64 + 1).unwrap(), t);
        }
    }

    #[test]
    fn tables_are_normalized_and_supported_on_the_wedge() {
        for t in JointTableIter::new().take(40) {
            assert_eq!(t.total(), DyadicProb::one());
            for ((x, a), _) in t.entries() {
                assert!(x <= a && a <= t.n());
                assert_eq!(x % 2, t.n() % 2);
            }
        }
    }

    #[test]
    fn maximum_is_stochastically_increasing_and_dominates_position() {
        let tables: Vec<_> = JointTableIter::new().take(30).collect();
        for pair in tables.windows(2) {
            let (now, next) = (marginal_max(&pair[0]), marginal_max(&pair[1]));
            for a in 1..=next.n() {
                assert!(next.cdf(a) <= now.cdf(a));
            }
            let mean_a = now.to_f64().mean();
            let pos = marginal_position(&pair[0]);
            let mean_s: f64 = pos.iter().map(|(x, p)| x as f64 * p.to_f64()).sum();
            assert!(mean_a >= mean_s);
        }
    }

    #[test]
    fn float_table_tracks_exact_table() {
        let mut f = FloatJointTable::initial();
        for t in JointTableIter::new().take(60) {
            assert_eq!(f.n(), t.n());
            for ((x, a), p) in t.entries() {
                assert!((f.get(x, a) - p.to_f64()).abs() < 1e-15);
            }
            assert!((f.total() - 1.0).abs() < 1e-13);
            f = f.step();
        }
    }

    /// Piecewise form of the recursion: interior, reflection at 0 and 1, and
    /// the new-maximum rule, written out separately.
    fn piecewise_step(t: &JointTable) -> JointTable {
        let n = t.n();
        let mut entries = Vec::new();
        for a in 1..=n + 1 {
            for x in (0..=a).filter(|x| x % 2 != n % 2) {
                let g = |x: u64, a: u64| t.get(x, a);
                let v = if x == a && a >= 2 {
                    g(a - 1, a - 1).half() + g(a - 1, a).half()
                } else if x == 0 {
                    g(1, a).half()
                } else if x == 1 {
                    let from_two = if a == 1 {
                        DyadicProb::zero()
                    } else {
                        g(2, a).half()
                    };
                    g(0, a) + from_two
                } else {
                    g(x - 1, a).half() + g(x + 1, a).half()
                };
                entries.push(((x, a), v));
            }
        }
        JointTable::from_entries(n + 1, entries).unwrap()
    }

    fn arb_table() -> impl Strategy<Value = JointTable> {
        (1u64..9)
            .prop_flat_map(|n| {
                let keys: Vec<(u64, u64)> = (1..=n)
                    .flat_map(|a| (0..=a).filter(move |x| x % 2 == n % 2).map(move |x| (x, a)))
                    .collect();
                let len = keys.len();
                (
                    Just(n),
                    Just(keys),
                    proptest::collection::vec(0u64..1000, len),
                )
            })
            .prop_map(|(n, keys, raw)| {
                // Spread 2^16 units over the keys; the last key absorbs the rounding.
                let d = 16u64;
                let total: u64 = raw.iter().sum::<u64>().max(1);
                let mut weights: Vec<u64> = raw.iter().map(|w| w * (1 << d) / total).collect();
                let assigned: u64 = weights.iter().sum();
                *weights.last_mut().unwrap() += (1 << d) - assigned;
                let entries = keys
                    .into_iter()
                    .zip(weights)
                    .map(|(k, w)| (k, DyadicProb::from_parts(BigUint::from(w), d)));
                JointTable::from_entries(n, entries).unwrap()
            })
    }

    proptest! {
        #[test]
        fn unified_recursion_equals_piecewise_rules(t in arb_table()) {
            let unified = step_joint(&t);
            prop_assert_eq!(&unified, &piecewise_step(&t));
            prop_assert_eq!(unified.total(), DyadicProb::one());
        }
    }
}
