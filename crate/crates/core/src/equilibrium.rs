//! Offline epsilon-pacing equilibria under LPA.
//!
//! Expectations are taken over the empirical request distribution of a
//! [`Dataset`], so `E[p_i] = (1/T) sum_t p_i(t)` is compared against
//! `B_i / T`.
//!
//! A profile `a` is an epsilon-pacing equilibrium when, for every seller,
//!
//! 1. `a_i > eps` implies `E[p_i(a_i - eps, a_-i)] <= B_i / T`, and
//! 2. `a_i < 1 - eps` implies `E[p_i(a_i + eps, a_-i)] >= B_i / T`.
//!
//! [`compute_equilibrium`] starts from `1^n` and, while some seller would
//! still overspend after lowering its factor by `eps`, drops that factor to
//! the smallest value at which it still meets its budget rate. Every update
//! lowers a factor by at least `eps`, so there are at most `n / eps` updates.
//! Lowering one factor only raises the others' payments, which keeps
//! condition 2 true for every seller that has been updated.
//!
//! Payments are a step function of `a_i` on finite data, so the smallest
//! factor is found by bisection to a bracket of width `delta`, returning the
//! upper end so that the budget rate is met at the returned value.

use serde::{Deserialize, Serialize};

use crate::auctions::{settle, AuctionRule};
use crate::model::{metrics, AuctionOutcome, Dataset, MetricsReport};
use crate::numeric::pairwise_sum;
use crate::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.01;

/// Pacing factors, one per seller, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PacingProfile(Vec<f64>);

impl PacingProfile {
    pub fn new(factors: Vec<f64>) -> Result<Self> {
        if let Some(bad) = factors.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::input(format!("pacing factor {bad} outside [0, 1]")));
        }
        Ok(Self(factors))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    /// Copy with seller `i`'s factor replaced.
    pub fn with(&self, i: usize, factor: f64) -> Result<Self> {
        let mut v = self.0.clone();
        v[i] = factor;
        Self::new(v)
    }
}

impl TryFrom<Vec<f64>> for PacingProfile {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        PacingProfile::new(v)
    }
}

impl From<PacingProfile> for Vec<f64> {
    fn from(p: PacingProfile) -> Self {
        p.0
    }
}

/// Precomputed per-request bid weights `v / roi` and boosts `kappa * e`,
/// laid out request-major.
#[derive(Debug, Clone)]
pub struct Market<'a> {
    dataset: &'a Dataset,
    weights: Vec<f64>,
    boosts: Vec<f64>,
    n: usize,
}

impl<'a> Market<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        let n = dataset.num_sellers();
        let mut weights = Vec::with_capacity(n * dataset.num_requests());
        let mut boosts = Vec::with_capacity(n * dataset.num_requests());
        for r in &dataset.requests {
            for (i, s) in dataset.sellers.iter().enumerate() {
                weights.push(s.liquid_value(r.values[i]));
                boosts.push(dataset.kappa * r.experiences[i]);
            }
        }
        Self { dataset, weights, boosts, n }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    fn check(&self, i: usize, factors: &[f64]) -> Result<()> {
        if factors.len() != self.n {
            return Err(Error::input(format!("{} factors for {} sellers", factors.len(), self.n)));
        }
        if i >= self.n {
            return Err(Error::input(format!("no seller {i}")));
        }
        Ok(())
    }

    /// LPA payment of seller `i` in request `t` when it uses `own` and the
    /// rest use `factors`. Matches [`crate::auctions::run_auction`] exactly,
    /// including the lower-index tie-break.
    #[inline]
    fn lpa_payment(&self, t: usize, i: usize, own: f64, factors: &[f64]) -> f64 {
        let base = t * self.n;
        let w = &self.weights[base..base + self.n];
        let k = &self.boosts[base..base + self.n];
        let m = self.dataset.slots.len();
        let score = own * w[i] + k[i];
        let mut rank = 0;
        for j in 0..self.n {
            if j == i {
                continue;
            }
            let other = factors[j] * w[j] + k[j];
            if other > score || (other == score && j < i) {
                rank += 1;
                if rank >= m {
                    return 0.0;
                }
            }
        }
        w[i] * self.dataset.slots.rate(rank)
    }

    /// `(1/T) sum_t p_i` with seller `i` at factor `own`.
    fn lpa_expected(&self, i: usize, own: f64, factors: &[f64]) -> f64 {
        let t = self.dataset.num_requests();
        pairwise_sum(t, &|q| self.lpa_payment(q, i, own, factors)) / t as f64
    }

    /// Expected per-request payment of seller `i` under profile `a`.
    pub fn expected_payment(&self, i: usize, a: &PacingProfile, rule: AuctionRule) -> Result<f64> {
        self.check(i, a.as_slice())?;
        if rule == AuctionRule::Lpa {
            return Ok(self.lpa_expected(i, a.get(i), a.as_slice()));
        }
        let d = self.dataset;
        let t = d.num_requests();
        let total = pairwise_sum(t, &|q| {
            let r = &d.requests[q];
            let base = q * self.n;
            let bids: Vec<f64> = (0..self.n).map(|j| a.get(j) * self.weights[base + j]).collect();
            let scores: Vec<f64> = (0..self.n).map(|j| bids[j] + self.boosts[base + j]).collect();
            settle(r, &bids, &scores, &d.sellers, &d.slots, d.kappa, rule).payments[i]
        });
        Ok(total / t as f64)
    }

    /// Smallest factor in `[0, hi]`, up to `delta`, at which seller `i`'s LPA
    /// expected payment reaches `target`. Requires the payment at `hi` to
    /// reach it already.
    pub fn min_pacing_to_spend(&self, i: usize, factors: &[f64], target: f64, hi: f64, delta: f64) -> Result<f64> {
        self.check(i, factors)?;
        if delta.is_nan() || delta <= 0.0 {
            return Err(Error::input(format!("bisection tolerance must be positive, got {delta}")));
        }
        if self.lpa_expected(i, 0.0, factors) >= target {
            return Ok(0.0);
        }
        if self.lpa_expected(i, hi, factors) < target {
            return Err(Error::Internal(format!("seller {i} cannot reach spend {target} at factor {hi}")));
        }
        let (mut lo, mut hi) = (0.0, hi);
        while hi - lo > delta {
            let mid = 0.5 * (lo + hi);
            if self.lpa_expected(i, mid, factors) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Expected per-request payment of seller `i` under profile `a`.
pub fn expected_payment(i: usize, a: &PacingProfile, dataset: &Dataset, rule: AuctionRule) -> Result<f64> {
    Market::new(dataset).expected_payment(i, a, rule)
}

/// See [`Market::min_pacing_to_spend`]; `a` supplies the other sellers'
/// factors (its `i`-th entry is ignored).
pub fn min_pacing_to_spend(
    i: usize,
    a: &PacingProfile,
    target: f64,
    hi: f64,
    delta: f64,
    dataset: &Dataset,
) -> Result<f64> {
    Market::new(dataset).min_pacing_to_spend(i, a.as_slice(), target, hi, delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorUpdate {
    pub seller: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub factors: PacingProfile,
    pub iterations: usize,
    pub expected_payments: Vec<f64>,
    pub epsilon: f64,
    pub delta: f64,
    pub updates: Vec<FactorUpdate>,
}

impl EquilibriumResult {
    /// `ceil(n / eps)`.
    pub fn iteration_bound(&self) -> usize {
        iteration_bound(self.factors.len(), self.epsilon)
    }
}

pub fn iteration_bound(n: usize, epsilon: f64) -> usize {
    (n as f64 / epsilon).ceil() as usize
}

/// Computes an epsilon-pacing equilibrium, scanning sellers in index order.
pub fn compute_equilibrium(dataset: &Dataset, epsilon: f64, delta: f64) -> Result<EquilibriumResult> {
    let order: Vec<usize> = (0..dataset.num_sellers()).collect();
    compute_equilibrium_with_order(dataset, epsilon, delta, &order)
}

/// Like [`compute_equilibrium`], scanning sellers in `order` and restarting
/// the scan after every update.
pub fn compute_equilibrium_with_order(
    dataset: &Dataset,
    epsilon: f64,
    delta: f64,
    order: &[usize],
) -> Result<EquilibriumResult> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::input(format!("epsilon must lie in (0, 0.5), got {epsilon}")));
    }
    if !(delta > 0.0 && delta <= epsilon / 10.0) {
        return Err(Error::input(format!("delta must lie in (0, epsilon/10], got {delta}")));
    }
    let n = dataset.num_sellers();
    let mut sorted = order.to_vec();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err(Error::input("scan order must be a permutation of the sellers"));
    }

    let market = Market::new(dataset);
    let horizon = dataset.num_requests() as f64;
    let targets: Vec<f64> = dataset.sellers.iter().map(|s| s.budget() / horizon).collect();
    let limit = iteration_bound(n, epsilon) + n;
    let mut a = vec![1.0; n];
    let mut updates = Vec::new();

    'scan: loop {
        for &i in order {
            if a[i] > epsilon && market.lpa_expected(i, a[i] - epsilon, &a) > targets[i] {
                // The guard already certifies a[i] - eps overspends, so the
                // search can start there; each update drops by at least eps.
                let to = market.min_pacing_to_spend(i, &a, targets[i], a[i] - epsilon, delta)?;
                updates.push(FactorUpdate { seller: i, from: a[i], to });
                a[i] = to;
                if updates.len() > limit {
                    return Err(Error::Internal(format!(
                        "no convergence after {} updates (bound {limit})",
                        updates.len()
                    )));
                }
                continue 'scan;
            }
        }
        break;
    }

    let expected_payments = (0..n).map(|i| market.lpa_expected(i, a[i], &a)).collect();
    Ok(EquilibriumResult {
        factors: PacingProfile::new(a)?,
        iterations: updates.len(),
        expected_payments,
        epsilon,
        delta,
        updates,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumCondition {
    /// `a_i > eps` but lowering by `eps` still overspends.
    Overspend,
    /// `a_i < 1 - eps` but raising by `eps` still underspends.
    Underspend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub seller: usize,
    pub condition: EquilibriumCondition,
    /// Distance past the budget rate, always positive.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub epsilon: f64,
    pub violations: Vec<Violation>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks both epsilon-equilibrium conditions for every seller by direct
/// evaluation of the perturbed expected payments.
pub fn verify_epsilon_equilibrium(a: &PacingProfile, epsilon: f64, dataset: &Dataset) -> Result<Verification> {
    let market = Market::new(dataset);
    let n = dataset.num_sellers();
    if a.len() != n {
        return Err(Error::input(format!("{} factors for {n} sellers", a.len())));
    }
    let horizon = dataset.num_requests() as f64;
    let mut violations = Vec::new();
    for (i, s) in dataset.sellers.iter().enumerate() {
        let target = s.budget() / horizon;
        let ai = a.get(i);
        if ai > epsilon {
            let spend = market.lpa_expected(i, ai - epsilon, a.as_slice());
            if spend > target {
                violations.push(Violation {
                    seller: i,
                    condition: EquilibriumCondition::Overspend,
                    margin: spend - target,
                });
            }
        }
        if ai < 1.0 - epsilon {
            let spend = market.lpa_expected(i, ai + epsilon, a.as_slice());
            if spend < target {
                violations.push(Violation {
                    seller: i,
                    condition: EquilibriumCondition::Underspend,
                    margin: target - spend,
                });
            }
        }
    }
    Ok(Verification { epsilon, violations })
}

/// Outcomes of every request when sellers bid uniformly with profile `a`.
pub fn profile_outcomes(dataset: &Dataset, a: &PacingProfile, rule: AuctionRule) -> Result<Vec<AuctionOutcome>> {
    let n = dataset.num_sellers();
    if a.len() != n {
        return Err(Error::input(format!("{} factors for {n} sellers", a.len())));
    }
    Ok(dataset
        .requests
        .iter()
        .map(|r| {
            let bids: Vec<f64> = dataset.sellers.iter().map(|s| a.get(s.id) * s.liquid_value(r.values[s.id])).collect();
            let scores: Vec<f64> = (0..n).map(|i| bids[i] + dataset.kappa * r.experiences[i]).collect();
            settle(r, &bids, &scores, &dataset.sellers, &dataset.slots, dataset.kappa, rule)
        })
        .collect())
}

/// Platform metrics when every request is auctioned under profile `a`.
pub fn evaluate_profile(
    dataset: &Dataset,
    a: &PacingProfile,
    rule: AuctionRule,
    truncate: bool,
) -> Result<MetricsReport> {
    metrics(dataset, &profile_outcomes(dataset, a, rule)?, truncate)
}
