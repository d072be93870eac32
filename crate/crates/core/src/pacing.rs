//! Online repeated-auction simulation with multiplicative pacing.
//!
//! Every seller starts at pacing factor 1 and bids `a_i * v_i / roi_i`. After
//! each auction its factor moves by `eta * (B_i / T - p_i)`, clamped to
//! `[0, 1]`, which steers the average spend toward `B_i / T`. The budget is
//! only enforced softly during the run; the hard cap `min(B_i, sum_t p_i)`
//! is applied at settlement.

use serde::{Deserialize, Serialize};

use crate::auctions::{settle, AuctionRule};
use crate::model::{AuctionOutcome, Dataset, MetricsAccumulator, MetricsReport, Request, SellerProfile};

pub const DEFAULT_ETA: f64 = 0.01;

/// `a * v / roi`.
#[inline]
pub fn uniform_bid(factor: f64, seller: &SellerProfile, request: &Request) -> f64 {
    factor * seller.liquid_value(request.values[seller.id])
}

/// `clamp(a + eta * (B / T - paid), 0, 1)`.
pub fn pacing_update(previous: f64, budget: f64, horizon: usize, paid: f64, eta: f64) -> f64 {
    (previous + eta * (budget / horizon as f64 - paid)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacingState {
    pub factors: Vec<f64>,
    pub cumulative_spend: Vec<f64>,
    pub eta: f64,
}

impl PacingState {
    pub fn new(num_sellers: usize, eta: f64) -> Self {
        Self { factors: vec![1.0; num_sellers], cumulative_spend: vec![0.0; num_sellers], eta }
    }

    fn update(&mut self, sellers: &[SellerProfile], horizon: usize, payments: &[f64]) {
        for (i, s) in sellers.iter().enumerate() {
            self.cumulative_spend[i] += payments[i];
            self.factors[i] = pacing_update(self.factors[i], s.budget(), horizon, payments[i], self.eta);
        }
    }
}

/// Full record of an online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub rule: AuctionRule,
    /// Factors used to bid at each step.
    pub factors: Vec<Vec<f64>>,
    pub payments: Vec<Vec<f64>>,
    pub outcomes: Vec<AuctionOutcome>,
    pub metrics: MetricsReport,
    pub final_state: PacingState,
}

/// Metrics and end state of an online run, without the per-step record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineSummary {
    pub rule: AuctionRule,
    pub metrics: MetricsReport,
    pub final_state: PacingState,
}

fn run<F>(
    dataset: &Dataset,
    rule: AuctionRule,
    eta: f64,
    truncate: bool,
    mut observe: F,
) -> (MetricsReport, PacingState)
where
    F: FnMut(&[f64], &AuctionOutcome),
{
    let n = dataset.num_sellers();
    let horizon = dataset.num_requests();
    let mut state = PacingState::new(n, eta);
    let mut acc = MetricsAccumulator::new(n);
    let mut bids = vec![0.0; n];
    let mut scores = vec![0.0; n];
    for request in &dataset.requests {
        for (i, s) in dataset.sellers.iter().enumerate() {
            bids[i] = uniform_bid(state.factors[i], s, request);
            scores[i] = bids[i] + dataset.kappa * request.experiences[i];
        }
        let outcome = settle(request, &bids, &scores, &dataset.sellers, &dataset.slots, dataset.kappa, rule);
        acc.record(request, &outcome);
        observe(&state.factors, &outcome);
        state.update(&dataset.sellers, horizon, &outcome.payments);
    }
    (acc.finish(dataset, truncate), state)
}

/// Simulates the requests in dataset order and records every step.
/// Settlement truncates each seller's spend at its budget.
pub fn simulate_online(dataset: &Dataset, rule: AuctionRule, eta: f64) -> SimulationTrace {
    simulate_online_with(dataset, rule, eta, true)
}

pub fn simulate_online_with(dataset: &Dataset, rule: AuctionRule, eta: f64, truncate: bool) -> SimulationTrace {
    let t = dataset.num_requests();
    let mut factors = Vec::with_capacity(t);
    let mut payments = Vec::with_capacity(t);
    let mut outcomes = Vec::with_capacity(t);
    let (metrics, final_state) = run(dataset, rule, eta, truncate, |a, o| {
        factors.push(a.to_vec());
        payments.push(o.payments.clone());
        outcomes.push(o.clone());
    });
    SimulationTrace { rule, factors, payments, outcomes, metrics, final_state }
}

/// Same dynamics as [`simulate_online`] but keeps only the totals.
pub fn simulate_online_metrics(dataset: &Dataset, rule: AuctionRule, eta: f64, truncate: bool) -> OnlineSummary {
    let (metrics, final_state) = run(dataset, rule, eta, truncate, |_, _| {});
    OnlineSummary { rule, metrics, final_state }
}
