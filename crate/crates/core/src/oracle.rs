//! Certificates for the equilibrium outcome.
//!
//! Two independent checks sit here.
//!
//! **Duality gap.** The platform problem "maximize `sum_i min(B_i/T,
//! E[v_i x_i]/roi_i) + kappa E[e_i x_i]` over feasible exposures" has the
//! Lagrangian upper bound
//!
//! ```text
//! D(lambda) = E[ max_{x in F} sum_i (lambda_i v_i / roi_i + kappa e_i) x_i ]
//!           + sum_i (1 - lambda_i) B_i / T,      lambda in [0, 1]^n
//! ```
//!
//! where the inner maximum is the greedy assignment of the slots by
//! descending coefficient. Any pacing profile gives a feasible allocation,
//! so `D(lambda) >= primal(a)` for every pair (weak duality). A small
//! `D(a*) - primal(a*)` certifies that the equilibrium allocation is close
//! to optimal.
//!
//! **Misreport probe.** [`ic_probe`] replaces one seller's reported budget
//! and ROI by multiples of the truth, recomputes the equilibrium, and scores
//! the outcome against the seller's true target and constraints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auctions::AuctionRule;
use crate::equilibrium::{compute_equilibrium, evaluate_profile, profile_outcomes, PacingProfile};
use crate::model::{ranking, Dataset};
use crate::numeric::{pairwise_sum, CompensatedSum};
use crate::{Error, Result};

fn check_len(a: &PacingProfile, dataset: &Dataset) -> Result<()> {
    if a.len() != dataset.num_sellers() {
        return Err(Error::input(format!("{} entries for {} sellers", a.len(), dataset.num_sellers())));
    }
    Ok(())
}

/// Lagrangian dual value per request at multipliers `lambda`.
pub fn dual_value(lambda: &PacingProfile, dataset: &Dataset) -> Result<f64> {
    check_len(lambda, dataset)?;
    let t = dataset.num_requests();
    let n = dataset.num_sellers();
    let greedy = pairwise_sum(t, &|q| {
        let r = &dataset.requests[q];
        let coeffs: Vec<f64> = (0..n)
            .map(|i| lambda.get(i) * dataset.sellers[i].liquid_value(r.values[i]) + dataset.kappa * r.experiences[i])
            .collect();
        ranking(&coeffs)
            .iter()
            .take(dataset.slots.len())
            .enumerate()
            .map(|(j, &i)| dataset.slots.rate(j) * coeffs[i])
            .sum::<f64>()
    }) / t as f64;
    let slack: CompensatedSum =
        dataset.sellers.iter().map(|s| (1.0 - lambda.get(s.id)) * s.budget() / t as f64).collect();
    Ok(greedy + slack.value())
}

/// Platform objective per request, `(LW + kappa UE) / T`, under LPA with
/// uniform bids from profile `a`.
pub fn primal_value(a: &PacingProfile, dataset: &Dataset) -> Result<f64> {
    let m = evaluate_profile(dataset, a, AuctionRule::Lpa, true)?;
    Ok(m.obj / dataset.num_requests() as f64)
}

/// `dual_value(a) - primal_value(a)`, using the profile as its own
/// multiplier vector.
pub fn duality_gap(a: &PacingProfile, dataset: &Dataset) -> Result<f64> {
    Ok(dual_value(a, dataset)? - primal_value(a, dataset)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub lambda: PacingProfile,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
}

impl DualCertificate {
    /// Gap as a fraction of the primal value.
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.primal_value.abs().max(f64::MIN_POSITIVE)
    }
}

/// Builds a certificate for profile `a`: the primal value at `a` against the
/// smallest dual value found by coordinate moves of `±step` starting from
/// `lambda = a`.
pub fn certify(a: &PacingProfile, dataset: &Dataset, step: f64) -> Result<DualCertificate> {
    let primal = primal_value(a, dataset)?;
    let mut lambda = a.clone();
    let mut best = dual_value(&lambda, dataset)?;
    for _ in 0..2 {
        let mut improved = false;
        for i in 0..lambda.len() {
            for cand in [lambda.get(i) - step, lambda.get(i) + step] {
                let cand = cand.clamp(0.0, 1.0);
                if cand == lambda.get(i) {
                    continue;
                }
                let trial = lambda.with(i, cand)?;
                let value = dual_value(&trial, dataset)?;
                if value < best {
                    best = value;
                    lambda = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    Ok(DualCertificate { lambda, dual_value: best, primal_value: primal, gap: best - primal })
}

/// Fraction of requests whose LPA ranking under `a` has an exact score tie
/// among the first `m + 1` positions, where the tie-break decides the
/// allocation.
pub fn tie_rate(a: &PacingProfile, dataset: &Dataset) -> Result<f64> {
    check_len(a, dataset)?;
    let n = dataset.num_sellers();
    let depth = (dataset.slots.len() + 1).min(n);
    let ties = dataset
        .requests
        .iter()
        .filter(|r| {
            let scores: Vec<f64> = (0..n)
                .map(|i| a.get(i) * dataset.sellers[i].liquid_value(r.values[i]) + dataset.kappa * r.experiences[i])
                .collect();
            let order = ranking(&scores);
            order[..depth].windows(2).any(|w| scores[w[0]] == scores[w[1]])
        })
        .count();
    Ok(ties as f64 / dataset.num_requests() as f64)
}

/// Multiplicative misreport factors for budget and ROI. Both lists must
/// contain 1 so the truthful report is part of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisreportGridSpec {
    pub budget_factors: Vec<f64>,
    pub roi_factors: Vec<f64>,
}

impl Default for MisreportGridSpec {
    fn default() -> Self {
        let f = vec![0.25, 0.5, 0.8, 1.0, 1.25, 2.0, 4.0];
        Self { budget_factors: f.clone(), roi_factors: f }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisreportCell {
    pub budget_factor: f64,
    pub roi_factor: f64,
    pub reported_budget: f64,
    pub reported_roi: f64,
    /// `sum_t x_i(t) v_i(t)` in the misreport equilibrium.
    pub sales_value: f64,
    /// `min(B_i, sales_value / roi_i)` with the true budget and ROI.
    pub true_objective: f64,
    /// Settled payment, truncated at the reported budget.
    pub payment: f64,
    /// What the true constraints allow: `min(B_i, sales_value / roi_i)`.
    pub allowed_payment: f64,
    pub feasible: bool,
    pub equilibrium_iterations: usize,
}

impl MisreportCell {
    pub fn is_truthful(&self) -> bool {
        self.budget_factor == 1.0 && self.roi_factor == 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MisreportGrid {
    pub seller: usize,
    pub true_budget: f64,
    pub true_roi: f64,
    pub truthful_value: f64,
    pub cells: Vec<MisreportCell>,
}

impl MisreportGrid {
    pub fn truthful_cell(&self) -> &MisreportCell {
        self.cells.iter().find(|c| c.is_truthful()).expect("grid always contains the truthful cell")
    }

    /// Largest `true_objective - truthful_value` over feasible cells.
    pub fn max_feasible_gain(&self) -> f64 {
        self.cells
            .iter()
            .filter(|c| c.feasible)
            .map(|c| c.true_objective - self.truthful_value)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when no feasible misreport beats the truthful value by more than
    /// `rel_tol * truthful_value`.
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_feasible_gain() <= rel_tol * self.truthful_value.abs()
    }
}

/// Relative slack on the feasibility test, absorbing rounding between the
/// per-request payment sum and `sales_value / roi`.
const FEASIBILITY_TOL: f64 = 1e-9;

/// Probes seller `seller`'s incentive to misreport on the given grid.
pub fn ic_probe(
    seller: usize,
    dataset: &Dataset,
    grid: &MisreportGridSpec,
    epsilon: f64,
    delta: f64,
) -> Result<MisreportGrid> {
    let truth = dataset.sellers.get(seller).ok_or_else(|| Error::input(format!("no seller {seller}")))?.clone();
    if !grid.budget_factors.contains(&1.0) || !grid.roi_factors.contains(&1.0) {
        return Err(Error::input("misreport grid must contain the factor 1"));
    }
    if grid.budget_factors.iter().chain(&grid.roi_factors).any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::input("misreport factors must be positive"));
    }
    let pairs: Vec<(f64, f64)> =
        grid.budget_factors.iter().flat_map(|&fb| grid.roi_factors.iter().map(move |&fr| (fb, fr))).collect();

    let cells = pairs
        .par_iter()
        .map(|&(fb, fr)| {
            let reported = dataset.with_report(seller, fb * truth.budget(), fr * truth.roi())?;
            let eq = compute_equilibrium(&reported, epsilon, delta)?;
            let outcomes = profile_outcomes(&reported, &eq.factors, AuctionRule::Lpa)?;
            let mut sales = CompensatedSum::new();
            let mut spend = CompensatedSum::new();
            for (r, o) in reported.requests.iter().zip(&outcomes) {
                sales.add(o.exposures[seller] * r.values[seller]);
                spend.add(o.payments[seller]);
            }
            let sales_value = sales.value();
            let payment = spend.value().min(reported.sellers[seller].budget());
            let allowed = truth.budget().min(truth.liquid_value(sales_value));
            Ok(MisreportCell {
                budget_factor: fb,
                roi_factor: fr,
                reported_budget: reported.sellers[seller].budget(),
                reported_roi: reported.sellers[seller].roi(),
                sales_value,
                true_objective: allowed,
                payment,
                allowed_payment: allowed,
                feasible: payment <= allowed * (1.0 + FEASIBILITY_TOL),
                equilibrium_iterations: eq.iterations,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let truthful_value = cells
        .iter()
        .find(|c| c.is_truthful())
        .map(|c| c.true_objective)
        .ok_or_else(|| Error::Internal("truthful cell missing".into()))?;
    Ok(MisreportGrid { seller, true_budget: truth.budget(), true_roi: truth.roi(), truthful_value, cells })
}
