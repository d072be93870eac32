//! Domain types, the shared rank-score allocation and the platform metrics.
//!
//! Every auction in the crate allocates the same way: each seller gets a rank
//! score `bid + kappa * experience`, and the slots go to the highest scores in
//! order. Ties are broken in favour of the lower seller index, everywhere.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;
use crate::{Error, Result};

/// Exposure rates of the `m` slots, non-increasing and in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SlotLayout {
    exposure_rates: Vec<f64>,
}

impl SlotLayout {
    pub fn new(exposure_rates: Vec<f64>) -> Result<Self> {
        if exposure_rates.is_empty() {
            return Err(Error::input("slot layout needs at least one slot"));
        }
        if exposure_rates.iter().any(|b| !(b.is_finite() && *b > 0.0 && *b <= 1.0)) {
            return Err(Error::input(format!("exposure rates must lie in (0, 1], got {exposure_rates:?}")));
        }
        if exposure_rates.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::input(format!("exposure rates must be non-increasing, got {exposure_rates:?}")));
        }
        Ok(Self { exposure_rates })
    }

    pub fn len(&self) -> usize {
        self.exposure_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exposure_rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.exposure_rates
    }

    /// Rate of slot `j` (0-based); zero past the last slot.
    pub fn rate(&self, j: usize) -> f64 {
        self.exposure_rates.get(j).copied().unwrap_or(0.0)
    }
}

impl TryFrom<Vec<f64>> for SlotLayout {
    type Error = Error;

    fn try_from(rates: Vec<f64>) -> Result<Self> {
        SlotLayout::new(rates)
    }
}

impl From<SlotLayout> for Vec<f64> {
    fn from(layout: SlotLayout) -> Self {
        layout.exposure_rates
    }
}

/// One user request: per-seller sales value and experience per exposure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub values: Vec<f64>,
    pub experiences: Vec<f64>,
}

impl Request {
    pub fn new(id: impl Into<String>, values: Vec<f64>, experiences: Vec<f64>) -> Result<Self> {
        let request = Self { id: id.into(), values, experiences };
        request.validate()?;
        Ok(request)
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.experiences.len() {
            return Err(Error::input(format!(
                "request {}: {} values but {} experiences",
                self.id,
                self.values.len(),
                self.experiences.len()
            )));
        }
        let bad = |x: &f64| !(x.is_finite() && *x >= 0.0);
        if self.values.iter().any(bad) || self.experiences.iter().any(bad) {
            return Err(Error::input(format!(
                "request {}: values and experiences must be finite and non-negative",
                self.id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A seller's reported budget and target ROI.
///
/// The stock value is not stored: it is always `roi * budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellerProfile {
    pub id: usize,
    pub label: String,
    budget: f64,
    roi: f64,
}

impl SellerProfile {
    pub fn new(id: usize, label: impl Into<String>, budget: f64, roi: f64) -> Result<Self> {
        let label = label.into();
        if !(budget.is_finite() && budget > 0.0) {
            return Err(Error::input(format!("seller {label}: budget must be positive, got {budget}")));
        }
        if !(roi.is_finite() && roi > 0.0) {
            return Err(Error::input(format!("seller {label}: roi must be positive, got {roi}")));
        }
        Ok(Self { id, label, budget, roi })
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn roi(&self) -> f64 {
        self.roi
    }

    pub fn stock_value(&self) -> f64 {
        self.roi * self.budget
    }

    /// `v / roi`: the largest bid per exposure compatible with the ROI target,
    /// and the LPA price per exposure.
    #[inline]
    pub fn liquid_value(&self, value: f64) -> f64 {
        value / self.roi
    }
}

/// A market instance: sellers, the ordered request sequence, slots and the
/// experience weight `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub sellers: Vec<SellerProfile>,
    pub requests: Vec<Request>,
    pub slots: SlotLayout,
    pub kappa: f64,
}

impl Dataset {
    pub fn new(sellers: Vec<SellerProfile>, requests: Vec<Request>, slots: SlotLayout, kappa: f64) -> Result<Self> {
        let dataset = Self { sellers, requests, slots, kappa };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sellers.is_empty() {
            return Err(Error::input("dataset has no sellers"));
        }
        if self.requests.is_empty() {
            return Err(Error::input("dataset has no requests"));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::input(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        for (i, s) in self.sellers.iter().enumerate() {
            if s.id != i {
                return Err(Error::input(format!("seller {} stored at position {i}", s.id)));
            }
        }
        let n = self.sellers.len();
        for r in &self.requests {
            r.validate()?;
            if r.len() != n {
                return Err(Error::input(format!("request {} has {} entries for {n} sellers", r.id, r.len())));
            }
        }
        Ok(())
    }

    pub fn num_sellers(&self) -> usize {
        self.sellers.len()
    }

    pub fn num_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn total_budget(&self) -> f64 {
        self.sellers.iter().map(|s| s.budget).collect::<CompensatedSum>().value()
    }

    pub fn with_kappa(&self, kappa: f64) -> Result<Dataset> {
        let mut d = self.clone();
        d.kappa = kappa;
        d.validate()?;
        Ok(d)
    }

    /// Copy of the dataset in which seller `i` reports `(budget, roi)`.
    pub fn with_report(&self, i: usize, budget: f64, roi: f64) -> Result<Dataset> {
        let seller = self.sellers.get(i).ok_or_else(|| Error::input(format!("no seller {i}")))?;
        let mut d = self.clone();
        d.sellers[i] = SellerProfile::new(i, seller.label.clone(), budget, roi)?;
        Ok(d)
    }
}

/// Result of one auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    /// `assignment[j]` is the seller holding slot `j`, if any.
    pub assignment: Vec<Option<usize>>,
    pub exposures: Vec<f64>,
    pub payments: Vec<f64>,
}

impl AuctionOutcome {
    /// Slot held by seller `i`, if any.
    pub fn slot_of(&self, i: usize) -> Option<usize> {
        self.assignment.iter().position(|s| *s == Some(i))
    }
}

/// Per-seller totals behind a [`MetricsReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SellerMetrics {
    /// Raw sum of per-request payments.
    pub spend: f64,
    /// Spend after settlement (truncated at the budget when enabled).
    pub settled_spend: f64,
    /// `sum_t x_i(t) v_i(t)`.
    pub sales_value: f64,
    /// `sum_t x_i(t)`.
    pub exposure: f64,
    /// `min(B_i, sales_value / roi_i)`.
    pub liquid_welfare: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub lw: f64,
    pub ue: f64,
    pub kappa: f64,
    pub obj: f64,
    pub rev: f64,
    pub truncated: bool,
    pub per_seller: Vec<SellerMetrics>,
}

impl MetricsReport {
    pub fn kappa_ue(&self) -> f64 {
        self.kappa * self.ue
    }
}

/// Streaming accumulator for the platform metrics.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    spend: Vec<CompensatedSum>,
    sales: Vec<CompensatedSum>,
    exposure: Vec<CompensatedSum>,
    ue: CompensatedSum,
}

impl MetricsAccumulator {
    pub fn new(num_sellers: usize) -> Self {
        Self {
            spend: vec![CompensatedSum::new(); num_sellers],
            sales: vec![CompensatedSum::new(); num_sellers],
            exposure: vec![CompensatedSum::new(); num_sellers],
            ue: CompensatedSum::new(),
        }
    }

    pub fn record(&mut self, request: &Request, outcome: &AuctionOutcome) {
        for i in 0..self.spend.len() {
            let x = outcome.exposures[i];
            if x > 0.0 {
                self.sales[i].add(x * request.values[i]);
                self.exposure[i].add(x);
                self.ue.add(x * request.experiences[i]);
            }
            let p = outcome.payments[i];
            if p != 0.0 {
                self.spend[i].add(p);
            }
        }
    }

    pub fn finish(&self, dataset: &Dataset, truncate: bool) -> MetricsReport {
        let per_seller: Vec<SellerMetrics> = dataset
            .sellers
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let spend = self.spend[i].value();
                let sales_value = self.sales[i].value();
                SellerMetrics {
                    spend,
                    settled_spend: if truncate { spend.min(s.budget()) } else { spend },
                    sales_value,
                    exposure: self.exposure[i].value(),
                    liquid_welfare: s.budget().min(s.liquid_value(sales_value)),
                }
            })
            .collect();
        let lw = per_seller.iter().map(|m| m.liquid_welfare).collect::<CompensatedSum>().value();
        let rev = per_seller.iter().map(|m| m.settled_spend).collect::<CompensatedSum>().value();
        let ue = self.ue.value();
        MetricsReport {
            lw,
            ue,
            kappa: dataset.kappa,
            obj: lw + dataset.kappa * ue,
            rev,
            truncated: truncate,
            per_seller,
        }
    }
}

/// Rank scores `s_i = b_i + kappa * e_i`.
pub fn rank_scores(bids: &[f64], request: &Request, kappa: f64) -> Result<Vec<f64>> {
    if bids.len() != request.experiences.len() {
        return Err(Error::input(format!(
            "{} bids for a request over {} sellers",
            bids.len(),
            request.experiences.len()
        )));
    }
    if bids.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err(Error::input("bids must be finite and non-negative"));
    }
    Ok(bids.iter().zip(&request.experiences).map(|(b, e)| b + kappa * e).collect())
}

/// Seller indices sorted by descending score, ties to the lower index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    order
}

/// Assigns slot `j` to the seller with the `j`-th highest score. Payments are
/// left at zero.
pub fn allocate(scores: &[f64], slots: &SlotLayout) -> Result<AuctionOutcome> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::input("scores must be finite"));
    }
    Ok(allocate_ranked(&ranking(scores), scores.len(), slots))
}

pub(crate) fn allocate_ranked(order: &[usize], n: usize, slots: &SlotLayout) -> AuctionOutcome {
    let m = slots.len();
    let mut assignment = vec![None; m];
    let mut exposures = vec![0.0; n];
    for (j, &i) in order.iter().take(m).enumerate() {
        assignment[j] = Some(i);
        exposures[i] = slots.rate(j);
    }
    AuctionOutcome { assignment, exposures, payments: vec![0.0; n] }
}

/// Computes every metric of a run in one pass.
pub fn metrics(dataset: &Dataset, outcomes: &[AuctionOutcome], truncate: bool) -> Result<MetricsReport> {
    if outcomes.len() != dataset.num_requests() {
        return Err(Error::input(format!("{} outcomes for {} requests", outcomes.len(), dataset.num_requests())));
    }
    let mut acc = MetricsAccumulator::new(dataset.num_sellers());
    for (r, o) in dataset.requests.iter().zip(outcomes) {
        acc.record(r, o);
    }
    Ok(acc.finish(dataset, truncate))
}

/// `sum_i min(B_i, (1/roi_i) sum_t x_i(t) v_i(t))`.
pub fn liquid_welfare(dataset: &Dataset, outcomes: &[AuctionOutcome]) -> Result<f64> {
    Ok(metrics(dataset, outcomes, true)?.lw)
}

/// `sum_t sum_i x_i(t) e_i(t)`.
pub fn user_experience(dataset: &Dataset, outcomes: &[AuctionOutcome]) -> Result<f64> {
    Ok(metrics(dataset, outcomes, true)?.ue)
}

/// Total payment, each seller capped at its budget when `truncate` is set.
pub fn revenue(dataset: &Dataset, outcomes: &[AuctionOutcome], truncate: bool) -> Result<f64> {
    Ok(metrics(dataset, outcomes, truncate)?.rev)
}
