//! Payment rules.
//!
//! All four rules share [`crate::model::allocate`] on rank scores and differ
//! only in what a winner pays:
//!
//! | rule | price for slot `j` |
//! |------|--------------------|
//! | LPA  | `beta_j * v_i / roi_i`, independent of the bid |
//! | GFP  | `beta_j * b_i` |
//! | GSP  | `beta_j * max(0, s_(j+1) - kappa e_i)` |
//! | VCG  | `sum_{k >= j} (beta_k - beta_(k+1)) * max(0, s_(k+1) - kappa e_i)` |
//!
//! The second-price rules subtract the winner's own experience boost, so a
//! seller never pays for its organic contribution to the rank score. At
//! `kappa = 0` they reduce to the textbook position-auction rules.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{allocate_ranked, rank_scores, ranking, AuctionOutcome, Request, SellerProfile, SlotLayout};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuctionRule {
    Lpa,
    Gfp,
    Gsp,
    Vcg,
}

impl AuctionRule {
    pub const ALL: [AuctionRule; 4] = [AuctionRule::Lpa, AuctionRule::Gfp, AuctionRule::Gsp, AuctionRule::Vcg];

    pub fn name(self) -> &'static str {
        match self {
            AuctionRule::Lpa => "lpa",
            AuctionRule::Gfp => "gfp",
            AuctionRule::Gsp => "gsp",
            AuctionRule::Vcg => "vcg",
        }
    }
}

impl fmt::Display for AuctionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AuctionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lpa" => Ok(AuctionRule::Lpa),
            "gfp" => Ok(AuctionRule::Gfp),
            "gsp" => Ok(AuctionRule::Gsp),
            "vcg" => Ok(AuctionRule::Vcg),
            other => Err(Error::input(format!("unknown auction rule {other:?}"))),
        }
    }
}

/// Runs one auction: rank-score allocation, then the rule's payments.
pub fn run_auction(
    request: &Request,
    bids: &[f64],
    sellers: &[SellerProfile],
    slots: &SlotLayout,
    kappa: f64,
    rule: AuctionRule,
) -> Result<AuctionOutcome> {
    if sellers.len() != request.len() {
        return Err(Error::input(format!("{} sellers for a request over {} sellers", sellers.len(), request.len())));
    }
    let scores = rank_scores(bids, request, kappa)?;
    Ok(settle(request, bids, &scores, sellers, slots, kappa, rule))
}

/// Allocation plus payments on already validated scores.
pub(crate) fn settle(
    request: &Request,
    bids: &[f64],
    scores: &[f64],
    sellers: &[SellerProfile],
    slots: &SlotLayout,
    kappa: f64,
    rule: AuctionRule,
) -> AuctionOutcome {
    let order = ranking(scores);
    let mut outcome = allocate_ranked(&order, scores.len(), slots);
    let sorted: Vec<f64> = match rule {
        AuctionRule::Gsp | AuctionRule::Vcg => order.iter().map(|&i| scores[i]).collect(),
        _ => Vec::new(),
    };
    for (j, &i) in order.iter().take(slots.len()).enumerate() {
        let boost = kappa * request.experiences[i];
        outcome.payments[i] = match rule {
            AuctionRule::Lpa => lpa_payment(j, &sellers[i], request.values[i], slots),
            AuctionRule::Gfp => gfp_payment(j, bids[i], slots),
            AuctionRule::Gsp => gsp_payment(j, &sorted, bids[i], boost, slots),
            AuctionRule::Vcg => vcg_payment(j, &sorted, bids[i], boost, slots),
        };
    }
    outcome
}

/// `beta_j * v / roi` for the winner of slot `j` (0-based).
pub fn lpa_payment(slot: usize, seller: &SellerProfile, value: f64, slots: &SlotLayout) -> f64 {
    seller.liquid_value(value) * slots.rate(slot)
}

/// `beta_j * b` for the winner of slot `j` (0-based).
pub fn gfp_payment(slot: usize, bid: f64, slots: &SlotLayout) -> f64 {
    slots.rate(slot) * bid
}

/// Per-exposure price against the score at sorted position `k`.
///
/// Mathematically `s_(k) - boost <= s_(j) - boost = bid` for `k > j`; the
/// `min` only absorbs rounding in `(bid + boost) - boost`.
fn boosted_price(sorted_scores: &[f64], k: usize, bid: f64, boost: f64) -> f64 {
    let next = sorted_scores.get(k).copied().unwrap_or(0.0);
    (next - boost).max(0.0).min(bid)
}

/// Next-score price for the winner of slot `j` (0-based).
///
/// `sorted_scores` holds all rank scores in descending order; `boost` is the
/// winner's own `kappa * e`.
pub fn gsp_payment(slot: usize, sorted_scores: &[f64], bid: f64, boost: f64, slots: &SlotLayout) -> f64 {
    slots.rate(slot) * boosted_price(sorted_scores, slot + 1, bid, boost)
}

/// Position-auction externality price for the winner of slot `j` (0-based).
pub fn vcg_payment(slot: usize, sorted_scores: &[f64], bid: f64, boost: f64, slots: &SlotLayout) -> f64 {
    let mut total = 0.0;
    for k in slot..slots.len() {
        let weight = slots.rate(k) - slots.rate(k + 1);
        total += weight * boosted_price(sorted_scores, k + 1, bid, boost);
    }
    total
}
