//! Simulation and verification engine for platform-wide marketing auctions.
//!
//! Sellers bid for slots across all traffic through auto-bidders that scale a
//! value-derived bid `v / roi` by a pacing factor in `[0, 1]`. The crate
//! implements the Liquid Payment Auction (LPA), where a winner pays its
//! liquid value `v * beta / roi` instead of its bid, alongside generalized
//! first-price, generalized second-price and VCG baselines that share the
//! same rank-score allocation.
//!
//! On top of the auctions it provides:
//!
//! * [`pacing`]: the online repeated-auction simulator with a multiplicative
//!   pacing controller and budget-truncated settlement;
//! * [`equilibrium`]: an offline epsilon-pacing-equilibrium solver and an
//!   independent verifier;
//! * [`oracle`]: a Lagrangian duality-gap certificate for allocation
//!   optimality and a misreport grid probe for incentive compatibility;
//! * [`data`]: a seeded synthetic market generator and a CSV format for
//!   external data;
//! * [`report`]: the comparison, Pareto sweep and certification reports the
//!   `lpa` command-line tool writes.
//!
//! ```
//! use liquid_auction::auctions::AuctionRule;
//! use liquid_auction::data::{gen_synthetic, SyntheticConfig};
//! use liquid_auction::equilibrium::compute_equilibrium;
//! use liquid_auction::pacing::simulate_online_metrics;
//!
//! let config = SyntheticConfig::scaled(4, 500);
//! let dataset = gen_synthetic(&config, 7).unwrap();
//!
//! let online = simulate_online_metrics(&dataset, AuctionRule::Lpa, 0.01, true);
//! let offline = compute_equilibrium(&dataset, 0.01, 1e-4).unwrap();
//! assert!(online.metrics.obj > 0.0);
//! assert!(offline.factors.iter().all(|a| (0.0..=1.0).contains(&a)));
//! ```

pub mod auctions;
pub mod data;
pub mod equilibrium;
mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod pacing;
pub mod report;

pub use error::{Error, Result};
