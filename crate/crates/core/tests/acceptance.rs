//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.
//!
//! Run alone with `cargo test -p liquid-auction --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use liquid_auction::auctions::{run_auction, AuctionRule};
use liquid_auction::data::{gen_synthetic, SyntheticConfig};
use liquid_auction::equilibrium::{
    compute_equilibrium, compute_equilibrium_with_order, evaluate_profile, iteration_bound, profile_outcomes,
    verify_epsilon_equilibrium, EquilibriumResult, Market, PacingProfile,
};
use liquid_auction::model::{Dataset, MetricsReport};
use liquid_auction::oracle::{dual_value, duality_gap, ic_probe, primal_value, tie_rate, MisreportGridSpec};
use liquid_auction::pacing::{simulate_online_metrics, uniform_bid, DEFAULT_ETA};
use liquid_auction::report::{default_kappa_sweep, pareto_sweep};

const EPSILON: f64 = 0.01;
const DELTA: f64 = 1e-4;
const SEEDS: std::ops::Range<u64> = 0..10;

/// Mean of `v` at the default generator settings, estimated with numpy
/// from 10^7 independent draws (seed 20261016) before this crate existed.
const ORACLE_MEAN_V: f64 = 1.694_647_324_368_477_6;
const ORACLE_SE_V: f64 = 0.001_004_7;

struct Criterion {
    id: &'static str,
    name: &'static str,
    passed: bool,
    detail: String,
}

struct Instance {
    seed: u64,
    dataset: Dataset,
    eq: EquilibriumResult,
    seconds: f64,
    offline: MetricsReport,
    online: Vec<MetricsReport>,
}

fn instance(seed: u64, t: usize) -> Instance {
    let dataset = gen_synthetic(&SyntheticConfig::scaled(10, t), seed).unwrap();
    let start = Instant::now();
    let eq = compute_equilibrium(&dataset, EPSILON, DELTA).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let offline = evaluate_profile(&dataset, &eq.factors, AuctionRule::Lpa, true).unwrap();
    let online =
        AuctionRule::ALL.par_iter().map(|&r| simulate_online_metrics(&dataset, r, DEFAULT_ETA, true).metrics).collect();
    Instance { seed, dataset, eq, seconds, offline, online }
}

fn online(inst: &Instance, rule: AuctionRule) -> &MetricsReport {
    &inst.online[AuctionRule::ALL.iter().position(|&r| r == rule).unwrap()]
}

fn rel_diff(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

fn algorithm_contract(instances: &[Instance]) -> Criterion {
    let mut worst_iter = 0;
    let mut violations = 0;
    let mut slowest: f64 = 0.0;
    let bound = iteration_bound(10, EPSILON);
    let mut passed = true;
    for inst in instances {
        let v = verify_epsilon_equilibrium(&inst.eq.factors, EPSILON, &inst.dataset).unwrap();
        violations += v.violations.len();
        worst_iter = worst_iter.max(inst.eq.iterations);
        slowest = slowest.max(inst.seconds);
        passed &= inst.eq.iterations <= bound && v.passed();
    }
    Criterion {
        id: "1",
        name: "equilibrium iteration bound and verification",
        passed,
        detail: format!(
            "{} instances, max {worst_iter} iterations (bound {bound}), {violations} violations, slowest {slowest:.2}s",
            instances.len()
        ),
    }
}

fn optimality_certificate(instances: &[Instance]) -> Criterion {
    let mut worst: f64 = 0.0;
    for inst in instances {
        let gap = duality_gap(&inst.eq.factors, &inst.dataset).unwrap();
        let primal = primal_value(&inst.eq.factors, &inst.dataset).unwrap();
        worst = worst.max(gap / primal);
    }
    Criterion {
        id: "2",
        name: "duality gap at the equilibrium",
        passed: worst <= 0.01,
        detail: format!("max gap {:.4}% of primal (limit 1%)", 100.0 * worst),
    }
}

fn online_offline(small: &[Instance], large: &[Instance]) -> Criterion {
    let worst = |set: &[Instance]| {
        set.iter().map(|i| rel_diff(online(i, AuctionRule::Lpa).obj, i.offline.obj)).fold(0.0, f64::max)
    };
    let (ws, wl) = (worst(small), worst(large));
    Criterion {
        id: "3",
        name: "online LPA objective vs offline equilibrium",
        passed: ws <= 0.02 && wl <= 0.01,
        detail: format!(
            "T=1e4: max {:.3}% over {} (limit 2%); T=1e5: max {:.3}% over {} (limit 1%)",
            100.0 * ws,
            small.len(),
            100.0 * wl,
            large.len()
        ),
    }
}

fn rule_ordering(instances: &[Instance]) -> Criterion {
    let ordered: Vec<u64> = instances
        .iter()
        .filter(|i| {
            let [lpa, gfp, gsp, vcg] = AuctionRule::ALL.map(|r| online(i, r));
            lpa.obj >= gfp.obj
                && gfp.obj >= gsp.obj
                && lpa.obj >= vcg.obj
                && [gfp, gsp, vcg].iter().all(|b| lpa.rev >= b.rev)
        })
        .map(|i| i.seed)
        .collect();
    Criterion {
        id: "4",
        name: "objective and revenue ordering across rules",
        passed: ordered.len() >= 8,
        detail: format!("{}/{} instances ordered (need 8)", ordered.len(), instances.len()),
    }
}

fn incentive_compatibility() -> Criterion {
    let grid = MisreportGridSpec::default();
    let cells: Vec<(u64, usize)> = (0..5).flat_map(|s| (0..5).map(move |i| (s, i))).collect();
    let results: Vec<(f64, bool, usize)> = cells
        .par_iter()
        .map(|&(seed, i)| {
            let d = gen_synthetic(&SyntheticConfig::scaled(5, 1000), seed).unwrap();
            let g = ic_probe(i, &d, &grid, EPSILON, DELTA).unwrap();
            let feasible = g.cells.iter().filter(|c| c.feasible && !c.is_truthful()).count();
            (g.max_feasible_gain() / g.truthful_value.max(f64::MIN_POSITIVE), g.passes(0.005), feasible)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let failures = results.iter().filter(|r| !r.1).count();
    let feasible: usize = results.iter().map(|r| r.2).sum();
    Criterion {
        id: "5",
        name: "no profitable feasible misreport",
        passed: failures == 0,
        detail: format!(
            "5 instances x 5 sellers x {} cells, {feasible} feasible misreports, max relative gain {:.4}% (limit 0.5%), {failures} failing sellers",
            grid.budget_factors.len() * grid.roi_factors.len(),
            100.0 * worst
        ),
    }
}

/// The criterion fixes no epsilon; 1e-4 is the tolerance at which the
/// residual non-uniqueness of an approximate equilibrium stays below the
/// allocation threshold.
const UNIQUENESS_EPSILON: f64 = 1e-4;

fn outcome_uniqueness(instances: &[Instance]) -> Criterion {
    let eps = UNIQUENESS_EPSILON;
    let delta = eps / 100.0;
    let mut used = 0;
    let mut worst_alloc: f64 = 0.0;
    let mut worst_pay: f64 = 0.0;
    for inst in instances {
        let d = &inst.dataset;
        let n = d.num_sellers();
        let base = compute_equilibrium(d, eps, delta).unwrap();
        if tie_rate(&base.factors, d).unwrap() > 0.0 {
            continue;
        }
        used += 1;
        let base_outcomes = profile_outcomes(d, &base.factors, AuctionRule::Lpa).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
        let mut orders = vec![(0..n).rev().collect::<Vec<_>>()];
        for _ in 0..2 {
            let mut o: Vec<usize> = (0..n).collect();
            o.shuffle(&mut rng);
            orders.push(o);
        }
        for order in orders {
            let other = compute_equilibrium_with_order(d, eps, delta, &order).unwrap();
            let outcomes = profile_outcomes(d, &other.factors, AuctionRule::Lpa).unwrap();
            let changed = base_outcomes.iter().zip(&outcomes).filter(|(a, b)| a.assignment != b.assignment).count();
            worst_alloc = worst_alloc.max(changed as f64 / d.num_requests() as f64);
            for (i, s) in d.sellers.iter().enumerate() {
                let vmax = d.requests.iter().map(|r| r.values[i]).fold(0.0, f64::max);
                let limit = 2.0 * eps * s.liquid_value(vmax);
                let moved = (base.expected_payments[i] - other.expected_payments[i]).abs();
                worst_pay = worst_pay.max(moved / limit);
            }
        }
    }
    Criterion {
        id: "6",
        name: "outcomes independent of scan order",
        passed: used > 0 && worst_alloc <= 0.001 && worst_pay <= 1.0,
        detail: format!(
            "epsilon {eps:e}, {used} tie-free instances x 3 orders: max {:.3}% requests reallocated (limit 0.1%), \
             max payment shift {:.3} of 2*eps*max(v/roi)",
            100.0 * worst_alloc,
            worst_pay
        ),
    }
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> PacingProfile {
    PacingProfile::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn invariant_suites(instances: &[Instance]) -> Criterion {
    let pool: Vec<Dataset> = (0..20u64)
        .map(|s| gen_synthetic(&SyntheticConfig::scaled(3 + (s as usize % 6), 300), 1000 + s).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut notes = Vec::new();

    let mut monotone_failures = 0;
    for _ in 0..1000 {
        let d = &pool[rng.random_range(0..pool.len())];
        let n = d.num_sellers();
        let market = Market::new(d);
        let a = random_profile(&mut rng, n);
        let i = rng.random_range(0..n);
        let j = (i + rng.random_range(1..n)) % n;
        let base = market.expected_payment(i, &a, AuctionRule::Lpa).unwrap();
        let own = a.with(i, rng.random_range(a.get(i)..=1.0)).unwrap();
        let others = a.with(j, rng.random_range(a.get(j)..=1.0)).unwrap();
        if market.expected_payment(i, &own, AuctionRule::Lpa).unwrap() < base
            || market.expected_payment(i, &others, AuctionRule::Lpa).unwrap() > base
        {
            monotone_failures += 1;
        }
    }
    notes.push(format!("monotonicity 1000 probes, {monotone_failures} violations"));

    let mut roi_failures = 0;
    let mut roi_checks = 0;
    for d in &pool {
        let a = random_profile(&mut rng, d.num_sellers());
        for rule in AuctionRule::ALL {
            for r in &d.requests {
                let bids: Vec<f64> = d.sellers.iter().map(|s| uniform_bid(a.get(s.id), s, r)).collect();
                let out = run_auction(r, &bids, &d.sellers, &d.slots, d.kappa, rule).unwrap();
                for (i, s) in d.sellers.iter().enumerate() {
                    roi_checks += 1;
                    let cap = s.liquid_value(r.values[i]) * out.exposures[i];
                    if out.payments[i] > cap * (1.0 + 1e-12) {
                        roi_failures += 1;
                    }
                }
            }
        }
    }
    notes.push(format!("ROI safety {roi_checks} checks, {roi_failures} violations"));

    let mut worst_gap = f64::INFINITY;
    for _ in 0..1000 {
        let d = &pool[rng.random_range(0..pool.len())];
        let lambda = random_profile(&mut rng, d.num_sellers());
        let a = random_profile(&mut rng, d.num_sellers());
        worst_gap = worst_gap.min(dual_value(&lambda, d).unwrap() - primal_value(&a, d).unwrap());
    }
    notes.push(format!("weak duality 1000 pairs, min gap {worst_gap:.3e}"));

    let mut budget_failures = 0;
    let mut identity_worst: f64 = 0.0;
    let mut reports: Vec<(&Dataset, MetricsReport, bool)> = Vec::new();
    for inst in instances {
        for (rule, m) in AuctionRule::ALL.iter().zip(&inst.online) {
            reports.push((&inst.dataset, m.clone(), *rule == AuctionRule::Lpa));
        }
        reports.push((&inst.dataset, inst.offline.clone(), true));
    }
    for d in &pool {
        let a = random_profile(&mut rng, d.num_sellers());
        for rule in AuctionRule::ALL {
            reports.push((d, evaluate_profile(d, &a, rule, true).unwrap(), rule == AuctionRule::Lpa));
            reports.push((d, simulate_online_metrics(d, rule, DEFAULT_ETA, true).metrics, rule == AuctionRule::Lpa));
        }
    }
    for (d, m, lpa) in &reports {
        if m.rev > d.total_budget() {
            budget_failures += 1;
        }
        if *lpa {
            identity_worst = identity_worst.max(rel_diff(m.rev, m.lw));
        }
    }
    notes.push(format!("budget cap {} reports, {budget_failures} violations", reports.len()));
    notes.push(format!("LPA revenue = liquid welfare, max rel. diff {identity_worst:.1e}"));

    Criterion {
        id: "7",
        name: "invariant suites",
        passed: monotone_failures == 0
            && roi_failures == 0
            && worst_gap >= -1e-9
            && budget_failures == 0
            && identity_worst <= 1e-9,
        detail: notes.join("; "),
    }
}

fn pareto_front(instances: &[Instance]) -> Criterion {
    let kappas = default_kappa_sweep();
    let mut total = 0;
    let mut undominated = 0;
    for inst in instances {
        let rows = pareto_sweep(&inst.dataset, &AuctionRule::ALL, &kappas, DEFAULT_ETA, true).unwrap();
        for &k in &kappas {
            let cell: Vec<_> = rows.iter().filter(|r| r.kappa == k).collect();
            let lpa = cell.iter().find(|r| r.rule == AuctionRule::Lpa).unwrap();
            total += 1;
            if !cell.iter().any(|r| r.rule != AuctionRule::Lpa && r.lw > lpa.lw && r.ue > lpa.ue) {
                undominated += 1;
            }
        }
    }
    let share = undominated as f64 / total as f64;
    Criterion {
        id: "8",
        name: "LPA not dominated in (LW, UE) across kappa",
        passed: share >= 0.9,
        detail: format!("{undominated}/{total} (seed, kappa) cells undominated (need 90%)"),
    }
}

fn datagen_statistics() -> Criterion {
    // Features are shared within a dataset, so the spread between datasets
    // sets the standard error.
    const DATASETS: u64 = 200;
    let config = SyntheticConfig::default();
    let stats: Vec<(f64, f64)> = (0..DATASETS)
        .into_par_iter()
        .map(|seed| {
            let d = gen_synthetic(&config, 5000 + seed).unwrap();
            let count = (d.num_requests() * d.num_sellers()) as f64;
            let v: f64 = d.requests.iter().flat_map(|r| r.values.iter()).sum();
            let e: f64 = d.requests.iter().flat_map(|r| r.experiences.iter()).sum();
            (v / count, e / count)
        })
        .collect();
    let k = stats.len() as f64;
    let mean = stats.iter().map(|s| s.0).sum::<f64>() / k;
    let mean_e = stats.iter().map(|s| s.1).sum::<f64>() / k;
    let var = stats.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k + ORACLE_SE_V * ORACLE_SE_V).sqrt();
    let z = (mean - ORACLE_MEAN_V) / se;
    Criterion {
        id: "9",
        name: "mean of v matches the Monte-Carlo oracle",
        passed: z.abs() <= 3.0,
        detail: format!(
            "{DATASETS} default datasets: mean v {mean:.4} vs oracle {ORACLE_MEAN_V:.4}, z = {z:.2} (limit 3); mean e {mean_e:.4}"
        ),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let small: Vec<Instance> = SEEDS.map(|s| instance(s, 10_000)).collect();
    let large: Vec<Instance> = (0..3).map(|s| instance(s, 100_000)).collect();

    let criteria = [
        algorithm_contract(&small),
        optimality_certificate(&small),
        online_offline(&small, &large),
        rule_ordering(&small),
        incentive_compatibility(),
        outcome_uniqueness(&small),
        invariant_suites(&small),
        pareto_front(&small),
        datagen_statistics(),
    ];

    let mut failed = 0;
    for c in &criteria {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!c.passed);
        println!("[{tag}] criterion {}: {} -- {}", c.id, c.name, c.detail);
    }
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        criteria.len() - failed,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
