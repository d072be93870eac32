//! Experiment reports: rule comparison, Pareto sweep and certification.

use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::auctions::AuctionRule;
use crate::equilibrium::{
    compute_equilibrium, evaluate_profile, verify_epsilon_equilibrium, EquilibriumResult, Verification,
};
use crate::model::{Dataset, MetricsReport};
use crate::oracle::{certify, tie_rate, DualCertificate};
use crate::pacing::simulate_online_metrics;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Offline,
    Online,
}

/// Metric values as percentages of the baseline row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentages {
    pub lw: f64,
    pub kappa_ue: f64,
    pub obj: f64,
    pub rev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub rule: AuctionRule,
    pub setting: Setting,
    pub lw: f64,
    pub kappa_ue: f64,
    pub obj: f64,
    pub rev: f64,
    pub percent: Percentages,
    pub metrics: MetricsReport,
}

/// Offline LPA under the equilibrium first, then each rule online. Every
/// percentage uses the offline LPA row as 100%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub kappa: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub truncate: bool,
    pub equilibrium_iterations: usize,
    pub rows: Vec<ComparisonRow>,
}

fn pct(x: f64, base: f64) -> f64 {
    if x == base {
        100.0
    } else if base == 0.0 {
        f64::INFINITY
    } else {
        100.0 * x / base
    }
}

fn row(
    label: String,
    rule: AuctionRule,
    setting: Setting,
    metrics: MetricsReport,
    base: &MetricsReport,
) -> ComparisonRow {
    ComparisonRow {
        label,
        rule,
        setting,
        lw: metrics.lw,
        kappa_ue: metrics.kappa_ue(),
        obj: metrics.obj,
        rev: metrics.rev,
        percent: Percentages {
            lw: pct(metrics.lw, base.lw),
            kappa_ue: pct(metrics.kappa_ue(), base.kappa_ue()),
            obj: pct(metrics.obj, base.obj),
            rev: pct(metrics.rev, base.rev),
        },
        metrics,
    }
}

pub fn compare(
    dataset: &Dataset,
    rules: &[AuctionRule],
    eta: f64,
    epsilon: f64,
    delta: f64,
    truncate: bool,
) -> Result<ComparisonReport> {
    let eq = compute_equilibrium(dataset, epsilon, delta)?;
    let base = evaluate_profile(dataset, &eq.factors, AuctionRule::Lpa, truncate)?;
    let online: Vec<MetricsReport> =
        rules.par_iter().map(|&r| simulate_online_metrics(dataset, r, eta, truncate).metrics).collect();
    let mut rows = vec![row("LPA (offline)".into(), AuctionRule::Lpa, Setting::Offline, base.clone(), &base)];
    for (&rule, m) in rules.iter().zip(online) {
        rows.push(row(rule.name().to_uppercase(), rule, Setting::Online, m, &base));
    }
    Ok(ComparisonReport {
        kappa: dataset.kappa,
        eta,
        epsilon,
        delta,
        truncate,
        equilibrium_iterations: eq.iterations,
        rows,
    })
}

impl ComparisonReport {
    pub fn row(&self, rule: AuctionRule, setting: Setting) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.rule == rule && r.setting == setting)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("auction,setting,lw,kappa_ue,obj,rev,lw_pct,kappa_ue_pct,obj_pct,rev_pct\n");
        for r in &self.rows {
            let setting = match r.setting {
                Setting::Offline => "offline",
                Setting::Online => "online",
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.1},{:.1},{:.1},{:.1}",
                r.rule,
                setting,
                r.lw,
                r.kappa_ue,
                r.obj,
                r.rev,
                r.percent.lw,
                r.percent.kappa_ue,
                r.percent.obj,
                r.percent.rev
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoRow {
    pub rule: AuctionRule,
    pub kappa: f64,
    pub lw: f64,
    pub ue: f64,
}

/// `2^-4, ..., 2^4`.
pub fn default_kappa_sweep() -> Vec<f64> {
    (-4..=4).map(|k| 2f64.powi(k)).collect()
}

/// One online run per (rule, kappa); rows sorted by rule, then kappa.
pub fn pareto_sweep(
    dataset: &Dataset,
    rules: &[AuctionRule],
    kappas: &[f64],
    eta: f64,
    truncate: bool,
) -> Result<Vec<ParetoRow>> {
    let datasets = kappas.iter().map(|&k| dataset.with_kappa(k)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(AuctionRule, &Dataset)> =
        rules.iter().flat_map(|&r| datasets.iter().map(move |d| (r, d))).collect();
    let mut rows: Vec<ParetoRow> = cells
        .par_iter()
        .map(|&(rule, d)| {
            let m = simulate_online_metrics(d, rule, eta, truncate).metrics;
            ParetoRow { rule, kappa: d.kappa, lw: m.lw, ue: m.ue }
        })
        .collect();
    rows.sort_by(|a, b| a.rule.cmp(&b.rule).then(a.kappa.total_cmp(&b.kappa)));
    Ok(rows)
}

pub fn pareto_csv(rows: &[ParetoRow]) -> String {
    let mut out = String::from("rule,kappa,lw,ue\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.rule, r.kappa, r.lw, r.ue);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Warn => "WARN",
            CheckStatus::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

/// Thresholds applied by [`certify_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyThresholds {
    /// Largest accepted duality gap as a fraction of the primal value.
    pub max_relative_gap: f64,
    /// Tie rate above which a gap failure is downgraded to a warning.
    pub tie_rate_warn: f64,
}

impl Default for CertifyThresholds {
    fn default() -> Self {
        Self { max_relative_gap: 0.01, tie_rate_warn: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub equilibrium: EquilibriumResult,
    pub iteration_bound: usize,
    pub verification: Verification,
    pub certificate: DualCertificate,
    pub tie_rate: f64,
    pub checks: Vec<Check>,
}

impl CertificationReport {
    pub fn status(&self) -> CheckStatus {
        self.checks.iter().map(|c| c.status).fold(CheckStatus::Pass, |acc, s| match (acc, s) {
            (CheckStatus::Fail, _) | (_, CheckStatus::Fail) => CheckStatus::Fail,
            (CheckStatus::Warn, _) | (_, CheckStatus::Warn) => CheckStatus::Warn,
            _ => CheckStatus::Pass,
        })
    }
}

/// Computes the equilibrium, verifies it independently and certifies its
/// optimality through the duality gap.
pub fn certify_dataset(
    dataset: &Dataset,
    epsilon: f64,
    delta: f64,
    thresholds: CertifyThresholds,
) -> Result<CertificationReport> {
    let eq = compute_equilibrium(dataset, epsilon, delta)?;
    let bound = eq.iteration_bound();
    let verification = verify_epsilon_equilibrium(&eq.factors, epsilon, dataset)?;
    let certificate = certify(&eq.factors, dataset, epsilon)?;
    let ties = tie_rate(&eq.factors, dataset)?;

    let status = |ok: bool| if ok { CheckStatus::Pass } else { CheckStatus::Fail };
    let gap_ok = certificate.relative_gap() <= thresholds.max_relative_gap;
    let gap_status = match (gap_ok, ties > thresholds.tie_rate_warn) {
        (true, _) => CheckStatus::Pass,
        (false, true) => CheckStatus::Warn,
        (false, false) => CheckStatus::Fail,
    };
    let checks = vec![
        Check {
            name: "iteration_bound".into(),
            status: status(eq.iterations <= bound),
            detail: format!("{} iterations, bound {bound}", eq.iterations),
        },
        Check {
            name: "epsilon_equilibrium".into(),
            status: status(verification.passed()),
            detail: format!("{} violations", verification.violations.len()),
        },
        Check {
            name: "weak_duality".into(),
            status: status(certificate.gap >= -1e-9),
            detail: format!("gap {:.3e}", certificate.gap),
        },
        Check {
            name: "duality_gap".into(),
            status: gap_status,
            detail: format!(
                "relative gap {:.4}% (limit {:.2}%), tie rate {:.2}%",
                100.0 * certificate.relative_gap(),
                100.0 * thresholds.max_relative_gap,
                100.0 * ties
            ),
        },
    ];
    Ok(CertificationReport {
        equilibrium: eq,
        iteration_bound: bound,
        verification,
        certificate,
        tie_rate: ties,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};
    use crate::model::{Request, SellerProfile, SlotLayout};

    #[test]
    fn single_seller_rules_differ_only_in_revenue() {
        let t = 200;
        let requests =
            (0..t).map(|k| Request::new(format!("q{k}"), vec![1.0 + (k % 5) as f64], vec![0.3]).unwrap()).collect();
        let d = Dataset::new(
            vec![SellerProfile::new(0, "0", 0.5 * t as f64, 2.0).unwrap()],
            requests,
            SlotLayout::new(vec![1.0, 0.5]).unwrap(),
            1.0,
        )
        .unwrap();
        let report = compare(&d, &AuctionRule::ALL, 0.01, 0.01, 1e-3, false).unwrap();
        let lpa = report.row(AuctionRule::Lpa, Setting::Online).unwrap();
        for r in &report.rows {
            assert_eq!(r.lw, lpa.lw);
            assert_eq!(r.kappa_ue, lpa.kappa_ue);
        }
        let total_liquid: f64 = d.requests.iter().map(|r| r.values[0] / 2.0).sum();
        assert!((lpa.rev - total_liquid).abs() < 1e-9);
        assert_eq!(report.row(AuctionRule::Gsp, Setting::Online).unwrap().rev, 0.0);
        assert_eq!(report.row(AuctionRule::Vcg, Setting::Online).unwrap().rev, 0.0);
        let gfp = report.row(AuctionRule::Gfp, Setting::Online).unwrap();
        assert!(gfp.rev > 0.0 && gfp.rev <= lpa.rev);
    }

    #[test]
    fn comparison_layout() {
        let d = gen_synthetic(&SyntheticConfig::scaled(5, 400), 2).unwrap();
        let report = compare(&d, &AuctionRule::ALL, 0.01, 0.01, 1e-3, true).unwrap();
        assert_eq!(report.rows.len(), 5);
        assert_eq!(report.rows[0].setting, Setting::Offline);
        assert_eq!(report.rows[0].percent.obj, 100.0);
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("auction,setting,lw"));
    }

    #[test]
    fn sweep_shape_and_order() {
        let d = gen_synthetic(&SyntheticConfig::scaled(4, 200), 2).unwrap();
        let kappas = default_kappa_sweep();
        assert_eq!(kappas.len(), 9);
        let rows = pareto_sweep(&d, &AuctionRule::ALL, &kappas, 0.01, true).unwrap();
        assert_eq!(rows.len(), 36);
        assert_eq!(rows[0].rule, AuctionRule::Lpa);
        assert_eq!(rows[0].kappa, 0.0625);
        assert!(rows.windows(2).all(|w| (w[0].rule, w[0].kappa) <= (w[1].rule, w[1].kappa)));
        assert_eq!(pareto_csv(&rows).lines().count(), 37);
    }

    #[test]
    fn zero_kappa_ignores_experience() {
        let d = gen_synthetic(&SyntheticConfig::scaled(4, 200), 4).unwrap().with_kappa(0.0).unwrap();
        let mut flat = d.clone();
        for r in &mut flat.requests {
            r.experiences.iter_mut().for_each(|e| *e = 0.0);
        }
        let a = crate::pacing::simulate_online(&d, AuctionRule::Lpa, 0.01);
        let b = crate::pacing::simulate_online(&flat, AuctionRule::Lpa, 0.01);
        let assignments =
            |t: &crate::pacing::SimulationTrace| t.outcomes.iter().map(|o| o.assignment.clone()).collect::<Vec<_>>();
        assert_eq!(assignments(&a), assignments(&b));
    }

    #[test]
    fn certification_of_an_atom_heavy_market_warns() {
        // All values equal: every seller ties with every other.
        let t = 50;
        let requests = (0..t).map(|k| Request::new(format!("q{k}"), vec![1.0; 3], vec![0.0; 3]).unwrap()).collect();
        let sellers = (0..3).map(|i| SellerProfile::new(i, i.to_string(), 10.0, 1.0).unwrap()).collect();
        let d = Dataset::new(sellers, requests, SlotLayout::new(vec![1.0]).unwrap(), 0.0).unwrap();
        let report = certify_dataset(&d, 0.01, 1e-3, CertifyThresholds::default()).unwrap();
        assert!(report.verification.passed());
        assert!(report.tie_rate > 0.01);
        let gap = report.checks.iter().find(|c| c.name == "duality_gap").unwrap();
        assert_ne!(gap.status, CheckStatus::Fail);
    }
}
