use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use liquid_auction::auctions::AuctionRule;
use liquid_auction::data::{gen_synthetic, load_dataset, save_dataset, SyntheticConfig};
use liquid_auction::model::{Dataset, SlotLayout};
use liquid_auction::oracle::{ic_probe, MisreportGridSpec};
use liquid_auction::report::{
    certify_dataset, compare, default_kappa_sweep, pareto_csv, pareto_sweep, CertifyThresholds, CheckStatus,
};
use serde::Serialize;

use crate::args::{Cli, Command, DataArgs, Format, OutputArgs, Preset, RunArgs};
use crate::{usage, Failure};

type Outcome<T = ()> = Result<T, Failure>;

/// Resolved dataset source, echoed into the manifest.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Source {
    Synthetic { config: SyntheticConfig, seed: u64 },
    Files { sellers: PathBuf, requests: PathBuf, slots: Vec<f64>, kappa: f64 },
}

/// Everything a run depends on.
#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    command: &'static str,
    source: Source,
    #[serde(skip_serializing_if = "Option::is_none")]
    rules: Option<Vec<AuctionRule>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa_sweep: Option<Vec<f64>>,
    eta: f64,
    epsilon: f64,
    delta: f64,
    truncate: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: Option<u64>,
    config: &'a RunConfig,
    outputs: Vec<&'a str>,
    /// Unix seconds; kept out of every report so reruns are byte-identical.
    generated_at: u64,
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Gen { data, out } => {
            let source = resolve_source(&data)?;
            let Source::Synthetic { config, seed } = &source else {
                return Err(usage("gen needs a synthetic market, not --sellers/--requests"));
            };
            let dataset = gen_synthetic(config, *seed)?;
            create_dir(&out)?;
            save_dataset(&dataset, &out.join("sellers.csv"), &out.join("requests.csv"))?;
            let rc = RunConfig {
                command: "gen",
                source: source.clone(),
                rules: None,
                kappa_sweep: None,
                eta: 0.0,
                epsilon: 0.0,
                delta: 0.0,
                truncate: true,
            };
            write_manifest(&out, &rc, &["sellers.csv", "requests.csv"])?;
            print_summary(&dataset);
            Ok(())
        }
        Command::Compare { data, run, output, rules } => {
            if rules.is_empty() {
                return Err(usage("--rule needs at least one rule"));
            }
            let (dataset, rc) = prepare("compare", &data, &run, Some(rules.clone()), None)?;
            let report = compare(&dataset, &rules, rc.eta, rc.epsilon, rc.delta, rc.truncate)?;
            let json = to_json(&report)?;
            let csv = report.to_csv();
            emit(&output, &rc, &[("metrics.json", &json), ("comparison.csv", &csv)], &json, &csv)
        }
        Command::Sweep { data, run, output, rules, kappa_sweep } => {
            let kappas = kappa_sweep.unwrap_or_else(default_kappa_sweep);
            if kappas.is_empty() || kappas.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
                return Err(usage("--kappa-sweep needs non-negative values"));
            }
            if rules.is_empty() {
                return Err(usage("--rule needs at least one rule"));
            }
            let (dataset, rc) = prepare("sweep", &data, &run, Some(rules.clone()), Some(kappas.clone()))?;
            let rows = pareto_sweep(&dataset, &rules, &kappas, rc.eta, rc.truncate)?;
            let json = to_json(&rows)?;
            let csv = pareto_csv(&rows);
            emit(&output, &rc, &[("pareto.csv", &csv)], &json, &csv)
        }
        Command::Certify { data, run, output, max_gap } => {
            if !(max_gap.is_finite() && max_gap >= 0.0) {
                return Err(usage("--max-gap must be non-negative"));
            }
            let (dataset, rc) = prepare("certify", &data, &run, None, None)?;
            let thresholds = CertifyThresholds { max_relative_gap: max_gap, ..CertifyThresholds::default() };
            let report = certify_dataset(&dataset, rc.epsilon, rc.delta, thresholds)?;
            let json = to_json(&report)?;
            let mut csv = String::from("check,status,detail\n");
            for c in &report.checks {
                csv.push_str(&format!("{},{},\"{}\"\n", c.name, c.status, c.detail));
            }
            emit(&output, &rc, &[("certificate.json", &json)], &json, &csv)?;
            for c in &report.checks {
                eprintln!("{}  {}: {}", c.status, c.name, c.detail);
            }
            if report.status() == CheckStatus::Fail {
                return Err(Failure::Check(anyhow::anyhow!("certificate check failed")));
            }
            Ok(())
        }
        Command::Ic { data, run, output, seller, tolerance, budget_factors, roi_factors } => {
            if !(tolerance.is_finite() && tolerance >= 0.0) {
                return Err(usage("--tolerance must be non-negative"));
            }
            let (dataset, rc) = prepare("ic", &data, &run, None, None)?;
            let index = dataset
                .sellers
                .iter()
                .position(|s| s.label == seller)
                .ok_or_else(|| usage(format!("unknown seller {seller:?}")))?;
            let defaults = MisreportGridSpec::default();
            let grid = MisreportGridSpec {
                budget_factors: budget_factors.unwrap_or(defaults.budget_factors),
                roi_factors: roi_factors.unwrap_or(defaults.roi_factors),
            };
            let report = ic_probe(index, &dataset, &grid, rc.epsilon, rc.delta).map_err(|e| match e {
                liquid_auction::Error::Input(m) => usage(m),
                other => other.into(),
            })?;
            let json = to_json(&report)?;
            let mut csv = String::from("budget_factor,roi_factor,true_objective,payment,allowed_payment,feasible\n");
            for c in &report.cells {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    c.budget_factor, c.roi_factor, c.true_objective, c.payment, c.allowed_payment, c.feasible
                ));
            }
            emit(&output, &rc, &[("ic.json", &json)], &json, &csv)?;
            let gain = report.max_feasible_gain();
            eprintln!("seller {seller}: truthful value {:.6}, best feasible gain {:.6}", report.truthful_value, gain);
            if !report.passes(tolerance) {
                return Err(Failure::Check(anyhow::anyhow!(
                    "a feasible misreport gains {gain} over the truthful value"
                )));
            }
            Ok(())
        }
    }
}

fn resolve_source(data: &DataArgs) -> Outcome<Source> {
    if let (Some(sellers), Some(requests)) = (&data.sellers, &data.requests) {
        let slots = data.slots.clone().unwrap_or_else(|| SyntheticConfig::default().slots);
        let kappa = data.kappa.unwrap_or(SyntheticConfig::default().kappa);
        return Ok(Source::Files { sellers: sellers.clone(), requests: requests.clone(), slots, kappa });
    }
    let mut config = match (&data.config, data.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Data)?;
            serde_json::from_str::<SyntheticConfig>(&text)
                .with_context(|| format!("parsing {}", path.display()))
                .map_err(Failure::Usage)?
        }
        (None, Some(Preset::RealworldShape)) => SyntheticConfig::realworld_shape(),
        (None, _) => SyntheticConfig::default(),
    };
    if let Some(n) = data.n {
        config.n = n;
    }
    if let Some(t) = data.t {
        config.budget_max *= t as f64 / config.t as f64;
        config.t = t;
    }
    if let Some(b) = data.budget_max {
        config.budget_max = b;
    }
    if let Some(slots) = &data.slots {
        config.slots = slots.clone();
    }
    if let Some(k) = data.kappa {
        config.kappa = k;
    }
    config.validate().map_err(usage)?;
    Ok(Source::Synthetic { config, seed: data.seed })
}

fn load(source: &Source) -> Outcome<Dataset> {
    match source {
        Source::Synthetic { config, seed } => Ok(gen_synthetic(config, *seed)?),
        Source::Files { sellers, requests, slots, kappa } => {
            let slots = SlotLayout::new(slots.clone()).map_err(usage)?;
            if !(kappa.is_finite() && *kappa >= 0.0) {
                return Err(usage(format!("kappa must be non-negative, got {kappa}")));
            }
            Ok(load_dataset(sellers, requests, slots, *kappa)?)
        }
    }
}

fn prepare(
    command: &'static str,
    data: &DataArgs,
    run: &RunArgs,
    rules: Option<Vec<AuctionRule>>,
    kappa_sweep: Option<Vec<f64>>,
) -> Outcome<(Dataset, RunConfig)> {
    if !(run.epsilon > 0.0 && run.epsilon < 0.5) {
        return Err(usage(format!("--epsilon must lie in (0, 0.5), got {}", run.epsilon)));
    }
    let delta = run.delta.unwrap_or(run.epsilon / 100.0);
    if !(delta > 0.0 && delta <= run.epsilon / 10.0) {
        return Err(usage(format!("--delta must lie in (0, epsilon / 10], got {delta}")));
    }
    if !(run.eta.is_finite() && run.eta >= 0.0) {
        return Err(usage(format!("--eta must be non-negative, got {}", run.eta)));
    }
    let source = resolve_source(data)?;
    let dataset = load(&source)?;
    let rc = RunConfig {
        command,
        source,
        rules,
        kappa_sweep,
        eta: run.eta,
        epsilon: run.epsilon,
        delta,
        truncate: !run.no_truncate,
    };
    Ok((dataset, rc))
}

fn to_json<T: Serialize>(value: &T) -> Outcome<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Check(e.into()))?;
    s.push('\n');
    Ok(s)
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(Failure::Data)
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).map_err(Failure::Data)
}

fn write_manifest(dir: &Path, config: &RunConfig, outputs: &[&str]) -> Outcome {
    let seed = match &config.source {
        Source::Synthetic { seed, .. } => Some(*seed),
        Source::Files { .. } => None,
    };
    let manifest = Manifest {
        tool: "lpa",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        outputs: outputs.to_vec(),
        generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest)?)
}

fn emit(output: &OutputArgs, config: &RunConfig, files: &[(&str, &String)], json: &str, csv: &str) -> Outcome {
    if let Some(dir) = &output.out {
        create_dir(dir)?;
        for (name, contents) in files {
            write_file(&dir.join(name), contents)?;
        }
        let names: Vec<&str> = files.iter().map(|f| f.0).collect();
        write_manifest(dir, config, &names)?;
    }
    match output.format {
        Format::Json => print!("{json}"),
        Format::Csv => print!("{csv}"),
    }
    Ok(())
}

fn print_summary(d: &Dataset) {
    let cells = (d.num_sellers() * d.num_requests()) as f64;
    let mean_v: f64 = d.requests.iter().flat_map(|r| &r.values).sum::<f64>() / cells;
    let mean_e: f64 = d.requests.iter().flat_map(|r| &r.experiences).sum::<f64>() / cells;
    println!("sellers {}", d.num_sellers());
    println!("requests {}", d.num_requests());
    println!("slots {:?}", d.slots.rates());
    println!("mean v {mean_v:.6}");
    println!("mean e {mean_e:.6}");
    println!("total budget {:.6}", d.total_budget());
}
