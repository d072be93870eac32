//! Synthetic market generation and the CSV data format.
//!
//! # Synthetic markets
//!
//! For `n` sellers and `T` requests with feature dimension `d`:
//!
//! * `B_i ~ U[0, budget_max]` and `1/roi_i ~ U[0, 1]`, zeros redrawn;
//! * product features `c_i` and user features `u_t` are standard normal in
//!   `d` dimensions;
//! * `v_i(t) = exp(<c_i, u_t> / sqrt(d))`;
//! * `e_i(t) = (r1 * v_i(t) + 0.2 * r2) / 2` with `r1, r2 ~ U[0, 1]` drawn
//!   fresh for every (seller, request) pair.
//!
//! The mean of `v` is `(1 - 1/d)^(-d/2)`, about 1.69 at `d = 10`.
//!
//! ## Random streams
//!
//! Every entity draws from its own ChaCha8 stream keyed by the seed: seller
//! `i` uses stream `SELLER_STREAM | i` (budget, then ROI, then its `d`
//! features) and request `t` uses stream `REQUEST_STREAM | t` (its `d`
//! features, then `r1, r2` for sellers `0, 1, ...`). Changing `n` or `T`
//! therefore leaves every other entity's draws untouched, and requests can
//! be generated in parallel.
//!
//! # CSV format
//!
//! Sellers: header `seller_id,budget,roi`, one row per seller in index
//! order. Requests, long form: header `request_id,seller_id,v,e`, one row per
//! (request, seller) pair. Requests are ordered by first appearance of their
//! id. Numbers are written with 17 significant digits, so a save/load round
//! trip is lossless. Slots and `kappa` are not part of the files.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::{Dataset, Request, SellerProfile, SlotLayout};
use crate::{Error, Result};

pub const SELLER_STREAM: u64 = 1 << 48;
pub const REQUEST_STREAM: u64 = 2 << 48;

/// Budget ceiling of the reference synthetic market, for `10^5` requests.
pub const REFERENCE_BUDGET_MAX: f64 = 1e5;
pub const REFERENCE_REQUESTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub t: usize,
    pub slots: Vec<f64>,
    pub kappa: f64,
    pub budget_max: f64,
    pub feature_dim: usize,
    /// Forces every feature to zero, so `v = 1` everywhere. For debugging.
    #[serde(default)]
    pub zero_features: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n: 10,
            t: REFERENCE_REQUESTS,
            slots: vec![1.0, 0.6, 0.4],
            kappa: 1.0,
            budget_max: REFERENCE_BUDGET_MAX,
            feature_dim: 10,
            zero_features: false,
        }
    }
}

impl SyntheticConfig {
    /// Defaults with `n` sellers and `t` requests, the budget ceiling scaled
    /// so the budget per request matches the reference market.
    pub fn scaled(n: usize, t: usize) -> Self {
        Self { n, t, budget_max: REFERENCE_BUDGET_MAX * t as f64 / REFERENCE_REQUESTS as f64, ..Self::default() }
    }

    /// Shape of the production-like market: 50 sellers, six slots,
    /// `kappa = 0.5`.
    pub fn realworld_shape() -> Self {
        Self { n: 50, slots: vec![1.0, 0.8, 0.7, 0.6, 0.5, 0.4], kappa: 0.5, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.t == 0 || self.feature_dim == 0 {
            return Err(Error::input("n, t and feature_dim must be positive"));
        }
        if !(self.budget_max.is_finite() && self.budget_max > 0.0) {
            return Err(Error::input(format!("budget_max must be positive, got {}", self.budget_max)));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::input(format!("kappa must be non-negative, got {}", self.kappa)));
        }
        SlotLayout::new(self.slots.clone())?;
        Ok(())
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn positive_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

fn features(rng: &mut ChaCha8Rng, dim: usize, zero: bool) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if zero {
                0.0
            } else {
                z
            }
        })
        .collect()
}

/// Generates a synthetic market; a pure function of `(config, seed)`.
pub fn gen_synthetic(config: &SyntheticConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let dim = config.feature_dim;
    let mut products = Vec::with_capacity(config.n);
    let mut sellers = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let mut rng = stream(seed, SELLER_STREAM | i as u64);
        let budget = positive_uniform(&mut rng) * config.budget_max;
        let inverse_roi = positive_uniform(&mut rng);
        sellers.push(SellerProfile::new(i, i.to_string(), budget, 1.0 / inverse_roi)?);
        products.push(features(&mut rng, dim, config.zero_features));
    }

    let scale = 1.0 / (dim as f64).sqrt();
    let requests: Vec<Request> = (0..config.t)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, REQUEST_STREAM | t as u64);
            let user = features(&mut rng, dim, config.zero_features);
            let mut values = Vec::with_capacity(config.n);
            let mut experiences = Vec::with_capacity(config.n);
            for product in &products {
                let dot: f64 = product.iter().zip(&user).map(|(a, b)| a * b).sum();
                let v = (dot * scale).exp();
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                values.push(v);
                experiences.push(0.5 * (r1 * v + 0.2 * r2));
            }
            Request { id: format!("q{t}"), values, experiences }
        })
        .collect();

    Dataset::new(sellers, requests, SlotLayout::new(config.slots.clone())?, config.kappa)
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn open_reader(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(path, 1, format!("expected header {}", expected.join(","))));
    }
    Ok(reader)
}

fn parse_number(path: &Path, line: u64, field: &str, raw: &str) -> Result<f64> {
    let x: f64 = raw.parse().map_err(|_| parse_err(path, line, format!("{field}: not a number: {raw:?}")))?;
    if !x.is_finite() || x < 0.0 {
        return Err(parse_err(path, line, format!("{field} must be finite and non-negative, got {raw}")));
    }
    Ok(x)
}

/// Reads a dataset from the seller and request CSV files.
pub fn load_dataset(sellers_path: &Path, requests_path: &Path, slots: SlotLayout, kappa: f64) -> Result<Dataset> {
    let mut sellers = Vec::new();
    let mut seller_index: HashMap<String, usize> = HashMap::new();
    let mut reader = open_reader(sellers_path, &["seller_id", "budget", "roi"])?;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(sellers_path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let label = record[0].to_string();
        let budget = parse_number(sellers_path, line, "budget", &record[1])?;
        let roi = parse_number(sellers_path, line, "roi", &record[2])?;
        if seller_index.contains_key(&label) {
            return Err(parse_err(sellers_path, line, format!("duplicate seller {label:?}")));
        }
        let id = sellers.len();
        let seller = SellerProfile::new(id, label.clone(), budget, roi)
            .map_err(|e| parse_err(sellers_path, line, e.to_string()))?;
        seller_index.insert(label, id);
        sellers.push(seller);
    }
    if sellers.is_empty() {
        return Err(parse_err(sellers_path, 1, "no sellers"));
    }
    let n = sellers.len();

    let mut order: Vec<String> = Vec::new();
    let mut request_index: HashMap<String, usize> = HashMap::new();
    let mut cells: Vec<Vec<Option<(f64, f64)>>> = Vec::new();
    let mut reader = open_reader(requests_path, &["request_id", "seller_id", "v", "e"])?;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(requests_path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let request_id = &record[0];
        let seller = *seller_index
            .get(&record[1])
            .ok_or_else(|| parse_err(requests_path, line, format!("unknown seller {:?}", &record[1])))?;
        let v = parse_number(requests_path, line, "v", &record[2])?;
        let e = parse_number(requests_path, line, "e", &record[3])?;
        let t = match request_index.get(request_id) {
            Some(&t) => t,
            None => {
                request_index.insert(request_id.to_string(), order.len());
                order.push(request_id.to_string());
                cells.push(vec![None; n]);
                order.len() - 1
            }
        };
        if cells[t][seller].replace((v, e)).is_some() {
            return Err(parse_err(
                requests_path,
                line,
                format!("duplicate row for request {request_id:?}, seller {:?}", &record[1]),
            ));
        }
    }
    if order.is_empty() {
        return Err(parse_err(requests_path, 1, "no requests"));
    }

    let mut requests = Vec::with_capacity(order.len());
    for (id, row) in order.into_iter().zip(cells) {
        let mut values = Vec::with_capacity(n);
        let mut experiences = Vec::with_capacity(n);
        for (i, cell) in row.into_iter().enumerate() {
            let (v, e) =
                cell.ok_or_else(|| Error::MissingPair { request: id.clone(), seller: sellers[i].label.clone() })?;
            values.push(v);
            experiences.push(e);
        }
        requests.push(Request { id, values, experiences });
    }
    Dataset::new(sellers, requests, slots, kappa)
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::Writer::from_writer(file))
}

fn write_err(path: &Path, e: csv::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e.into() }
}

/// Writes the dataset as the seller and request CSV files.
pub fn save_dataset(dataset: &Dataset, sellers_path: &Path, requests_path: &Path) -> Result<()> {
    dataset.validate()?;
    let mut w = csv_writer(sellers_path)?;
    w.write_record(["seller_id", "budget", "roi"]).map_err(|e| write_err(sellers_path, e))?;
    for s in &dataset.sellers {
        w.write_record([s.label.clone(), fmt_num(s.budget()), fmt_num(s.roi())])
            .map_err(|e| write_err(sellers_path, e))?;
    }
    w.flush().map_err(|source| Error::Io { path: sellers_path.to_path_buf(), source })?;

    let mut w = csv_writer(requests_path)?;
    w.write_record(["request_id", "seller_id", "v", "e"]).map_err(|e| write_err(requests_path, e))?;
    for r in &dataset.requests {
        for (i, s) in dataset.sellers.iter().enumerate() {
            w.write_record([r.id.clone(), s.label.clone(), fmt_num(r.values[i]), fmt_num(r.experiences[i])])
                .map_err(|e| write_err(requests_path, e))?;
        }
    }
    w.flush().map_err(|source| Error::Io { path: requests_path.to_path_buf(), source })?;
    Ok(())
}
