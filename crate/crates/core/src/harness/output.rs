use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Placement, RunConfig, Scheme};
use super::sweep::BerRecord;
use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_964;

/// Wilson score interval at 95% for `errors` out of `n`.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scheme: Scheme,
    #[serde(rename = "M")]
    pub antennas: usize,
    pub distance_m: Option<f64>,
    pub drop: usize,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

impl From<&BerRecord> for CsvRow {
    fn from(r: &BerRecord) -> Self {
        Self {
            scheme: r.scheme,
            antennas: r.antennas,
            distance_m: r.distance_m,
            drop: r.drop,
            trials: r.trials,
            bits: r.bits,
            bit_errors: r.bit_errors,
            ber: r.ber(),
        }
    }
}

/// Writes `scheme,M,distance_m,drop,trials,bits,bit_errors,ber` rows.
pub fn emit_csv(records: &[BerRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(CsvRow::from(r))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn parse_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Pooled statistics of one `(scheme, M, distance)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scheme: Scheme,
    #[serde(rename = "M")]
    pub antennas: usize,
    pub distance_m: Option<f64>,
    pub drops: usize,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_half_width: f64,
    /// Weakest user (smallest `P beta`) first.
    pub per_user_ber: Vec<f64>,
    /// False when a stronger user's BER is significantly above a weaker one's.
    pub user_order_consistent: bool,
}

/// Report written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub software: String,
    pub version: String,
    pub config: RunConfig,
    pub drop_mode: Placement,
    /// Information bits per slot after the reference-slot overhead.
    pub effective_rate: BTreeMap<String, f64>,
    /// Schemes whose internals are reconstructions rather than exact
    /// reference designs.
    pub approximations: BTreeMap<String, String>,
    pub cells: Vec<CellSummary>,
}

/// Pools records per cell, keeping the order of first appearance.
pub fn summarize(records: &[BerRecord], config: &RunConfig) -> Summary {
    let mut order: Vec<(Scheme, usize, Option<u64>)> = Vec::new();
    let mut groups: BTreeMap<(Scheme, usize, Option<u64>), Vec<&BerRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.scheme, r.antennas, r.distance_m.map(f64::to_bits));
        if !groups.contains_key(&key) {
            order.push(key);
        }
        groups.entry(key).or_default().push(r);
    }
    let cells = order.iter().map(|key| cell_summary(&groups[key])).collect();

    let rate = config.rate_allocation().map(|r| f64::from(r.total_bits())).unwrap_or(0.0);
    let k = config.users as f64;
    let mut effective_rate = BTreeMap::new();
    for s in &config.schemes {
        let value = match s {
            Scheme::Proposed => rate * (config.frame_slots - 1) as f64 / config.frame_slots as f64,
            Scheme::Med => k,
            Scheme::ZfLs => k * f64::from(config.zf_bits_per_user) / (k + 1.0),
            Scheme::Dpsk => k * f64::from(config.dpsk_phase_bits) / 2.0,
        };
        effective_rate.insert(s.name().to_string(), value);
    }
    let mut approximations = BTreeMap::new();
    if config.schemes.contains(&Scheme::Med) {
        approximations.insert(
            "med".into(),
            "one-shot energy detector with on/off binary-weighted levels; reconstructed, not the cited design".into(),
        );
    }
    if config.schemes.contains(&Scheme::Dpsk) {
        approximations.insert(
            "dpsk".into(),
            "ring energies matched to the proposed scheme's total received energy; per-user powers of the cited design are unspecified".into(),
        );
    }
    Summary {
        software: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        drop_mode: config.placement,
        effective_rate,
        approximations,
        cells,
    }
}

fn cell_summary(records: &[&BerRecord]) -> CellSummary {
    let first = records[0];
    let bits: u64 = records.iter().map(|r| r.bits).sum();
    let bit_errors: u64 = records.iter().map(|r| r.bit_errors).sum();
    let (ci_low, ci_high) = wilson_interval(bit_errors, bits);
    let users = first.user_bits.len();
    let user_totals: Vec<(u64, u64)> = (0..users)
        .map(|k| {
            (
                records.iter().map(|r| r.user_errors[k]).sum(),
                records.iter().map(|r| r.user_bits[k]).sum(),
            )
        })
        .collect();
    let intervals: Vec<(f64, f64)> = user_totals.iter().map(|&(e, n)| wilson_interval(e, n)).collect();
    let user_order_consistent = intervals.windows(2).all(|w| w[1].0 <= w[0].1);
    CellSummary {
        scheme: first.scheme,
        antennas: first.antennas,
        distance_m: first.distance_m,
        drops: records.len(),
        trials: records.iter().map(|r| r.trials).sum(),
        bits,
        bit_errors,
        ber: bit_errors as f64 / bits as f64,
        ci_low,
        ci_high,
        ci_half_width: (ci_high - ci_low) / 2.0,
        per_user_ber: user_totals.iter().map(|&(e, n)| e as f64 / n as f64).collect(),
        user_order_consistent,
    }
}

pub fn emit_json_summary(records: &[BerRecord], config: &RunConfig, path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to summarize".into()));
    }
    let text = serde_json::to_string_pretty(&summarize(records, config))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
