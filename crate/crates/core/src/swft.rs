//! Self-weighted fine-tuning: per-sample weights from the loss change between
//! a base model and a warm-up model, the weighted training loss, and anomaly
//! flagging over (base, warm) loss pairs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SwftError;
use crate::instruct::InstructionSample;

pub const MIN_ANOMALY_RECORDS: usize = 10;
pub const DEFAULT_RATIO_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub id: String,
    pub base_loss: f64,
    pub warm_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWeight {
    pub id: String,
    pub weight: f64,
}

/// Negated per-token log-probabilities of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLoss {
    pub id: String,
    pub token_losses: Vec<f64>,
}

fn check(records: &[LossRecord]) -> Result<(), SwftError> {
    if records.is_empty() {
        return Err(SwftError::Empty);
    }
    match records.iter().find(|r| ![r.base_loss, r.warm_loss].iter().all(|x| x.is_finite() && *x >= 0.0)) {
        Some(r) => Err(SwftError::InvalidLoss { id: r.id.clone() }),
        None => Ok(()),
    }
}

/// `w_i = |warm_i - base_i| / ||base||_2`, the norm taken over every record.
pub fn compute_weights(records: &[LossRecord]) -> Result<Vec<SampleWeight>, SwftError> {
    check(records)?;
    let norm = records.iter().map(|r| r.base_loss * r.base_loss).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(SwftError::ZeroBaseNorm);
    }
    Ok(records
        .iter()
        .map(|r| SampleWeight { id: r.id.clone(), weight: (r.warm_loss - r.base_loss).abs() / norm })
        .collect())
}

/// `(1/N) * sum_i w_i * sum_t loss_{i,t}`; weights are matched by id.
pub fn weighted_loss(token_losses: &[TokenLoss], weights: &[SampleWeight]) -> Result<f64, SwftError> {
    if token_losses.is_empty() {
        return Err(SwftError::Empty);
    }
    let by_id: HashMap<&str, f64> = weights.iter().map(|w| (w.id.as_str(), w.weight)).collect();
    if by_id.len() != token_losses.len() {
        return Err(SwftError::IdMismatch(format!("{} token-loss records, {} weights", token_losses.len(), by_id.len())));
    }
    let mut total = 0.0;
    for t in token_losses {
        let w = *by_id.get(t.id.as_str()).ok_or_else(|| SwftError::MissingWeight(t.id.clone()))?;
        if t.token_losses.is_empty() || t.token_losses.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(SwftError::InvalidLoss { id: t.id.clone() });
        }
        total += w * t.token_losses.iter().sum::<f64>();
    }
    Ok(total / token_losses.len() as f64)
}

/// Linear-interpolation quantile of unsorted values.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn reduction_ratio(r: &LossRecord) -> f64 {
    if r.base_loss > 0.0 {
        (r.base_loss - r.warm_loss) / r.base_loss
    } else {
        0.0
    }
}

/// Samples whose base loss is above the `ratio_quantile` quantile of base
/// losses while their relative loss reduction is below the dataset mean.
pub fn flag_anomalies(records: &[LossRecord], ratio_quantile: f64) -> Result<Vec<String>, SwftError> {
    if !(0.0..=1.0).contains(&ratio_quantile) {
        return Err(SwftError::BadQuantile(ratio_quantile));
    }
    if records.len() < MIN_ANOMALY_RECORDS {
        return Err(SwftError::TooFewRecords { needed: MIN_ANOMALY_RECORDS, got: records.len() });
    }
    check(records)?;
    let base: Vec<f64> = records.iter().map(|r| r.base_loss).collect();
    let cutoff = quantile(&base, ratio_quantile);
    let mean_ratio = records.iter().map(reduction_ratio).sum::<f64>() / records.len() as f64;
    Ok(records
        .iter()
        .filter(|r| r.base_loss > cutoff && reduction_ratio(r) < mean_ratio)
        .map(|r| r.id.clone())
        .collect())
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SwftError> {
    let file = File::open(path).map_err(|source| SwftError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| SwftError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SwftError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), SwftError> {
    let io = |source| SwftError::Io { path: path.to_path_buf(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for it in items {
        serde_json::to_writer(&mut out, it).map_err(|e| io(e.into()))?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_losses(path: impl AsRef<Path>) -> Result<Vec<LossRecord>, SwftError> {
    let records: Vec<LossRecord> = read_jsonl(path.as_ref())?;
    check(&records)?;
    Ok(records)
}

pub fn read_weights(path: impl AsRef<Path>) -> Result<Vec<SampleWeight>, SwftError> {
    read_jsonl(path.as_ref())
}

pub fn write_weights(weights: &[SampleWeight], path: impl AsRef<Path>) -> Result<(), SwftError> {
    write_jsonl(weights, path.as_ref())
}

#[derive(Serialize)]
struct Weighted<'a> {
    #[serde(flatten)]
    sample: &'a InstructionSample,
    weight: f64,
}

/// Write the dataset with a `weight` field on every line, in input order.
pub fn export_weighted_dataset(
    samples: &[InstructionSample],
    weights: &[SampleWeight],
    path: impl AsRef<Path>,
) -> Result<usize, SwftError> {
    let by_id: HashMap<&str, f64> = weights.iter().map(|w| (w.id.as_str(), w.weight)).collect();
    let rows = samples
        .iter()
        .map(|s| {
            let weight = *by_id.get(s.id.as_str()).ok_or_else(|| SwftError::MissingWeight(s.id.clone()))?;
            Ok(Weighted { sample: s, weight })
        })
        .collect::<Result<Vec<_>, SwftError>>()?;
    write_jsonl(&rows, path.as_ref())?;
    Ok(rows.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn recs(base: &[f64], warm: &[f64]) -> Vec<LossRecord> {
        base.iter()
            .zip(warm)
            .enumerate()
            .map(|(i, (b, w))| LossRecord { id: format!("s{i}"), base_loss: *b, warm_loss: *w })
            .collect()
    }

    fn w(v: &[SampleWeight]) -> Vec<f64> {
        v.iter().map(|x| x.weight).collect()
    }

    #[test]
    fn three_four_five() {
        assert_eq!(w(&compute_weights(&recs(&[3.0, 4.0], &[3.0, 4.0])).unwrap()), vec![0.0, 0.0]);
        assert_eq!(w(&compute_weights(&recs(&[3.0, 4.0], &[1.0, 4.0])).unwrap()), vec![0.4, 0.0]);
        assert_eq!(w(&compute_weights(&recs(&[3.0, 4.0], &[0.0, 0.0])).unwrap()), vec![0.6, 0.8]);
    }

    #[test]
    fn zero_base_is_an_error() {
        assert!(matches!(compute_weights(&recs(&[0.0, 0.0], &[1.0, 1.0])), Err(SwftError::ZeroBaseNorm)));
        assert!(matches!(compute_weights(&recs(&[-1.0], &[1.0])), Err(SwftError::InvalidLoss { .. })));
    }

    #[test]
    fn weighted_loss_examples() {
        let tl = |id: &str, v: &[f64]| TokenLoss { id: id.into(), token_losses: v.to_vec() };
        let sw = |id: &str, x: f64| SampleWeight { id: id.into(), weight: x };
        assert_eq!(weighted_loss(&[tl("a", &[0.5, 1.5])], &[sw("a", 1.0)]).unwrap(), 2.0);
        assert_eq!(weighted_loss(&[tl("a", &[2.0]), tl("b", &[1.0, 2.0])], &[sw("a", 0.5), sw("b", 2.0)]).unwrap(), 3.5);
        assert_eq!(weighted_loss(&[tl("a", &[2.0])], &[sw("a", 0.0)]).unwrap(), 0.0);
        assert!(matches!(weighted_loss(&[tl("a", &[2.0])], &[sw("b", 1.0)]), Err(SwftError::MissingWeight(_))));
    }

    #[test]
    fn uniform_data_has_no_anomalies_and_an_outlier_is_flagged() {
        let r = recs(&[2.0; 10], &[1.0; 10]);
        assert!(flag_anomalies(&r, 0.9).unwrap().is_empty());
        let mut base = vec![2.0; 10];
        let mut warm = vec![1.0; 10];
        base[4] = 20.0;
        warm[4] = 19.9;
        assert_eq!(flag_anomalies(&recs(&base, &warm), 0.9).unwrap(), vec!["s4".to_string()]);
        assert!(matches!(flag_anomalies(&r[..5], 0.9), Err(SwftError::TooFewRecords { .. })));
    }

    #[test]
    fn interpolated_quantile() {
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
        assert_eq!(quantile(&[1.0, 2.0], 1.0), 2.0);
    }
}
