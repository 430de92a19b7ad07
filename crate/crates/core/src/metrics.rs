//! Landmark error metrics, reported in centimeters.

use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::geometry::Vec3;

/// PCK thresholds reported by [`evaluate`].
pub const PCK_THRESHOLDS_CM: [f64; 4] = [10.0, 20.0, 30.0, 40.0];

/// Euclidean error per sample and landmark, in cm. `pred[s][l]` pairs with `truth[s][l]`.
pub fn errors_cm(pred: &[Vec<Vec3>], truth: &[Vec<Vec3>]) -> Result<Vec<Vec<f64>>> {
    if pred.len() != truth.len() {
        return Err(invalid(format!("{} predictions for {} samples", pred.len(), truth.len())));
    }
    pred.iter()
        .zip(truth)
        .map(|(p, t)| {
            if p.len() != t.len() {
                return Err(invalid(format!("{} predicted landmarks for {} true", p.len(), t.len())));
            }
            Ok(p.iter().zip(t).map(|(a, b)| (a - b).norm() * 100.0).collect())
        })
        .collect()
}

/// Mean error over all samples and landmarks, in cm.
pub fn mpjpe_cm(pred: &[Vec<Vec3>], truth: &[Vec<Vec3>]) -> Result<f64> {
    let errs: Vec<f64> = errors_cm(pred, truth)?.into_iter().flatten().collect();
    if errs.is_empty() {
        return Err(invalid("no landmarks to evaluate"));
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Fraction of landmarks whose error is at most `threshold_cm`.
pub fn pck(pred: &[Vec<Vec3>], truth: &[Vec<Vec3>], threshold_cm: f64) -> Result<f64> {
    let errs: Vec<f64> = errors_cm(pred, truth)?.into_iter().flatten().collect();
    if errs.is_empty() {
        return Err(invalid("no landmarks to evaluate"));
    }
    Ok(errs.iter().filter(|e| **e <= threshold_cm).count() as f64 / errs.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkMetrics {
    pub mpjpe_cm: f64,
    /// Aligned with [`PCK_THRESHOLDS_CM`].
    pub pck: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_landmark: Vec<LandmarkMetrics>,
    pub mean: LandmarkMetrics,
}

impl EvalReport {
    /// One row per landmark then a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("landmark,mpjpe_cm,pck10,pck20,pck30,pck40\n");
        let mut row = |name: &str, m: &LandmarkMetrics| {
            let _ = writeln!(s, "{name},{:.6},{:.6},{:.6},{:.6},{:.6}", m.mpjpe_cm, m.pck[0], m.pck[1], m.pck[2], m.pck[3]);
        };
        for (i, m) in self.per_landmark.iter().enumerate() {
            row(&i.to_string(), m);
        }
        row("mean", &self.mean);
        s
    }
}

fn summarize(errs: &[f64]) -> LandmarkMetrics {
    let n = errs.len() as f64;
    let mut pck = [0.0; 4];
    for (p, t) in pck.iter_mut().zip(PCK_THRESHOLDS_CM) {
        *p = errs.iter().filter(|e| **e <= t).count() as f64 / n;
    }
    LandmarkMetrics {
        mpjpe_cm: errs.iter().sum::<f64>() / n,
        pck,
    }
}

/// Per-landmark and pooled MPJPE and PCK.
pub fn evaluate(pred: &[Vec<Vec3>], truth: &[Vec<Vec3>]) -> Result<EvalReport> {
    let errs = errors_cm(pred, truth)?;
    let landmarks = errs.first().map(Vec::len).unwrap_or(0);
    if landmarks == 0 || errs.iter().any(|e| e.len() != landmarks) {
        return Err(invalid("evaluation needs a consistent, non-zero landmark count"));
    }
    let per_landmark = (0..landmarks)
        .map(|l| summarize(&errs.iter().map(|e| e[l]).collect::<Vec<_>>()))
        .collect();
    let all: Vec<f64> = errs.into_iter().flatten().collect();
    Ok(EvalReport {
        per_landmark,
        mean: summarize(&all),
    })
}
