//! Solution-quality metrics and the trend statistic used by the benchmarks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrf::Labeling;

/// Wall-clock seconds per pipeline phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub encode_seconds: f64,
    pub solve_seconds: f64,
    pub round_seconds: f64,
    pub total_seconds: f64,
}

/// Percentage of nodes on which two labelings agree.
pub fn agreement_pct(x: &Labeling, reference: &Labeling) -> Result<f64> {
    if x.len() != reference.len() {
        return Err(Error::invalid(format!("labelings differ in length ({} vs {})", x.len(), reference.len())));
    }
    if x.is_empty() {
        return Err(Error::invalid("empty labelings"));
    }
    let same = x.as_slice().iter().zip(reference.as_slice()).filter(|(a, b)| a == b).count();
    Ok(100.0 * same as f64 / x.len() as f64)
}

/// `100·(f_opt − f_relaxed)/f_opt`; `None` when `f_opt` is zero.
pub fn relaxation_gap_pct(f_opt: f64, f_relaxed: f64) -> Option<f64> {
    (f_opt != 0.0).then(|| 100.0 * (f_opt - f_relaxed) / f_opt)
}

/// `100·(f_rounded − f_opt)/f_opt`; `None` when `f_opt` is zero.
pub fn rounding_gap_pct(f_opt: f64, f_rounded: f64) -> Option<f64> {
    (f_opt != 0.0).then(|| 100.0 * (f_rounded - f_opt) / f_opt)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub percent_optimal_labels: Option<f64>,
    /// On offset-restored energies.
    pub relaxation_gap_pct: Option<f64>,
    pub rounding_gap_pct: Option<f64>,
    /// Same ratios on the encoding's own objective scale (offset removed).
    pub raw_relaxation_gap_pct: Option<f64>,
    pub raw_rounding_gap_pct: Option<f64>,
    pub label_agreement_pct: Option<f64>,
    pub wall_times: Option<PhaseTimings>,
    pub notes: Vec<String>,
}

/// Inputs to [`metrics_report`]; any of them may be missing.
#[derive(Debug, Clone, Default)]
pub struct MetricInputs<'a> {
    pub labeling: Option<&'a Labeling>,
    pub f_rounded: Option<f64>,
    pub f_relaxed: Option<f64>,
    pub offset: Option<f64>,
    pub optimum: Option<(&'a Labeling, f64)>,
    pub ground_truth: Option<&'a Labeling>,
    pub timings: Option<PhaseTimings>,
}

pub fn metrics_report(inputs: &MetricInputs) -> Result<MetricsReport> {
    let mut report = MetricsReport { wall_times: inputs.timings, ..Default::default() };
    if let (Some(x), Some((x_opt, _))) = (inputs.labeling, inputs.optimum) {
        report.percent_optimal_labels = Some(agreement_pct(x, x_opt)?);
    }
    if let (Some(x), Some(gt)) = (inputs.labeling, inputs.ground_truth) {
        report.label_agreement_pct = Some(agreement_pct(x, gt)?);
    }
    match inputs.optimum {
        Some((_, f_opt)) => {
            if f_opt == 0.0 {
                report.notes.push("optimal energy is zero; relative gaps are undefined".into());
            }
            report.rounding_gap_pct = inputs.f_rounded.and_then(|f| rounding_gap_pct(f_opt, f));
            report.relaxation_gap_pct = inputs.f_relaxed.and_then(|f| relaxation_gap_pct(f_opt, f));
            if let Some(c) = inputs.offset {
                report.raw_rounding_gap_pct = inputs.f_rounded.and_then(|f| rounding_gap_pct(f_opt - c, f - c));
                report.raw_relaxation_gap_pct = inputs.f_relaxed.and_then(|f| relaxation_gap_pct(f_opt - c, f - c));
            }
        }
        None => report.notes.push("no exact optimum supplied; gaps omitted".into()),
    }
    Ok(report)
}

/// Kendall rank-correlation trend test of `y` against `x`, with the usual
/// tie-corrected variance. Samples sharing an `x` value form ties, which
/// makes this the pooled form of the Mann-Kendall test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    pub s: f64,
    pub variance: f64,
    /// Continuity-corrected standard score.
    pub z: f64,
}

impl TrendTest {
    /// One-sided test for an increasing trend at the 5% level.
    pub fn significantly_increasing(&self) -> bool {
        self.z > 1.644_853_626_951_472_2
    }
}

fn tie_sums(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        a += t * (t - 1.0) * (2.0 * t + 5.0);
        b += t * (t - 1.0) * (t - 2.0);
        c += t * (t - 1.0);
        i = j;
    }
    (a, b, c)
}

pub fn kendall_trend(x: &[f64], y: &[f64]) -> Result<TrendTest> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid("trend test needs at least three paired samples"));
    }
    let n = x.len() as f64;
    let mut s = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = (x[j] - x[i]).signum() * f64::from(x[j] != x[i]);
            let dy = (y[j] - y[i]).signum() * f64::from(y[j] != y[i]);
            s += dx * dy;
        }
    }
    let (ax, bx, cx) = tie_sums(x);
    let (ay, by, cy) = tie_sums(y);
    let variance = (n * (n - 1.0) * (2.0 * n + 5.0) - ax - ay) / 18.0
        + bx * by / (9.0 * n * (n - 1.0) * (n - 2.0))
        + cx * cy / (2.0 * n * (n - 1.0));
    let z = if variance <= 0.0 {
        0.0
    } else if s > 0.0 {
        (s - 1.0) / variance.sqrt()
    } else if s < 0.0 {
        (s + 1.0) / variance.sqrt()
    } else {
        0.0
    };
    Ok(TrendTest { s, variance, z })
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some((mean, var.sqrt()))
}
