use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::cv::CvReport;
use super::metrics::Metric;
use crate::stats::{mean, variance};

/// Two-sided Welch t-test p-value; `None` when either sample has fewer than
/// two values.
pub fn welch_test(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a) / na, variance(b) / nb);
    let diff = mean(a) - mean(b);
    let se2 = va + vb;
    if !(se2 > 0.0) {
        return Some(if diff == 0.0 { 1.0 } else { 0.0 });
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).ok()?;
    Some((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub model_a: String,
    pub model_b: String,
    /// `None` when the pair could not be tested.
    pub p_value: Option<f64>,
    pub significant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMatrix {
    pub metric: Metric,
    pub models: Vec<String>,
    pub alpha: f64,
    /// α divided by the number of model pairs.
    pub alpha_adjusted: f64,
    /// Upper triangle, row-major.
    pub pairs: Vec<PairTest>,
}

impl SignificanceMatrix {
    /// Test result for models `i` and `j` in either order.
    pub fn get(&self, i: usize, j: usize) -> Option<&PairTest> {
        if i == j || i >= self.models.len() || j >= self.models.len() {
            return None;
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let k = self.models.len();
        let idx = a * (2 * k - a - 1) / 2 + (b - a - 1);
        self.pairs.get(idx)
    }
}

/// Welch tests between every pair of models on the valid repetitions, judged
/// at a Bonferroni-adjusted level.
pub fn compare_models(report: &CvReport, metric: Metric) -> SignificanceMatrix {
    let k = report.models.len();
    let n_pairs = (k * k.saturating_sub(1) / 2).max(1);
    let alpha_adjusted = report.alpha / n_pairs as f64;
    let values: Vec<Vec<f64>> = report
        .models
        .iter()
        .map(|m| report.metric_values(m, metric))
        .collect();
    let mut pairs = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let p = welch_test(&values[i], &values[j]);
            pairs.push(PairTest {
                model_a: report.models[i].clone(),
                model_b: report.models[j].clone(),
                p_value: p,
                significant: p.map(|p| p < alpha_adjusted),
            });
        }
    }
    SignificanceMatrix {
        metric,
        models: report.models.clone(),
        alpha: report.alpha,
        alpha_adjusted,
        pairs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_separated_samples() {
        let a = [0.1, 0.4, 0.2, 0.3];
        assert_eq!(welch_test(&a, &a), Some(1.0));
        let zeros: Vec<f64> = (0..20).map(|i| 1e-6 * i as f64).collect();
        let ones: Vec<f64> = zeros.iter().map(|v| 1.0 + v).collect();
        assert!(welch_test(&zeros, &ones).unwrap() < 1e-12);
        assert_eq!(welch_test(&[1.0], &a), None);
    }
}
