use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{domain, Result};

/// Round half up, then clamp to `1..=levels`.
pub fn quantize_output(v: f64, levels: usize) -> Result<usize> {
    if !v.is_finite() {
        return domain(format!("cannot quantize non-finite output {v}"));
    }
    Ok((v + 0.5).floor().clamp(1.0, levels as f64) as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub level: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[true − 1][predicted − 1]`.
    pub confusion: Vec<Vec<usize>>,
    /// Raw-output quartiles per true level; `None` for levels absent from the evaluation set.
    pub quartiles: Vec<Option<Quartiles>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and macro-averaged precision, recall and F1.
pub fn precision_recall_f1(predicted: &[usize], truth: &[usize], levels: usize) -> Result<MetricsReport> {
    if predicted.len() != truth.len() {
        return domain(format!("{} predictions for {} labels", predicted.len(), truth.len()));
    }
    if let Some(c) = predicted.iter().chain(truth).find(|&&c| c == 0 || c > levels) {
        return domain(format!("class {c} outside 1..={levels}"));
    }
    let mut confusion = vec![vec![0usize; levels]; levels];
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t - 1][p - 1] += 1;
    }
    let per_class: Vec<ClassMetrics> = (0..levels)
        .map(|k| {
            let tp = confusion[k][k];
            let support: usize = confusion[k].iter().sum();
            let predicted_k: usize = confusion.iter().map(|row| row[k]).sum();
            let precision = ratio(tp, predicted_k);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                level: k + 1,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / levels as f64;
    Ok(MetricsReport {
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
        confusion,
        quartiles: Vec::new(),
    })
}

/// Quantile by linear interpolation between order statistics (type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(Quartiles {
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
    })
}

/// Quartiles of raw outputs grouped by true level. Empty groups yield `None` and a warning.
pub fn output_quartiles(outputs: &[f64], truth: &[usize], levels: usize) -> Vec<Option<Quartiles>> {
    (1..=levels)
        .map(|l| {
            let group: Vec<f64> = outputs.iter().zip(truth).filter(|(_, &t)| t == l).map(|(o, _)| *o).collect();
            let q = quartiles(&group);
            if q.is_none() {
                log::warn!("no evaluation samples at level {l}; quartiles omitted");
            }
            q
        })
        .collect()
}

/// Quantize raw outputs and compute the full report.
pub fn evaluate_outputs(outputs: &[f64], truth: &[usize], levels: usize) -> Result<MetricsReport> {
    let predicted = outputs.iter().map(|&v| quantize_output(v, levels)).collect::<Result<Vec<_>>>()?;
    let mut report = precision_recall_f1(&predicted, truth, levels)?;
    report.quartiles = output_quartiles(outputs, truth, levels);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
}

/// Two-sided paired t-test on `a − b`.
///
/// All-zero differences give `(0, 1)`; zero variance with a nonzero mean gives `(±∞, 0)`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 2 {
        return domain(format!("paired t-test needs two equal lists of length >= 2, got {} and {}", a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest { t: 0.0, p: 1.0 }
        } else {
            TTest {
                t: f64::INFINITY.copysign(mean),
                p: 0.0,
            }
        });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| crate::CsdaError::Domain(e.to_string()))?;
    Ok(TTest {
        t,
        p: 2.0 * dist.sf(t.abs()),
    })
}

/// Ranks with ties assigned their average rank (1-based).
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Spearman's ρ with average ranks for ties; 0 when either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Kendall's τ-a: (concordant − discordant) / number of pairs.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += sign(a[j] - a[i]) * sign(b[j] - b[i]);
        }
    }
    s / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quantization_table() {
        let q = |v| quantize_output(v, 4).unwrap();
        assert_eq!((q(1.3), q(0.4), q(4.9), q(2.5), q(1.5), q(3.49)), (1, 1, 4, 3, 2, 3));
        for l in 1..=4 {
            assert_eq!(q(l as f64), l);
        }
        assert!(quantize_output(f64::NAN, 4).is_err());
    }

    #[test]
    fn metric_examples() {
        let perfect = precision_recall_f1(&[1, 2, 3, 4], &[1, 2, 3, 4], 4).unwrap();
        assert_eq!((perfect.macro_precision, perfect.macro_recall, perfect.macro_f1), (1.0, 1.0, 1.0));
        let r = precision_recall_f1(&[1, 1, 1, 1], &[1, 1, 2, 2], 2).unwrap();
        assert_eq!((r.per_class[0].precision, r.per_class[0].recall), (0.5, 1.0));
        assert_abs_diff_eq!(r.per_class[0].f1, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!((r.per_class[1].precision, r.per_class[1].recall, r.per_class[1].f1), (0.0, 0.0, 0.0));
        assert_abs_diff_eq!(r.macro_f1, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(r.confusion, vec![vec![2, 0], vec![2, 0]]);
        assert!(precision_recall_f1(&[1], &[1, 2], 2).is_err());
        assert!(precision_recall_f1(&[5], &[1], 4).is_err());
    }

    #[test]
    fn quartile_examples() {
        let q = quartiles(&[5.0, 1.0, 4.0, 2.0, 3.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
        let c = quartiles(&[0.7; 6]).unwrap();
        assert_eq!((c.q1, c.median, c.q3), (0.7, 0.7, 0.7));
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.25), 1.75);
        let grouped = output_quartiles(&[1.0, 2.0, 3.0], &[1, 1, 3], 4);
        assert!(grouped[1].is_none() && grouped[3].is_none());
        assert_eq!(grouped[0].as_ref().unwrap().median, 1.5);
    }

    #[test]
    fn t_test_examples() {
        assert_eq!(paired_t_test(&[0.5, 0.6, 0.7], &[0.5, 0.6, 0.7]).unwrap(), TTest { t: 0.0, p: 1.0 });
        let s = paired_t_test(&[2.0; 5], &[1.0; 5]).unwrap();
        assert_eq!((s.t, s.p), (f64::INFINITY, 0.0));
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0; 3]).unwrap();
        assert_abs_diff_eq!(r.t, 3.4641016151377544, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p, 0.0742, epsilon = 1e-4);
        let swapped = paired_t_test(&[0.0; 3], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((swapped.t, swapped.p), (-r.t, r.p));
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn rank_correlations() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 5.0]), vec![2.5, 4.0, 2.5, 1.0]);
        let up = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(spearman(&up, &[1.0, 4.0, 9.0, 16.0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spearman(&up, &[4.0, 3.0, 2.0, 1.0]), -1.0, epsilon = 1e-15);
        assert_eq!(spearman(&up, &[2.0; 4]), 0.0);
        assert_eq!(kendall_tau(&up, &[1.0, 3.0, 2.0, 4.0]), 4.0 / 6.0);
    }
}
