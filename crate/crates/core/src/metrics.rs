//! Prediction, fidelity and coefficient-recovery metrics, plus the
//! distance-decile aggregation used for the synthetic studies.

use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{check_same_len, Error, Result};

fn nonempty_pair(a: &[f64], b: &[f64]) -> Result<()> {
    check_same_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::invalid("metric needs at least one value"));
    }
    Ok(())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    nonempty_pair(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Mean absolute gap between surrogate and black-box outputs (logits for
/// classification).
pub fn lmae(local_preds: &[f64], blackbox_preds: &[f64]) -> Result<f64> {
    mae(local_preds, blackbox_preds)
}

/// R² of the surrogate against the black box, referenced to the mean of the
/// black-box predictions.
pub fn r2_score(blackbox_preds: &[f64], local_preds: &[f64]) -> Result<f64> {
    nonempty_pair(blackbox_preds, local_preds)?;
    let n = blackbox_preds.len() as f64;
    let mean = blackbox_preds.iter().sum::<f64>() / n;
    let total: f64 = blackbox_preds.iter().map(|f| (f - mean).powi(2)).sum();
    if total == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let resid: f64 = blackbox_preds.iter().zip(local_preds).map(|(f, g)| (f - g).powi(2)).sum();
    Ok(1.0 - resid / total)
}

/// Average precision: mean of precision@k over the ranks k of the positives.
/// Ranking is by descending score, ties by ascending index.
pub fn apr(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_same_len(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores contain NaN"));
    }
    let positives = labels.iter().filter(|l| **l).count();
    if positives == 0 {
        return Err(Error::UndefinedApr);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AwdNorm {
    /// `(1/d) Σ |wᵢ − ŵᵢ|`
    MeanAbsolute,
    /// `Σ |wᵢ − ŵᵢ|`
    L1,
    /// `√Σ (wᵢ − ŵᵢ)²`
    L2,
}

impl AwdNorm {
    pub fn name(self) -> &'static str {
        match self {
            AwdNorm::MeanAbsolute => "mean_absolute",
            AwdNorm::L1 => "l1",
            AwdNorm::L2 => "l2",
        }
    }
}

/// Absolute weight difference under the mean-absolute convention.
pub fn awd(true_w: &[f64], est_w: &[f64]) -> Result<f64> {
    awd_with_norm(true_w, est_w, AwdNorm::MeanAbsolute)
}

pub fn awd_with_norm(true_w: &[f64], est_w: &[f64], norm: AwdNorm) -> Result<f64> {
    nonempty_pair(true_w, est_w)?;
    let diffs = true_w.iter().zip(est_w).map(|(a, b)| a - b);
    Ok(match norm {
        AwdNorm::MeanAbsolute => diffs.map(f64::abs).sum::<f64>() / true_w.len() as f64,
        AwdNorm::L1 => diffs.map(f64::abs).sum(),
        AwdNorm::L2 => diffs.map(|x| x * x).sum::<f64>().sqrt(),
    })
}

/// One explained test point: its distance to the regime boundary and its AWD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwdPoint {
    pub distance: f64,
    pub awd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileRow {
    /// 1-based band index, 1 = closest to the boundary.
    pub decile: usize,
    pub mean_awd: f64,
    /// 95% Student-t interval over run means; `None` with fewer than two runs.
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecileTable {
    pub rows: Vec<DecileRow>,
    /// Bands that received no point in any run.
    pub empty_deciles: Vec<usize>,
}

pub const DECILES: usize = 10;

/// Buckets points into percentile bands of `distance` (pooled over runs),
/// averages AWD per band within each run, then aggregates run means.
pub fn decile_bucket_awd(runs: &[Vec<AwdPoint>]) -> Result<DecileTable> {
    let mut pooled: Vec<f64> = runs.iter().flatten().map(|p| p.distance).collect();
    if pooled.is_empty() {
        return Err(Error::invalid("no points to bucket"));
    }
    if pooled.iter().chain(runs.iter().flatten().map(|p| &p.awd)).any(|v| !v.is_finite()) {
        return Err(Error::invalid("distances and AWD values must be finite"));
    }
    pooled.sort_by(f64::total_cmp);
    let n = pooled.len();
    let edges: Vec<f64> = (1..DECILES).map(|k| pooled[k * n / DECILES]).collect();
    let bucket = |d: f64| edges.iter().filter(|&&e| e <= d).count();

    let mut per_bucket: Vec<Vec<f64>> = vec![Vec::new(); DECILES];
    for run in runs {
        let mut sums = [0.0; DECILES];
        let mut counts = [0usize; DECILES];
        for p in run {
            let b = bucket(p.distance);
            sums[b] += p.awd;
            counts[b] += 1;
        }
        for b in 0..DECILES {
            if counts[b] > 0 {
                per_bucket[b].push(sums[b] / counts[b] as f64);
            }
        }
    }
    let mut rows = Vec::new();
    let mut empty_deciles = Vec::new();
    for (b, means) in per_bucket.iter().enumerate() {
        if means.is_empty() {
            empty_deciles.push(b + 1);
            continue;
        }
        let (mean, ci) = mean_with_ci(means);
        rows.push(DecileRow {
            decile: b + 1,
            mean_awd: mean,
            ci_low: ci.map(|h| mean - h),
            ci_high: ci.map(|h| mean + h),
            runs: means.len(),
        });
    }
    Ok(DecileTable { rows, empty_deciles })
}

/// Sample mean and the half-width of its 95% Student-t interval.
pub fn mean_with_ci(values: &[f64]) -> (f64, Option<f64>) {
    let k = values.len() as f64;
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], (values.len() > 1).then_some(0.0));
    }
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let t = StudentsT::new(0.0, 1.0, k - 1.0)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, Some(t * (var / k).sqrt()))
}

impl DecileTable {
    /// Rows `decile,mean_awd,ci_low,ci_high,method`; empty bands are written
    /// with blank statistics.
    pub fn write_csv<W: Write>(&self, method: &str, with_header: bool, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if with_header {
            w.write_record(["decile", "mean_awd", "ci_low", "ci_high", "method"])?;
        }
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut all: Vec<(usize, Option<&DecileRow>)> = self.rows.iter().map(|r| (r.decile, Some(r))).collect();
        all.extend(self.empty_deciles.iter().map(|&d| (d, None)));
        all.sort_by_key(|(d, _)| *d);
        for (d, row) in all {
            match row {
                Some(r) => w.write_record([
                    d.to_string(),
                    r.mean_awd.to_string(),
                    opt(r.ci_low),
                    opt(r.ci_high),
                    method.to_string(),
                ])?,
                None => w.write_record([d.to_string(), String::new(), String::new(), String::new(), method.into()])?,
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn means(&self) -> Vec<(usize, f64)> {
        self.rows.iter().map(|r| (r.decile, r.mean_awd)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub dataset: String,
    pub blackbox: String,
    pub local_kind: String,
    /// Regression only.
    pub mae: Option<f64>,
    /// Classification only.
    pub apr: Option<f64>,
    pub lmae: f64,
    /// `None` when the black-box predictions have zero variance.
    pub r2: Option<f64>,
    pub awd_norm: Option<AwdNorm>,
    pub awd_deciles: Option<DecileTable>,
    pub seed: u64,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn loop_mae(a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] - b[i]).abs();
        }
        s / a.len() as f64
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[1.0, 3.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(mae(&[4.0, 5.0], &[4.0, 5.0]).unwrap(), 0.0);
        assert_eq!(lmae(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
        let mut rng = crate::numerics::RandomSource::new(11);
        let a: Vec<f64> = (0..100).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = (0..100).map(|_| rng.standard_normal()).collect();
        assert!((mae(&a, &b).unwrap() - loop_mae(&a, &b)).abs() < 1e-12);
        assert!((lmae(&a[..50], &b[..50]).unwrap() - loop_mae(&a[..50], &b[..50])).abs() < 1e-12);
    }

    #[test]
    fn r2_cases() {
        let f = [0.0, 1.0, 2.0];
        assert_eq!(r2_score(&f, &f).unwrap(), 1.0);
        assert!(r2_score(&f, &[1.0; 3]).unwrap().abs() < 1e-12);
        assert_eq!(r2_score(&f, &[2.0; 3]).unwrap(), -1.5);
        assert!(matches!(r2_score(&[3.0; 3], &f), Err(Error::UndefinedR2)));
    }

    #[test]
    fn apr_cases() {
        let v = apr(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((v - 0.833_333_333_333_333_3).abs() < 1e-10);
        assert_eq!(apr(&[0.9, 0.2, 0.8, 0.1], &[true, false, true, false]).unwrap(), 1.0);
        assert!(matches!(apr(&[0.5], &[false]), Err(Error::UndefinedApr)));
        // tied scores: earlier index ranks first
        assert_eq!(apr(&[0.5, 0.5], &[true, false]).unwrap(), 1.0);
        assert_eq!(apr(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn apr_random_scores_near_base_rate() {
        let mut rng = crate::numerics::RandomSource::new(21);
        let scores: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let labels: Vec<bool> = (0..10_000).map(|i| i % 2 == 0).collect();
        assert!((apr(&scores, &labels).unwrap() - 0.5).abs() < 0.02);
    }

    #[test]
    fn awd_cases() {
        assert_eq!(awd(&[1.0, 2.0, 0.0], &[0.0; 3]).unwrap(), 1.0);
        let mut w = vec![0.0; 11];
        w[0] = 1.0;
        w[1] = 2.0;
        assert_eq!(awd(&w, &w).unwrap(), 0.0);
        assert_eq!(awd_with_norm(&[1.0, 2.0, 0.0], &[0.0; 3], AwdNorm::L1).unwrap(), 3.0);
        assert_eq!(awd_with_norm(&[3.0, 4.0], &[0.0; 2], AwdNorm::L2).unwrap(), 5.0);
    }

    #[test]
    fn single_bucket_is_plain_mean() {
        let pts: Vec<AwdPoint> = [0.5, 1.5, 4.0].iter().map(|&a| AwdPoint { distance: 2.0, awd: a }).collect();
        let t = decile_bucket_awd(&[pts]).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].mean_awd, 2.0);
        assert_eq!(t.empty_deciles.len(), DECILES - 1);
        assert_eq!(t.rows[0].ci_low, None);
    }

    #[test]
    fn distance_orders_buckets() {
        let pts: Vec<AwdPoint> = (0..100)
            .map(|i| AwdPoint {
                distance: (i as f64 - 50.0).abs() * 0.06,
                awd: i as f64,
            })
            .collect();
        let mut with_extremes = pts.clone();
        with_extremes.push(AwdPoint { distance: 3.0, awd: -1.0 });
        with_extremes.push(AwdPoint { distance: 0.01, awd: -2.0 });
        let t = decile_bucket_awd(&[with_extremes]).unwrap();
        assert!(t.empty_deciles.is_empty());
        let edges: Vec<f64> = {
            let mut d: Vec<f64> = pts.iter().map(|p| p.distance).collect();
            d.push(3.0);
            d.push(0.01);
            d.sort_by(f64::total_cmp);
            (1..10).map(|k| d[k * d.len() / 10]).collect()
        };
        let band = |x: f64| edges.iter().filter(|&&e| e <= x).count();
        assert!(band(3.0) > band(0.01));
    }

    #[test]
    fn identical_run_means_give_zero_width_ci() {
        let run: Vec<AwdPoint> = (0..20).map(|i| AwdPoint { distance: i as f64, awd: 0.3 }).collect();
        let t = decile_bucket_awd(&vec![run; 10]).unwrap();
        for r in &t.rows {
            assert_eq!(r.runs, 10);
            assert_eq!(r.mean_awd, 0.3);
            assert_eq!(r.ci_low, Some(r.mean_awd));
            assert_eq!(r.ci_high, Some(r.mean_awd));
        }
    }

    #[test]
    fn t_interval_matches_table() {
        // t₀.₉₇₅ with 9 degrees of freedom is 2.262157…
        let (m, h) = mean_with_ci(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]);
        assert_eq!(m, 5.5);
        let se = (55.0f64 / 6.0 / 10.0).sqrt();
        assert!((h.unwrap() / se - 2.262_157_162_8).abs() < 1e-6);
    }

    #[test]
    fn decile_csv_lists_every_band() {
        let pts = vec![AwdPoint { distance: 1.0, awd: 2.0 }];
        let t = decile_bucket_awd(&[pts]).unwrap();
        let mut buf = Vec::new();
        t.write_csv("silo", true, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with("decile,mean_awd,ci_low,ci_high,method\n1,,,,silo\n"));
        assert!(text.ends_with("10,2,,,silo\n"));
    }

    proptest! {
        #[test]
        fn mae_symmetric(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            prop_assert_eq!(mae(&a, &b).unwrap(), mae(&b, &a).unwrap());
            prop_assert_eq!(lmae(&a, &b).unwrap(), lmae(&b, &a).unwrap());
        }

        #[test]
        fn r2_of_self_is_one(f in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(f.iter().any(|x| *x != f[0]));
            prop_assert_eq!(r2_score(&f, &f).unwrap(), 1.0);
            let g: Vec<f64> = f.iter().map(|x| x + 1.0).collect();
            prop_assert!(r2_score(&f, &g).unwrap() <= 1.0);
        }

        #[test]
        fn apr_invariant_under_monotone_maps(
            v in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 1..60)
        ) {
            let (s, l): (Vec<f64>, Vec<bool>) = v.into_iter().unzip();
            prop_assume!(l.iter().any(|x| *x));
            let base = apr(&s, &l).unwrap();
            let exp: Vec<f64> = s.iter().map(|x| x.exp()).collect();
            let affine: Vec<f64> = s.iter().map(|x| 3.0 * x - 7.0).collect();
            let cube: Vec<f64> = s.iter().map(|x| x.powi(3)).collect();
            prop_assert!((apr(&exp, &l).unwrap() - base).abs() < 1e-12);
            prop_assert!((apr(&affine, &l).unwrap() - base).abs() < 1e-12);
            prop_assert!((apr(&cube, &l).unwrap() - base).abs() < 1e-12);
        }

        #[test]
        fn awd_triangle_inequality(
            v in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0, -10.0f64..10.0), 1..12)
        ) {
            let a: Vec<f64> = v.iter().map(|t| t.0).collect();
            let b: Vec<f64> = v.iter().map(|t| t.1).collect();
            let c: Vec<f64> = v.iter().map(|t| t.2).collect();
            for norm in [AwdNorm::MeanAbsolute, AwdNorm::L1, AwdNorm::L2] {
                let ab = awd_with_norm(&a, &b, norm).unwrap();
                let bc = awd_with_norm(&b, &c, norm).unwrap();
                let ac = awd_with_norm(&a, &c, norm).unwrap();
                prop_assert!(ac <= ab + bc + 1e-9);
            }
        }
    }
}
