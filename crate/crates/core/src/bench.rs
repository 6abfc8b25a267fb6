//! Synthetic benchmark: AWD per distance decile for RL-LIM and the three
//! baselines, over several seeded runs.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    default_k_grid, fit_neighborhood_forest, lime_explain, maple_explain, neighborhood_forest_config, silo_explain,
    LimeConfig, SiloIndex,
};
use crate::blackbox::BlackBoxModel;
use crate::data::{gen_syn, SyntheticKind};
use crate::error::{Error, Result};
use crate::estimator::LearningCurve;
use crate::explanation::{Explanation, Method};
use crate::interpretable::LocalKind;
use crate::metrics::{awd_with_norm, decile_bucket_awd, AwdNorm, AwdPoint, DecileTable};
use crate::numerics::MinMaxScaler;
use crate::pipeline::{explain_instance, run_with_blackbox, PipelineConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthBenchConfig {
    pub kind: SyntheticKind,
    pub train_size: usize,
    pub probe_size: usize,
    pub test_size: usize,
    pub runs: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub lime: LimeConfig,
    pub awd_norm: AwdNorm,
    /// LIME must exceed this AWD in every decile.
    pub lime_floor: f64,
    /// Deciles RL-LIM must win against both SILO and MAPLE.
    pub min_deciles_won: usize,
}

impl Default for SynthBenchConfig {
    fn default() -> Self {
        SynthBenchConfig {
            kind: SyntheticKind::Syn1,
            train_size: 1000,
            probe_size: 1000,
            test_size: 1000,
            runs: 10,
            seed: 0,
            pipeline: PipelineConfig::default(),
            lime: LimeConfig::default(),
            awd_norm: AwdNorm::L1,
            lime_floor: 1.6,
            min_deciles_won: 8,
        }
    }
}

impl SynthBenchConfig {
    /// Every problem with the configuration; empty when valid.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.train_size < 2 || self.probe_size == 0 || self.test_size == 0 {
            problems.push("train size must be ≥ 2 and probe/test sizes ≥ 1".to_string());
        }
        if self.runs == 0 {
            problems.push("run count must be ≥ 1".to_string());
        }
        if !matches!(self.pipeline.local_kind, LocalKind::Ridge { .. }) {
            problems.push("AWD needs coefficients: the local kind must be ridge".to_string());
        }
        if !matches!(self.lime.local_kind, LocalKind::Ridge { .. }) {
            problems.push("LIME local kind must be ridge for AWD".to_string());
        }
        if self.min_deciles_won > crate::metrics::DECILES {
            problems.push(format!("min deciles won must be ≤ {}", crate::metrics::DECILES));
        }
        if let Err(e) = self.pipeline.train.validate() {
            problems.push(e.to_string());
        }
        if let Err(e) = self.lime.validate(crate::data::SYN_DIM) {
            problems.push(e.to_string());
        }
        problems
    }

    /// Seeds of run `r`: (train data, probe data, test data, models).
    pub fn run_seeds(&self, r: usize) -> (u64, u64, u64, u64) {
        let s = self.seed.wrapping_add(r as u64);
        let base = s.wrapping_mul(3);
        (base, base.wrapping_add(1), base.wrapping_add(2), s)
    }
}

/// AWD points of one run, one list per method in `Method::ALL` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthRun {
    pub seed: u64,
    pub points: Vec<(Method, Vec<AwdPoint>)>,
    pub curve: LearningCurve,
}

fn coefficients(e: &Explanation) -> Result<&[f64]> {
    e.model
        .coefficients()
        .ok_or_else(|| Error::invalid("explanation has no coefficients"))
}

pub fn run_synth_once(config: &SynthBenchConfig, r: usize) -> Result<SynthRun> {
    let kind = config.kind;
    let (s_train, s_probe, s_test, s_model) = config.run_seeds(r);
    let train = gen_syn(kind, config.train_size, s_train);
    let probe = gen_syn(kind, config.probe_size, s_probe);
    let test = gen_syn(kind, config.test_size, s_test);
    let model = BlackBoxModel::Oracle { generator: kind };

    let mut pipeline = config.pipeline.clone();
    pipeline.train.seed = s_model;
    let art = run_with_blackbox(&train, Some(&probe), model.clone(), &pipeline)?;
    let forest = fit_neighborhood_forest(&art.aux_train, &neighborhood_forest_config(s_model))?;
    let index = SiloIndex::new(&forest, &art.aux_train.features)?;
    let scaler = MinMaxScaler::fit(&art.aux_train.features)?;
    let lime = LimeConfig {
        seed: s_model,
        ..config.lime.clone()
    };
    let k_grid = default_k_grid(test.dim());
    let local = pipeline.local_kind;

    let mut points: Vec<(Method, Vec<AwdPoint>)> = Method::ALL.iter().map(|&m| (m, Vec::new())).collect();
    for i in 0..test.len() {
        let x = test.features.row(i);
        let truth = kind.true_coefficients(x);
        let distance = kind.boundary_statistic(x).abs();
        for (method, list) in points.iter_mut() {
            let e = match method {
                Method::RlLim => explain_instance(i, x, &art.estimator, &art.aux_train, &model, local, pipeline.top_k)?,
                Method::Lime => lime_explain(i, x, &model, &lime, &scaler)?,
                Method::Silo => silo_explain(i, x, &index, &art.aux_train, &model, local)?,
                Method::Maple => maple_explain(
                    i,
                    x,
                    &forest,
                    &index,
                    &art.aux_train,
                    &art.aux_probe,
                    &model,
                    local,
                    &k_grid,
                )?,
            };
            let awd = awd_with_norm(&truth, coefficients(&e)?, config.awd_norm)?;
            list.push(AwdPoint { distance, awd });
        }
    }
    Ok(SynthRun {
        seed: s_model,
        points,
        curve: art.curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingSummary {
    pub dataset: String,
    pub awd_norm: AwdNorm,
    pub runs: usize,
    /// Deciles where RL-LIM's mean AWD is below SILO's / MAPLE's / both.
    pub deciles_below_silo: usize,
    pub deciles_below_maple: usize,
    pub deciles_below_both: usize,
    pub min_deciles_won: usize,
    pub lime_min_awd: f64,
    pub lime_floor: f64,
    pub rl_lim_pass: bool,
    pub lime_pass: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchResult {
    pub tables: Vec<(Method, DecileTable)>,
    pub curves: Vec<LearningCurve>,
    pub summary: OrderingSummary,
}

impl SynthBenchResult {
    pub fn table(&self, method: Method) -> &DecileTable {
        &self.tables.iter().find(|(m, _)| *m == method).expect("every method is benchmarked").1
    }

    /// All methods in one CSV: `decile,mean_awd,ci_low,ci_high,method`.
    pub fn write_deciles_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, (method, table)) in self.tables.iter().enumerate() {
            table.write_csv(method.name(), k == 0, &mut out)?;
        }
        Ok(())
    }

    /// Mean over runs of the (first, final) quartile rewards.
    pub fn quartile_rewards(&self) -> (f64, f64) {
        let q: Vec<(f64, f64)> = self.curves.iter().map(|c| c.quartile_rewards()).collect();
        let n = q.len().max(1) as f64;
        (q.iter().map(|p| p.0).sum::<f64>() / n, q.iter().map(|p| p.1).sum::<f64>() / n)
    }
}

pub fn summarize(config: &SynthBenchConfig, tables: &[(Method, DecileTable)]) -> OrderingSummary {
    let get = |m: Method| &tables.iter().find(|(k, _)| *k == m).expect("method present").1;
    let mean_at = |t: &DecileTable, d: usize| t.rows.iter().find(|r| r.decile == d).map(|r| r.mean_awd);
    let (rl, silo, maple, lime) = (get(Method::RlLim), get(Method::Silo), get(Method::Maple), get(Method::Lime));
    let (mut below_silo, mut below_maple, mut below_both) = (0, 0, 0);
    for d in 1..=crate::metrics::DECILES {
        let Some(r) = mean_at(rl, d) else { continue };
        let bs = mean_at(silo, d).is_some_and(|s| r < s);
        let bm = mean_at(maple, d).is_some_and(|m| r < m);
        below_silo += bs as usize;
        below_maple += bm as usize;
        below_both += (bs && bm) as usize;
    }
    let lime_min = lime.rows.iter().map(|r| r.mean_awd).fold(f64::INFINITY, f64::min);
    let lime_pass = lime.empty_deciles.is_empty() && lime_min > config.lime_floor;
    let rl_lim_pass = below_both >= config.min_deciles_won;
    OrderingSummary {
        dataset: config.kind.name().to_string(),
        awd_norm: config.awd_norm,
        runs: config.runs,
        deciles_below_silo: below_silo,
        deciles_below_maple: below_maple,
        deciles_below_both: below_both,
        min_deciles_won: config.min_deciles_won,
        lime_min_awd: lime_min,
        lime_floor: config.lime_floor,
        rl_lim_pass,
        lime_pass,
        pass: rl_lim_pass && lime_pass,
    }
}

/// Runs every seed, then buckets each method's AWD by distance decile.
pub fn run_synth_bench(config: &SynthBenchConfig) -> Result<SynthBenchResult> {
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }
    let runs = (0..config.runs)
        .map(|r| run_synth_once(config, r))
        .collect::<Result<Vec<_>>>()?;
    let mut tables = Vec::new();
    for (k, &method) in Method::ALL.iter().enumerate() {
        let per_run: Vec<Vec<AwdPoint>> = runs.iter().map(|run| run.points[k].1.clone()).collect();
        tables.push((method, decile_bucket_awd(&per_run)?));
    }
    let summary = summarize(config, &tables);
    Ok(SynthBenchResult {
        tables,
        curves: runs.into_iter().map(|r| r.curve).collect(),
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimatorArch;
    use crate::metrics::DecileRow;

    fn tiny() -> SynthBenchConfig {
        let mut c = SynthBenchConfig {
            train_size: 120,
            probe_size: 40,
            test_size: 30,
            runs: 2,
            ..SynthBenchConfig::default()
        };
        c.pipeline.train.iterations = 5;
        c.pipeline.train.train_batch = 64;
        c.pipeline.train.probe_batch = 8;
        c.pipeline.train.arch = EstimatorArch {
            hidden_layers: 1,
            hidden_units: 8,
            pair_difference: true,
        };
        c.lime.perturbations = 200;
        c
    }

    #[test]
    fn smoke_run_emits_all_methods() {
        let r = run_synth_bench(&tiny()).unwrap();
        assert_eq!(r.tables.len(), 4);
        assert_eq!(r.curves.len(), 2);
        let mut buf = Vec::new();
        r.write_deciles_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 10);
        for m in Method::ALL {
            assert!(text.contains(&format!(",{}\n", m.name())));
        }
    }

    #[test]
    fn bench_is_reproducible() {
        let a = run_synth_bench(&tiny()).unwrap();
        let b = run_synth_bench(&tiny()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tree_surrogate_is_rejected() {
        let mut c = tiny();
        c.pipeline.local_kind = LocalKind::tree();
        assert!(matches!(run_synth_bench(&c), Err(Error::Config(_))));
    }

    fn table(means: &[f64]) -> DecileTable {
        DecileTable {
            rows: means
                .iter()
                .enumerate()
                .map(|(k, &m)| DecileRow {
                    decile: k + 1,
                    mean_awd: m,
                    ci_low: None,
                    ci_high: None,
                    runs: 1,
                })
                .collect(),
            empty_deciles: vec![],
        }
    }

    #[test]
    fn summary_counts_wins() {
        let c = SynthBenchConfig::default();
        let mut rl = vec![1.0; 10];
        rl[0] = 5.0;
        rl[1] = 2.5;
        let tables = vec![
            (Method::RlLim, table(&rl)),
            (Method::Lime, table(&[1.7; 10])),
            (Method::Silo, table(&[2.0; 10])),
            (Method::Maple, table(&[3.0; 10])),
        ];
        let s = summarize(&c, &tables);
        assert_eq!((s.deciles_below_silo, s.deciles_below_maple, s.deciles_below_both), (8, 9, 8));
        assert!(s.rl_lim_pass && s.lime_pass && s.pass);
        let mut low = table(&[1.7; 10]);
        low.rows[4].mean_awd = 1.6;
        let s = summarize(&c, &[tables[0].clone(), (Method::Lime, low), tables[2].clone(), tables[3].clone()]);
        assert!(!s.lime_pass && !s.pass);
    }
}
