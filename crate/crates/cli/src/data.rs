//! Materialises the train / probe / test datasets named by a config.

use std::fs::File;

use anyhow::Context;

use rllim::data::{gen_syn, Dataset, RawTable, Schema, TabularEncoder};
use rllim::numerics::{Matrix, RandomSource, Stream};

use crate::config::{DatasetSource, ExperimentConfig, SchemaRef};

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub probe: Dataset,
    pub test: Dataset,
}

/// Seeds of the synthetic train, probe and test sets for a root seed.
pub fn synthetic_seeds(seed: u64) -> (u64, u64, u64) {
    let base = seed.wrapping_mul(3);
    (base, base.wrapping_add(1), base.wrapping_add(2))
}

pub fn load_splits(config: &ExperimentConfig) -> anyhow::Result<Splits> {
    match &config.dataset {
        DatasetSource::Synthetic {
            kind,
            train_size,
            probe_size,
            test_size,
        } => {
            let (a, b, c) = synthetic_seeds(config.seed);
            Ok(Splits {
                train: gen_syn(*kind, *train_size, a),
                probe: gen_syn(*kind, *probe_size, b),
                test: gen_syn(*kind, *test_size, c),
            })
        }
        DatasetSource::Csv {
            path,
            schema,
            label_column,
            positive_label,
            split,
            max_rows,
        } => {
            let schema = match schema {
                Some(SchemaRef::Inline(s)) => s.clone(),
                Some(SchemaRef::File(p)) => Schema::from_json_file(p)?,
                None => {
                    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
                    let mut s = Schema::infer(f, label_column.as_deref(), positive_label.clone())?;
                    if positive_label.is_some() {
                        s.positive_label = positive_label.clone();
                    }
                    s
                }
            };
            let table = RawTable::read(path, schema)?;
            let mut rows: Vec<usize> = (0..table.len()).collect();
            if let Some(m) = *max_rows {
                if m < rows.len() {
                    rows = RandomSource::new(config.seed).derive(Stream::Data).sample_indices(rows.len(), m);
                }
            }
            let (tr, pr, te) = split.with_seed(config.seed).indices(rows.len())?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i]).collect::<Vec<_>>();
            let (tr, pr, te) = (pick(&tr), pick(&pr), pick(&te));
            let encoder = TabularEncoder::fit(&table, &tr)?;
            Ok(Splits {
                train: encoder.encode(&table, &tr)?,
                probe: encoder.encode(&table, &pr)?,
                test: encoder.encode(&table, &te)?,
            })
        }
    }
}

/// Reads rows to explain: a CSV whose header contains every feature name
/// (other columns are ignored), numeric cells only.
pub fn read_feature_rows(path: &std::path::Path, feature_names: &[String]) -> anyhow::Result<Matrix> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let positions: Vec<usize> = feature_names
        .iter()
        .map(|n| {
            header
                .iter()
                .position(|h| h == n)
                .with_context(|| format!("{} lacks feature column `{n}`", path.display()))
        })
        .collect::<anyhow::Result<_>>()?;
    let mut data = Vec::new();
    let mut n = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (&p, name) in positions.iter().zip(feature_names) {
            let cell = rec.get(p).unwrap_or("").trim();
            let v: f64 = cell
                .parse()
                .with_context(|| format!("row {}: column `{name}`: cannot parse `{cell}`", r + 1))?;
            data.push(v);
        }
        n += 1;
    }
    Ok(Matrix::new(n, feature_names.len(), data)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SplitFractions;
    use std::io::Write;

    #[test]
    fn csv_splits_are_disjoint_and_seeded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let mut f = File::create(&path).unwrap();
        writeln!(f, "a,colour,y").unwrap();
        for i in 0..50 {
            writeln!(f, "{i},{},{}", if i % 3 == 0 { "red" } else { "blue" }, i % 2).unwrap();
        }
        drop(f);
        let config = ExperimentConfig {
            dataset: DatasetSource::Csv {
                path: path.clone(),
                schema: None,
                label_column: None,
                positive_label: None,
                split: SplitFractions {
                    train: 0.6,
                    probe: 0.2,
                    test: 0.2,
                },
                max_rows: Some(40),
            },
            ..ExperimentConfig::default()
        };
        let s = load_splits(&config).unwrap();
        assert_eq!(s.train.len() + s.probe.len() + s.test.len(), 40);
        assert_eq!(s.train.dim(), 3);
        let mut seen: Vec<f64> = [&s.train, &s.probe, &s.test]
            .iter()
            .flat_map(|d| d.features.row_iter().map(|r| r[0]).collect::<Vec<_>>())
            .collect();
        seen.sort_by(f64::total_cmp);
        seen.dedup();
        assert_eq!(seen.len(), 40);
        let again = load_splits(&config).unwrap();
        assert_eq!(again.test, s.test);
    }

    #[test]
    fn feature_rows_need_every_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "b,a,extra\n2,1,z\n4,3,z\n").unwrap();
        let m = read_feature_rows(&path, &["a".into(), "b".into()]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        let err = read_feature_rows(&path, &["c".into()]).unwrap_err();
        assert!(err.to_string().contains("`c`"));
    }
}
