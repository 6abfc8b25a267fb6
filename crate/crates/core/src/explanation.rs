//! Per-instance explanation records shared by RL-LIM and the baselines.

use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpretable::LocalModel;

/// Number of highest-weighted training ids stored with an explanation.
pub const TOP_IDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    RlLim,
    Lime,
    Silo,
    Maple,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::RlLim, Method::Lime, Method::Silo, Method::Maple];

    pub fn name(self) -> &'static str {
        match self {
            Method::RlLim => "rl-lim",
            Method::Lime => "lime",
            Method::Silo => "silo",
            Method::Maple => "maple",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub instance_id: usize,
    pub method: Method,
    /// Weight of every training instance; empty for LIME, which never looks
    /// at the training set.
    pub weights: Vec<f64>,
    pub model: LocalModel,
    pub local_prediction: f64,
    /// Black-box output in distillation space.
    pub blackbox_prediction: f64,
    /// Ids of the highest-weighted training instances, heaviest first.
    pub top_instances: Vec<usize>,
}

impl Explanation {
    pub fn new(
        instance_id: usize,
        method: Method,
        x: &[f64],
        weights: Vec<f64>,
        model: LocalModel,
        blackbox_prediction: f64,
    ) -> Self {
        Explanation {
            instance_id,
            method,
            top_instances: top_indices(&weights, TOP_IDS),
            local_prediction: model.predict(x),
            weights,
            model,
            blackbox_prediction,
        }
    }
}

/// Indices of the `k` largest values, ties by ascending index.
pub fn top_indices(values: &[f64], k: usize) -> Vec<usize> {
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    let mut order: Vec<usize> = (0..values.len()).collect();
    if k < order.len() {
        if k > 0 {
            order.select_nth_unstable_by(k - 1, cmp);
        }
        order.truncate(k);
    }
    order.sort_by(cmp);
    order
}

/// Writes explanations as CSV:
/// `instance_id,method,local_prediction,blackbox_prediction,intercept,coef:<f>…,x:<f>…`.
/// Tree surrogates leave the intercept and coefficient cells blank. `features`
/// holds the explained rows in the same order as `explanations`.
pub fn write_explanations_csv<W: Write>(
    explanations: &[Explanation],
    features: &[&[f64]],
    feature_names: &[String],
    out: W,
) -> Result<()> {
    if explanations.len() != features.len() {
        return Err(Error::LengthMismatch {
            left: explanations.len(),
            right: features.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["instance_id", "method", "local_prediction", "blackbox_prediction", "intercept"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(feature_names.iter().map(|n| format!("coef:{n}")));
    header.extend(feature_names.iter().map(|n| format!("x:{n}")));
    w.write_record(&header)?;
    for (e, x) in explanations.iter().zip(features) {
        if x.len() != feature_names.len() {
            return Err(Error::invalid("feature row width differs from the feature names"));
        }
        let mut rec = vec![
            e.instance_id.to_string(),
            e.method.to_string(),
            e.local_prediction.to_string(),
            e.blackbox_prediction.to_string(),
            e.model.intercept().map(|v| v.to_string()).unwrap_or_default(),
        ];
        match e.model.coefficients() {
            Some(c) => rec.extend(c.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), feature_names.len())),
        }
        rec.extend(x.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row read back from an explanations CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationRow {
    pub instance_id: usize,
    pub method: String,
    pub local_prediction: f64,
    pub blackbox_prediction: f64,
    pub intercept: Option<f64>,
    pub coefficients: Option<Vec<f64>>,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationTable {
    pub feature_names: Vec<String>,
    pub rows: Vec<ExplanationRow>,
}

pub fn read_explanations_csv<R: Read>(input: R) -> Result<ExplanationTable> {
    let mut reader = csv::Reader::from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let fixed = ["instance_id", "method", "local_prediction", "blackbox_prediction", "intercept"];
    if header.len() < fixed.len() || header[..fixed.len()] != fixed {
        return Err(Error::Load {
            row: 0,
            column: header.first().cloned().unwrap_or_default(),
            message: "not an explanations file".into(),
        });
    }
    let names: Vec<String> = header[fixed.len()..]
        .iter()
        .filter_map(|h| h.strip_prefix("coef:").map(str::to_string))
        .collect();
    let d = names.len();
    let expected: Vec<String> = names
        .iter()
        .map(|n| format!("coef:{n}"))
        .chain(names.iter().map(|n| format!("x:{n}")))
        .collect();
    if header[fixed.len()..] != expected[..] {
        return Err(Error::Load {
            row: 0,
            column: String::new(),
            message: "expected matching coef:<name> and x:<name> columns".into(),
        });
    }
    let mut rows = Vec::new();
    for (r, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = r + 1;
        let num = |c: usize| -> Result<Option<f64>> {
            let cell = rec.get(c).unwrap_or("").trim();
            if cell.is_empty() {
                return Ok(None);
            }
            cell.parse::<f64>().map(Some).map_err(|_| Error::Load {
                row,
                column: header[c].clone(),
                message: format!("`{cell}` is not a number"),
            })
        };
        let required = |c: usize| -> Result<f64> {
            num(c)?.ok_or_else(|| Error::Load {
                row,
                column: header[c].clone(),
                message: "missing value".into(),
            })
        };
        let instance_id = rec[0].trim().parse::<usize>().map_err(|_| Error::Load {
            row,
            column: "instance_id".into(),
            message: format!("`{}` is not an id", &rec[0]),
        })?;
        let coefs: Vec<Option<f64>> = (0..d).map(|j| num(fixed.len() + j)).collect::<Result<_>>()?;
        let coefficients = if coefs.iter().all(Option::is_some) {
            Some(coefs.into_iter().flatten().collect())
        } else {
            None
        };
        rows.push(ExplanationRow {
            instance_id,
            method: rec[1].to_string(),
            local_prediction: required(2)?,
            blackbox_prediction: required(3)?,
            intercept: num(4)?,
            coefficients,
            features: (0..d).map(|j| required(fixed.len() + d + j)).collect::<Result<_>>()?,
        });
    }
    Ok(ExplanationTable {
        feature_names: names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpretable::{FitDiagnostics, Surrogate};

    fn ridge(coefs: Vec<f64>, intercept: f64) -> LocalModel {
        LocalModel {
            surrogate: Surrogate::Ridge {
                coefficients: coefs,
                intercept,
                alpha: 1.0,
            },
            diagnostics: FitDiagnostics {
                weight_sum: 1.0,
                selected: 1,
            },
        }
    }

    #[test]
    fn top_indices_break_ties_by_index() {
        assert_eq!(top_indices(&[0.2, 0.9, 0.2, 0.5], 3), vec![1, 3, 0]);
        assert_eq!(top_indices(&[], 3), Vec::<usize>::new());
    }

    #[test]
    fn local_prediction_matches_model() {
        let e = Explanation::new(4, Method::Silo, &[1.0, 2.0], vec![0.1, 0.7], ridge(vec![0.5, -1.0], 2.0), 0.3);
        assert_eq!(e.local_prediction, e.model.predict(&[1.0, 2.0]));
        assert_eq!(e.local_prediction, 0.5);
        assert_eq!(e.top_instances, vec![1, 0]);
    }

    #[test]
    fn csv_round_trip() {
        let names = vec!["a".to_string(), "b".to_string()];
        let xs = [[1.0, 2.0], [-0.5, 0.25]];
        let es = vec![
            Explanation::new(0, Method::RlLim, &xs[0], vec![], ridge(vec![0.5, -1.0], 2.0), 0.3),
            Explanation::new(7, Method::Lime, &xs[1], vec![], ridge(vec![3.0, 0.0], 0.0), -1.5),
        ];
        let rows: Vec<&[f64]> = xs.iter().map(|r| &r[..]).collect();
        let mut buf = Vec::new();
        write_explanations_csv(&es, &rows, &names, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "instance_id,method,local_prediction,blackbox_prediction,intercept,coef:a,coef:b,x:a,x:b\n0,rl-lim,0.5,0.3,2,0.5,-1,1,2\n"
        ));
        let table = read_explanations_csv(&buf[..]).unwrap();
        assert_eq!(table.feature_names, names);
        assert_eq!(table.rows[1].instance_id, 7);
        assert_eq!(table.rows[1].coefficients, Some(vec![3.0, 0.0]));
        assert_eq!(table.rows[1].features, vec![-0.5, 0.25]);
        assert_eq!("maple".parse::<Method>().unwrap(), Method::Maple);
    }

    #[test]
    fn rejects_foreign_csv() {
        assert!(read_explanations_csv(&b"a,b\n1,2\n"[..]).is_err());
        let bad = b"instance_id,method,local_prediction,blackbox_prediction,intercept,coef:a,x:a\n0,lime,zz,1,0,1,1\n";
        assert!(matches!(read_explanations_csv(&bad[..]), Err(Error::Load { row: 1, .. })));
    }
}
