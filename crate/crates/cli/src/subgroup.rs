//! Subgroup feature importance: mean |coefficient| of linear explanations
//! per group of instances.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use rllim::explanation::ExplanationTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: String,
    pub op: Op,
    pub value: f64,
}

impl Predicate {
    fn holds(&self, v: f64) -> bool {
        match self.op {
            Op::Lt => v < self.value,
            Op::Le => v <= self.value,
            Op::Gt => v > self.value,
            Op::Ge => v >= self.value,
            Op::Eq => v == self.value,
            Op::Ne => v != self.value,
        }
    }
}

/// A group is the conjunction of its predicates; no predicates means every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub label: String,
    #[serde(default)]
    pub when: Vec<Predicate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub groups: Vec<Group>,
    /// Only rows of this method; `None` uses every row.
    #[serde(default)]
    pub method: Option<String>,
}

impl GroupSpec {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid grouping spec {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupRow {
    pub label: String,
    pub count: usize,
    /// `None` for an empty group.
    pub mean_abs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupReport {
    pub feature_names: Vec<String>,
    pub rows: Vec<SubgroupRow>,
}

impl SubgroupReport {
    /// Header `group,rows,empty,<feature>...`; empty groups keep their row
    /// with blank means.
    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["group".to_string(), "rows".into(), "empty".into()];
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.label.clone(), r.count.to_string(), r.mean_abs.is_none().to_string()];
            match &r.mean_abs {
                Some(m) => rec.extend(m.iter().map(f64::to_string)),
                None => rec.extend(self.feature_names.iter().map(|_| String::new())),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn subgroup_means(table: &ExplanationTable, spec: &GroupSpec) -> anyhow::Result<SubgroupReport> {
    if spec.groups.is_empty() {
        bail!("grouping spec has no groups");
    }
    let mut columns = Vec::new();
    for g in &spec.groups {
        let mut cols = Vec::new();
        for p in &g.when {
            let c = table
                .feature_names
                .iter()
                .position(|n| *n == p.feature)
                .with_context(|| format!("group `{}`: unknown feature `{}`", g.label, p.feature))?;
            cols.push(c);
        }
        columns.push(cols);
    }
    let rows: Vec<_> = table
        .rows
        .iter()
        .filter(|r| spec.method.as_ref().is_none_or(|m| *m == r.method))
        .collect();
    let d = table.feature_names.len();
    let mut out = Vec::new();
    for (g, cols) in spec.groups.iter().zip(&columns) {
        let mut sum = vec![0.0; d];
        let mut count = 0;
        for r in &rows {
            if !g.when.iter().zip(cols).all(|(p, &c)| p.holds(r.features[c])) {
                continue;
            }
            let coef = r
                .coefficients
                .as_ref()
                .with_context(|| format!("instance {} ({}) has no linear coefficients", r.instance_id, r.method))?;
            for (s, c) in sum.iter_mut().zip(coef) {
                *s += c.abs();
            }
            count += 1;
        }
        out.push(SubgroupRow {
            label: g.label.clone(),
            count,
            mean_abs: (count > 0).then(|| sum.iter().map(|s| s / count as f64).collect()),
        });
    }
    Ok(SubgroupReport {
        feature_names: table.feature_names.clone(),
        rows: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rllim::explanation::read_explanations_csv;

    const CSV: &str = "instance_id,method,local_prediction,blackbox_prediction,intercept,coef:a,coef:b,x:a,x:b
0,rl-lim,1,1,0,1,-2,0.5,10
1,rl-lim,1,1,0,-3,4,1.5,20
2,rl-lim,1,1,0,5,0,2.5,30
3,rl-lim,1,1,0,-7,2,3.5,40
";

    fn spec(json: &str) -> GroupSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn two_disjoint_groups() {
        let t = read_explanations_csv(CSV.as_bytes()).unwrap();
        let s = spec(
            r#"{"groups": [
                {"label": "low", "when": [{"feature": "a", "op": "lt", "value": 2}]},
                {"label": "high", "when": [{"feature": "a", "op": "ge", "value": 2}]}]}"#,
        );
        let r = subgroup_means(&t, &s).unwrap();
        assert_eq!(r.rows[0].count, 2);
        assert_eq!(r.rows[0].mean_abs, Some(vec![2.0, 3.0]));
        assert_eq!(r.rows[1].mean_abs, Some(vec![6.0, 1.0]));
    }

    #[test]
    fn single_group_is_global_mean() {
        let t = read_explanations_csv(CSV.as_bytes()).unwrap();
        let r = subgroup_means(&t, &spec(r#"{"groups": [{"label": "all"}]}"#)).unwrap();
        assert_eq!(r.rows[0].mean_abs, Some(vec![4.0, 2.0]));
    }

    #[test]
    fn empty_group_is_flagged_not_dropped() {
        let t = read_explanations_csv(CSV.as_bytes()).unwrap();
        let s = spec(
            r#"{"groups": [{"label": "none", "when": [{"feature": "b", "op": "gt", "value": 100}]},
                           {"label": "all"}]}"#,
        );
        let r = subgroup_means(&t, &s).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].mean_abs, None);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("group,rows,empty,a,b\nnone,0,true,,\nall,4,false,4,2\n"), "{text}");
    }

    #[test]
    fn unknown_feature_is_an_error() {
        let t = read_explanations_csv(CSV.as_bytes()).unwrap();
        let s = spec(r#"{"groups": [{"label": "g", "when": [{"feature": "zz", "op": "eq", "value": 1}]}]}"#);
        assert!(subgroup_means(&t, &s).unwrap_err().to_string().contains("zz"));
    }

    #[test]
    fn method_filter() {
        let csv = CSV.replace("3,rl-lim", "3,silo");
        let t = read_explanations_csv(csv.as_bytes()).unwrap();
        let r = subgroup_means(&t, &spec(r#"{"groups": [{"label": "all"}], "method": "silo"}"#)).unwrap();
        assert_eq!((r.rows[0].count, r.rows[0].mean_abs.clone()), (1, Some(vec![7.0, 2.0])));
    }
}
