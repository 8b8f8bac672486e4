//! Ranking metrics: per-class average precision and macro mAP.

use std::io::Write;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Non-interpolated average precision of one class.
///
/// Items are ranked by descending score; equal scores keep their input order.
/// Returns `None` when the class has no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::shape(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(Some(sum / positives as f64))
}

/// Scores and binary labels, one row per clip or chunk, one column per class.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTable {
    scores: Array2<f64>,
    labels: Array2<bool>,
}

impl EvalTable {
    pub fn new(scores: Array2<f64>, labels: Array2<bool>) -> Result<Self> {
        if scores.dim() != labels.dim() {
            return Err(Error::shape(format!("{:?}", scores.dim()), format!("{:?}", labels.dim())));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("scores".into()));
        }
        Ok(Self { scores, labels })
    }

    pub fn rows(&self) -> usize {
        self.scores.nrows()
    }

    pub fn classes(&self) -> usize {
        self.scores.ncols()
    }

    pub fn scores(&self) -> &Array2<f64> {
        &self.scores
    }

    pub fn labels(&self) -> &Array2<bool> {
        &self.labels
    }

    fn column(&self, class: usize) -> (Vec<f64>, Vec<bool>) {
        let s: ArrayView1<'_, f64> = self.scores.column(class);
        (s.to_vec(), self.labels.column(class).to_vec())
    }

    /// AP per class; `None` for classes without positives.
    pub fn per_class_ap(&self) -> Vec<Option<f64>> {
        (0..self.classes())
            .map(|c| {
                let (s, l) = self.column(c);
                average_precision(&s, &l).expect("validated table")
            })
            .collect()
    }

    pub fn positives(&self) -> Vec<usize> {
        self.labels
            .columns()
            .into_iter()
            .map(|c| c.iter().filter(|&&l| l).count())
            .collect()
    }
}

/// Unweighted mean AP over classes with at least one positive.
pub fn macro_map(table: &EvalTable) -> Result<f64> {
    mean_ap(&table.per_class_ap())
}

fn mean_ap(aps: &[Option<f64>]) -> Result<f64> {
    let included: Vec<f64> = aps.iter().flatten().copied().collect();
    if included.is_empty() {
        return Err(Error::Validation("no class has a positive example".into()));
    }
    Ok(included.iter().sum::<f64>() / included.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: String,
    pub positives: usize,
    pub ap: Option<f64>,
}

/// mAP plus its per-class breakdown at one granularity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub level: String,
    pub rows: usize,
    pub map: f64,
    pub classes_included: usize,
    pub per_class: Vec<ClassAp>,
}

impl MetricsReport {
    pub fn from_table(level: &str, table: &EvalTable, class_names: &[String]) -> Result<Self> {
        if class_names.len() != table.classes() {
            return Err(Error::shape(table.classes(), class_names.len()));
        }
        let aps = table.per_class_ap();
        let map = mean_ap(&aps)?;
        let per_class = class_names
            .iter()
            .zip(table.positives())
            .zip(&aps)
            .map(|((name, positives), &ap)| ClassAp {
                class: name.clone(),
                positives,
                ap,
            })
            .collect();
        Ok(Self {
            level: level.to_string(),
            rows: table.rows(),
            map,
            classes_included: aps.iter().flatten().count(),
            per_class,
        })
    }

    /// `class,positives,ap` rows; excluded classes have an empty `ap`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "positives", "ap"])?;
        for c in &self.per_class {
            let ap = c.ap.map(|v| format!("{v:.6}")).unwrap_or_default();
            w.write_record([c.class.as_str(), &c.positives.to_string(), &ap])?;
        }
        w.flush().map_err(|e| Error::io("csv report", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
