use std::fmt::Write as _;

use crate::error::{Error, Result};

use super::curves::{aupr, auroc};

/// Formats with 17 significant digits so values survive a text round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_opt(field: &str, line: usize) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| Error::parse(line as u64, format!("bad number '{field}'")))
}

/// Metrics for one object class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEval {
    pub class: String,
    pub k: usize,
    pub o_auroc: Option<f64>,
    pub o_aupr: Option<f64>,
    pub p_auroc: Option<f64>,
    pub p_aupr: Option<f64>,
    pub partition_accuracy: Option<f64>,
    /// Number of semantic spaces used.
    pub semantic_count: usize,
    pub coord_mean_shift: Option<f64>,
    pub coord_var_shift: Option<f64>,
    pub feature_mean_shift: Option<f64>,
    pub feature_var_shift: Option<f64>,
    pub comparisons_per_query: f64,
}

impl ClassEval {
    pub fn new(class: impl Into<String>, k: usize) -> Self {
        Self {
            class: class.into(),
            k,
            o_auroc: None,
            o_aupr: None,
            p_auroc: None,
            p_aupr: None,
            partition_accuracy: None,
            semantic_count: k,
            coord_mean_shift: None,
            coord_var_shift: None,
            feature_mean_shift: None,
            feature_var_shift: None,
            comparisons_per_query: 0.0,
        }
    }

    /// Fills the detection metrics. Point metrics pool every point of every
    /// test cloud; object metrics use one score per cloud, positive when the
    /// cloud has any anomalous point. Undefined metrics stay `None`.
    pub fn with_detection(mut self, point_scores: &[Vec<f64>], masks: &[Vec<bool>], object_scores: &[f64]) -> Result<Self> {
        if point_scores.len() != masks.len() || object_scores.len() != masks.len() {
            return Err(Error::invalid("scores and masks differ in cloud count"));
        }
        let flat_scores: Vec<f64> = point_scores.iter().flatten().copied().collect();
        let flat_labels: Vec<bool> = masks.iter().flatten().copied().collect();
        let object_labels: Vec<bool> = masks.iter().map(|m| m.iter().any(|&x| x)).collect();
        self.p_auroc = defined(auroc(&flat_scores, &flat_labels))?;
        self.p_aupr = defined(aupr(&flat_scores, &flat_labels))?;
        self.o_auroc = defined(auroc(object_scores, &object_labels))?;
        self.o_aupr = defined(aupr(object_scores, &object_labels))?;
        Ok(self)
    }
}

fn defined(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub const EVAL_COLUMNS: [&str; 13] = [
    "class",
    "k",
    "o_auroc",
    "o_aupr",
    "p_auroc",
    "p_aupr",
    "partition_accuracy",
    "semantic_count",
    "coord_mean_shift",
    "coord_var_shift",
    "feature_mean_shift",
    "feature_var_shift",
    "comparisons_per_query",
];

/// Per-class rows plus their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<ClassEval>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}

impl EvalReport {
    pub fn mean(&self) -> ClassEval {
        let c = &self.classes;
        let k = c.first().map_or(0, |r| r.k);
        ClassEval {
            class: "mean".into(),
            k,
            o_auroc: mean_of(c.iter().map(|r| r.o_auroc)),
            o_aupr: mean_of(c.iter().map(|r| r.o_aupr)),
            p_auroc: mean_of(c.iter().map(|r| r.p_auroc)),
            p_aupr: mean_of(c.iter().map(|r| r.p_aupr)),
            partition_accuracy: mean_of(c.iter().map(|r| r.partition_accuracy)),
            semantic_count: k,
            coord_mean_shift: mean_of(c.iter().map(|r| r.coord_mean_shift)),
            coord_var_shift: mean_of(c.iter().map(|r| r.coord_var_shift)),
            feature_mean_shift: mean_of(c.iter().map(|r| r.feature_mean_shift)),
            feature_var_shift: mean_of(c.iter().map(|r| r.feature_var_shift)),
            comparisons_per_query: mean_of(c.iter().map(|r| Some(r.comparisons_per_query))).unwrap_or(0.0),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = EVAL_COLUMNS.join(",");
        out.push('\n');
        for r in self.classes.iter().chain(std::iter::once(&self.mean())) {
            let fields = [
                r.class.clone(),
                r.k.to_string(),
                fmt_opt(r.o_auroc),
                fmt_opt(r.o_aupr),
                fmt_opt(r.p_auroc),
                fmt_opt(r.p_aupr),
                fmt_opt(r.partition_accuracy),
                r.semantic_count.to_string(),
                fmt_opt(r.coord_mean_shift),
                fmt_opt(r.coord_var_shift),
                fmt_opt(r.feature_mean_shift),
                fmt_opt(r.feature_var_shift),
                fmt_f64(r.comparisons_per_query),
            ];
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output; the trailing mean row is recomputed, not stored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(0, "empty eval CSV"))?;
        if header != EVAL_COLUMNS.join(",") {
            return Err(Error::parse(0, "unexpected eval CSV header"));
        }
        let mut classes = Vec::new();
        for (ln, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != EVAL_COLUMNS.len() {
                return Err(Error::parse(ln as u64, format!("expected {} fields", EVAL_COLUMNS.len())));
            }
            if f[0] == "mean" {
                continue;
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| Error::parse(ln as u64, format!("bad integer '{s}'")));
            classes.push(ClassEval {
                class: f[0].to_string(),
                k: int(f[1])?,
                o_auroc: parse_opt(f[2], ln)?,
                o_aupr: parse_opt(f[3], ln)?,
                p_auroc: parse_opt(f[4], ln)?,
                p_aupr: parse_opt(f[5], ln)?,
                partition_accuracy: parse_opt(f[6], ln)?,
                semantic_count: int(f[7])?,
                coord_mean_shift: parse_opt(f[8], ln)?,
                coord_var_shift: parse_opt(f[9], ln)?,
                feature_mean_shift: parse_opt(f[10], ln)?,
                feature_var_shift: parse_opt(f[11], ln)?,
                comparisons_per_query: parse_opt(f[12], ln)?.unwrap_or(0.0),
            });
        }
        Ok(Self { classes })
    }

    pub fn to_pretty(&self) -> String {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>12}",
            "class", "k", "O-AUROC", "O-AUPR", "P-AUROC", "P-AUPR", "Ac.", "cmp/query"
        );
        for r in self.classes.iter().chain(std::iter::once(&self.mean())) {
            let _ = writeln!(
                s,
                "{:<16} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>12.1}",
                r.class,
                r.k,
                show(r.o_auroc),
                show(r.o_aupr),
                show(r.p_auroc),
                show(r.p_aupr),
                show(r.partition_accuracy),
                r.comparisons_per_query
            );
        }
        s
    }
}
