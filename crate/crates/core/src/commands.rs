//! Command implementations behind the `patch3d` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::config::{Needs, RunConfig};
use crate::error::{Error, Result};
use crate::io::dataset::{class_names, read_class, read_mask, test_stems, train_clouds};
use crate::io::model::{load_model, save_model};
use crate::io::ply::read_ply;
use crate::io::scores::{object_scores_csv, parse_object_scores, read_point_scores, PointScores};
use crate::io::write_dataset;
use crate::metrics::{fmt_f64, orthogonality_diag, partition_accuracy, shift_stats, ClassEval, EvalReport};
use crate::pipeline::{fit_prepared, prepare, prepare_all, score_prepared, PipelineParams};
use crate::suite::{generate, prepare_suite, run_suite, PreparedClass};
use crate::svg::{render, Panel};

pub const SCORES_DIR: &str = "scores";
pub const OBJECT_SCORES_FILE: &str = "object_scores.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_SVG: &str = "sweep.svg";
pub const BENCH_CSV: &str = "bench.csv";
pub const DIAG_FILE: &str = "diagnostics.csv";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes the synthetic dataset tree under `dataset_root`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate(Needs::Nothing)?;
    let root = cfg.dataset_root()?.to_path_buf();
    let data = generate(&cfg.suite)?;
    write_dataset(&root, &data, cfg.ply_mode)?;
    Ok(root)
}

/// Fits one bank set per class and stores it under the model directory.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(Needs::Dataset)?;
    let root = cfg.dataset_root()?;
    let mut written = Vec::new();
    for class in class_names(root)? {
        let train = prepare_all(&train_clouds(root, &class)?, &cfg.pipeline)?;
        let model = fit_prepared(&train, &cfg.pipeline)?;
        let dir = cfg.model_dir().join(&class);
        save_model(&dir, &model)?;
        let mut diag = String::from("i,j,cross_trace,min_distance\n");
        for d in orthogonality_diag(&model.banks)? {
            diag.push_str(&format!("{},{},{},{}\n", d.i, d.j, fmt_f64(d.cross_trace), fmt_f64(d.min_distance)));
        }
        write(&dir.join(DIAG_FILE), &diag)?;
        written.push(dir);
    }
    Ok(written)
}

pub fn scores_dir(cfg: &RunConfig, class: &str) -> PathBuf {
    cfg.output_dir.join(SCORES_DIR).join(class)
}

/// Scores every test cloud against its class model.
pub fn cmd_score(cfg: &RunConfig) -> Result<usize> {
    cfg.validate(Needs::Dataset)?;
    let root = cfg.dataset_root()?;
    let mut count = 0;
    for class in class_names(root)? {
        let model = load_model(&cfg.model_dir().join(&class))?;
        let stems = test_stems(root, &class)?;
        let results = stems
            .par_iter()
            .map(|stem| {
                let cloud = read_ply::<f64>(&root.join(&class).join("test").join(format!("{stem}.ply")))?;
                let prepared = prepare(&cloud, &model.params)?;
                Ok(score_prepared(&prepared, &model)?.0)
            })
            .collect::<Result<Vec<_>>>()?;
        let dir = scores_dir(cfg, &class);
        let mut objects = Vec::new();
        for (stem, r) in stems.iter().zip(&results) {
            write(&dir.join(format!("{stem}.csv")), &PointScores::from_report(r).to_csv())?;
            objects.push((stem.clone(), r.object_score));
        }
        write(&dir.join(OBJECT_SCORES_FILE), &object_scores_csv(&objects))?;
        count += results.len();
    }
    Ok(count)
}

/// Metrics for one class computed from score files on disk.
pub fn eval_class(cfg: &RunConfig, class: &str) -> Result<ClassEval> {
    let root = cfg.dataset_root()?;
    let model = load_model(&cfg.model_dir().join(class))?;
    let stems = test_stems(root, class)?;
    let dir = scores_dir(cfg, class);
    let mut point_scores = Vec::new();
    let mut semantics = Vec::new();
    let mut masks = Vec::new();
    for stem in &stems {
        let s = read_point_scores(&dir.join(format!("{stem}.csv")))?;
        let m = read_mask(&root.join(class).join("gt").join(format!("{stem}.txt")))?;
        if m.len() != s.scores.len() {
            return Err(Error::parse(0, format!("{class}/{stem}: score rows do not match ground truth")));
        }
        point_scores.push(s.scores);
        semantics.push(s.semantic);
        masks.push(m);
    }
    let objects = parse_object_scores(&fs::read_to_string(dir.join(OBJECT_SCORES_FILE))?)?;
    let object_scores = stems
        .iter()
        .map(|stem| {
            objects
                .iter()
                .find(|(n, _)| n == stem)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::parse(0, format!("{class}: no object score for '{stem}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut eval = ClassEval::new(class, model.params.cut.k).with_detection(&point_scores, &masks, &object_scores)?;

    // Geometry-dependent statistics need the preprocessed clouds again.
    let data = read_class(root, class)?;
    let train = prepare_all(&data.train, &model.params)?;
    let test = prepare_all(&data.test, &model.params)?;
    if let Some(parts) = &data.test_parts {
        let accs = semantics
            .iter()
            .zip(parts)
            .map(|(pred, truth)| partition_accuracy(pred, truth).map(|a| a.value))
            .collect::<Result<Vec<_>>>()?;
        eval.partition_accuracy = Some(accs.iter().sum::<f64>() / accs.len() as f64);
    }
    let tx: Vec<[f64; 3]> = train.iter().flat_map(|p| p.cloud.points().iter().copied()).collect();
    let sx: Vec<[f64; 3]> = test.iter().flat_map(|p| p.cloud.points().iter().copied()).collect();
    let coords = shift_stats::<f64, _>(&tx, &sx)?;
    let tf: Vec<&[f64]> = train.iter().flat_map(|p| p.features.rows()).collect();
    let sf: Vec<&[f64]> = test.iter().flat_map(|p| p.features.rows()).collect();
    let feats = shift_stats::<f64, _>(&tf, &sf)?;
    eval.coord_mean_shift = Some(coords.mean_diff);
    eval.coord_var_shift = Some(coords.var_diff);
    eval.feature_mean_shift = Some(feats.mean_diff);
    eval.feature_var_shift = Some(feats.var_diff);

    let sizes = model.banks.sizes();
    let (mut comparisons, mut queries) = (0u64, 0u64);
    for (p, sem) in test.iter().zip(&semantics) {
        for (i, s) in sem.iter().enumerate() {
            if !p.features.is_degenerate(i) {
                let size = sizes
                    .get(*s)
                    .ok_or_else(|| Error::parse(0, format!("{class}: semantic id {s} out of range")))?;
                comparisons += *size as u64;
                queries += 1;
            }
        }
    }
    eval.comparisons_per_query = if queries == 0 { 0.0 } else { comparisons as f64 / queries as f64 };
    Ok(eval)
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    cfg.validate(Needs::Dataset)?;
    let classes = class_names(cfg.dataset_root()?)?
        .iter()
        .map(|c| eval_class(cfg, c))
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport { classes };
    write(&cfg.output_dir.join(EVAL_FILE), &report.to_csv())?;
    Ok(report)
}

/// One row of a K sweep; `error` is set when the run for that K failed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub p_auroc: Option<f64>,
    pub p_aupr: Option<f64>,
    pub o_auroc: Option<f64>,
    pub o_aupr: Option<f64>,
    pub comparisons_per_query: Option<f64>,
    pub wall_seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const SWEEP_COLUMNS: [&str; 8] = [
    "k",
    "p_auroc",
    "p_aupr",
    "o_auroc",
    "o_aupr",
    "comparisons_per_query",
    "wall_seconds",
    "status",
];

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_opt(s: &str, off: u64) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| Error::parse(off, format!("bad number '{s}'")))
    }
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = SWEEP_COLUMNS.join(",");
        s.push('\n');
        for r in &self.rows {
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("error: {}", e.replace([',', '\n', '\r'], " ")),
            };
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.k,
                opt(r.p_auroc),
                opt(r.p_aupr),
                opt(r.o_auroc),
                opt(r.o_aupr),
                opt(r.comparisons_per_query),
                fmt_f64(r.wall_seconds),
                status
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = crate::io::scores::Lines::new(text);
        lines.expect_header(&SWEEP_COLUMNS.join(","))?;
        let mut rows = Vec::new();
        for (off, line) in lines {
            let f: Vec<&str> = line.splitn(8, ',').collect();
            if f.len() != 8 {
                return Err(Error::parse(off, "expected 8 fields"));
            }
            let error = match f[7] {
                "ok" => None,
                s => Some(s.strip_prefix("error: ").unwrap_or(s).to_string()),
            };
            rows.push(SweepRow {
                k: f[0].parse().map_err(|_| Error::parse(off, "bad k"))?,
                p_auroc: parse_opt(f[1], off)?,
                p_aupr: parse_opt(f[2], off)?,
                o_auroc: parse_opt(f[3], off)?,
                o_aupr: parse_opt(f[4], off)?,
                comparisons_per_query: parse_opt(f[5], off)?,
                wall_seconds: f[6].parse().map_err(|_| Error::parse(off, "bad wall time"))?,
                error,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_svg(&self) -> String {
        let pts = |f: fn(&SweepRow) -> Option<f64>| self.rows.iter().map(|r| (r.k as f64, f(r))).collect();
        render(&[
            Panel {
                title: "P-AUROC vs semantic spaces".into(),
                x_label: "K".into(),
                y_label: "P-AUROC".into(),
                points: pts(|r| r.p_auroc),
            },
            Panel {
                title: "Comparisons per query vs semantic spaces".into(),
                x_label: "K".into(),
                y_label: "comparisons / query".into(),
                points: pts(|r| r.comparisons_per_query),
            },
        ])
    }
}

/// Preprocessed classes read from the dataset tree; reused across every K.
pub fn prepare_dataset(cfg: &RunConfig) -> Result<Vec<PreparedClass>> {
    let root = cfg.dataset_root()?;
    let data = class_names(root)?
        .iter()
        .map(|c| read_class(root, c))
        .collect::<Result<Vec<_>>>()?;
    prepare_suite(&data, &cfg.pipeline)
}

/// Runs the suite for every `k`; a failing `k` yields an error row and the
/// sweep moves on. Rows come out sorted by `k`.
pub fn sweep(classes: &[PreparedClass], base: &PipelineParams, ks: &[usize]) -> SweepResult {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let rows = ks
        .iter()
        .map(|&k| {
            let mut params = *base;
            params.cut.k = k;
            let t = Instant::now();
            match run_suite(classes, &params) {
                Ok(run) => {
                    let m = run.report.mean();
                    SweepRow {
                        k,
                        p_auroc: m.p_auroc,
                        p_aupr: m.p_aupr,
                        o_auroc: m.o_auroc,
                        o_aupr: m.o_aupr,
                        comparisons_per_query: Some(m.comparisons_per_query),
                        wall_seconds: t.elapsed().as_secs_f64(),
                        error: None,
                    }
                }
                Err(e) => SweepRow {
                    k,
                    p_auroc: None,
                    p_aupr: None,
                    o_auroc: None,
                    o_aupr: None,
                    comparisons_per_query: None,
                    wall_seconds: t.elapsed().as_secs_f64(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    SweepResult { rows }
}

pub fn cmd_sweep_k(cfg: &RunConfig) -> Result<SweepResult> {
    cfg.validate(Needs::Dataset)?;
    let classes = prepare_dataset(cfg)?;
    let result = sweep(&classes, &cfg.pipeline, &cfg.k_list);
    write(&cfg.output_dir.join(SWEEP_CSV), &result.to_csv())?;
    write(&cfg.output_dir.join(SWEEP_SVG), &result.to_svg())?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub k: usize,
    pub bank_rows: usize,
    pub queries: u64,
    pub comparisons_per_query: f64,
    pub fit_seconds: f64,
    pub score_seconds: f64,
}

pub const BENCH_COLUMNS: &str = "k,bank_rows,queries,comparisons_per_query,fit_seconds,score_seconds,speedup_vs_first";

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(BENCH_COLUMNS);
    s.push('\n');
    let first = rows.first().map(|r| r.score_seconds);
    for r in rows {
        let speedup = match first {
            Some(f) if r.score_seconds > 0.0 => fmt_f64(f / r.score_seconds),
            _ => String::new(),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.k,
            r.bank_rows,
            r.queries,
            fmt_f64(r.comparisons_per_query),
            fmt_f64(r.fit_seconds),
            fmt_f64(r.score_seconds),
            speedup
        ));
    }
    s
}

/// Wall time and comparison counts of fitting and scoring for every `k`.
pub fn bench(classes: &[PreparedClass], base: &PipelineParams, ks: &[usize]) -> Result<Vec<BenchRow>> {
    let mut out = Vec::new();
    for &k in ks {
        let mut params = *base;
        params.cut.k = k;
        let run = run_suite(classes, &params)?;
        let mut comparisons = 0u64;
        let mut queries = 0u64;
        for c in &run.classes {
            for r in &c.reports {
                comparisons += r.comparisons_made;
                queries += r.degenerate.iter().filter(|d| !**d).count() as u64;
            }
        }
        out.push(BenchRow {
            k,
            bank_rows: classes.iter().map(|c| c.train.iter().map(|p| p.cloud.len()).sum::<usize>()).sum(),
            queries,
            comparisons_per_query: if queries == 0 { 0.0 } else { comparisons as f64 / queries as f64 },
            fit_seconds: run.fit_seconds(),
            score_seconds: run.score_seconds(),
        });
    }
    Ok(out)
}

pub fn cmd_bench(cfg: &RunConfig) -> Result<Vec<BenchRow>> {
    cfg.validate(Needs::Dataset)?;
    let classes = prepare_dataset(cfg)?;
    let rows = bench(&classes, &cfg.pipeline, &cfg.k_list)?;
    write(&cfg.output_dir.join(BENCH_CSV), &bench_csv(&rows))?;
    Ok(rows)
}
