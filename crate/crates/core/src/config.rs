//! Run configuration: a flat `key = value` file plus command-line overrides.
//!
//! Lines starting with `#` and blank lines are ignored. Every problem found
//! is reported at once through [`Error::Config`].

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::PlyMode;
use crate::pipeline::PipelineParams;
use crate::suite::SuiteSpec;
use crate::synth::{AnomalySign, AnomalySpec, ShapeKind};

pub const KEYS: [&str; 23] = [
    "k",
    "delta",
    "normal_k",
    "feature_k",
    "normalize",
    "max_iters",
    "seed",
    "object_score",
    "dataset_root",
    "output_dir",
    "model_dir",
    "k_list",
    "classes",
    "n_points",
    "n_train",
    "n_test",
    "noise",
    "anomaly_radius",
    "amplitude_mean",
    "amplitude_lo",
    "amplitude_hi",
    "sign",
    "ply_format",
];

pub const DEFAULT_K_LIST: [usize; 5] = [1, 2, 4, 8, 16];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineParams,
    pub seed: u64,
    pub dataset_root: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Where fitted banks live; defaults to `<output_dir>/models`.
    pub model_dir: Option<PathBuf>,
    pub k_list: Vec<usize>,
    pub suite: SuiteSpec,
    pub ply_mode: PlyMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineParams::default(),
            seed: 0,
            dataset_root: None,
            output_dir: PathBuf::from("out"),
            model_dir: None,
            k_list: DEFAULT_K_LIST.to_vec(),
            suite: SuiteSpec::default(),
            ply_mode: PlyMode::Binary,
        }
    }
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub k: Option<usize>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Which paths must already exist for a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Nothing,
    Dataset,
}

fn parse_list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, ()> {
    v.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| ()))
        .collect()
}

struct Fields {
    map: BTreeMap<String, String>,
    errors: Vec<String>,
}

impl Fields {
    fn take<T: FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let raw = self.map.remove(key)?;
        match raw.parse::<T>() {
            Ok(v) => Some(v),
            Err(_) => {
                self.errors.push(format!("{key}: expected {what}, got '{raw}'"));
                None
            }
        }
    }

    fn take_list<T: FromStr>(&mut self, key: &str, what: &str) -> Option<Vec<T>> {
        let raw = self.map.remove(key)?;
        match parse_list(&raw) {
            Ok(v) if !v.is_empty() => Some(v),
            _ => {
                self.errors.push(format!("{key}: expected a comma-separated list of {what}, got '{raw}'"));
                None
            }
        }
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn check(errors: &mut Vec<String>, ok: bool, msg: impl Display) {
    if !ok {
        errors.push(msg.to_string());
    }
}

impl RunConfig {
    /// Parses the text form; values not given keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut errors = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errors.push(format!("line {}: expected 'key = value'", no + 1));
                continue;
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.contains(&k.as_str()) {
                errors.push(format!("line {}: unknown key '{k}'", no + 1));
            } else if map.insert(k.clone(), v).is_some() {
                errors.push(format!("line {}: duplicate key '{k}'", no + 1));
            }
        }
        let mut f = Fields { map, errors };
        let mut c = RunConfig::default();
        let p = &mut c.pipeline;
        set(&mut p.cut.k, f.take("k", "a positive integer"));
        set(&mut p.cut.delta, f.take("delta", "a number"));
        set(&mut p.fpfh.normal_k, f.take("normal_k", "an integer"));
        set(&mut p.fpfh.feature_k, f.take("feature_k", "an integer"));
        set(&mut p.normalize, f.take("normalize", "true or false"));
        set(&mut p.cut.max_iters, f.take("max_iters", "an integer"));
        set(&mut p.object_score, f.take("object_score", "'max' or 'top_mean:<fraction>'"));
        set(&mut c.seed, f.take("seed", "an unsigned integer"));
        c.dataset_root = f.take("dataset_root", "a path");
        set(&mut c.output_dir, f.take("output_dir", "a path"));
        c.model_dir = f.take("model_dir", "a path");
        set(&mut c.k_list, f.take_list("k_list", "integers"));
        let s = &mut c.suite;
        set(&mut s.shapes, f.take_list::<ShapeKind>("classes", "shape names"));
        set(&mut s.n_points, f.take("n_points", "an integer"));
        set(&mut s.n_train, f.take("n_train", "an integer"));
        set(&mut s.n_test, f.take("n_test", "an integer"));
        set(&mut s.sigma, f.take("noise", "a number"));
        set(&mut s.anomaly_radius, f.take("anomaly_radius", "a number"));
        set(&mut s.sign, f.take::<AnomalySign>("sign", "bump, dent or random"));
        let mean: Option<f64> = f.take("amplitude_mean", "a number");
        let lo: Option<f64> = f.take("amplitude_lo", "a number");
        let hi: Option<f64> = f.take("amplitude_hi", "a number");
        match (mean, lo, hi) {
            (Some(m), None, None) => s.amplitude = AnomalySpec::amplitude_around(m),
            (None, Some(l), Some(h)) => s.amplitude = (l, h),
            (None, None, None) => {}
            (Some(_), _, _) => f.errors.push("amplitude_mean cannot be combined with amplitude_lo/amplitude_hi".into()),
            _ => f.errors.push("amplitude_lo and amplitude_hi must be given together".into()),
        }
        match f.map.remove("ply_format").as_deref() {
            None => {}
            Some("binary") => c.ply_mode = PlyMode::Binary,
            Some("ascii") => c.ply_mode = PlyMode::Ascii,
            Some(other) => f.errors.push(format!("ply_format: expected 'binary' or 'ascii', got '{other}'")),
        }
        if !f.errors.is_empty() {
            return Err(Error::Config(f.errors));
        }
        c.sync_seed();
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read config '{}': {e}", path.display())]))?;
        Self::parse(&text)
    }

    fn sync_seed(&mut self) {
        self.pipeline.cut.seed = self.seed;
        self.suite.seed = self.seed;
    }

    pub fn apply(&mut self, o: &Overrides) {
        set(&mut self.pipeline.cut.k, o.k);
        set(&mut self.pipeline.cut.delta, o.delta);
        set(&mut self.seed, o.seed);
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
        self.sync_seed();
    }

    pub fn model_dir(&self) -> PathBuf {
        self.model_dir.clone().unwrap_or_else(|| self.output_dir.join("models"))
    }

    pub fn dataset_root(&self) -> Result<&Path> {
        self.dataset_root
            .as_deref()
            .ok_or_else(|| Error::Config(vec!["dataset_root: required".into()]))
    }

    /// Checks every field and returns all violations together.
    pub fn validate(&self, needs: Needs) -> Result<()> {
        let mut e = Vec::new();
        let p = &self.pipeline;
        check(&mut e, p.cut.k >= 1, "k: must be >= 1");
        check(&mut e, p.cut.delta >= 1.0, format!("delta: must be >= 1, got {}", p.cut.delta));
        check(&mut e, p.cut.max_iters >= 1, "max_iters: must be >= 1");
        check(&mut e, p.fpfh.normal_k >= 3, format!("normal_k: must be >= 3, got {}", p.fpfh.normal_k));
        check(&mut e, p.fpfh.feature_k >= 1, "feature_k: must be >= 1");
        check(&mut e, self.k_list.iter().all(|&k| k >= 1), "k_list: every entry must be >= 1");
        let s = &self.suite;
        check(&mut e, s.n_points >= 100, format!("n_points: must be >= 100, got {}", s.n_points));
        check(&mut e, s.n_train >= 1, "n_train: must be >= 1");
        check(&mut e, s.n_test >= 1, "n_test: must be >= 1");
        check(&mut e, s.sigma >= 0.0, format!("noise: must be >= 0, got {}", s.sigma));
        check(
            &mut e,
            s.anomaly_radius > 0.0 && s.anomaly_radius < 1.0,
            format!("anomaly_radius: must be in (0, 1), got {}", s.anomaly_radius),
        );
        check(
            &mut e,
            s.amplitude.0 >= 0.0 && s.amplitude.0 <= s.amplitude.1,
            format!("amplitude: range [{}, {}] is invalid", s.amplitude.0, s.amplitude.1),
        );
        if needs == Needs::Dataset {
            match &self.dataset_root {
                None => e.push("dataset_root: required".into()),
                Some(r) if !r.is_dir() => e.push(format!("dataset_root: '{}' does not exist", r.display())),
                _ => {}
            }
        }
        if let Some(m) = &self.model_dir {
            check(&mut e, !m.as_os_str().is_empty(), "model_dir: must not be empty");
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    /// Text form that parses back to the same configuration.
    pub fn to_text(&self) -> String {
        let p = &self.pipeline;
        let s = &self.suite;
        let join = |v: Vec<String>| v.join(",");
        let mut lines = vec![
            format!("k = {}", p.cut.k),
            format!("delta = {}", p.cut.delta),
            format!("normal_k = {}", p.fpfh.normal_k),
            format!("feature_k = {}", p.fpfh.feature_k),
            format!("normalize = {}", p.normalize),
            format!("max_iters = {}", p.cut.max_iters),
            format!("seed = {}", self.seed),
            format!("object_score = {}", p.object_score),
        ];
        if let Some(r) = &self.dataset_root {
            lines.push(format!("dataset_root = {}", r.display()));
        }
        lines.push(format!("output_dir = {}", self.output_dir.display()));
        if let Some(m) = &self.model_dir {
            lines.push(format!("model_dir = {}", m.display()));
        }
        lines.extend([
            format!("k_list = {}", join(self.k_list.iter().map(|k| k.to_string()).collect())),
            format!("classes = {}", join(s.shapes.iter().map(|k| k.to_string()).collect())),
            format!("n_points = {}", s.n_points),
            format!("n_train = {}", s.n_train),
            format!("n_test = {}", s.n_test),
            format!("noise = {}", s.sigma),
            format!("anomaly_radius = {}", s.anomaly_radius),
            format!("amplitude_lo = {}", s.amplitude.0),
            format!("amplitude_hi = {}", s.amplitude.1),
            format!("sign = {}", s.sign),
            format!(
                "ply_format = {}",
                match self.ply_mode {
                    PlyMode::Ascii => "ascii",
                    PlyMode::Binary => "binary",
                }
            ),
        ]);
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_round_trip() {
        let c = RunConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, RunConfig::default());
        let text = "k = 4\ndelta = 2\nseed = 9\nclasses = torus, sphere\namplitude_mean = 0.05\n\
                    object_score = top_mean:0.1\nk_list = 1,8\ndataset_root = data\nply_format = ascii\n";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.pipeline.cut.k, 4);
        assert_eq!(c.suite.shapes, vec![ShapeKind::Torus, ShapeKind::Sphere]);
        assert_eq!(c.suite.seed, 9);
        assert_eq!(c.pipeline.cut.seed, 9);
        assert!((c.suite.amplitude.0 - 0.02).abs() < 1e-15);
        assert_eq!(c.k_list, vec![1, 8]);
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = "k = 0\ndelta = 0.5\nnormal_k = 2\nbogus = 1\nnoise = x\nn_points = 10\n";
        let parse_err = match RunConfig::parse(text) {
            Err(Error::Config(v)) => v,
            other => panic!("{other:?}"),
        };
        assert_eq!(parse_err.len(), 2, "{parse_err:?}");

        let c = RunConfig::parse("k = 0\ndelta = 0.5\nnormal_k = 2\nn_points = 10\n").unwrap();
        match c.validate(Needs::Dataset) {
            Err(Error::Config(v)) => {
                for key in ["k:", "delta:", "normal_k:", "n_points:", "dataset_root:"] {
                    assert!(v.iter().any(|m| m.starts_with(key)), "{key} missing from {v:?}");
                }
                assert_eq!(v.len(), 5);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(Error::Config(vec![]).exit_code(), 2);
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::parse("k = 4\nseed = 1\n").unwrap();
        c.apply(&Overrides {
            k: Some(16),
            delta: None,
            seed: Some(5),
            out: Some("o2".into()),
        });
        assert_eq!(c.pipeline.cut.k, 16);
        assert_eq!(c.suite.seed, 5);
        assert_eq!(c.output_dir, PathBuf::from("o2"));
        assert_eq!(c.model_dir(), PathBuf::from("o2/models"));
    }

    #[test]
    fn conflicting_amplitude_keys() {
        assert!(RunConfig::parse("amplitude_mean = 0.05\namplitude_lo = 0.0\n").is_err());
        assert!(RunConfig::parse("amplitude_lo = 0.0\n").is_err());
    }
}
