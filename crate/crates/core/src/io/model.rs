//! A fitted model on disk: `bank.p3db` with the rows and `bank.meta` with the
//! parameters needed to score against them.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::scores::Lines;
use crate::memory::{read_banks, write_banks};
use crate::pipeline::{Model, PipelineParams};

pub const BANK_FILE: &str = "bank.p3db";
pub const META_FILE: &str = "bank.meta";

pub fn meta_text(model: &Model<f64>) -> String {
    let p = &model.params;
    format!(
        "k = {}\ndelta = {}\nmax_iters = {}\nseed = {}\nnormal_k = {}\nfeature_k = {}\nnormalize = {}\nobject_score = {}\ntrain_points = {}\n",
        p.cut.k,
        p.cut.delta,
        p.cut.max_iters,
        p.cut.seed,
        p.fpfh.normal_k,
        p.fpfh.feature_k,
        p.normalize,
        p.object_score,
        model.train_points
    )
}

pub fn parse_meta(text: &str) -> Result<(PipelineParams, usize)> {
    let mut p = PipelineParams::default();
    let mut train_points = None;
    let mut seen = Vec::new();
    for (off, line) in Lines::new(text) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(off, "expected 'key = value'"))?;
        let (k, v) = (k.trim(), v.trim());
        let bad = || Error::parse(off, format!("bad value for '{k}': '{v}'"));
        match k {
            "k" => p.cut.k = v.parse().map_err(|_| bad())?,
            "delta" => p.cut.delta = v.parse().map_err(|_| bad())?,
            "max_iters" => p.cut.max_iters = v.parse().map_err(|_| bad())?,
            "seed" => p.cut.seed = v.parse().map_err(|_| bad())?,
            "normal_k" => p.fpfh.normal_k = v.parse().map_err(|_| bad())?,
            "feature_k" => p.fpfh.feature_k = v.parse().map_err(|_| bad())?,
            "normalize" => p.normalize = v.parse().map_err(|_| bad())?,
            "object_score" => p.object_score = v.parse().map_err(|_| bad())?,
            "train_points" => train_points = Some(v.parse().map_err(|_| bad())?),
            _ => return Err(Error::parse(off, format!("unknown key '{k}'"))),
        }
        seen.push(k.to_string());
    }
    for required in ["k", "delta", "normal_k", "feature_k", "normalize"] {
        if !seen.iter().any(|s| s == required) {
            return Err(Error::parse(text.len() as u64, format!("missing key '{required}'")));
        }
    }
    Ok((p, train_points.unwrap_or(0)))
}

pub fn save_model(dir: &Path, model: &Model<f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(fs::File::create(dir.join(BANK_FILE))?);
    write_banks(&model.banks, &mut w)?;
    w.flush()?;
    fs::write(dir.join(META_FILE), meta_text(model))?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<Model<f64>> {
    let (params, train_points) = parse_meta(&fs::read_to_string(dir.join(META_FILE))?)?;
    let banks = read_banks::<f64, _>(BufReader::new(fs::File::open(dir.join(BANK_FILE))?), params.fpfh)?;
    if banks.k() != params.cut.k {
        return Err(Error::parse(0, format!("bank file holds {} banks but metadata says k = {}", banks.k(), params.cut.k)));
    }
    Ok(Model {
        banks,
        params,
        train_points,
    })
}
