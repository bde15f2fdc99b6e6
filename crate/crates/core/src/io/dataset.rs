//! On-disk dataset tree: `<root>/<class>/{train,test,gt,parts}`.
//!
//! `gt/<stem>.txt` holds one 0/1 per test point; `parts/<stem>.txt`, when
//! present, holds one part label per test point.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::io::ply::{read_ply, write_ply, PlyMode};
use crate::suite::ClassData;

pub fn cloud_file_name(index: usize) -> String {
    format!("{index:03}")
}

fn write_lines<I: IntoIterator<Item = String>>(path: &Path, lines: I) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_dataset(root: &Path, classes: &[ClassData], mode: PlyMode) -> Result<()> {
    for class in classes {
        let dir = root.join(&class.name);
        for sub in ["train", "test", "gt"] {
            fs::create_dir_all(dir.join(sub))?;
        }
        for (i, c) in class.train.iter().enumerate() {
            write_ply(&c.clone().without_normals(), &dir.join("train").join(format!("{}.ply", cloud_file_name(i))), mode)?;
        }
        for (i, c) in class.test.iter().enumerate() {
            let stem = cloud_file_name(i);
            write_ply(&c.clone().without_normals(), &dir.join("test").join(format!("{stem}.ply")), mode)?;
            let mask = c
                .anomaly_mask()
                .ok_or_else(|| Error::invalid(format!("test cloud '{}' has no mask", c.id())))?;
            write_lines(&dir.join("gt").join(format!("{stem}.txt")), mask.iter().map(|&m| u8::from(m).to_string()))?;
        }
        if let Some(parts) = &class.test_parts {
            fs::create_dir_all(dir.join("parts"))?;
            for (i, p) in parts.iter().enumerate() {
                write_lines(&dir.join("parts").join(format!("{}.txt", cloud_file_name(i))), p.iter().map(|v| v.to_string()))?;
            }
        }
    }
    Ok(())
}

fn sorted_entries(dir: &Path, ext: Option<&str>) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        let keep = match ext {
            Some(x) => p.is_file() && p.extension().and_then(|s| s.to_str()) == Some(x),
            None => p.is_dir(),
        };
        if keep {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if !t.is_empty() {
            out.push(t.parse::<usize>().map_err(|_| Error::parse(offset, format!("{}: bad label '{t}'", path.display())))?);
        }
        offset += line.len() as u64;
    }
    Ok(out)
}

pub fn read_mask(path: &Path) -> Result<Vec<bool>> {
    read_labels(path)?
        .into_iter()
        .map(|v| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::parse(0, format!("{}: mask values must be 0 or 1", path.display()))),
        })
        .collect()
}

pub fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("").to_string()
}

/// Names of the class directories under `root`, sorted.
pub fn class_names(root: &Path) -> Result<Vec<String>> {
    Ok(sorted_entries(root, None)?
        .iter()
        .filter_map(|p| p.file_name().and_then(|s| s.to_str()).map(str::to_string))
        .collect())
}

pub fn read_class(root: &Path, name: &str) -> Result<ClassData> {
    let dir = root.join(name);
    let train = sorted_entries(&dir.join("train"), Some("ply"))?
        .iter()
        .map(|p| read_ply::<f64>(p))
        .collect::<Result<Vec<_>>>()?;
    let test_files = sorted_entries(&dir.join("test"), Some("ply"))?;
    let mut test = Vec::with_capacity(test_files.len());
    for p in &test_files {
        let cloud = read_ply::<f64>(p)?;
        let mask = read_mask(&dir.join("gt").join(format!("{}.txt", stem(p))))?;
        if mask.len() != cloud.len() {
            return Err(Error::parse(
                0,
                format!("{}: {} mask entries for {} points", p.display(), mask.len(), cloud.len()),
            ));
        }
        test.push(cloud.with_anomaly_mask(mask)?);
    }
    let parts_dir = dir.join("parts");
    let test_parts = if parts_dir.is_dir() {
        let mut parts = Vec::with_capacity(test_files.len());
        for (p, c) in test_files.iter().zip(&test) {
            let labels = read_labels(&parts_dir.join(format!("{}.txt", stem(p))))?;
            if labels.len() != c.len() {
                return Err(Error::parse(0, format!("{}: part labels do not match point count", p.display())));
            }
            parts.push(labels);
        }
        Some(parts)
    } else {
        None
    };
    Ok(ClassData {
        name: name.to_string(),
        train,
        test,
        test_parts,
    })
}

pub fn read_dataset(root: &Path) -> Result<Vec<ClassData>> {
    let names = class_names(root)?;
    if names.is_empty() {
        return Err(Error::parse(0, format!("{}: no class directories", root.display())));
    }
    names.iter().map(|n| read_class(root, n)).collect()
}

/// Test cloud stems of a class, in dataset order.
pub fn test_stems(root: &Path, class: &str) -> Result<Vec<String>> {
    Ok(sorted_entries(&root.join(class).join("test"), Some("ply"))?
        .iter()
        .map(|p| stem(p))
        .collect())
}

pub fn train_clouds(root: &Path, class: &str) -> Result<Vec<PointCloud<f64>>> {
    sorted_entries(&root.join(class).join("train"), Some("ply"))?
        .iter()
        .map(|p| read_ply::<f64>(p))
        .collect()
}
