//! Score CSVs: one file per cloud with `point_index,score,semantic_id`, and
//! one `cloud,object_score` file per class.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::memory::ScoreReport;
use crate::metrics::fmt_f64;

pub const POINT_HEADER: &str = "point_index,score,semantic_id";
pub const OBJECT_HEADER: &str = "cloud,object_score";

#[derive(Debug, Clone, PartialEq)]
pub struct PointScores {
    pub scores: Vec<f64>,
    pub semantic: Vec<usize>,
}

impl PointScores {
    pub fn from_report(r: &ScoreReport<f64>) -> Self {
        Self {
            scores: r.point_scores.clone(),
            semantic: r.semantic_of_point.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(POINT_HEADER);
        s.push('\n');
        for (i, (v, k)) in self.scores.iter().zip(&self.semantic).enumerate() {
            s.push_str(&format!("{i},{},{k}\n", fmt_f64(*v)));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = Lines::new(text);
        lines.expect_header(POINT_HEADER)?;
        let mut out = PointScores {
            scores: Vec::new(),
            semantic: Vec::new(),
        };
        while let Some((off, line)) = lines.next() {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 3 {
                return Err(Error::parse(off, "expected 3 fields"));
            }
            let idx: usize = f[0].parse().map_err(|_| Error::parse(off, "bad point index"))?;
            if idx != out.scores.len() {
                return Err(Error::parse(off, "point indices must be consecutive from 0"));
            }
            out.scores.push(f[1].parse().map_err(|_| Error::parse(off, "bad score"))?);
            out.semantic.push(f[2].parse().map_err(|_| Error::parse(off, "bad semantic id"))?);
        }
        Ok(out)
    }
}

pub fn object_scores_csv(rows: &[(String, f64)]) -> String {
    let mut s = String::from(OBJECT_HEADER);
    s.push('\n');
    for (name, v) in rows {
        s.push_str(&format!("{name},{}\n", fmt_f64(*v)));
    }
    s
}

pub fn parse_object_scores(text: &str) -> Result<Vec<(String, f64)>> {
    let mut lines = Lines::new(text);
    lines.expect_header(OBJECT_HEADER)?;
    let mut out = Vec::new();
    while let Some((off, line)) = lines.next() {
        let (name, v) = line.rsplit_once(',').ok_or_else(|| Error::parse(off, "expected 2 fields"))?;
        out.push((name.to_string(), v.parse().map_err(|_| Error::parse(off, "bad object score"))?));
    }
    Ok(out)
}

pub fn read_point_scores(path: &Path) -> Result<PointScores> {
    PointScores::from_csv(&fs::read_to_string(path)?)
}

/// Non-empty lines with their byte offsets.
pub(crate) struct Lines<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    pub(crate) fn expect_header(&mut self, header: &str) -> Result<()> {
        match self.next() {
            Some((_, h)) if h == header => Ok(()),
            Some((off, h)) => Err(Error::parse(off, format!("expected header '{header}', found '{h}'"))),
            None => Err(Error::parse(0, "empty file")),
        }
    }
}

impl<'a> Iterator for Lines<'a> {
    type Item = (u64, &'a str);

    fn next(&mut self) -> Option<Self::Item> {
        while self.pos < self.text.len() {
            let start = self.pos;
            let rest = &self.text[start..];
            let end = rest.find('\n').map_or(rest.len(), |e| e + 1);
            self.pos += end;
            let line = rest[..end].trim_end_matches(['\n', '\r']);
            if !line.is_empty() {
                return Some((start as u64, line));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_scores_round_trip() {
        let s = PointScores {
            scores: vec![0.0, 0.1 + 0.2, 1e-300, 123456.789],
            semantic: vec![0, 3, 1, 2],
        };
        assert_eq!(PointScores::from_csv(&s.to_csv()).unwrap(), s);
    }

    #[test]
    fn object_scores_round_trip_and_errors() {
        let rows = vec![("a,b".to_string(), 2.0 / 3.0), ("c".to_string(), 0.0)];
        assert_eq!(parse_object_scores(&object_scores_csv(&rows)).unwrap(), rows);
        let bad = "point_index,score,semantic_id\n0,1.0,0\n2,1.0,0\n";
        assert!(matches!(PointScores::from_csv(bad), Err(Error::Parse { offset: 38, .. })));
    }
}
