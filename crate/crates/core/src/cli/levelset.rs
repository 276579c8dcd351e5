//! Superlevel sets `G_j = {x : Lambda_j(x) >= gamma_j}` on a rectangular grid.

use std::io::Write;

use rayon::prelude::*;

use crate::classifier::ClassifierModel;
use crate::error::{Error, Result};

pub const MAX_GRID_RES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gamma {
    /// Per-class default stored in the model.
    Auto,
    Value(f64),
}

impl std::str::FromStr for Gamma {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "auto" => Ok(Gamma::Auto),
            "inf" | "+inf" | "infinity" => Ok(Gamma::Value(f64::INFINITY)),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|g| !g.is_nan())
                .map(Gamma::Value)
                .ok_or_else(|| format!("expected `auto`, `inf` or a number, got `{v}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelsetGrid {
    pub n: usize,
    pub gamma: Vec<f64>,
    /// Cell centers, row-major with the last coordinate varying fastest.
    pub points: Vec<Vec<f64>>,
    pub scores: Vec<Vec<f64>>,
    pub members: Vec<Vec<bool>>,
    pub cell_size: Vec<f64>,
}

impl LevelsetGrid {
    pub fn member_counts(&self) -> Vec<usize> {
        let m = self.gamma.len();
        (0..m).map(|j| self.members.iter().filter(|b| b[j]).count()).collect()
    }

    /// `|G_i ∩ G_j|` in cells, for `i < j` (1-based labels).
    pub fn overlaps(&self) -> Vec<(usize, usize, usize)> {
        let m = self.gamma.len();
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let c = self.members.iter().filter(|b| b[i] && b[j]).count();
                out.push((i + 1, j + 1, c));
            }
        }
        out
    }

    /// Indices of cells lying in at least two superlevel sets.
    pub fn overlap_cells(&self) -> Vec<usize> {
        (0..self.points.len()).filter(|&c| self.members[c].iter().filter(|&&b| b).count() >= 2).collect()
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let m = self.gamma.len();
        let mut header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        header.extend((1..=m).map(|j| format!("lambda{j}")));
        header.extend((1..=m).map(|j| format!("in{j}")));
        writeln!(out, "{}", header.join(","))?;
        for ((p, s), b) in self.points.iter().zip(&self.scores).zip(&self.members) {
            let cells: Vec<String> = p
                .iter()
                .chain(s)
                .map(|v| format!("{v:?}"))
                .chain(b.iter().map(|&x| u8::from(x).to_string()))
                .collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("cells = {}\n", self.points.len()));
        for (j, g) in self.gamma.iter().enumerate() {
            s.push_str(&format!("gamma.{} = {g}\n", j + 1));
        }
        for (j, c) in self.member_counts().iter().enumerate() {
            s.push_str(&format!("members.{} = {c}\n", j + 1));
        }
        for (i, j, c) in self.overlaps() {
            s.push_str(&format!("overlap.{i}.{j} = {c}\n"));
        }
        s
    }
}

/// Evaluates every class on a `res^n` grid of cell centers over `bounds`
/// (`lo_1, hi_1, ..., lo_n, hi_n`).
pub fn levelset_grid(model: &ClassifierModel, bounds: &[f64], res: usize, gamma: Gamma) -> Result<LevelsetGrid> {
    let n = model.dim();
    if !(1..=3).contains(&n) {
        return Err(Error::invalid(format!("grid mode supports n in 1..=3, model has n = {n}")));
    }
    if bounds.len() != 2 * n {
        return Err(Error::invalid(format!("expected {} bounds (lo,hi per axis), got {}", 2 * n, bounds.len())));
    }
    if bounds.chunks(2).any(|b| !(b[0].is_finite() && b[1].is_finite() && b[0] < b[1])) {
        return Err(Error::invalid("each axis needs finite bounds with lo < hi"));
    }
    if !(1..=MAX_GRID_RES).contains(&res) {
        return Err(Error::invalid(format!("grid resolution must be in 1..={MAX_GRID_RES}")));
    }
    let gamma = match gamma {
        Gamma::Auto => model.default_gamma().to_vec(),
        Gamma::Value(g) => vec![g; model.classes()],
    };
    let cell_size: Vec<f64> = bounds.chunks(2).map(|b| (b[1] - b[0]) / res as f64).collect();
    let total = res.pow(n as u32);
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut c| {
            let mut p = vec![0.0; n];
            for axis in (0..n).rev() {
                p[axis] = bounds[2 * axis] + ((c % res) as f64 + 0.5) * cell_size[axis];
                c /= res;
            }
            p
        })
        .collect();
    let scores: Vec<Vec<f64>> = points.par_iter().map(|p| model.scores(p)).collect::<Result<_>>()?;
    let members = scores.iter().map(|s| s.iter().zip(&gamma).map(|(l, g)| l >= g).collect()).collect();
    Ok(LevelsetGrid { n, gamma, points, scores, members, cell_size })
}
