//! Synthetic shapes, input scaling, CSV I/O and train/test splits.
//!
//! Random draws use `ChaCha8Rng` (rand_chacha 0.9) seeded with
//! `seed_from_u64(seed)`; class `j` draws from stream `j`, so a class's
//! points do not depend on how many points other classes receive.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::moments::LabeledDataset;

/// Name of the generator recorded in metadata.
pub const PRNG_NAME: &str = "chacha8-rand_chacha-0.9";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    /// Closed ball.
    Disk { center: Vec<f64>, radius: f64 },
    Annulus { center: Vec<f64>, inner: f64, outer: f64 },
    /// Axis-aligned box with corners `lo < hi`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub class: usize,
    #[serde(flatten)]
    pub shape: Shape,
}

fn norm_dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl Shape {
    pub fn dim(&self) -> usize {
        match self {
            Shape::Disk { center, .. } | Shape::Annulus { center, .. } => center.len(),
            Shape::Box { lo, .. } => lo.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|c| c.is_finite());
        match self {
            Shape::Disk { center, radius } => {
                if center.is_empty() || !finite(center) || !(radius.is_finite() && *radius > 0.0) {
                    return Err(Error::invalid("disk needs a finite center and radius > 0"));
                }
            }
            Shape::Annulus { center, inner, outer } => {
                if center.is_empty() || !finite(center) || !(*inner > 0.0 && inner < outer && outer.is_finite()) {
                    return Err(Error::invalid("annulus needs 0 < inner < outer"));
                }
            }
            Shape::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || !finite(lo) || !finite(hi) {
                    return Err(Error::invalid("box corners must be finite and of equal length"));
                }
                if lo.iter().zip(hi).any(|(a, b)| a >= b) {
                    return Err(Error::invalid("box has zero volume or unordered corners"));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Disk { center, radius } => norm_dist(x, center) <= *radius,
            Shape::Annulus { center, inner, outer } => {
                let r = norm_dist(x, center);
                *inner <= r && r <= *outer
            }
            Shape::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(c, (a, b))| a <= c && c <= b),
        }
    }

    /// Distance from a point inside the shape to its boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Disk { center, radius } => (radius - norm_dist(x, center)).abs(),
            Shape::Annulus { center, inner, outer } => {
                let r = norm_dist(x, center);
                (r - inner).abs().min((outer - r).abs())
            }
            Shape::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(c, (a, b))| (c - a).abs().min((b - c).abs()))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// `x` lies in the shape at distance more than `eps` from its boundary.
    pub fn in_interior(&self, x: &[f64], eps: f64) -> bool {
        self.contains(x) && self.boundary_distance(x) > eps
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Shape::Disk { center, radius: r } | Shape::Annulus { center, outer: r, .. } => {
                (center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
            }
            Shape::Box { lo, hi } => (lo.clone(), hi.clone()),
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bounds();
        match self {
            Shape::Box { .. } => norm_dist(&lo, &hi),
            _ => hi[0] - lo[0],
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let (lo, hi) = self.bounds();
        let mut x = vec![0.0; lo.len()];
        loop {
            for (c, (a, b)) in x.iter_mut().zip(lo.iter().zip(&hi)) {
                *c = rng.random_range(*a..*b);
            }
            if self.contains(&x) {
                out.extend_from_slice(&x);
                return;
            }
        }
    }
}

/// Checks dimensions agree and that classes are exactly `1..=m`, one shape each.
/// Returns the specs sorted by class.
pub fn validate_specs(specs: &[ShapeSpec]) -> Result<Vec<ShapeSpec>> {
    let first = specs.first().ok_or_else(|| Error::invalid("no shapes given"))?;
    let n = first.shape.dim();
    for s in specs {
        s.shape.validate().map_err(|e| Error::invalid(format!("class {}: {e}", s.class)))?;
        if s.shape.dim() != n {
            return Err(Error::invalid(format!("class {}: dimension {} differs from {n}", s.class, s.shape.dim())));
        }
    }
    let mut sorted = specs.to_vec();
    sorted.sort_by_key(|s| s.class);
    for (i, s) in sorted.iter().enumerate() {
        if s.class != i + 1 {
            return Err(Error::invalid(format!(
                "shape classes must be 1..={} with one shape each (found class {})",
                sorted.len(),
                s.class
            )));
        }
    }
    Ok(sorted)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShapeFile {
    shape: Vec<toml::Spanned<toml::Table>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses a shape file, e.g.
///
/// ```toml
/// [[shape]]
/// class = 1
/// kind = "disk"
/// center = [-2.0, 0.0]
/// radius = 1.0
///
/// [[shape]]
/// class = 2
/// kind = "box"
/// lo = [1.0, -1.0]
/// hi = [3.0, 1.0]
/// ```
///
/// Errors inside a `[[shape]]` block report the block's first line.
pub fn parse_shape_file(text: &str, origin: &str) -> Result<Vec<ShapeSpec>> {
    let perr = |line: usize, message: String| Error::Parse { path: origin.to_string(), line, message };
    let file: ShapeFile = toml::from_str(text)
        .map_err(|e| perr(e.span().map_or(0, |s| line_of(text, s.start)), e.message().to_string()))?;
    let specs = file
        .shape
        .into_iter()
        .map(|block| {
            let line = line_of(text, block.span().start);
            ShapeSpec::deserialize(block.into_inner()).map_err(|e| perr(line, e.message().to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    validate_specs(&specs)
}

pub fn read_shape_file(path: &Path) -> Result<Vec<ShapeSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_shape_file(&text, &path.display().to_string())
}

/// `per_class` points per class, uniform on each shape (rejection sampling
/// from the bounding box). Rows are grouped by class.
pub fn gen_shapes(specs: &[ShapeSpec], per_class: usize, seed: u64) -> Result<LabeledDataset> {
    let specs = validate_specs(specs)?;
    if per_class == 0 {
        return Err(Error::invalid("need at least one point per class"));
    }
    let n = specs[0].shape.dim();
    let mut points = Vec::with_capacity(specs.len() * per_class * n);
    let mut labels = Vec::with_capacity(specs.len() * per_class);
    for s in &specs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s.class as u64);
        for _ in 0..per_class {
            s.shape.sample(&mut rng, &mut points);
            labels.push(s.class);
        }
    }
    LabeledDataset::new(n, points, labels, specs.len())
}

/// Indices of dataset points lying at distance more than `eps` from the
/// boundary of their own class's shape.
pub fn epsilon_interior(dataset: &LabeledDataset, specs: &[ShapeSpec], eps: f64) -> Result<Vec<usize>> {
    if !(eps >= 0.0) {
        return Err(Error::invalid("epsilon must be >= 0"));
    }
    let specs = validate_specs(specs)?;
    if specs[0].shape.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: specs[0].shape.dim(), got: dataset.dim() });
    }
    Ok((0..dataset.len())
        .filter(|&i| {
            specs
                .get(dataset.label(i) - 1)
                .is_some_and(|s| s.shape.in_interior(dataset.point(i), eps))
        })
        .collect())
}

/// For unlabeled points (e.g. a grid): the class whose shape's
/// `eps`-interior contains `x`, if any. The first matching class wins.
pub fn interior_class(x: &[f64], specs: &[ShapeSpec], eps: f64) -> Option<usize> {
    specs.iter().find(|s| s.shape.in_interior(x, eps)).map(|s| s.class)
}

/// Per-coordinate map `x' = (x - center) / half_width` onto `[-1, 1]^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl AffineTransform {
    pub fn identity(n: usize) -> Self {
        Self { center: vec![0.0; n], half_width: vec![1.0; n] }
    }

    /// Bounding-box fit; a constant coordinate gets unit width centered on its value.
    pub fn fit(dataset: &LabeledDataset) -> Self {
        let n = dataset.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in dataset.points() {
            for i in 0..n {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        let mut center = Vec::with_capacity(n);
        let mut half_width = Vec::with_capacity(n);
        for i in 0..n {
            if hi[i] > lo[i] {
                center.push(0.5 * (lo[i] + hi[i]));
                half_width.push(0.5 * (hi[i] - lo[i]));
            } else {
                center.push(lo[i]);
                half_width.push(1.0);
            }
        }
        Self { center, half_width }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.center.len() != self.half_width.len()
            || self.half_width.iter().any(|h| !(h.is_finite() && *h != 0.0))
            || self.center.iter().any(|c| !c.is_finite())
        {
            return Err(Error::ModelFormat("affine transform is not invertible".into()));
        }
        Ok(())
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), (c, h)) in out.iter_mut().zip(x).zip(self.center.iter().zip(&self.half_width)) {
            *o = (xi - c) / h;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }

    pub fn inverse(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.center.iter().zip(&self.half_width)).map(|(xi, (c, h))| xi * h + c).collect()
    }

    pub fn apply_dataset(&self, dataset: &LabeledDataset) -> LabeledDataset {
        dataset.map_points(|src, dst| self.apply_into(src, dst))
    }
}

/// Rescales every coordinate to `[-1, 1]` and returns the transform used.
pub fn scale_to_unit_box(dataset: &LabeledDataset) -> (LabeledDataset, AffineTransform) {
    let tr = AffineTransform::fit(dataset);
    (tr.apply_dataset(dataset), tr)
}

/// Points read from a CSV file; `labels` is present when the last header
/// column is `label`.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub n: usize,
    pub points: Vec<f64>,
    pub labels: Option<Vec<usize>>,
}

impl CsvTable {
    pub fn rows(&self) -> usize {
        self.points.len().checked_div(self.n).unwrap_or(0)
    }

    pub fn into_dataset(self, origin: &str) -> Result<LabeledDataset> {
        let labels = self.labels.ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: 1,
            message: "last header column must be `label`".into(),
        })?;
        if labels.is_empty() {
            return Err(Error::Parse { path: origin.to_string(), line: 2, message: "no data rows".into() });
        }
        let classes = labels.iter().copied().max().unwrap_or(0);
        LabeledDataset::new(self.n, self.points, labels, classes)
    }
}

pub fn parse_csv(reader: impl Read, origin: &str) -> Result<CsvTable> {
    let perr = |line: usize, message: String| Error::Parse { path: origin.to_string(), line, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
    let labeled = header.iter().next_back().is_some_and(|h| h.eq_ignore_ascii_case("label"));
    let n = header.len() - usize::from(labeled);
    if n == 0 {
        return Err(perr(1, "header has no coordinate columns".into()));
    }
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            let msg = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("ragged row: expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            perr(line, msg)
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        for cell in rec.iter().take(n) {
            let v: f64 = cell.parse().map_err(|_| perr(line, format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(perr(line, format!("non-finite cell `{cell}`")));
            }
            points.push(v);
        }
        if labeled {
            let cell = &rec[n];
            let l: i64 = cell.parse().map_err(|_| perr(line, format!("label `{cell}` is not an integer")))?;
            if l < 1 {
                return Err(perr(line, "label < 1".into()));
            }
            labels.push(l as usize);
        }
    }
    Ok(CsvTable { n, points, labels: labeled.then_some(labels) })
}

pub fn read_csv_table(path: &Path) -> Result<CsvTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(std::io::BufReader::new(file), &path.display().to_string())
}

/// Reads `x1,...,xn,label`; `m` is the largest label.
pub fn read_csv(path: &Path) -> Result<LabeledDataset> {
    read_csv_table(path)?.into_dataset(&path.display().to_string())
}

/// Shortest round-trip decimal for every coordinate, so reading back is lossless.
pub fn write_csv_to(dataset: &LabeledDataset, mut out: impl Write) -> std::io::Result<()> {
    let header: Vec<String> = (1..=dataset.dim()).map(|i| format!("x{i}")).chain(["label".into()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (p, l) in dataset.points().zip(dataset.labels()) {
        for c in p {
            write!(out, "{c:?},")?;
        }
        writeln!(out, "{l}")?;
    }
    Ok(())
}

pub fn write_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_csv_to(dataset, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Stratified split: each class contributes `round(fraction * N_j)` points to
/// the training side (at least one to each side). Both sides keep input order.
pub fn train_test_split(dataset: &LabeledDataset, fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("split fraction must lie in (0, 1)"));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for j in 1..=dataset.classes() {
        let mut idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.label(i) == j).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::invalid(format!("class {j} has fewer than 2 points and cannot be stratified")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(j as u64);
        idx.shuffle(&mut rng);
        let k = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((dataset.subset(&train), dataset.subset(&test)))
}

/// SHA-256 over dimension, labels and coordinate bit patterns.
pub fn dataset_hash(dataset: &LabeledDataset) -> String {
    let mut h = Sha256::new();
    h.update((dataset.dim() as u64).to_le_bytes());
    h.update((dataset.classes() as u64).to_le_bytes());
    for (p, &l) in dataset.points().zip(dataset.labels()) {
        for c in p {
            h.update(c.to_bits().to_le_bytes());
        }
        h.update((l as u64).to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
