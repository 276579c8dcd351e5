//! Labeled point clouds, empirical measures and their moment matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::MonomialBasis;

/// Points in `R^n` (row-major) with 1-based class labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    n: usize,
    points: Vec<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    /// Validates labels against `1..=classes` and rejects non-finite coordinates.
    pub fn new(n: usize, points: Vec<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if points.len() != n * labels.len() {
            return Err(Error::DimensionMismatch { expected: n * labels.len(), got: points.len() });
        }
        for (i, p) in points.chunks_exact(n).enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        for (i, &l) in labels.iter().enumerate() {
            if l < 1 || l > classes {
                return Err(Error::LabelOutOfRange { label: l, classes, index: i });
            }
        }
        Ok(Self { n, points, labels, classes })
    }

    /// Builds a dataset with `m` inferred as the largest label.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.len() });
        }
        let classes = labels.iter().copied().max().unwrap_or(0);
        Self::new(n, rows.concat(), labels, classes)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.n)
    }

    pub fn raw_points(&self) -> &[f64] {
        &self.points
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Points per class, index `j - 1` for class `j`.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l - 1] += 1;
        }
        counts
    }

    /// Rows `indices` (in that order) as a new dataset with the same class count.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.n);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.point(i));
            labels.push(self.labels[i]);
        }
        Self { n: self.n, points, labels, classes: self.classes }
    }

    pub(crate) fn map_points(&self, f: impl Fn(&[f64], &mut [f64])) -> Self {
        let mut points = self.points.clone();
        for (src, dst) in self.points.chunks_exact(self.n).zip(points.chunks_exact_mut(self.n)) {
            f(src, dst);
        }
        Self { points, ..self.clone() }
    }

    pub fn require_nonempty_classes(&self) -> Result<()> {
        match self.class_counts().iter().position(|&c| c == 0) {
            Some(j) => Err(Error::EmptyClass(j + 1)),
            None => Ok(()),
        }
    }
}

/// How much total mass each per-class empirical measure carries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassPolicy {
    /// Every class is a probability measure: weights `1 / N_j`.
    #[default]
    Normalized,
    /// Class `j` carries mass `N_j / N`: weights `1 / N`.
    ClassPrior,
}

/// Weighted atomic measure `sum_i w_i delta_{x_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    n: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
    mass: f64,
}

impl EmpiricalMeasure {
    pub fn new(n: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 || points.len() != n * weights.len() {
            return Err(Error::DimensionMismatch { expected: n * weights.len(), got: points.len() });
        }
        if weights.is_empty() {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid(format!("weight {i} is negative or non-finite")));
        }
        for (i, p) in points.chunks_exact(n).enumerate() {
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        let mass = compensated_sum(weights.iter().copied());
        Ok(Self { n, points, weights, mass })
    }

    /// Uniform probability measure on the given points.
    pub fn uniform(n: usize, points: Vec<f64>) -> Result<Self> {
        let count = points.len().checked_div(n).unwrap_or(0);
        if count == 0 {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        Self::new(n, points, vec![1.0 / count as f64; count])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.n..(i + 1) * self.n]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.n)
    }

    /// Same atoms with every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.points.clone(), self.weights.iter().map(|w| w * c).collect())
    }
}

/// One probability measure per class (uniform weights `1 / N_j`).
pub fn class_split(dataset: &LabeledDataset) -> Result<Vec<EmpiricalMeasure>> {
    class_split_with(dataset, MassPolicy::Normalized)
}

pub fn class_split_with(dataset: &LabeledDataset, policy: MassPolicy) -> Result<Vec<EmpiricalMeasure>> {
    dataset.require_nonempty_classes()?;
    let counts = dataset.class_counts();
    let total = dataset.len() as f64;
    (1..=dataset.classes())
        .map(|j| {
            let mut points = Vec::with_capacity(counts[j - 1] * dataset.dim());
            for (p, &l) in dataset.points().zip(dataset.labels()) {
                if l == j {
                    points.extend_from_slice(p);
                }
            }
            let w = match policy {
                MassPolicy::Normalized => 1.0 / counts[j - 1] as f64,
                MassPolicy::ClassPrior => 1.0 / total,
            };
            EmpiricalMeasure::new(dataset.dim(), points, vec![w; counts[j - 1]])
        })
        .collect()
}

/// Gram matrix of a monomial basis under an atomic measure.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentMatrix {
    basis: MonomialBasis,
    entries: DMatrix<f64>,
    mass: f64,
    samples: usize,
}

impl MomentMatrix {
    /// Wraps an explicit symmetric matrix, e.g. for tests or externally
    /// computed moments. `samples` bounds the rank; pass `usize::MAX` when
    /// unknown.
    pub fn from_entries(basis: MonomialBasis, entries: DMatrix<f64>, mass: f64, samples: usize) -> Result<Self> {
        if entries.nrows() != basis.len() || entries.ncols() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: entries.nrows() });
        }
        Ok(Self { basis, entries, mass, samples })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Number of atoms the matrix was assembled from.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let m = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        worst
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    xs.into_iter().for_each(|x| acc.add(x));
    acc.value()
}

/// Accumulates `sum_i w_i v_i v_i^T` over the upper triangle, in input order.
fn assemble<'a>(size: usize, atoms: impl Iterator<Item = (f64, &'a [f64])>) -> DMatrix<f64> {
    let mut acc = vec![CompensatedSum::default(); size * (size + 1) / 2];
    for (w, v) in atoms {
        let mut k = 0;
        for a in 0..size {
            let wa = w * v[a];
            for vb in &v[a..size] {
                acc[k].add(wa * vb);
                k += 1;
            }
        }
    }
    let mut m = DMatrix::zeros(size, size);
    let mut k = 0;
    for a in 0..size {
        for b in a..size {
            let value = acc[k].value();
            m[(a, b)] = value;
            m[(b, a)] = value;
            k += 1;
        }
    }
    m
}

/// `M = sum_i w_i v_t(x_i) v_t(x_i)^T` for a plain basis.
pub fn empirical_moment_matrix(measure: &EmpiricalMeasure, basis: &MonomialBasis) -> Result<MomentMatrix> {
    if basis.is_joint() {
        return Err(Error::invalid("empirical_moment_matrix expects a plain basis"));
    }
    if basis.dim() != measure.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: measure.dim() });
    }
    let s = basis.len();
    let mut vs = vec![0.0; s * measure.len()];
    for (p, v) in measure.points().zip(vs.chunks_exact_mut(s)) {
        basis.eval_into(p, 0.0, v)?;
    }
    let entries = assemble(s, measure.weights().iter().copied().zip(vs.chunks_exact(s)));
    Ok(MomentMatrix { basis: basis.clone(), entries, mass: measure.mass(), samples: measure.len() })
}

/// Gram matrix of joint monomials `x^alpha y^k` under the uniform joint
/// measure `(1/N) sum_i delta_{(x_i, y_i)}`.
pub fn joint_moment_matrix(dataset: &LabeledDataset, basis: &MonomialBasis) -> Result<MomentMatrix> {
    joint_moment_matrix_mapped(dataset, basis, |l| l as f64)
}

/// As [`joint_moment_matrix`], with `y_i = label_map(label_i)`.
pub fn joint_moment_matrix_mapped(
    dataset: &LabeledDataset,
    basis: &MonomialBasis,
    label_map: impl Fn(usize) -> f64,
) -> Result<MomentMatrix> {
    if !basis.is_joint() {
        return Err(Error::invalid("joint_moment_matrix expects a variety or tensor basis"));
    }
    if basis.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), got: dataset.dim() });
    }
    let classes = match basis.kind() {
        crate::multiindex::BasisKind::Variety { classes } | crate::multiindex::BasisKind::Tensor { classes } => classes,
        crate::multiindex::BasisKind::Plain => unreachable!(),
    };
    if dataset.classes() > classes {
        return Err(Error::invalid(format!(
            "basis built for {classes} classes but dataset has {}",
            dataset.classes()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::invalid("joint moment matrix needs at least one point"));
    }
    let s = basis.len();
    let mut vs = vec![0.0; s * dataset.len()];
    for ((p, &l), v) in dataset.points().zip(dataset.labels()).zip(vs.chunks_exact_mut(s)) {
        basis.eval_into(p, label_map(l), v)?;
    }
    let w = 1.0 / dataset.len() as f64;
    let entries = assemble(s, std::iter::repeat(w).zip(vs.chunks_exact(s)));
    Ok(MomentMatrix { basis: basis.clone(), entries, mass: 1.0, samples: dataset.len() })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::multiindex::{enumerate_basis, enumerate_tensor_basis, enumerate_variety_basis};

    #[test]
    fn split_singletons() {
        let ds = LabeledDataset::from_rows(&[vec![-1.0, 1.0], vec![1.0, 2.0]], vec![1, 2]).unwrap();
        let ms = class_split(&ds).unwrap();
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].weights(), &[1.0]);
        assert_eq!(ms[1].weights(), &[1.0]);
        assert_eq!(ms[1].point(0), &[1.0, 2.0]);
    }

    #[test]
    fn split_masses() {
        let ds = LabeledDataset::from_rows(&[vec![0.0], vec![1.0], vec![2.0]], vec![1, 1, 2]).unwrap();
        let ms = class_split(&ds).unwrap();
        assert_eq!(ms[0].weights(), &[0.5, 0.5]);
        assert_eq!(ms[1].weights(), &[1.0]);
        assert_eq!((ms[0].mass(), ms[1].mass()), (1.0, 1.0));
        let prior = class_split_with(&ds, MassPolicy::ClassPrior).unwrap();
        assert_abs_diff_eq!(prior[0].mass(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(prior[1].mass(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn label_out_of_range_rejected() {
        let err = LabeledDataset::new(1, vec![0.0, 1.0], vec![1, 3], 2).unwrap_err();
        assert!(matches!(err, Error::LabelOutOfRange { label: 3, .. }));
    }

    #[test]
    fn empty_class_rejected() {
        let ds = LabeledDataset::new(1, vec![0.0, 1.0], vec![1, 3], 3).unwrap();
        assert!(matches!(class_split(&ds), Err(Error::EmptyClass(2))));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            LabeledDataset::new(1, vec![0.0, f64::NAN], vec![1, 1], 1),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn single_point_at_origin() {
        let mu = EmpiricalMeasure::uniform(1, vec![0.0]).unwrap();
        let m = empirical_moment_matrix(&mu, &enumerate_basis(1, 1).unwrap()).unwrap();
        assert_eq!(m.entries(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn three_point_moments() {
        let mu = EmpiricalMeasure::uniform(1, vec![-1.0, 0.0, 1.0]).unwrap();
        let m = empirical_moment_matrix(&mu, &enumerate_basis(1, 1).unwrap()).unwrap();
        // m0 = 1, m1 = 0, m2 = 2/3
        assert_abs_diff_eq!(m.entries()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.entries()[(0, 1)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.entries()[(1, 1)], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(m.mass(), 1.0);
    }

    #[test]
    fn joint_single_point_tensor() {
        let ds = LabeledDataset::new(1, vec![0.0], vec![1], 2).unwrap();
        let basis = enumerate_tensor_basis(1, 1, 2).unwrap();
        let m = joint_moment_matrix(&ds, &basis).unwrap();
        // outer product of the monomial vector at (x=0, y=1): ones at the
        // positions of the constant and of y
        let v = basis.eval_joint(&[0.0], 1.0).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(m.entries()[(a, b)], v[a] * v[b]);
            }
        }
        assert_eq!(v.iter().filter(|&&c| c == 1.0).count(), 2);
        assert_eq!(v.iter().filter(|&&c| c == 0.0).count(), 2);
    }

    #[test]
    fn joint_y_squared_moment() {
        let ds = LabeledDataset::new(1, vec![0.0, 0.0], vec![1, 2], 2).unwrap();
        let basis = enumerate_variety_basis(1, 2, 2).unwrap();
        let m = joint_moment_matrix(&ds, &basis).unwrap();
        let y = basis.terms().iter().position(|t| t.y_power == 1 && t.alpha.degree() == 0).unwrap();
        assert_abs_diff_eq!(m.entries()[(y, y)], 2.5, epsilon = 1e-15);
    }

    #[test]
    fn basis_kind_checked() {
        let mu = EmpiricalMeasure::uniform(1, vec![0.0]).unwrap();
        assert!(empirical_moment_matrix(&mu, &enumerate_tensor_basis(1, 1, 2).unwrap()).is_err());
        assert!(matches!(
            empirical_moment_matrix(&mu, &enumerate_basis(2, 1).unwrap()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    fn cloud() -> impl Strategy<Value = (usize, Vec<f64>)> {
        (1usize..=2, 1usize..=12).prop_flat_map(|(n, count)| {
            (Just(n), proptest::collection::vec(-1.0f64..1.0, n * count))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetric_psd_and_rank_bounded((n, pts) in cloud(), t in 0u32..4) {
            let mu = EmpiricalMeasure::uniform(n, pts).unwrap();
            let basis = enumerate_basis(n, t).unwrap();
            let m = empirical_moment_matrix(&mu, &basis).unwrap();
            prop_assert!(m.max_asymmetry() <= 1e-12);
            let eig = m.entries().clone().symmetric_eigen();
            let max = eig.eigenvalues.max();
            prop_assert!(eig.eigenvalues.min() >= -1e-10 * max);
            let rank = eig.eigenvalues.iter().filter(|&&l| l > 1e-10 * max).count();
            prop_assert!(rank <= basis.len().min(mu.len()));
        }

        #[test]
        fn order_independent_and_weight_linear((n, pts) in cloud(), c in 0.1f64..10.0) {
            let basis = enumerate_basis(n, 2).unwrap();
            let mu = EmpiricalMeasure::uniform(n, pts.clone()).unwrap();
            let m = empirical_moment_matrix(&mu, &basis).unwrap();
            let mut rev: Vec<f64> = pts.chunks_exact(n).rev().flatten().copied().collect();
            let reversed = empirical_moment_matrix(&EmpiricalMeasure::uniform(n, std::mem::take(&mut rev)).unwrap(), &basis).unwrap();
            let scaled = empirical_moment_matrix(&mu.scaled(c).unwrap(), &basis).unwrap();
            for (a, b) in m.entries().iter().zip(reversed.entries().iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            for (a, b) in m.entries().iter().zip(scaled.entries().iter()) {
                prop_assert!((c * a - b).abs() <= 1e-12 * (1.0 + (c * a).abs()));
            }
        }
    }
}
