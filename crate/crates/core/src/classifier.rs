//! Per-class Christoffel classifier and the joint `(x, y)` variants.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::christoffel::{build_evaluator, ChristoffelEvaluator, InverseScore, ThresholdPolicy};
use crate::datasets::{dataset_hash, AffineTransform};
use crate::error::{Error, Result};
use crate::moments::{class_split_with, joint_moment_matrix_mapped, LabeledDataset, MassPolicy};
use crate::multiindex::{basis_size, enumerate_tensor_basis, enumerate_variety_basis};

/// Largest class count accepted by [`make_theta`].
pub const MAX_INTERPOLATION_CLASSES: usize = 12;
/// Upper bound on the automatically chosen degree.
pub const MAX_AUTO_DEGREE: u32 = 10;
/// Scores within this relative distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Quantile of in-class training scores used as the default level `gamma_j`.
pub const DEFAULT_GAMMA_QUANTILE: f64 = 0.05;

/// Lagrange polynomials `theta_1..theta_m` on the nodes `1..=m`.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationBasis {
    m: usize,
    /// `coefficients[j][k]` is the coefficient of `y^k` in `theta_{j+1}`.
    coefficients: Vec<Vec<f64>>,
}

pub fn make_theta(m: usize) -> Result<InterpolationBasis> {
    if !(2..=MAX_INTERPOLATION_CLASSES).contains(&m) {
        return Err(Error::invalid(format!("interpolation needs 2 <= m <= {MAX_INTERPOLATION_CLASSES}, got {m}")));
    }
    let coefficients = (1..=m)
        .map(|j| {
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for i in (1..=m).filter(|&i| i != j) {
                // poly *= (y - i)
                let mut next = vec![0.0; poly.len() + 1];
                for (k, c) in poly.iter().enumerate() {
                    next[k + 1] += c;
                    next[k] -= c * i as f64;
                }
                poly = next;
                denom *= j as f64 - i as f64;
            }
            poly.iter().map(|c| c / denom).collect()
        })
        .collect();
    Ok(InterpolationBasis { m, coefficients })
}

impl InterpolationBasis {
    pub fn classes(&self) -> usize {
        self.m
    }

    pub fn coefficients(&self, j: usize) -> &[f64] {
        &self.coefficients[j - 1]
    }

    /// `theta_j(y)` from the product form, so `theta_j(i)` is exactly `delta_ij`.
    pub fn eval(&self, j: usize, y: f64) -> f64 {
        let mut num = 1.0;
        let mut den = 1.0;
        for i in (1..=self.m).filter(|&i| i != j) {
            num *= y - i as f64;
            den *= j as f64 - i as f64;
        }
        num / den
    }

    /// `theta_j(y)` from the expanded coefficients (Horner).
    pub fn eval_expanded(&self, j: usize, y: f64) -> f64 {
        self.coefficients[j - 1].iter().rev().fold(0.0, |acc, c| acc * y + c)
    }
}

/// `[sum_j theta_j(y)^2 q_j]` from per-class inverse scores `q_j`. Terms with
/// `theta_j(y) = 0` are skipped, so an off-range class does not leak into
/// the other classes' nodes.
pub fn combine_inverse_scores(theta: &InterpolationBasis, inverse: &[InverseScore], y: f64) -> InverseScore {
    let mut sum = 0.0;
    for (j, q) in (1..=theta.classes()).zip(inverse) {
        let w = theta.eval(j, y);
        if w == 0.0 {
            continue;
        }
        match q {
            InverseScore::OffRange => return InverseScore::OffRange,
            InverseScore::Finite(q) => sum += w * w * q,
        }
    }
    InverseScore::Finite(sum)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// `None` picks the largest `t` with `s(t) <= ceil(N_min / 2)`.
    pub degree: Option<u32>,
    pub policy: ThresholdPolicy,
    pub mass_policy: MassPolicy,
    /// Reject when every score falls below this level.
    pub reject_below: Option<f64>,
    /// Rescale inputs to `[-1, 1]^n` before fitting.
    pub scale: bool,
    pub seed: Option<u64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            degree: None,
            policy: ThresholdPolicy::default(),
            mass_policy: MassPolicy::default(),
            reject_below: None,
            scale: true,
            seed: None,
        }
    }
}

impl FitOptions {
    pub fn with_degree(t: u32) -> Self {
        Self { degree: Some(t), ..Self::default() }
    }
}

/// Largest `t <= MAX_AUTO_DEGREE` with `s(t) <= ceil(n_min / 2)`, at least 1.
pub fn auto_degree(n: usize, n_min: usize) -> u32 {
    let budget = n_min.div_ceil(2);
    let mut t = 1;
    while t < MAX_AUTO_DEGREE && basis_size(n, t + 1) <= budget {
        t += 1;
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prediction {
    Class(usize),
    Reject,
}

impl Prediction {
    pub fn label(self) -> Option<usize> {
        match self {
            Prediction::Class(j) => Some(j),
            Prediction::Reject => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub seed: Option<u64>,
    pub dataset_hash: String,
    pub class_counts: Vec<usize>,
}

/// One evaluator per class, all on the same plain basis and input transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    n: usize,
    m: usize,
    t: u32,
    policy: ThresholdPolicy,
    mass_policy: MassPolicy,
    transform: AffineTransform,
    evaluators: Vec<ChristoffelEvaluator>,
    reject_below: Option<f64>,
    /// Per-class default superlevel `gamma_j`.
    default_gamma: Vec<f64>,
    metadata: ModelMetadata,
}

fn quantile_low(mut xs: Vec<f64>, q: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[((xs.len() - 1) as f64 * q).floor() as usize]
}

impl ClassifierModel {
    pub fn fit(dataset: &LabeledDataset, opts: &FitOptions) -> Result<Self> {
        dataset.require_nonempty_classes()?;
        let counts = dataset.class_counts();
        let t = match opts.degree {
            Some(0) => return Err(Error::invalid("degree must be >= 1")),
            Some(t) => t,
            None => auto_degree(dataset.dim(), counts.iter().copied().min().unwrap_or(1)),
        };
        let transform = if opts.scale {
            AffineTransform::fit(dataset)
        } else {
            AffineTransform::identity(dataset.dim())
        };
        let scaled = transform.apply_dataset(dataset);
        let measures = class_split_with(&scaled, opts.mass_policy)?;
        let evaluators = measures
            .par_iter()
            .map(|mu| ChristoffelEvaluator::from_measure(mu, t, opts.policy))
            .collect::<Result<Vec<_>>>()?;
        let s = basis_size(dataset.dim(), t);
        let deficient: Vec<String> = evaluators
            .iter()
            .enumerate()
            .filter(|(_, ev)| ev.rank() < s)
            .map(|(j, ev)| format!("class {}: rank {} < {s}", j + 1, ev.rank()))
            .collect();
        if !deficient.is_empty() {
            log::warn!("rank-deficient moment matrices at degree {t}: {}", deficient.join(", "));
        }
        let metadata = ModelMetadata { seed: opts.seed, dataset_hash: dataset_hash(dataset), class_counts: counts };
        let mut model = Self::from_parts(transform, evaluators, opts.policy, opts.mass_policy, metadata)?;
        model.reject_below = opts.reject_below;
        model.default_gamma = (1..=model.m)
            .map(|j| {
                let own: Vec<f64> = scaled
                    .points()
                    .zip(scaled.labels())
                    .filter(|(_, &l)| l == j)
                    .map(|(p, _)| model.evaluators[j - 1].eval_cf(p))
                    .collect::<Result<_>>()?;
                Ok(quantile_low(own, DEFAULT_GAMMA_QUANTILE))
            })
            .collect::<Result<_>>()?;
        Ok(model)
    }

    /// Assembles a model from prebuilt evaluators acting on transformed inputs.
    pub fn from_parts(
        transform: AffineTransform,
        evaluators: Vec<ChristoffelEvaluator>,
        policy: ThresholdPolicy,
        mass_policy: MassPolicy,
        metadata: ModelMetadata,
    ) -> Result<Self> {
        let first = evaluators.first().ok_or_else(|| Error::invalid("model needs at least one class"))?;
        let (n, t) = (first.basis().dim(), first.basis().degree());
        let m = evaluators.len();
        let model = Self {
            n,
            m,
            t,
            policy,
            mass_policy,
            transform,
            evaluators,
            reject_below: None,
            default_gamma: vec![0.0; m],
            metadata,
        };
        model.validate()?;
        Ok(model)
    }

    /// Structural checks, also run after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.evaluators.len() != self.m || self.default_gamma.len() != self.m || self.m == 0 {
            return Err(Error::ModelFormat(format!("expected {} evaluators and levels", self.m)));
        }
        for ev in &self.evaluators {
            let b = ev.basis();
            if b.is_joint() || b.dim() != self.n || b.degree() != self.t {
                return Err(Error::ModelFormat("evaluators must share a plain basis of the model's n and t".into()));
            }
        }
        if self.transform.dim() != self.n {
            return Err(Error::ModelFormat("transform dimension differs from n".into()));
        }
        self.transform.validate()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> u32 {
        self.t
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.policy
    }

    pub fn mass_policy(&self) -> MassPolicy {
        self.mass_policy
    }

    pub fn transform(&self) -> &AffineTransform {
        &self.transform
    }

    pub fn evaluators(&self) -> &[ChristoffelEvaluator] {
        &self.evaluators
    }

    pub fn reject_below(&self) -> Option<f64> {
        self.reject_below
    }

    pub fn set_reject_below(&mut self, gamma: Option<f64>) {
        self.reject_below = gamma;
    }

    pub fn default_gamma(&self) -> &[f64] {
        &self.default_gamma
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    fn transformed(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        if let Some(index) = x.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(self.transform.apply(x))
    }

    /// `(Lambda_1(x)^{-1}, ..., Lambda_m(x)^{-1})`.
    pub fn inverse_scores(&self, x: &[f64]) -> Result<Vec<InverseScore>> {
        let u = self.transformed(x)?;
        self.evaluators.iter().map(|ev| ev.eval_cf_inverse(&u)).collect()
    }

    /// `(Lambda_1(x), ..., Lambda_m(x))`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.inverse_scores(x)?.into_iter().map(InverseScore::christoffel).collect())
    }

    /// Scores multiplied by `s(t) / mass_j`, which puts in-support values near 1.
    pub fn normalized_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let s = basis_size(self.n, self.t) as f64;
        Ok(self.scores(x)?.into_iter().zip(&self.evaluators).map(|(l, ev)| l * s / ev.mass()).collect())
    }

    pub fn classify(&self, x: &[f64]) -> Result<Prediction> {
        Ok(self.decide(&self.scores(x)?))
    }

    /// Argmax with ties (relative [`TIE_TOLERANCE`]) going to the smallest index.
    pub fn decide(&self, scores: &[f64]) -> Prediction {
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.reject_below.is_some_and(|g| best < g) {
            return Prediction::Reject;
        }
        let j = scores.iter().position(|&s| s >= best - TIE_TOLERANCE * best.abs()).unwrap_or(0);
        Prediction::Class(j + 1)
    }

    pub fn interpolation(&self) -> Result<InterpolationBasis> {
        make_theta(self.m)
    }

    /// `[sum_j theta_j(y)^2 Lambda_j(x)^{-1}]^{-1}` as an inverse score.
    pub fn joint_cf_inverse(&self, x: &[f64], y: f64) -> Result<InverseScore> {
        let theta = self.interpolation()?;
        Ok(combine_inverse_scores(&theta, &self.inverse_scores(x)?, y))
    }

    /// The variant joint Christoffel function; equals `scores(x)[j-1]` at `y = j`.
    pub fn joint_cf(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok(self.joint_cf_inverse(x, y)?.christoffel())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    /// `x^a y^k` with `k <= m-1`, `|a| + k <= t`.
    Variety,
    /// `x^a y^k` with `|a| <= t`, `k <= m-1`.
    Tensor,
}

/// Christoffel function of the joint empirical measure `(1/N) sum delta_(x_i, y_i)`.
///
/// Labels `1..=m` are mapped affinely onto `[-1, 1]` before assembly, like
/// the inputs. Both joint spaces are closed under affine maps of `y`, so
/// the function is unchanged while the `y^k` columns stay of unit scale.
#[derive(Clone, Debug, PartialEq)]
pub struct JointModel {
    kind: JointKind,
    transform: AffineTransform,
    label_transform: AffineTransform,
    evaluator: ChristoffelEvaluator,
}

fn label_transform(m: usize) -> AffineTransform {
    if m > 1 {
        AffineTransform { center: vec![(m as f64 + 1.0) / 2.0], half_width: vec![(m as f64 - 1.0) / 2.0] }
    } else {
        AffineTransform { center: vec![1.0], half_width: vec![1.0] }
    }
}

impl JointModel {
    pub fn fit(
        dataset: &LabeledDataset,
        kind: JointKind,
        t: u32,
        policy: ThresholdPolicy,
        transform: AffineTransform,
    ) -> Result<Self> {
        if transform.dim() != dataset.dim() {
            return Err(Error::DimensionMismatch { expected: dataset.dim(), got: transform.dim() });
        }
        let basis = match kind {
            JointKind::Variety => enumerate_variety_basis(dataset.dim(), t, dataset.classes())?,
            JointKind::Tensor => enumerate_tensor_basis(dataset.dim(), t, dataset.classes())?,
        };
        let scaled = transform.apply_dataset(dataset);
        let label_transform = label_transform(dataset.classes());
        let y_of = |l: usize| label_transform.apply(&[l as f64])[0];
        let evaluator = build_evaluator(&joint_moment_matrix_mapped(&scaled, &basis, y_of)?, policy)?;
        Ok(Self { kind, transform, label_transform, evaluator })
    }

    pub fn kind(&self) -> JointKind {
        self.kind
    }

    pub fn evaluator(&self) -> &ChristoffelEvaluator {
        &self.evaluator
    }

    pub fn cf_inverse(&self, x: &[f64], y: f64) -> Result<InverseScore> {
        if x.len() != self.transform.dim() {
            return Err(Error::DimensionMismatch { expected: self.transform.dim(), got: x.len() });
        }
        let y = self.label_transform.apply(&[y])[0];
        self.evaluator.eval_cf_inverse_joint(&self.transform.apply(x), y)
    }

    pub fn cf(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok(self.cf_inverse(x, y)?.christoffel())
    }
}

/// Christoffel function on the variety `R^n x {1..m}` (basis `Gamma_t`).
pub fn variety_cf(dataset: &LabeledDataset, t: u32, policy: ThresholdPolicy) -> Result<JointModel> {
    JointModel::fit(dataset, JointKind::Variety, t, policy, AffineTransform::fit(dataset))
}

/// Variant joint Christoffel function on the tensor space.
pub fn tensor_cf(dataset: &LabeledDataset, t: u32, policy: ThresholdPolicy) -> Result<JointModel> {
    JointModel::fit(dataset, JointKind::Tensor, t, policy, AffineTransform::fit(dataset))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichViolation {
    pub x: Vec<f64>,
    pub y: usize,
    /// Inverse scores `q_t`, `q_hat_t`, `q_{t+m-1}`; infinite when off range.
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SandwichReport {
    pub checked: usize,
    pub violations: Vec<SandwichViolation>,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Slack for comparing two inverse scores.
pub const SANDWICH_SLACK: f64 = 1e-9;

fn inverse_leq(a: InverseScore, b: InverseScore) -> bool {
    match (a, b) {
        (_, InverseScore::OffRange) => true,
        (InverseScore::OffRange, InverseScore::Finite(_)) => false,
        (InverseScore::Finite(a), InverseScore::Finite(b)) => a <= b + SANDWICH_SLACK * (1.0 + a.abs().max(b.abs())),
    }
}

/// Checks `q_t <= q_hat_t <= q_{t+m-1}` at every `(x, y)` of `grid`, where `q`
/// is the inverse variety Christoffel function and `q_hat` the inverse
/// variant (tensor) one, all under the joint empirical measure.
pub fn sandwich_check(dataset: &LabeledDataset, t: u32, grid: &[(Vec<f64>, usize)]) -> Result<SandwichReport> {
    let policy = ThresholdPolicy::default();
    let m = dataset.classes();
    let transform = AffineTransform::fit(dataset);
    let low = JointModel::fit(dataset, JointKind::Variety, t, policy, transform.clone())?;
    let mid = JointModel::fit(dataset, JointKind::Tensor, t, policy, transform.clone())?;
    let high = JointModel::fit(dataset, JointKind::Variety, t + m as u32 - 1, policy, transform)?;
    let mut report = SandwichReport::default();
    for (x, y) in grid {
        if !(1..=m).contains(y) {
            return Err(Error::LabelOutOfRange { label: *y, classes: m, index: report.checked });
        }
        let yf = *y as f64;
        let (a, b, c) = (low.cf_inverse(x, yf)?, mid.cf_inverse(x, yf)?, high.cf_inverse(x, yf)?);
        report.checked += 1;
        if !(inverse_leq(a, b) && inverse_leq(b, c)) {
            report.violations.push(SandwichViolation {
                x: x.clone(),
                y: *y,
                lower: a.value(),
                middle: b.value(),
                upper: c.value(),
            });
        }
    }
    Ok(report)
}
