//! Christoffel functions of (possibly singular) moment matrices.
//!
//! The evaluator keeps the eigenpairs of `M` above a cutoff and computes
//! `Lambda(x) = 1 / (v^T M^+ v)`. When the monomial vector `v` has a
//! component outside the retained eigenspace, some polynomial vanishes on
//! the support of the measure but not at `x`, so `Lambda(x) = 0`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{empirical_moment_matrix, EmpiricalMeasure, MomentMatrix};
use crate::multiindex::{enumerate_basis, MonomialBasis};

/// Eigenvalues at or below this are always discarded.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;
/// Default relative cutoff, as a fraction of the largest eigenvalue.
pub const DEFAULT_RELATIVE: f64 = 1e-10;
/// Relative norm of the off-eigenspace residual above which `Lambda = 0`.
pub const OFF_RANGE_TOL: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-12;

/// How small eigenvalues of the moment matrix are handled.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ThresholdPolicy {
    /// Keep eigenvalues above `max(ABSOLUTE_FLOOR, rel * lambda_max)`.
    Relative { rel: f64 },
    /// Use `M + jitter * I`, which is full rank.
    Tikhonov { jitter: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Relative { rel: DEFAULT_RELATIVE }
    }
}

impl FromStr for ThresholdPolicy {
    type Err = Error;

    /// Parses `rel:<float>` or `tikhonov:<float>`.
    fn from_str(s: &str) -> Result<Self> {
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("threshold policy `{s}`: expected rel:<float> or tikhonov:<float>")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("threshold policy `{s}`: bad number")))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::invalid(format!("threshold policy `{s}`: value must be finite and >= 0")));
        }
        match mode.trim() {
            "rel" => Ok(ThresholdPolicy::Relative { rel: value }),
            "tikhonov" if value > 0.0 => Ok(ThresholdPolicy::Tikhonov { jitter: value }),
            "tikhonov" => Err(Error::invalid("tikhonov jitter must be positive")),
            other => Err(Error::invalid(format!("unknown threshold mode `{other}`"))),
        }
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdPolicy::Relative { rel } => write!(f, "rel:{rel:e}"),
            ThresholdPolicy::Tikhonov { jitter } => write!(f, "tikhonov:{jitter:e}"),
        }
    }
}

/// `Lambda(x)^{-1}`; `OffRange` stands for `+inf` (`Lambda(x) = 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InverseScore {
    Finite(f64),
    OffRange,
}

impl InverseScore {
    /// The value with `OffRange` mapped to `f64::INFINITY`.
    pub fn value(self) -> f64 {
        match self {
            InverseScore::Finite(q) => q,
            InverseScore::OffRange => f64::INFINITY,
        }
    }

    /// The Christoffel function value `1 / q` (zero when off range).
    pub fn christoffel(self) -> f64 {
        match self {
            InverseScore::Finite(q) => 1.0 / q,
            InverseScore::OffRange => 0.0,
        }
    }

    pub fn is_off_range(self) -> bool {
        matches!(self, InverseScore::OffRange)
    }
}

/// Factorized pseudo-inverse of a moment matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EvaluatorRecord", into = "EvaluatorRecord")]
pub struct ChristoffelEvaluator {
    basis: MonomialBasis,
    /// Retained eigenvalues, descending.
    eigenvalues: Vec<f64>,
    /// `basis.len() x rank`, column `k` pairs with `eigenvalues[k]`.
    eigenvectors: DMatrix<f64>,
    threshold: f64,
    policy: ThresholdPolicy,
    mass: f64,
    samples: usize,
    lambda_max: f64,
}

#[derive(Serialize, Deserialize)]
struct EvaluatorRecord {
    basis: MonomialBasis,
    policy: ThresholdPolicy,
    threshold: f64,
    mass: f64,
    samples: usize,
    lambda_max: f64,
    eigenvalues: Vec<f64>,
    eigenvectors: Vec<Vec<f64>>,
}

impl From<ChristoffelEvaluator> for EvaluatorRecord {
    fn from(ev: ChristoffelEvaluator) -> Self {
        let eigenvectors = ev.eigenvectors.column_iter().map(|c| c.iter().copied().collect()).collect();
        EvaluatorRecord {
            basis: ev.basis,
            policy: ev.policy,
            threshold: ev.threshold,
            mass: ev.mass,
            samples: ev.samples,
            lambda_max: ev.lambda_max,
            eigenvalues: ev.eigenvalues,
            eigenvectors,
        }
    }
}

impl TryFrom<EvaluatorRecord> for ChristoffelEvaluator {
    type Error = Error;

    fn try_from(r: EvaluatorRecord) -> Result<Self> {
        let s = r.basis.len();
        if r.eigenvectors.len() != r.eigenvalues.len() || r.eigenvectors.iter().any(|c| c.len() != s) {
            return Err(Error::ModelFormat("eigenpair table has inconsistent shape".into()));
        }
        if r.eigenvalues.is_empty() || r.eigenvalues.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::ModelFormat("eigenvalues must be finite and positive".into()));
        }
        let flat: Vec<f64> = r.eigenvectors.concat();
        Ok(ChristoffelEvaluator {
            eigenvectors: DMatrix::from_column_slice(s, r.eigenvalues.len(), &flat),
            basis: r.basis,
            eigenvalues: r.eigenvalues,
            threshold: r.threshold,
            policy: r.policy,
            mass: r.mass,
            samples: r.samples,
            lambda_max: r.lambda_max,
        })
    }
}

/// Eigendecomposes `M` and keeps the eigenpairs above the policy's cutoff.
pub fn build_evaluator(m: &MomentMatrix, policy: ThresholdPolicy) -> Result<ChristoffelEvaluator> {
    let entries = m.entries();
    let scale = entries.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let mut sym = (entries + entries.transpose()) * 0.5;
    if let ThresholdPolicy::Tikhonov { jitter } = policy {
        for i in 0..sym.nrows() {
            sym[(i, i)] += jitter;
        }
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let threshold = match policy {
        ThresholdPolicy::Relative { rel } => ABSOLUTE_FLOOR.max(rel * lambda_max),
        ThresholdPolicy::Tikhonov { .. } => ABSOLUTE_FLOOR,
    };
    let kept: Vec<usize> = order.into_iter().filter(|&k| eig.eigenvalues[k] > threshold).collect();
    if kept.is_empty() {
        return Err(Error::Degenerate { threshold });
    }
    let s = m.size();
    let mut eigenvectors = DMatrix::zeros(s, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        let mut u = eig.eigenvectors.column(k).into_owned();
        // fix the sign so the largest component is positive
        let lead = u.iter().copied().fold(0.0f64, |a, c| if c.abs() > a.abs() { c } else { a });
        if lead < 0.0 {
            u.neg_mut();
        }
        eigenvectors.set_column(col, &u);
    }
    Ok(ChristoffelEvaluator {
        basis: m.basis().clone(),
        eigenvalues: kept.iter().map(|&k| eig.eigenvalues[k]).collect(),
        eigenvectors,
        threshold,
        policy,
        mass: m.mass(),
        samples: m.samples(),
        lambda_max,
    })
}

impl ChristoffelEvaluator {
    /// Degree-`t` evaluator of an empirical measure on a plain basis.
    pub fn from_measure(measure: &EmpiricalMeasure, t: u32, policy: ThresholdPolicy) -> Result<Self> {
        let basis = enumerate_basis(measure.dim(), t)?;
        build_evaluator(&empirical_moment_matrix(measure, &basis)?, policy)
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.policy
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Largest eigenvalue over smallest retained one.
    pub fn condition(&self) -> f64 {
        self.lambda_max / self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `v^T M^+ v` for a monomial vector `v` laid out in this basis.
    pub fn inverse_score_of(&self, v: &[f64]) -> InverseScore {
        debug_assert_eq!(v.len(), self.basis.len());
        let mut q = 0.0;
        let mut residual: Vec<f64> = v.to_vec();
        for (u, &lambda) in self.eigenvectors.column_iter().zip(&self.eigenvalues) {
            let c: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            q += c * c / lambda;
            for (r, ui) in residual.iter_mut().zip(u.iter()) {
                *r -= c * ui;
            }
        }
        let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let rnorm = residual.iter().map(|a| a * a).sum::<f64>().sqrt();
        if rnorm > OFF_RANGE_TOL * vnorm {
            InverseScore::OffRange
        } else {
            InverseScore::Finite(q)
        }
    }

    /// `Lambda(x)^{-1}` on a plain basis.
    pub fn eval_cf_inverse(&self, x: &[f64]) -> Result<InverseScore> {
        Ok(self.inverse_score_of(&self.basis.eval(x)?))
    }

    /// `Lambda(x)`; zero when `x` is separated from the support by a
    /// polynomial of degree `t`.
    pub fn eval_cf(&self, x: &[f64]) -> Result<f64> {
        Ok(self.eval_cf_inverse(x)?.christoffel())
    }

    /// `Lambda(x, y)^{-1}` on a joint basis.
    pub fn eval_cf_inverse_joint(&self, x: &[f64], y: f64) -> Result<InverseScore> {
        Ok(self.inverse_score_of(&self.basis.eval_joint(x, y)?))
    }

    pub fn eval_cf_joint(&self, x: &[f64], y: f64) -> Result<f64> {
        Ok(self.eval_cf_inverse_joint(x, y)?.christoffel())
    }

    /// Orthonormal polynomials spanning the retained subspace.
    pub fn orthonormal_polynomials(&self) -> OrthonormalFamily {
        let r = self.rank();
        let s = self.basis.len();
        let mut coefficients = DMatrix::zeros(r, s);
        for (k, (u, &lambda)) in self.eigenvectors.column_iter().zip(&self.eigenvalues).enumerate() {
            let scale = lambda.sqrt().recip();
            for i in 0..s {
                coefficients[(k, i)] = u[i] * scale;
            }
        }
        OrthonormalFamily { basis: self.basis.clone(), coefficients }
    }
}

/// Coefficients (rows) of polynomials `P_k = lambda_k^{-1/2} u_k^T v(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthonormalFamily {
    basis: MonomialBasis,
    coefficients: DMatrix<f64>,
}

impl OrthonormalFamily {
    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    /// `rank x basis.len()` coefficient table.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.nrows() == 0
    }

    /// `(P_0(x), ..., P_{r-1}(x))`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = DVector::from_vec(self.basis.eval(x)?);
        Ok((&self.coefficients * v).iter().copied().collect())
    }

    pub fn eval_joint(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        let v = DVector::from_vec(self.basis.eval_joint(x, y)?);
        Ok((&self.coefficients * v).iter().copied().collect())
    }
}

/// Minimizer of `p^T M p` subject to `p(x) = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalSolution {
    /// Optimal value; zero when `x` is off range.
    pub value: f64,
    /// Coefficients of the minimizer (or of the vanishing certificate when
    /// off range) in the matrix's basis.
    pub coefficients: Vec<f64>,
    pub off_range: bool,
}

/// A minimizer whose Rayleigh quotient `p^T M p / |p|^2` is below
/// `OFF_RANGE_RAYLEIGH * trace(M)` lies in the null space up to rounding.
const OFF_RANGE_RAYLEIGH: f64 = 1e-12;
const REDUCED_SOLVE_REL: f64 = 1e-10;

/// Solves the constrained quadratic program directly, without the
/// eigendecomposition used by [`ChristoffelEvaluator`].
///
/// Null-space method: `p = v/|v|^2 + Z z` where the columns of `Z` are an
/// orthonormal basis of `v`'s orthogonal complement (from a Householder
/// reflector), and `z` is the minimum-norm solution of
/// `Z^T M Z z = -Z^T M v/|v|^2`. The returned `p` is then the
/// minimum-norm minimizer, `Lambda * M^+ v` when `x` is on range.
pub fn variational_eval(m: &MomentMatrix, x: &[f64]) -> Result<VariationalSolution> {
    let v = m.basis().eval(x)?;
    Ok(variational_from_features(m.entries(), &v))
}

pub fn variational_eval_joint(m: &MomentMatrix, x: &[f64], y: f64) -> Result<VariationalSolution> {
    let v = m.basis().eval_joint(x, y)?;
    Ok(variational_from_features(m.entries(), &v))
}

fn variational_from_features(m: &DMatrix<f64>, v: &[f64]) -> VariationalSolution {
    let s = v.len();
    let v = DVector::from_column_slice(v);
    let vv = v.norm_squared();
    let p0 = &v / vv;

    let p = if s == 1 {
        p0
    } else {
        // Householder u = v + sign(v0)|v| e0; H = I - 2uu^T/u^Tu.
        let mut u = v.clone();
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        u[0] += sign * vv.sqrt();
        let uu = u.norm_squared();
        let mut z_basis = DMatrix::zeros(s, s - 1);
        for j in 1..s {
            for i in 0..s {
                let delta = if i == j { 1.0 } else { 0.0 };
                z_basis[(i, j - 1)] = delta - 2.0 * u[i] * u[j] / uu;
            }
        }
        let mz = m * &z_basis;
        let reduced = z_basis.transpose() * &mz;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let rhs = -(mz.transpose() * &p0);
        // min-norm solve through the reduced matrix's own eigenpairs
        let eig = reduced.symmetric_eigen();
        let cut = REDUCED_SOLVE_REL * eig.eigenvalues.max().max(0.0);
        let mut z = DVector::zeros(s - 1);
        for (w, &mu) in eig.eigenvectors.column_iter().zip(eig.eigenvalues.iter()) {
            if mu > cut && mu > 0.0 {
                z += w * (w.dot(&rhs) / mu);
            }
        }
        p0 + z_basis * z
    };

    let objective = p.dot(&(m * &p)).max(0.0);
    let off_range = objective <= OFF_RANGE_RAYLEIGH * m.trace().max(0.0) * p.norm_squared();
    VariationalSolution {
        value: if off_range { 0.0 } else { objective },
        coefficients: p.iter().copied().collect(),
        off_range,
    }
}
