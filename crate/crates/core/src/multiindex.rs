//! Monomial bases over `R^n` and over the joint space `R^n x {1..m}`.
//!
//! All bases are listed in graded lexicographic order: terms are grouped by
//! total degree, and within a degree the exponent vectors are sorted in
//! decreasing lexicographic order (`x1` before `x2`, the class variable `y`
//! last). Moment matrices and monomial vectors share this order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector of a monomial `x^alpha`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Total degree `|alpha|`.
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

/// A joint monomial `x^alpha y^k`. Plain bases always have `y_power == 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Term {
    pub alpha: MultiIndex,
    pub y_power: u32,
}

impl Term {
    pub fn degree(&self) -> u32 {
        self.alpha.degree() + self.y_power
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BasisKind {
    /// All `x^alpha` with `|alpha| <= t`.
    Plain,
    /// `x^alpha y^k` with `k <= m - 1` and `|alpha| + k <= t`.
    Variety { classes: usize },
    /// `x^alpha y^k` with `|alpha| <= t` and `k <= m - 1`.
    Tensor { classes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub n: usize,
    pub t: u32,
    #[serde(flatten)]
    pub kind: BasisKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BasisDescriptor", into = "BasisDescriptor")]
pub struct MonomialBasis {
    n: usize,
    t: u32,
    kind: BasisKind,
    terms: Vec<Term>,
}

/// `C(n + t, n)`, the number of monomials of degree at most `t` in `n` variables.
pub fn basis_size(n: usize, t: u32) -> usize {
    // Multiplicative form keeps every intermediate an exact binomial.
    let mut acc: u128 = 1;
    for i in 1..=t as u128 {
        acc = acc * (n as u128 + i) / i;
    }
    acc as usize
}

/// Exponent vectors of length `len` summing to `degree`, in decreasing
/// lexicographic order.
fn compositions(len: usize, degree: u32, out: &mut Vec<Vec<u32>>) {
    fn rec(prefix: &mut Vec<u32>, remaining: u32, slots: usize, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=remaining).rev() {
            prefix.push(first);
            rec(prefix, remaining - first, slots - 1, out);
            prefix.pop();
        }
    }
    if len == 0 {
        if degree == 0 {
            out.push(Vec::new());
        }
        return;
    }
    rec(&mut Vec::with_capacity(len), degree, len, out);
}

/// Plain basis of `R[x]_t` in graded lexicographic order.
pub fn enumerate_basis(n: usize, t: u32) -> Result<MonomialBasis> {
    if n == 0 {
        return Err(Error::invalid("dimension n must be at least 1"));
    }
    let mut terms = Vec::with_capacity(basis_size(n, t));
    let mut buf = Vec::new();
    for d in 0..=t {
        buf.clear();
        compositions(n, d, &mut buf);
        terms.extend(buf.drain(..).map(|e| Term { alpha: MultiIndex::new(e), y_power: 0 }));
    }
    Ok(MonomialBasis { n, t, kind: BasisKind::Plain, terms })
}

fn enumerate_joint(n: usize, max_total: u32, keep: impl Fn(u32, u32) -> bool) -> Vec<Term> {
    let mut terms = Vec::new();
    let mut buf = Vec::new();
    for d in 0..=max_total {
        buf.clear();
        compositions(n + 1, d, &mut buf);
        for mut e in buf.drain(..) {
            let k = e.pop().expect("n + 1 >= 1 entries");
            let alpha = MultiIndex::new(e);
            if keep(alpha.degree(), k) {
                terms.push(Term { alpha, y_power: k });
            }
        }
    }
    terms
}

fn check_joint_args(n: usize, classes: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("dimension n must be at least 1"));
    }
    if classes == 0 {
        return Err(Error::invalid("class count m must be at least 1"));
    }
    Ok(())
}

/// The set `{x^alpha y^k : k <= m-1, |alpha| + k <= t}`, a monomial basis of
/// polynomials of degree at most `t` on `R^n x {1..m}`.
///
/// `m = 1` is accepted and yields the plain basis (with `k = 0` throughout).
pub fn enumerate_variety_basis(n: usize, t: u32, classes: usize) -> Result<MonomialBasis> {
    check_joint_args(n, classes)?;
    if (t as usize) + 1 < classes {
        log::warn!("variety basis with t={t} < m-1={}: not every class indicator is representable", classes - 1);
    }
    let max_k = (classes - 1) as u32;
    let terms = enumerate_joint(n, t, |a, k| k <= max_k && a + k <= t);
    Ok(MonomialBasis { n, t, kind: BasisKind::Variety { classes }, terms })
}

/// Tensor basis of `R[x]_t (x) R[y]_{m-1}`; size `m * C(n+t, n)`.
pub fn enumerate_tensor_basis(n: usize, t: u32, classes: usize) -> Result<MonomialBasis> {
    check_joint_args(n, classes)?;
    let max_k = (classes - 1) as u32;
    let terms = enumerate_joint(n, t + max_k, |a, k| k <= max_k && a <= t);
    Ok(MonomialBasis { n, t, kind: BasisKind::Tensor { classes }, terms })
}

impl MonomialBasis {
    pub fn from_descriptor(d: BasisDescriptor) -> Result<Self> {
        match d.kind {
            BasisKind::Plain => enumerate_basis(d.n, d.t),
            BasisKind::Variety { classes } => enumerate_variety_basis(d.n, d.t, classes),
            BasisKind::Tensor { classes } => enumerate_tensor_basis(d.n, d.t, classes),
        }
    }

    pub fn descriptor(&self) -> BasisDescriptor {
        BasisDescriptor { n: self.n, t: self.t, kind: self.kind }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.t
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn is_joint(&self) -> bool {
        !matches!(self.kind, BasisKind::Plain)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn max_x_power(&self) -> usize {
        self.terms.iter().flat_map(|t| t.alpha.exponents.iter().copied()).max().unwrap_or(0) as usize
    }

    fn max_y_power(&self) -> usize {
        self.terms.iter().map(|t| t.y_power).max().unwrap_or(0) as usize
    }

    /// Monomial vector `v_t(x)`; the class variable, if any, is set to zero.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.is_joint() {
            return Err(Error::invalid("joint basis needs a class coordinate; use eval_joint"));
        }
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, 0.0, &mut out)?;
        Ok(out)
    }

    /// Joint monomial vector at `(x, y)`.
    pub fn eval_joint(&self, x: &[f64], y: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, y, &mut out)?;
        Ok(out)
    }

    /// Writes the monomial vector at `(x, y)` into `out` (length `self.len()`).
    /// `0^0 = 1`.
    pub fn eval_into(&self, x: &[f64], y: f64, out: &mut [f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        debug_assert_eq!(out.len(), self.len());
        let px = self.max_x_power() + 1;
        let mut powers = vec![1.0; self.n * px];
        for (i, &xi) in x.iter().enumerate() {
            let row = &mut powers[i * px..(i + 1) * px];
            for d in 1..px {
                row[d] = row[d - 1] * xi;
            }
        }
        let mut ypow = vec![1.0; self.max_y_power() + 1];
        for d in 1..ypow.len() {
            ypow[d] = ypow[d - 1] * y;
        }
        for (slot, term) in out.iter_mut().zip(&self.terms) {
            let mut v = ypow[term.y_power as usize];
            for (i, &e) in term.alpha.exponents.iter().enumerate() {
                v *= powers[i * px + e as usize];
            }
            *slot = v;
        }
        Ok(())
    }
}

impl TryFrom<BasisDescriptor> for MonomialBasis {
    type Error = Error;

    fn try_from(d: BasisDescriptor) -> Result<Self> {
        Self::from_descriptor(d)
    }
}

impl From<MonomialBasis> for BasisDescriptor {
    fn from(b: MonomialBasis) -> Self {
        b.descriptor()
    }
}
