//! Symbolic algebra over a Gram basis.
//!
//! Every quantity handled by the analysis is either linear in function
//! values or quadratic in points/gradients. Quadratic terms are linearized
//! over a fixed ordered basis of vectors, so each scalar expression is a
//! triple `(v, M, c)`: a vector over function-value coordinates, a symmetric
//! matrix over the Gram basis, and a constant offset.

use std::collections::BTreeMap;
use std::fmt;

use num::{One, Zero};

use crate::rat::{to_f64, Rat};

/// A vector in the Gram basis of the lifted problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BasisLabel {
    /// The optimizer `x_*`. Its gradient is identically zero and never a basis element.
    Star,
    /// The initial iterate `x_0`.
    Init,
    /// A free (implicitly defined) iterate, by point index.
    FreePoint(usize),
    /// The gradient queried at the point with the given index.
    Gradient(usize),
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Star => write!(f, "x_*"),
            BasisLabel::Init => write!(f, "x_0"),
            BasisLabel::FreePoint(i) => write!(f, "p{}", i),
            BasisLabel::Gradient(i) => write!(f, "g{}", i),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ExprError {
    #[error("label {0} is not part of the basis")]
    UnknownLabel(String),
    #[error("function-value index {0} is not registered (dimension {1})")]
    UnknownFval(usize, usize),
    #[error("dimension mismatch between expressions")]
    DimensionMismatch,
}

/// The ordered Gram basis together with the registered scalar coordinates.
///
/// Scalar coordinates are the function values `(f_*, f_0, ..)` followed by
/// any epigraph scalars appended by the problem builder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    labels: Vec<BasisLabel>,
    index: BTreeMap<BasisLabel, usize>,
    /// Number of function-value coordinates (including `f_*` at index 0).
    pub fvals: usize,
    /// Number of epigraph scalars appended after the function values.
    pub epigraph: usize,
}

impl Basis {
    pub fn new(labels: Vec<BasisLabel>, fvals: usize) -> Self {
        let index = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        Basis {
            labels,
            index,
            fvals,
            epigraph: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Total scalar dimension (function values plus epigraph scalars).
    pub fn sdim(&self) -> usize {
        self.fvals + self.epigraph
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    pub fn position(&self, label: BasisLabel) -> Result<usize, ExprError> {
        self.index
            .get(&label)
            .copied()
            .ok_or_else(|| ExprError::UnknownLabel(label.to_string()))
    }

    pub fn contains(&self, label: BasisLabel) -> bool {
        self.index.contains_key(&label)
    }
}

/// A finitely supported linear combination of basis vectors.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VectorExpr {
    coeffs: BTreeMap<BasisLabel, Rat>,
}

impl VectorExpr {
    pub fn zero() -> Self {
        VectorExpr::default()
    }

    pub fn label(l: BasisLabel) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(l, Rat::one());
        VectorExpr { coeffs }
    }

    pub fn coeff(&self, l: BasisLabel) -> Rat {
        self.coeffs.get(&l).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&BasisLabel, &Rat)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_term(&mut self, l: BasisLabel, w: Rat) {
        let entry = self.coeffs.entry(l).or_insert_with(Rat::zero);
        *entry += w;
        if entry.is_zero() {
            self.coeffs.remove(&l);
        }
    }

    pub fn add(&self, other: &VectorExpr) -> VectorExpr {
        let mut out = self.clone();
        for (&l, w) in other.terms() {
            out.add_term(l, w.clone());
        }
        out
    }

    pub fn sub(&self, other: &VectorExpr) -> VectorExpr {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, w: &Rat) -> VectorExpr {
        if w.is_zero() {
            return VectorExpr::zero();
        }
        VectorExpr {
            coeffs: self
                .coeffs
                .iter()
                .map(|(&l, c)| (l, c.clone() * w))
                .collect(),
        }
    }

    /// Dense coefficient vector over the given basis.
    pub fn dense(&self, basis: &Basis) -> Result<Vec<Rat>, ExprError> {
        let mut out = vec![Rat::zero(); basis.len()];
        for (&l, w) in self.terms() {
            out[basis.position(l)?] = w.clone();
        }
        Ok(out)
    }

    /// Evaluate on concrete vectors (one ambient vector per basis position).
    pub fn eval(&self, basis: &Basis, vectors: &[Vec<f64>]) -> Result<Vec<f64>, ExprError> {
        let dim = vectors.first().map_or(0, |v| v.len());
        let mut out = vec![0.0; dim];
        for (&l, w) in self.terms() {
            let p = basis.position(l)?;
            let wf = to_f64(w);
            for (o, x) in out.iter_mut().zip(&vectors[p]) {
                *o += wf * x;
            }
        }
        Ok(out)
    }
}

/// The lifted form of a scalar quantity: `<F, v> + <G, M> + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarExpr {
    /// Coefficients over the scalar coordinates (function values, then epigraph).
    pub v: Vec<Rat>,
    /// Symmetric matrix over the Gram basis, stored densely row-major.
    pub m: Vec<Vec<Rat>>,
    /// Constant offset.
    pub c: Rat,
}

impl ScalarExpr {
    pub fn zero(basis: &Basis) -> Self {
        let n = basis.len();
        ScalarExpr {
            v: vec![Rat::zero(); basis.sdim()],
            m: vec![vec![Rat::zero(); n]; n],
            c: Rat::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_zero()
            && self.v.iter().all(Zero::is_zero)
            && self.m.iter().flatten().all(Zero::is_zero)
    }

    pub fn gram_dim(&self) -> usize {
        self.m.len()
    }

    /// Unit coefficient on scalar coordinate `index` (function value or epigraph).
    pub fn fval(basis: &Basis, index: usize) -> Result<Self, ExprError> {
        if index >= basis.sdim() {
            return Err(ExprError::UnknownFval(index, basis.sdim()));
        }
        let mut e = ScalarExpr::zero(basis);
        e.v[index] = Rat::one();
        Ok(e)
    }

    pub fn constant(basis: &Basis, c: Rat) -> Self {
        let mut e = ScalarExpr::zero(basis);
        e.c = c;
        e
    }

    /// Symmetrized inner product `<a, b>` lifted over the Gram basis:
    /// `M[p,q] = (a_p b_q + a_q b_p) / 2`.
    pub fn inner_product(
        basis: &Basis,
        a: &VectorExpr,
        b: &VectorExpr,
    ) -> Result<Self, ExprError> {
        let mut e = ScalarExpr::zero(basis);
        let half = Rat::new(1.into(), 2.into());
        for (&la, wa) in a.terms() {
            let p = basis.position(la)?;
            for (&lb, wb) in b.terms() {
                let q = basis.position(lb)?;
                let w = wa.clone() * wb * &half;
                e.m[p][q] += &w;
                e.m[q][p] += &w;
            }
        }
        Ok(e)
    }

    pub fn add_scaled(&mut self, w: &Rat, other: &ScalarExpr) -> Result<(), ExprError> {
        if self.v.len() != other.v.len() || self.m.len() != other.m.len() {
            return Err(ExprError::DimensionMismatch);
        }
        for (a, b) in self.v.iter_mut().zip(&other.v) {
            *a += b.clone() * w;
        }
        for (ra, rb) in self.m.iter_mut().zip(&other.m) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b.clone() * w;
            }
        }
        self.c += other.c.clone() * w;
        Ok(())
    }

    /// Weighted sum of scalar expressions.
    pub fn combine(basis: &Basis, terms: &[(Rat, &ScalarExpr)]) -> Result<Self, ExprError> {
        let mut out = ScalarExpr::zero(basis);
        for (w, e) in terms {
            out.add_scaled(w, e)?;
        }
        Ok(out)
    }

    pub fn scale(&self, w: &Rat) -> ScalarExpr {
        let mut out = self.clone();
        for a in out.v.iter_mut() {
            *a *= w;
        }
        for row in out.m.iter_mut() {
            for a in row.iter_mut() {
                *a *= w;
            }
        }
        out.c *= w;
        out
    }

    pub fn sub(&self, other: &ScalarExpr) -> Result<ScalarExpr, ExprError> {
        let mut out = self.clone();
        out.add_scaled(&-Rat::one(), other)?;
        Ok(out)
    }

    /// Evaluate on concrete data: one ambient vector per basis position and
    /// one scalar per registered coordinate. Equals `<F,v> + <G,M> + c` with
    /// `G` the Gram matrix of the assignment.
    pub fn eval(&self, vectors: &[Vec<f64>], scalars: &[f64]) -> f64 {
        assert_eq!(vectors.len(), self.m.len());
        assert_eq!(scalars.len(), self.v.len());
        let mut acc = to_f64(&self.c);
        for (w, f) in self.v.iter().zip(scalars) {
            acc += to_f64(w) * f;
        }
        for (p, row) in self.m.iter().enumerate() {
            for (q, w) in row.iter().enumerate() {
                if !w.is_zero() {
                    let dot: f64 = vectors[p].iter().zip(&vectors[q]).map(|(a, b)| a * b).sum();
                    acc += to_f64(w) * dot;
                }
            }
        }
        acc
    }

    /// Evaluate `<F,v> + <G,M> + c` on a lifted point (F, G).
    pub fn eval_fg(&self, f: &[f64], g: &nalgebra::DMatrix<f64>) -> f64 {
        assert_eq!(f.len(), self.v.len());
        assert_eq!(g.nrows(), self.m.len());
        let mut acc = to_f64(&self.c);
        for (w, fv) in self.v.iter().zip(f) {
            acc += to_f64(w) * fv;
        }
        for (p, row) in self.m.iter().enumerate() {
            for (q, w) in row.iter().enumerate() {
                if !w.is_zero() {
                    acc += to_f64(w) * g[(p, q)];
                }
            }
        }
        acc
    }

    pub fn v_f64(&self) -> Vec<f64> {
        self.v.iter().map(to_f64).collect()
    }

    pub fn m_f64(&self) -> nalgebra::DMatrix<f64> {
        let n = self.m.len();
        nalgebra::DMatrix::from_fn(n, n, |i, j| to_f64(&self.m[i][j]))
    }
}

/// Inequality sense of a constraint atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    /// expression <= 0
    Leq,
    /// expression == 0
    Eq,
}

/// Provenance of a constraint atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Tag {
    Class,
    Algorithm,
    Initialization,
    /// Epigraph rows introduced when encoding a min-type metric.
    Metric,
}

/// One constraint row of the lifted problem.
#[derive(Debug, Clone)]
pub struct ConstraintAtom {
    pub id: String,
    pub expr: ScalarExpr,
    pub sense: Sense,
    pub tag: Tag,
    /// Human-readable rendering used in proof documents.
    pub pretty: String,
    /// Largest observation ordinal among the points the atom touches.
    pub step: usize,
    /// Whether the atom's coefficients involve the class parameters.
    pub depends_on_params: bool,
    /// Whether the atom touches the optimizer or the optimal value.
    pub touches_unknown: bool,
}
