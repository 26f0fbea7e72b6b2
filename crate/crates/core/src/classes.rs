//! Interpolation conditions for smooth strongly convex functions.
//!
//! A finite data set `(x_i, g_i, f_i)` is consistent with some function of
//! the class exactly when every ordered pair satisfies the interpolation
//! inequality. The same inequality, lifted over the Gram basis, yields the
//! class constraints of the estimation problem.

use num::{One, Signed, Zero};

use crate::expr::{Basis, ConstraintAtom, ScalarExpr, Sense, Tag, VectorExpr};
use crate::rat::{to_f64, Rat};

#[derive(Debug, thiserror::Error)]
pub enum ClassError {
    #[error("invalid class: need 0 <= mu < L, got mu={mu}, L={l}")]
    InvalidClass { mu: String, l: String },
    #[error("data vectors have mismatched dimensions")]
    DimensionMismatch,
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
}

/// The class of L-smooth, mu-strongly-convex functions.
///
/// `l: None` encodes L = infinity; the smoothness terms then vanish exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionClassSpec {
    pub mu: Rat,
    pub l: Option<Rat>,
}

impl FunctionClassSpec {
    pub fn new(mu: Rat, l: Option<Rat>) -> Result<Self, ClassError> {
        let ok = !mu.is_negative() && l.as_ref().map_or(true, |l| &mu < l);
        if !ok {
            return Err(ClassError::InvalidClass {
                mu: mu.to_string(),
                l: l.map_or_else(|| "inf".into(), |l| l.to_string()),
            });
        }
        Ok(FunctionClassSpec { mu, l })
    }

    /// mu / L, zero when L is infinite.
    pub fn kappa(&self) -> Rat {
        match &self.l {
            Some(l) => self.mu.clone() / l,
            None => Rat::zero(),
        }
    }

    /// Coefficient of the squared gradient-difference term: 1/(2L).
    pub fn grad_coeff(&self) -> Rat {
        match &self.l {
            Some(l) => (Rat::from_integer(2.into()) * l).recip(),
            None => Rat::zero(),
        }
    }

    /// Coefficient of the squared strong-convexity term: mu / (2(1 - mu/L)).
    pub fn sc_coeff(&self) -> Rat {
        if self.mu.is_zero() {
            return Rat::zero();
        }
        let two = Rat::from_integer(2.into());
        self.mu.clone() / (two * (Rat::one() - self.kappa()))
    }

    /// 1/L, zero when L is infinite.
    pub fn inv_l(&self) -> Rat {
        self.l.as_ref().map_or_else(Rat::zero, |l| l.recip())
    }

    pub fn depends_on_params(&self) -> bool {
        !self.mu.is_zero() || self.l.is_some()
    }
}

/// One interpolation point: a position over the basis, a gradient label,
/// and a function-value coordinate.
#[derive(Debug, Clone)]
pub struct Point {
    /// Display name ("*", "0", "1", "y1", ...).
    pub name: String,
    pub position: VectorExpr,
    /// Gradient as a vector expression (zero for the optimizer).
    pub gradient: VectorExpr,
    /// Index of the point's function value among the scalar coordinates.
    pub fval: usize,
    /// Ordinal of the algorithm step after which the point's oracle values
    /// are observed (0 for the initial point and the optimizer).
    pub observed_at: usize,
}

impl Point {
    pub fn star() -> Self {
        Point {
            name: "*".into(),
            position: VectorExpr::label(crate::expr::BasisLabel::Star),
            gradient: VectorExpr::zero(),
            fval: 0,
            observed_at: 0,
        }
    }

    fn is_star(&self) -> bool {
        self.name == "*"
    }
}

/// An ordered point set over a shared basis; the optimizer comes first.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<Point>,
}

/// Builds the interpolation atom for the ordered pair (i, j):
///
/// `f_j - f_i + <g_j, x_i - x_j> + (1/2L)|g_i - g_j|^2
///  + mu/(2(1 - mu/L)) |x_i - g_i/L - x_j + g_j/L|^2 <= 0`.
pub fn interpolation_atom(
    class: &FunctionClassSpec,
    basis: &Basis,
    pi: &Point,
    pj: &Point,
) -> Result<ConstraintAtom, ClassError> {
    let fj = ScalarExpr::fval(basis, pj.fval)?;
    let fi = ScalarExpr::fval(basis, pi.fval)?;
    let dx = pi.position.sub(&pj.position);
    let cross = ScalarExpr::inner_product(basis, &pj.gradient, &dx)?;
    let dg = pi.gradient.sub(&pj.gradient);
    let grad_sq = ScalarExpr::inner_product(basis, &dg, &dg)?;
    let prox = dx.sub(&dg.scale(&class.inv_l()));
    let sc_sq = ScalarExpr::inner_product(basis, &prox, &prox)?;
    let expr = ScalarExpr::combine(
        basis,
        &[
            (Rat::one(), &fj),
            (-Rat::one(), &fi),
            (Rat::one(), &cross),
            (class.grad_coeff(), &grad_sq),
            (class.sc_coeff(), &sc_sq),
        ],
    )?;
    let mut pretty = format!(
        "f({j}) - f({i}) + <g({j}), x({i}) - x({j})>",
        i = pi.name,
        j = pj.name
    );
    if !class.grad_coeff().is_zero() {
        pretty += &format!(
            " + (1/(2L))*|g({}) - g({})|^2",
            pi.name, pj.name
        );
    }
    if !class.sc_coeff().is_zero() {
        pretty += &format!(
            " + (mu/(2(1-mu/L)))*|x({i}) - g({i})/L - x({j}) + g({j})/L|^2",
            i = pi.name,
            j = pj.name
        );
    }
    pretty += " <= 0";
    Ok(ConstraintAtom {
        id: format!("IC({},{})", pi.name, pj.name),
        expr,
        sense: Sense::Leq,
        tag: Tag::Class,
        pretty,
        step: pi.observed_at.max(pj.observed_at),
        depends_on_params: class.depends_on_params(),
        touches_unknown: pi.is_star() || pj.is_star(),
    })
}

/// One atom per ordered pair of distinct points.
pub fn interpolation_constraints(
    class: &FunctionClassSpec,
    basis: &Basis,
    pts: &PointSet,
) -> Result<Vec<ConstraintAtom>, ClassError> {
    let mut atoms = Vec::new();
    for pi in &pts.points {
        for pj in &pts.points {
            if pi.name == pj.name {
                continue;
            }
            atoms.push(interpolation_atom(class, basis, pi, pj)?);
        }
    }
    Ok(atoms)
}

/// Result of a numerical membership test.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub ok: bool,
    /// Largest violation of any ordered-pair inequality (negative when all hold strictly).
    pub worst_violation: f64,
    /// Pair achieving the worst violation, when at least one pair exists.
    pub worst_pair: Option<(usize, usize)>,
}

/// Checks whether concrete data `(x_i, g_i, f_i)` is interpolable by the class.
pub fn membership_check(
    data: &[(Vec<f64>, Vec<f64>, f64)],
    class: &FunctionClassSpec,
    tol: f64,
) -> Result<MembershipReport, ClassError> {
    let dim = data.first().map_or(0, |(x, _, _)| x.len());
    if data.iter().any(|(x, g, _)| x.len() != dim || g.len() != dim) {
        return Err(ClassError::DimensionMismatch);
    }
    let a = to_f64(&class.grad_coeff());
    let b = to_f64(&class.sc_coeff());
    let inv_l = to_f64(&class.inv_l());
    let mut worst = f64::NEG_INFINITY;
    let mut worst_pair = None;
    for (i, (xi, gi, fi)) in data.iter().enumerate() {
        for (j, (xj, gj, fj)) in data.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut val = fj - fi;
            let mut grad_sq = 0.0;
            let mut sc_sq = 0.0;
            for d in 0..dim {
                let dx = xi[d] - xj[d];
                let dg = gi[d] - gj[d];
                val += gj[d] * dx;
                grad_sq += dg * dg;
                let p = dx - inv_l * dg;
                sc_sq += p * p;
            }
            val += a * grad_sq + b * sc_sq;
            if val > worst {
                worst = val;
                worst_pair = Some((i, j));
            }
        }
    }
    if worst_pair.is_none() {
        worst = 0.0; // vacuously true
    }
    Ok(MembershipReport {
        ok: worst <= tol,
        worst_violation: worst,
        worst_pair,
    })
}
