//! Assembly of the lifted performance-estimation problem from a
//! (class, method, metric, initialization) quadruple.

use nalgebra::DMatrix;
use num::{One, Signed};

use crate::classes::{
    interpolation_constraints, ClassError, FunctionClassSpec, Point, PointSet,
};
use crate::expr::{
    Basis, BasisLabel, ConstraintAtom, ExprError, ScalarExpr, Sense, Tag, VectorExpr,
};
use crate::methods::{MethodSpec, Position};
use crate::rat::Rat;

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("metric references point {0}, which the method never produces")]
    UnknownPoint(usize),
    #[error("min-type metric needs a nonempty point set")]
    EmptyMetricSet,
    #[error("initialization radius must be positive")]
    NonpositiveRadius,
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Class(#[from] ClassError),
    #[error("Gram matrix has eigenvalue {0:.3e} below -tol")]
    IndefiniteGram(f64),
}

/// What the analysis maximizes.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PerformanceMetric {
    /// f(x_t) - f_*
    FunctionValueGap { at: usize },
    /// |x_t - x_*|^2
    DistanceSquared { at: usize },
    /// |g(x_t)|^2
    GradientNormSquared { at: usize },
    /// min over the listed iterates of |g(x_t)|^2
    MinGradientNormSquared { over: Vec<usize> },
}

/// How far from optimal the method starts.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum InitKind {
    /// |x_0 - x_*|^2 <= R^2
    DistanceSquared,
    /// f(x_0) - f_* <= R^2
    FunctionValueGap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub kind: InitKind,
    pub radius: Rat,
}

impl InitialCondition {
    pub fn new(kind: InitKind, radius: Rat) -> Result<Self, BuildError> {
        if !radius.is_positive() {
            return Err(BuildError::NonpositiveRadius);
        }
        Ok(InitialCondition { kind, radius })
    }
}

/// The assembled lifted problem: maximize `objective` over (F, G) subject to
/// the atoms and `G >= 0`.
#[derive(Debug, Clone)]
pub struct PepProblem {
    pub basis: Basis,
    pub objective: ScalarExpr,
    pub atoms: Vec<ConstraintAtom>,
    /// Interpolation points (optimizer first), sharing the problem basis.
    pub points: PointSet,
    pub class: FunctionClassSpec,
    pub method: MethodSpec,
    pub metric: PerformanceMetric,
    pub init: InitialCondition,
}

/// Renders a vector expression using the method's point names.
fn render_vec(expr: &VectorExpr, names: &[String]) -> String {
    let mut out = String::new();
    for (&label, w) in expr.terms() {
        let name = match label {
            BasisLabel::Star => "x(*)".to_string(),
            BasisLabel::Init => format!("x({})", names[0]),
            BasisLabel::FreePoint(i) => format!("x({})", names[i]),
            BasisLabel::Gradient(i) => format!("g({})", names[i]),
        };
        let sign = if w.is_negative() { "-" } else { "+" };
        if out.is_empty() {
            if w.is_negative() {
                out.push_str("-");
            }
        } else {
            out.push_str(&format!(" {} ", sign));
        }
        let mag = w.abs();
        if mag.is_one() {
            out.push_str(&name);
        } else {
            out.push_str(&format!("{}*{}", mag, name));
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

/// Observation ordinal of the latest point a vector expression touches.
fn latest_step(expr: &VectorExpr, points: &[crate::methods::MethodPoint]) -> usize {
    expr.terms()
        .map(|(&label, _)| match label {
            BasisLabel::Star | BasisLabel::Init => 0,
            BasisLabel::FreePoint(i) | BasisLabel::Gradient(i) => points[i].observed_at,
        })
        .max()
        .unwrap_or(0)
}

fn squared_norm(basis: &Basis, v: &VectorExpr) -> Result<ScalarExpr, ExprError> {
    ScalarExpr::inner_product(basis, v, v)
}

/// Assembles the lifted problem.
///
/// Explicit iterates are substituted by their affine expressions and never
/// appear in the Gram basis; free points stay in the basis and are pinned by
/// the method's algorithm atoms.
pub fn build(
    class: &FunctionClassSpec,
    method: &MethodSpec,
    metric: &PerformanceMetric,
    init: &InitialCondition,
) -> Result<PepProblem, BuildError> {
    let n = method.points.len();
    // Basis: x_*, x_0, then per later point its (free) position and gradient.
    let mut labels = vec![BasisLabel::Star, BasisLabel::Init, BasisLabel::Gradient(0)];
    for (i, pt) in method.points.iter().enumerate().skip(1) {
        if matches!(pt.position, Position::Free) {
            labels.push(BasisLabel::FreePoint(i));
        }
        labels.push(BasisLabel::Gradient(i));
    }
    let mut basis = Basis::new(labels, n + 1);
    if matches!(metric, PerformanceMetric::MinGradientNormSquared { .. }) {
        basis.epigraph = 1;
    }

    // Interpolation points: optimizer plus every method point, with explicit
    // positions substituted.
    let mut points = vec![Point::star()];
    for (i, pt) in method.points.iter().enumerate() {
        let position = match &pt.position {
            Position::Explicit(e) => e.clone(),
            Position::Free => VectorExpr::label(BasisLabel::FreePoint(i)),
        };
        points.push(Point {
            name: pt.name.clone(),
            position,
            gradient: VectorExpr::label(BasisLabel::Gradient(i)),
            fval: i + 1,
            observed_at: pt.observed_at,
        });
    }
    let points = PointSet { points };
    let names: Vec<String> = method.points.iter().map(|p| p.name.clone()).collect();

    let mut atoms = interpolation_constraints(class, &basis, &points)?;

    // Algorithm atoms: <g_t, rhs> with explicit positions substituted into rhs.
    for spec in &method.algo_atoms {
        let grad = VectorExpr::label(BasisLabel::Gradient(spec.grad_point));
        let mut rhs = VectorExpr::zero();
        for (&label, w) in spec.rhs.terms() {
            match label {
                BasisLabel::FreePoint(i) => match &method.points[i].position {
                    Position::Explicit(e) => rhs = rhs.add(&e.scale(w)),
                    Position::Free => rhs.add_term(label, w.clone()),
                },
                other => rhs.add_term(other, w.clone()),
            }
        }
        let expr = ScalarExpr::inner_product(&basis, &grad, &rhs)?;
        let rel = match spec.sense {
            Sense::Eq => "=",
            Sense::Leq => "<=",
        };
        let pretty = format!(
            "<g({}), {}> {} 0",
            names[spec.grad_point],
            render_vec(&rhs, &names),
            rel
        );
        let step = latest_step(&grad, &method.points).max(latest_step(&rhs, &method.points));
        atoms.push(ConstraintAtom {
            id: spec.id.clone(),
            expr,
            sense: spec.sense,
            tag: Tag::Algorithm,
            pretty,
            step,
            depends_on_params: false,
            touches_unknown: false,
        });
    }

    // Objective (and epigraph rows for min-type metrics).
    let resolve = |at: usize| -> Result<&Point, BuildError> {
        points
            .points
            .get(at + 1)
            .ok_or(BuildError::UnknownPoint(at))
    };
    let objective = match metric {
        PerformanceMetric::FunctionValueGap { at } => {
            let p = resolve(*at)?;
            ScalarExpr::fval(&basis, p.fval)?.sub(&ScalarExpr::fval(&basis, 0)?)?
        }
        PerformanceMetric::DistanceSquared { at } => {
            let p = resolve(*at)?;
            let d = p.position.sub(&VectorExpr::label(BasisLabel::Star));
            squared_norm(&basis, &d)?
        }
        PerformanceMetric::GradientNormSquared { at } => {
            let p = resolve(*at)?;
            squared_norm(&basis, &p.gradient)?
        }
        PerformanceMetric::MinGradientNormSquared { over } => {
            if over.is_empty() {
                return Err(BuildError::EmptyMetricSet);
            }
            let s_index = basis.fvals;
            let s = ScalarExpr::fval(&basis, s_index)?;
            for &at in over {
                let p = resolve(at)?;
                let expr = s.sub(&squared_norm(&basis, &p.gradient)?)?;
                atoms.push(ConstraintAtom {
                    id: format!("EPI({})", p.name),
                    expr,
                    sense: Sense::Leq,
                    tag: Tag::Metric,
                    pretty: format!("s - |g({})|^2 <= 0", p.name),
                    step: p.observed_at,
                    depends_on_params: false,
                    touches_unknown: false,
                });
            }
            s
        }
    };

    // Initialization atom.
    let r_sq = init.radius.clone() * &init.radius;
    let init_expr = match init.kind {
        InitKind::DistanceSquared => {
            let d = VectorExpr::label(BasisLabel::Init).sub(&VectorExpr::label(BasisLabel::Star));
            let mut e = squared_norm(&basis, &d)?;
            e.c = -r_sq;
            e
        }
        InitKind::FunctionValueGap => {
            let mut e = ScalarExpr::fval(&basis, 1)?.sub(&ScalarExpr::fval(&basis, 0)?)?;
            e.c = -r_sq;
            e
        }
    };
    let pretty_init = match init.kind {
        InitKind::DistanceSquared => format!("|x(0) - x(*)|^2 <= R^2 with R = {}", init.radius),
        InitKind::FunctionValueGap => format!("f(0) - f(*) <= R^2 with R = {}", init.radius),
    };
    atoms.push(ConstraintAtom {
        id: "INIT".into(),
        expr: init_expr,
        sense: Sense::Leq,
        tag: Tag::Initialization,
        pretty: pretty_init,
        step: 0,
        depends_on_params: false,
        touches_unknown: true,
    });

    debug_assert_eq!(
        atoms.iter().filter(|a| a.tag == Tag::Initialization).count(),
        1
    );
    Ok(PepProblem {
        basis,
        objective,
        atoms,
        points,
        class: class.clone(),
        method: method.clone(),
        metric: metric.clone(),
        init: init.clone(),
    })
}

impl PepProblem {
    pub fn init_atom(&self) -> &ConstraintAtom {
        self.atoms
            .iter()
            .find(|a| a.tag == Tag::Initialization)
            .expect("build emits exactly one initialization atom")
    }

    pub fn atom(&self, id: &str) -> Option<&ConstraintAtom> {
        self.atoms.iter().find(|a| a.id == id)
    }

    /// Canonical textual serialization used for fingerprinting.
    fn canonical_text(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        write!(s, "basis:").unwrap();
        for l in self.basis.labels() {
            write!(s, " {}", l).unwrap();
        }
        write!(s, "\nfvals: {} epigraph: {}\n", self.basis.fvals, self.basis.epigraph).unwrap();
        let dump = |name: &str, e: &ScalarExpr, s: &mut String| {
            write!(s, "{} v=[", name).unwrap();
            for w in &e.v {
                write!(s, "{},", w).unwrap();
            }
            write!(s, "] m=[").unwrap();
            for row in &e.m {
                for w in row {
                    write!(s, "{},", w).unwrap();
                }
                write!(s, ";").unwrap();
            }
            write!(s, "] c={}\n", e.c).unwrap();
        };
        dump("objective", &self.objective, &mut s);
        for a in &self.atoms {
            let sense = match a.sense {
                Sense::Leq => "<=",
                Sense::Eq => "=",
            };
            dump(&format!("atom {} {} {:?}", a.id, sense, a.tag), &a.expr, &mut s);
        }
        s
    }

    /// SHA-256 fingerprint of the assembled problem data.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.canonical_text().as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{:02x}", b)).collect()
    }
}

/// One reconstructed interpolation point of a worst-case instance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReconstructedPoint {
    pub name: String,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub f: f64,
}

/// A concrete worst-case instance realizing the SDP solution.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WorstCase {
    /// Ambient dimension of the reconstruction (rank of G).
    pub dim: usize,
    pub points: Vec<ReconstructedPoint>,
}

impl WorstCase {
    /// Data triples in the form expected by `membership_check`.
    pub fn triples(&self) -> Vec<(Vec<f64>, Vec<f64>, f64)> {
        self.points
            .iter()
            .map(|p| (p.x.clone(), p.g.clone(), p.f))
            .collect()
    }
}

/// Factorizes `G = P^T P` and reads off concrete positions, gradients and
/// function values for every interpolation point (optimizer first).
pub fn reconstruct_worst_case(
    problem: &PepProblem,
    g: &DMatrix<f64>,
    f: &[f64],
    tol: f64,
) -> Result<WorstCase, BuildError> {
    let n = problem.basis.len();
    assert_eq!(g.nrows(), n);
    let sym = (g + g.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    if let Some(min) = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(None::<f64>, |m, v| Some(m.map_or(v, |m| m.min(v))))
    {
        if min < -tol {
            return Err(BuildError::IndefiniteGram(min));
        }
    }
    // Rows of P: one coordinate axis per retained eigenvalue.
    let kept: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > tol).collect();
    let dim = kept.len().max(1);
    let mut coords = vec![vec![0.0; dim]; n];
    for (axis, &e) in kept.iter().enumerate() {
        let scale = eig.eigenvalues[e].max(0.0).sqrt();
        for (b, c) in coords.iter_mut().enumerate() {
            c[axis] = scale * eig.eigenvectors[(b, e)];
        }
    }
    let mut points = Vec::new();
    for p in &problem.points.points {
        let x = p.position.eval(&problem.basis, &coords)?;
        let gvec = p.gradient.eval(&problem.basis, &coords)?;
        points.push(ReconstructedPoint {
            name: p.name.clone(),
            x,
            g: gvec,
            f: f[p.fval],
        });
    }
    Ok(WorstCase { dim, points })
}
