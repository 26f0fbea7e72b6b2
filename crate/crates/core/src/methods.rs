//! Method descriptions: explicit gradient-span updates or implicitly
//! constrained iterates (line search, greedy span minimization).

use num::Zero;

use crate::expr::{BasisLabel, Sense, VectorExpr};
use crate::rat::{ratio, Rat};

#[derive(Debug, thiserror::Error)]
pub enum MethodError {
    #[error("step {t} references gradient {s}, which is queried later")]
    FutureGradient { t: usize, s: usize },
    #[error("coefficient table is not lower-triangular: row {t} has {len} entries")]
    MalformedTable { t: usize, len: usize },
    #[error("method has no explicit coefficient table")]
    NotExplicit,
}

/// Position of an interpolation point within the method.
#[derive(Debug, Clone)]
pub enum Position {
    /// Affine combination of the initial point and earlier gradients.
    Explicit(VectorExpr),
    /// Kept in the Gram basis; pinned down only through algorithm atoms.
    Free,
}

/// One point queried or evaluated by the method.
#[derive(Debug, Clone)]
pub struct MethodPoint {
    /// Display name ("0", "1", .., "y1", ..).
    pub name: String,
    pub position: Position,
    /// Ordinal of the query event after which this point's oracle data is
    /// available; drives the step grouping of constraints.
    pub observed_at: usize,
}

/// An algorithm constraint of the form `<g_t, rhs> (<=|=) 0`.
#[derive(Debug, Clone)]
pub struct AlgoAtomSpec {
    pub id: String,
    /// Point index whose gradient forms the left operand.
    pub grad_point: usize,
    pub rhs: VectorExpr,
    pub sense: Sense,
}

/// Lower-triangular step coefficients: `x_t = x_0 - sum_s gamma[t-1][s] g_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable {
    pub gamma: Vec<Vec<Rat>>,
}

impl CoefficientTable {
    pub fn new(gamma: Vec<Vec<Rat>>) -> Result<Self, MethodError> {
        for (i, row) in gamma.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(MethodError::MalformedTable {
                    t: i + 1,
                    len: row.len(),
                });
            }
        }
        Ok(CoefficientTable { gamma })
    }

    pub fn iterations(&self) -> usize {
        self.gamma.len()
    }
}

#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub name: String,
    /// Iteration count T.
    pub t: usize,
    /// All interpolation points in basis order; index 0 is `x_0`.
    pub points: Vec<MethodPoint>,
    pub algo_atoms: Vec<AlgoAtomSpec>,
    /// Point indices of the iterates `x_0 .. x_T`.
    pub iterates: Vec<usize>,
    /// Point indices whose gradients drive the updates, in query order.
    pub queries: Vec<usize>,
    /// Momentum scalars `lambda_1 .. lambda_T` (accelerated methods only).
    pub momentum: Vec<f64>,
}

impl MethodSpec {
    pub fn final_iterate(&self) -> usize {
        *self.iterates.last().expect("method has at least x_0")
    }

    /// Extracts the step coefficients of the iterates over the query
    /// gradients. Fails when any iterate is a free point.
    pub fn coefficient_table(&self) -> Result<CoefficientTable, MethodError> {
        let mut gamma = Vec::new();
        for (t, &pt) in self.iterates.iter().enumerate().skip(1) {
            let pos = match &self.points[pt].position {
                Position::Explicit(e) => e,
                Position::Free => return Err(MethodError::NotExplicit),
            };
            let mut row = Vec::new();
            for &q in self.queries.iter().take(t) {
                row.push(-pos.coeff(BasisLabel::Gradient(q)));
            }
            gamma.push(row);
        }
        CoefficientTable::new(gamma)
    }
}

/// Explicit first-order method `x_t = x_0 - sum_{s<t} gamma_s^{(t)} g(x_s)`.
pub fn explicit_method(table: CoefficientTable) -> Result<MethodSpec, MethodError> {
    let t_max = table.iterations();
    let mut points = vec![MethodPoint {
        name: "0".into(),
        position: Position::Explicit(VectorExpr::label(BasisLabel::Init)),
        observed_at: 0,
    }];
    for (t, row) in table.gamma.iter().enumerate() {
        let mut pos = VectorExpr::label(BasisLabel::Init);
        for (s, g) in row.iter().enumerate() {
            pos.add_term(BasisLabel::Gradient(s), -g.clone());
        }
        points.push(MethodPoint {
            name: format!("{}", t + 1),
            position: Position::Explicit(pos),
            observed_at: t,
        });
    }
    Ok(MethodSpec {
        name: "explicit".into(),
        t: t_max,
        points,
        algo_atoms: vec![],
        iterates: (0..=t_max).collect(),
        queries: (0..t_max).collect(),
        momentum: vec![],
    })
}

/// Gradient descent with a fixed step size.
pub fn gd(step: Rat, t: usize) -> MethodSpec {
    let gamma = (1..=t)
        .map(|k| vec![step.clone(); k])
        .collect();
    let mut m = explicit_method(CoefficientTable::new(gamma).expect("triangular")).unwrap();
    m.name = "gd".into();
    m
}

/// Momentum scalars of the accelerated method: `lambda_{t+1} = 1/2 + sqrt(1/4 + lambda_t^2)`
/// seeded with `lambda_0 = 0` (so `lambda_1 = 1`).
pub fn nag_momentum(t: usize) -> Vec<f64> {
    let mut lam = Vec::with_capacity(t);
    let mut prev = 0.0f64;
    for _ in 0..t {
        let next = 0.5 + (0.25 + prev * prev).sqrt();
        lam.push(next);
        prev = next;
    }
    lam
}

/// Nesterov's accelerated gradient method on the smooth class.
///
/// Queries `y_0 = x_0, y_1, .., y_{T-1}`; evaluation iterates `x_1 .. x_T`.
/// Point order: `x_0, x_1, y_1, x_2, y_2, .., x_{T-1}, y_{T-1}, x_T`.
pub fn nag(l: &Rat, t: usize) -> MethodSpec {
    assert!(t >= 1, "nag requires at least one step");
    let lam = nag_momentum(t);
    let inv_l = l.clone().recip();
    let mut points = vec![MethodPoint {
        name: "0".into(),
        position: Position::Explicit(VectorExpr::label(BasisLabel::Init)),
        observed_at: 0,
    }];
    let mut iterates = vec![0usize];
    let mut queries = vec![0usize];
    // positions of x_{t-1}, x_t and the last query point as we go
    let mut x_prev = VectorExpr::label(BasisLabel::Init);
    let mut y_cur = VectorExpr::label(BasisLabel::Init);
    let mut y_idx = 0usize;
    for step in 1..=t {
        // x_step = y_{step-1} - (1/L) g(y_{step-1})
        let mut x_cur = y_cur.clone();
        x_cur.add_term(BasisLabel::Gradient(y_idx), -inv_l.clone());
        points.push(MethodPoint {
            name: format!("{}", step),
            position: Position::Explicit(x_cur.clone()),
            observed_at: step - 1,
        });
        iterates.push(points.len() - 1);
        if step < t {
            // y_step = x_step + (lambda_step - 1)/lambda_{step+1} (x_step - x_{step-1})
            let beta = Rat::from_float((lam[step - 1] - 1.0) / lam[step]).expect("finite");
            let y_next = x_cur.add(&x_cur.sub(&x_prev).scale(&beta));
            points.push(MethodPoint {
                name: format!("y{}", step),
                position: Position::Explicit(y_next.clone()),
                observed_at: step,
            });
            y_idx = points.len() - 1;
            queries.push(y_idx);
            y_cur = y_next;
        }
        x_prev = x_cur;
    }
    MethodSpec {
        name: "nag".into(),
        t,
        points,
        algo_atoms: vec![],
        iterates,
        queries,
        momentum: lam,
    }
}

/// The averaged heavy-ball recursion
/// `x_t = (t/(t+1)) x_{t-1} + (1/(t+1)) x_0 - (1/((t+1)L)) sum_{s<t} g_s`,
/// expressed through its step-coefficient table.
pub fn heavy_ball_qg(l: &Rat, t: usize) -> MethodSpec {
    let inv_l = l.clone().recip();
    let mut gamma: Vec<Vec<Rat>> = Vec::new();
    for step in 1..=t {
        let frac = ratio(step as i64, step as i64 + 1);
        let fresh = inv_l.clone() * ratio(1, step as i64 + 1);
        let mut row = Vec::new();
        for s in 0..step - 1 {
            row.push(gamma[step - 2][s].clone() * &frac + &fresh);
        }
        row.push(fresh);
        gamma.push(row);
    }
    let mut m = explicit_method(CoefficientTable::new(gamma).expect("triangular")).unwrap();
    m.name = "hb-qg".into();
    m
}

/// Gradient descent with exact line search, encoded through the two
/// first-order optimality conditions of the search:
/// `<g_t, g_{t-1}> = 0` and `<g_t, x_t - x_{t-1}> = 0`.
pub fn gdls(t: usize) -> MethodSpec {
    let mut points = vec![MethodPoint {
        name: "0".into(),
        position: Position::Explicit(VectorExpr::label(BasisLabel::Init)),
        observed_at: 0,
    }];
    let mut algo_atoms = Vec::new();
    for step in 1..=t {
        points.push(MethodPoint {
            name: format!("{}", step),
            position: Position::Free,
            observed_at: step - 1,
        });
        let here = VectorExpr::label(BasisLabel::FreePoint(step));
        let prev = if step == 1 {
            VectorExpr::label(BasisLabel::Init)
        } else {
            VectorExpr::label(BasisLabel::FreePoint(step - 1))
        };
        algo_atoms.push(AlgoAtomSpec {
            id: format!("ALG({})", 2 * step - 1),
            grad_point: step,
            rhs: VectorExpr::label(BasisLabel::Gradient(step - 1)),
            sense: Sense::Eq,
        });
        algo_atoms.push(AlgoAtomSpec {
            id: format!("ALG({})", 2 * step),
            grad_point: step,
            rhs: here.sub(&prev),
            sense: Sense::Eq,
        });
    }
    MethodSpec {
        name: "gdls".into(),
        t,
        points,
        algo_atoms,
        iterates: (0..=t).collect(),
        queries: (0..t).collect(),
        momentum: vec![],
    }
}

/// Greedy span minimization, encoded through its orthogonality conditions:
/// `<g_t, g_s> = 0` for `s < t` and `<g_t, x_s - x_0> = 0` for `s <= t`.
/// Identically-zero atoms (the `s = 0` position conditions) are dropped.
pub fn gfom(t: usize) -> MethodSpec {
    let mut points = vec![MethodPoint {
        name: "0".into(),
        position: Position::Explicit(VectorExpr::label(BasisLabel::Init)),
        observed_at: 0,
    }];
    let mut algo_atoms = Vec::new();
    for step in 1..=t {
        points.push(MethodPoint {
            name: format!("{}", step),
            position: Position::Free,
            observed_at: step - 1,
        });
        for s in 0..step {
            algo_atoms.push(AlgoAtomSpec {
                id: format!("ALG(g,{},{})", step, s),
                grad_point: step,
                rhs: VectorExpr::label(BasisLabel::Gradient(s)),
                sense: Sense::Eq,
            });
        }
        for s in 1..=step {
            algo_atoms.push(AlgoAtomSpec {
                id: format!("ALG(x,{},{})", step, s),
                grad_point: step,
                rhs: VectorExpr::label(BasisLabel::FreePoint(s))
                    .sub(&VectorExpr::label(BasisLabel::Init)),
                sense: Sense::Eq,
            });
        }
    }
    MethodSpec {
        name: "gfom".into(),
        t,
        points,
        algo_atoms,
        iterates: (0..=t).collect(),
        queries: (0..t).collect(),
        momentum: vec![],
    }
}

/// The do-nothing method (`x_t = x_0` for all t).
pub fn identity(t: usize) -> MethodSpec {
    let gamma = (1..=t).map(|k| vec![Rat::zero(); k]).collect();
    let mut m = explicit_method(CoefficientTable::new(gamma).unwrap()).unwrap();
    m.name = "identity".into();
    m
}

/// Validates that explicit positions only reference gradients of earlier queries.
pub fn validate_causality(m: &MethodSpec) -> Result<(), MethodError> {
    for (t, &pt) in m.iterates.iter().enumerate() {
        if let Position::Explicit(pos) = &m.points[pt].position {
            for (&label, w) in pos.terms() {
                if w.is_zero() {
                    continue;
                }
                if let BasisLabel::Gradient(q) = label {
                    let order = m.queries.iter().position(|&p| p == q);
                    match order {
                        Some(o) if o < t || t == 0 => {}
                        Some(o) => return Err(MethodError::FutureGradient { t, s: o }),
                        None => return Err(MethodError::FutureGradient { t, s: q }),
                    }
                }
            }
        }
    }
    Ok(())
}
