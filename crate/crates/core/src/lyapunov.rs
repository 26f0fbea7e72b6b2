//! Potential (Lyapunov) sequences built from dual certificates.
//!
//! A worst-case proof is a weighted sum of constraints.  Accumulating the
//! weighted constraints that only involve values observed before step `t`
//! on top of the initialization quantity yields a scalar sequence `V_t`
//! that decreases along the method, reducing the `T`-step analysis to `T`
//! one-step analyses.

use std::collections::BTreeMap;

use num::{One, Zero};

use crate::builder::PepProblem;
use crate::certificate::{self, CertValue, Certificate, ToleranceRecord, DEFAULT_EPS};
use crate::expr::{ConstraintAtom, ScalarExpr, Sense, Tag};
use crate::rat::Rat;
use crate::sdp::{self, SolveStatus, SolverOptions};

#[derive(Debug, thiserror::Error)]
pub enum LyapError {
    #[error("certificate does not verify against the problem")]
    NonVerifying,
    #[error("step {0} out of range for a {1}-step potential sequence")]
    StepOutOfRange(usize, usize),
    #[error("one-step subproblem at step {0} is unbounded")]
    Unbounded(usize),
    #[error("no canonical certificate is known for method {0:?}")]
    NoCanonicalCertificate(String),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
    #[error(transparent)]
    Cert(#[from] certificate::CertError),
    #[error(transparent)]
    Sdp(#[from] crate::sdp::SdpError),
}

/// The sequence `V_0 .. V_T` together with the weighted atoms entering each
/// increment, for rendering and export.
#[derive(Debug, Clone)]
pub struct PotentialSequence {
    /// `potentials[t]` is `V_t` as a scalar expression over the problem basis.
    pub potentials: Vec<ScalarExpr>,
    /// `increments[t]` lists `(atom id, weight)` pairs with `V_{t+1} - V_t =
    /// sum weight * atom`.
    pub increments: Vec<Vec<(String, Rat)>>,
}

impl PotentialSequence {
    pub fn horizon(&self) -> usize {
        self.potentials.len() - 1
    }
}

/// Accumulates the certificate's weighted constraints into potentials:
/// `V_t` = initialization quantity + sum over atoms observed before step `t`
/// of `lambda * atom`.  Only class and algorithm atoms enter; an atom is
/// observed before step `t` when its step index (largest observation ordinal
/// among touched points) is below `t`.
pub fn build_potentials(
    problem: &PepProblem,
    cert: &Certificate,
) -> Result<PotentialSequence, LyapError> {
    if !certificate::verify(cert, problem, DEFAULT_EPS)?.pass {
        return Err(LyapError::NonVerifying);
    }
    let weights: BTreeMap<&str, Rat> = cert
        .multipliers
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_rat()))
        .collect();

    // V_0 is the initialization quantity itself: the atom without its
    // constant offset -R^2.
    let mut v0 = problem.init_atom().expr.clone();
    v0.c = Rat::zero();

    let t_max = problem.method.t;
    let mut potentials = vec![v0];
    let mut increments = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let mut next = potentials[t].clone();
        let mut used = Vec::new();
        for atom in &problem.atoms {
            if atom.step != t || !matches!(atom.tag, Tag::Class | Tag::Algorithm) {
                continue;
            }
            if let Some(w) = weights.get(atom.id.as_str()) {
                if !w.is_zero() {
                    next.add_scaled(w, &atom.expr)?;
                    used.push((atom.id.clone(), w.clone()));
                }
            }
        }
        increments.push(used);
        potentials.push(next);
    }
    Ok(PotentialSequence {
        potentials,
        increments,
    })
}

/// Outcome of a one-step decrease check.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecreaseCheck {
    pub step: usize,
    /// Worst-case value of `V_{t+1} - V_t` over the one-step feasible set.
    pub max_increase: f64,
    pub pass: bool,
}

/// Maximizes `V_{t+1} - V_t` subject to the atoms with step index at most
/// `t + 1`.  The feasible set is a cone, so the optimum is either zero (the
/// potential decreases) or grows without bound; a unit trust region on the
/// Gram trace turns the latter into a finite positive value.
pub fn verify_decrease(
    problem: &PepProblem,
    seq: &PotentialSequence,
    t: usize,
    opts: &SolverOptions,
    tol: f64,
) -> Result<DecreaseCheck, LyapError> {
    if t >= seq.horizon() {
        return Err(LyapError::StepOutOfRange(t, seq.horizon()));
    }
    let objective = seq.potentials[t + 1].sub(&seq.potentials[t])?;

    let mut atoms: Vec<ConstraintAtom> = problem
        .atoms
        .iter()
        .filter(|a| matches!(a.tag, Tag::Class | Tag::Algorithm) && a.step <= t + 1)
        .cloned()
        .collect();
    let mut trust = ScalarExpr::zero(&problem.basis);
    for i in 0..problem.basis.len() {
        trust.m[i][i] = Rat::one();
    }
    trust.c = -Rat::one();
    atoms.push(ConstraintAtom {
        id: "TRUST".into(),
        expr: trust,
        sense: Sense::Leq,
        tag: Tag::Metric,
        pretty: "tr G <= 1".into(),
        step: 0,
        depends_on_params: false,
        touches_unknown: false,
    });

    let mut sub = problem.clone();
    sub.objective = objective;
    sub.atoms = atoms;
    let sol = sdp::solve(&sub, opts)?;
    if sol.status == SolveStatus::Unbounded {
        return Err(LyapError::Unbounded(t));
    }
    Ok(DecreaseCheck {
        step: t,
        max_increase: sol.objective,
        pass: sol.objective <= tol,
    })
}

/// The canonical analytic certificate for the accelerated method on the
/// smooth convex class (`mu = 0`), with the function-value gap at the last
/// iterate against the initial squared distance: with momentum scalars
/// `lambda_t`, the rate is `tau = L / (2 lambda_T^2)` and the only active
/// constraints at step `t` are
///
/// - `IC(y_t, x_{t+1})` with weight `lambda_{t+1}^2 / lambda_T^2`,
/// - `IC(x_t, y_t)` with weight `lambda_{t+1}(lambda_{t+1} - 1) / lambda_T^2`,
/// - `IC(*, y_t)` with weight `lambda_{t+1} / lambda_T^2`,
///
/// where `y_0 = x_0`.  The telescoping that makes this a valid dual point is
/// exactly the recursion `lambda_{t+1}^2 - lambda_{t+1} = lambda_t^2`.
pub fn nag_certificate(problem: &PepProblem) -> Result<Certificate, LyapError> {
    if problem.method.name != "nag" || !problem.class.mu.is_zero() {
        return Err(LyapError::NoCanonicalCertificate(
            problem.method.name.clone(),
        ));
    }
    let l = crate::rat::to_f64(
        problem
            .class
            .l
            .as_ref()
            .ok_or_else(|| LyapError::NoCanonicalCertificate(problem.method.name.clone()))?,
    );
    let lam = &problem.method.momentum;
    let t_max = problem.method.t;
    let norm = lam[t_max - 1] * lam[t_max - 1];

    let mut multipliers = BTreeMap::new();
    let mut put = |id: String, v: f64| {
        if v != 0.0 {
            multipliers.insert(id, CertValue::float(v / norm));
        }
    };
    for t in 0..t_max {
        let lnext = lam[t];
        let (y, xnext) = if t == 0 {
            ("0".to_string(), "1".to_string())
        } else {
            (format!("y{t}"), format!("{}", t + 1))
        };
        put(format!("IC({y},{xnext})"), lnext * lnext);
        put(format!("IC(*,{y})"), lnext);
        if t > 0 {
            put(format!("IC({t},{y})"), lnext * (lnext - 1.0));
        }
    }

    let cert = Certificate {
        version: 1,
        fingerprint: problem.fingerprint(),
        tau: CertValue::float(l / (2.0 * norm)),
        multipliers,
        tolerances: ToleranceRecord {
            eps: DEFAULT_EPS,
            zero_threshold: 0.0,
            solver_tol: 0.0,
        },
        verdict: "PASS".into(),
    };
    if !certificate::verify(&cert, problem, DEFAULT_EPS)?.pass {
        return Err(LyapError::NonVerifying);
    }
    Ok(cert)
}
