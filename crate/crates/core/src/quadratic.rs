//! Worst-case analysis over the quadratic class via residual polynomials.
//!
//! On a quadratic `f(x) = (1/2)(x - x_*)' H (x - x_*)` an explicit method
//! satisfies `x_t - x_* = P_t(H)(x_0 - x_*)` for polynomials with
//! `P_t(0) = 1`, so its worst-case contraction over Hessian spectra in
//! `[mu, L]` is `sup_{lambda in [mu, L]} |P_t(lambda)|`.

use num::{One, Signed, Zero};

use crate::methods::{MethodError, MethodSpec};
use crate::rat::{to_f64, Rat};

#[derive(Debug, thiserror::Error)]
pub enum QuadError {
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error("method queries auxiliary points that are not iterates")]
    AuxiliaryQueries,
    #[error("empty spectrum interval: mu > L")]
    EmptyInterval,
}

/// Polynomial `P_t` with `x_t - x_* = P_t(H)(x_0 - x_*)` on quadratics,
/// stored by monomial coefficients `c_0 + c_1 lambda + ..` with `c_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPolynomial {
    pub coeffs: Vec<Rat>,
}

impl ResidualPolynomial {
    pub fn one() -> Self {
        ResidualPolynomial {
            coeffs: vec![Rat::one()],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval_rat(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * x + to_f64(c))
    }

    fn deriv(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x + k as f64 * to_f64(c);
        }
        acc
    }

    fn deriv2(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * x + (k * (k - 1)) as f64 * to_f64(c);
        }
        acc
    }
}

/// Residual polynomials `P_0 .. P_T` of an explicit method: substituting
/// `g(x_s) = H (x_s - x_*)` into `x_t = x_0 - sum_s gamma_s^{(t)} g(x_s)`
/// gives the recurrence `P_t(lambda) = 1 - lambda sum_s gamma_s^{(t)}
/// P_s(lambda)`.  The substitution requires every queried gradient to sit at
/// an iterate.
pub fn residual_polynomials(method: &MethodSpec) -> Result<Vec<ResidualPolynomial>, QuadError> {
    let table = method.coefficient_table()?;
    for (t, &q) in method.queries.iter().enumerate() {
        if method.iterates.get(t) != Some(&q) {
            return Err(QuadError::AuxiliaryQueries);
        }
    }
    let mut ps = vec![ResidualPolynomial::one()];
    for row in &table.gamma {
        let deg = row
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_zero())
            .map(|(s, _)| ps[s].degree() + 1)
            .max()
            .unwrap_or(0);
        let mut coeffs = vec![Rat::zero(); deg + 1];
        coeffs[0] = Rat::one();
        for (s, g) in row.iter().enumerate() {
            if g.is_zero() {
                continue;
            }
            for (k, c) in ps[s].coeffs.iter().enumerate() {
                coeffs[k + 1] -= c.clone() * g;
            }
        }
        while coeffs.len() > 1 && coeffs.last().map_or(false, Zero::is_zero) {
            coeffs.pop();
        }
        ps.push(ResidualPolynomial { coeffs });
    }
    Ok(ps)
}

/// Supremum of `|P|` over `[mu, L]` with the maximizer.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QuadraticWorstCase {
    pub value: f64,
    /// Spectrum point attaining the supremum.
    pub at: f64,
}

/// `sup_{lambda in [mu, L]} |P(lambda)|`.
///
/// Endpoints and, up to degree two, the closed-form stationary point are
/// evaluated in exact arithmetic; higher degrees scan a Chebyshev-node grid
/// of `4 deg + 64` points with Newton refinement of the interior critical
/// points.
pub fn worst_case_quadratic(
    p: &ResidualPolynomial,
    mu: &Rat,
    l: &Rat,
) -> Result<QuadraticWorstCase, QuadError> {
    if mu > l {
        return Err(QuadError::EmptyInterval);
    }
    let (lo, hi) = (to_f64(mu), to_f64(l));
    let mut best = QuadraticWorstCase {
        value: f64::NEG_INFINITY,
        at: lo,
    };
    let mut consider_exact = |x: &Rat| {
        let v = to_f64(&p.eval_rat(x).abs());
        if v > best.value {
            best = QuadraticWorstCase {
                value: v,
                at: to_f64(x),
            };
        }
    };
    consider_exact(mu);
    consider_exact(l);

    if p.degree() == 2 && !p.coeffs[2].is_zero() {
        // lone stationary point of the parabola
        let crit = -p.coeffs[1].clone() / (p.coeffs[2].clone() * Rat::from_integer(2.into()));
        if &crit > mu && &crit < l {
            consider_exact(&crit);
        }
    } else if p.degree() > 2 {
        let nodes = 4 * p.degree() + 64;
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        for k in 0..nodes {
            let theta = std::f64::consts::PI * (2.0 * k as f64 + 1.0) / (2.0 * nodes as f64);
            let mut x = mid + half * theta.cos();
            // Newton on P' to land on the local extremum near the node.
            for _ in 0..30 {
                let d = p.deriv(x);
                let d2 = p.deriv2(x);
                if d2 == 0.0 {
                    break;
                }
                let step = d / d2;
                x -= step;
                if !(lo..=hi).contains(&x) || step.abs() < 1e-14 * (1.0 + x.abs()) {
                    break;
                }
            }
            if (lo..=hi).contains(&x) {
                let v = p.eval(x).abs();
                if v > best.value {
                    best = QuadraticWorstCase { value: v, at: x };
                }
            }
        }
    }
    Ok(best)
}
