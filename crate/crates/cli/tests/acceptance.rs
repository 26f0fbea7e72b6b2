//! Acceptance suite: one test (and one printed PASS line) per criterion.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use nalgebra::{DMatrix, DVector};
use num::Zero;
use pepcert::builder::{
    build, reconstruct_worst_case, InitKind, InitialCondition, PepProblem, PerformanceMetric,
};
use pepcert::certificate::{self, Certificate};
use pepcert::classes::{membership_check, FunctionClassSpec};
use pepcert::expr::{BasisLabel, ScalarExpr, VectorExpr};
use pepcert::methods::{self, MethodSpec, Position};
use pepcert::rat::{parse_decimal, ratio, rint, to_f64, Rat};
use pepcert::sdp::{self, PrimalDualSolution, SolveStatus, SolverOptions};
use pepcert::{lyapunov, quadratic};
use rand::{Rng, SeedableRng};

/// Prints through the raw stdout handle so the gate lines survive libtest's
/// output capture in a plain `cargo test` run.
macro_rules! announce {
    ($($arg:tt)*) => {{
        use std::io::Write;
        writeln!(std::io::stdout(), $($arg)*).unwrap();
    }};
}

// ---------------------------------------------------------------------------
// Shared fixtures
// ---------------------------------------------------------------------------

fn gdls_problem(l: Rat, mu: Rat) -> PepProblem {
    let class = FunctionClassSpec::new(mu, Some(l)).unwrap();
    build(
        &class,
        &methods::gdls(1),
        &PerformanceMetric::FunctionValueGap { at: 1 },
        &InitialCondition::new(InitKind::FunctionValueGap, rint(1)).unwrap(),
    )
    .unwrap()
}

fn solve(problem: &PepProblem) -> PrimalDualSolution {
    let sol = sdp::solve(problem, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    sol
}

fn extract(problem: &PepProblem) -> (PrimalDualSolution, Certificate) {
    let sol = solve(problem);
    let cert = certificate::extract(&sol, problem, 1e-8).unwrap();
    assert_eq!(cert.verdict, "PASS");
    (sol, cert)
}

/// The corpus mirrored from `corpus/*.json`.
fn corpus() -> Vec<(&'static str, PepProblem)> {
    let f01 = FunctionClassSpec::new(rint(0), Some(rint(1))).unwrap();
    let dist_init = InitialCondition::new(InitKind::DistanceSquared, rint(1)).unwrap();
    let fgap = |m: &MethodSpec| PerformanceMetric::FunctionValueGap {
        at: m.final_iterate(),
    };

    let mut out = Vec::new();
    out.push(("gdls_golden", gdls_problem(rint(1), ratio(1, 10))));
    out.push(("gdls_mu001", gdls_problem(rint(1), ratio(1, 100))));
    out.push(("gdls_strong", gdls_problem(rint(10), rint(1))));
    let gd = methods::gd(rint(1), 1);
    out.push((
        "gd_smooth",
        build(&f01, &gd, &fgap(&gd), &dist_init).unwrap(),
    ));
    let nag = methods::nag(&rint(1), 5);
    out.push((
        "nag_t5",
        build(&f01, &nag, &fgap(&nag), &dist_init).unwrap(),
    ));
    let hb = methods::heavy_ball_qg(&rint(1), 3);
    out.push(("hb_t3", build(&f01, &hb, &fgap(&hb), &dist_init).unwrap()));
    let gfom = methods::gfom(2);
    out.push((
        "gfom_t2",
        build(&f01, &gfom, &fgap(&gfom), &dist_init).unwrap(),
    ));
    let id = methods::identity(1);
    out.push((
        "identity",
        build(
            &f01,
            &id,
            &PerformanceMetric::DistanceSquared {
                at: id.final_iterate(),
            },
            &dist_init,
        )
        .unwrap(),
    ));
    out
}

// ---------------------------------------------------------------------------
// Simulation of a method on a diagonal quadratic (x_* = 0)
// ---------------------------------------------------------------------------

struct Trajectory {
    /// Per method point: position, gradient, function value.
    data: Vec<(DVector<f64>, DVector<f64>, f64)>,
}

fn run_method(method: &MethodSpec, h: &DVector<f64>, x0: &DVector<f64>) -> Trajectory {
    let n = x0.len();
    let fval = |x: &DVector<f64>| 0.5 * x.iter().zip(h.iter()).map(|(x, h)| h * x * x).sum::<f64>();
    let grad = |x: &DVector<f64>| x.component_mul(h);

    let mut data: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();
    for (i, pt) in method.points.iter().enumerate() {
        let x = match &pt.position {
            Position::Explicit(e) => {
                let mut x = DVector::zeros(n);
                for (&label, w) in e.terms() {
                    let w = to_f64(w);
                    match label {
                        BasisLabel::Init => x += x0 * w,
                        BasisLabel::Gradient(j) => x += &data[j].1 * w,
                        BasisLabel::Star => {}
                        BasisLabel::FreePoint(j) => x += &data[j].0 * w,
                    }
                }
                x
            }
            Position::Free => match method.name.as_str() {
                "gdls" => {
                    // exact line search along the previous gradient
                    let (xp, gp, _) = &data[i - 1];
                    let num = gp.dot(gp);
                    let den = gp.iter().zip(h.iter()).map(|(g, h)| h * g * g).sum::<f64>();
                    xp - gp * (num / den)
                }
                "gfom" => {
                    // span-greedy: minimize over x0 + span of past gradients
                    let b = DMatrix::from_columns(
                        &data.iter().map(|(_, g, _)| g.clone()).collect::<Vec<_>>(),
                    );
                    let bh = DMatrix::from_fn(b.nrows(), b.ncols(), |r, c| b[(r, c)] * h[r]);
                    let a = b.transpose() * &bh;
                    let rhs = -(bh.transpose() * x0);
                    let c = a.full_piv_lu().solve(&rhs).expect("span system solvable");
                    x0 + b * c
                }
                other => panic!("no simulator for free points of {other}"),
            },
        };
        let g = grad(&x);
        let f = fval(&x);
        data.push((x, g, f));
    }
    Trajectory { data }
}

fn metric_value(problem: &PepProblem, traj: &Trajectory) -> f64 {
    match &problem.metric {
        PerformanceMetric::FunctionValueGap { at } => traj.data[*at].2,
        PerformanceMetric::DistanceSquared { at } => traj.data[*at].0.norm_squared(),
        PerformanceMetric::GradientNormSquared { at } => traj.data[*at].1.norm_squared(),
        PerformanceMetric::MinGradientNormSquared { over } => over
            .iter()
            .map(|&at| traj.data[at].1.norm_squared())
            .fold(f64::INFINITY, f64::min),
    }
}

fn init_value(problem: &PepProblem, traj: &Trajectory) -> f64 {
    match problem.init.kind {
        InitKind::DistanceSquared => traj.data[0].0.norm_squared(),
        InitKind::FunctionValueGap => traj.data[0].2,
    }
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_gdls_golden_rates() {
    for (l, mu) in [
        (rint(1), ratio(1, 10)),
        (rint(1), ratio(1, 100)),
        (rint(10), rint(1)),
    ] {
        let start = std::time::Instant::now();
        let problem = gdls_problem(l.clone(), mu.clone());
        let sol = solve(&problem);
        let contraction = (l.clone() - &mu) / (l.clone() + &mu);
        let expect = to_f64(&(contraction.clone() * &contraction));
        assert!(
            (sol.objective - expect).abs() < 1e-6,
            "(L, mu) = ({l}, {mu}): {} vs {expect}",
            sol.objective
        );
        let elapsed = start.elapsed();
        assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    }
    announce!("ACCEPTANCE 1: PASS - GDLS rate ((L-mu)/(L+mu))^2 within 1e-6 at three (L, mu), each under 1 s");
}

#[test]
fn acceptance_2_gdls_golden_multipliers() {
    let (l, mu) = (rint(1), ratio(1, 10));
    let problem = gdls_problem(l.clone(), mu.clone());
    let (_, cert) = extract(&problem);
    let sum = l.clone() + &mu;
    let diff = l.clone() - &mu;
    let expected: BTreeMap<&str, Rat> = BTreeMap::from([
        (
            "IC(*,0)",
            ratio(2, 1) * &mu * &diff / (sum.clone() * &sum),
        ),
        ("IC(*,1)", ratio(2, 1) * &mu / &sum),
        ("IC(0,1)", diff.clone() / &sum),
        ("ALG(1)", ratio(2, 1) / &sum),
        ("ALG(2)", rint(1)),
        ("IC(0,*)", rint(0)),
        ("IC(1,*)", rint(0)),
        ("IC(1,0)", rint(0)),
    ]);
    for (id, want) in &expected {
        let got = cert.multiplier(id);
        assert!(
            (got - to_f64(want)).abs() < 1e-5,
            "{id}: {got} vs {}",
            to_f64(want)
        );
    }
    announce!("ACCEPTANCE 2: PASS - extracted GDLS multipliers match the closed forms within 1e-5");
}

#[test]
fn acceptance_3_golden_matrices() {
    // mu = 1/10, L = 1, kappa = 1/10; class matrices carry 1/(2(1-kappa)) = 5/9.
    let problem = gdls_problem(rint(1), ratio(1, 10));
    let v = |s: [&str; 3]| -> Vec<Rat> { s.iter().map(|x| parse_decimal(x).unwrap()).collect() };
    let m = |scale: Rat, rows: [[&str; 5]; 5]| -> Vec<Vec<Rat>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .map(|x| parse_decimal(x).unwrap() * &scale)
                    .collect()
            })
            .collect()
    };
    let c59 = ratio(5, 9);
    let half = ratio(1, 2);
    let zero5 = [["0"; 5]; 5];

    // objective and initialization
    assert_eq!(problem.objective.v, v(["-1", "0", "1"]));
    assert_eq!(problem.objective.m, m(rint(0), zero5));
    let init = problem.init_atom();
    assert_eq!(init.expr.v, v(["-1", "1", "0"]));
    assert_eq!(init.expr.m, m(rint(0), zero5));

    let cases: Vec<(&str, Vec<Rat>, Vec<Vec<Rat>>)> = vec![
        (
            "IC(*,0)",
            v(["-1", "1", "0"]),
            m(
                c59.clone(),
                [
                    ["1/10", "-1/10", "1", "0", "0"],
                    ["-1/10", "1/10", "-1", "0", "0"],
                    ["1", "-1", "1", "0", "0"],
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "0"],
                ],
            ),
        ),
        (
            "IC(*,1)",
            v(["-1", "0", "1"]),
            m(
                c59.clone(),
                [
                    ["1/10", "0", "0", "-1/10", "1"],
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "0"],
                    ["-1/10", "0", "0", "1/10", "-1"],
                    ["1", "0", "0", "-1", "1"],
                ],
            ),
        ),
        (
            "IC(0,*)",
            v(["1", "-1", "0"]),
            m(
                c59.clone(),
                [
                    ["1/10", "-1/10", "1/10", "0", "0"],
                    ["-1/10", "1/10", "-1/10", "0", "0"],
                    ["1/10", "-1/10", "1", "0", "0"],
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "0"],
                ],
            ),
        ),
        (
            "IC(0,1)",
            v(["0", "-1", "1"]),
            m(
                c59.clone(),
                [
                    ["0", "0", "0", "0", "0"],
                    ["0", "1/10", "-1/10", "-1/10", "1"],
                    ["0", "-1/10", "1", "1/10", "-1"],
                    ["0", "-1/10", "1/10", "1/10", "-1"],
                    ["0", "1", "-1", "-1", "1"],
                ],
            ),
        ),
        (
            "IC(1,*)",
            v(["1", "0", "-1"]),
            m(
                c59.clone(),
                [
                    ["1/10", "0", "0", "-1/10", "1/10"],
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "0"],
                    ["-1/10", "0", "0", "1/10", "-1/10"],
                    ["1/10", "0", "0", "-1/10", "1"],
                ],
            ),
        ),
        (
            "IC(1,0)",
            v(["0", "1", "-1"]),
            m(
                c59.clone(),
                [
                    ["0", "0", "0", "0", "0"],
                    ["0", "1/10", "-1", "-1/10", "1/10"],
                    ["0", "-1", "1", "1", "-1"],
                    ["0", "-1/10", "1", "1/10", "-1/10"],
                    ["0", "1/10", "-1", "-1/10", "1"],
                ],
            ),
        ),
        (
            "ALG(1)",
            v(["0", "0", "0"]),
            m(
                half.clone(),
                [
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "1"],
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "1", "0", "0"],
                ],
            ),
        ),
        (
            "ALG(2)",
            v(["0", "0", "0"]),
            m(
                half,
                [
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "-1"],
                    ["0", "0", "0", "0", "0"],
                    ["0", "0", "0", "0", "1"],
                    ["0", "-1", "0", "1", "0"],
                ],
            ),
        ),
    ];
    for (id, want_v, want_m) in cases {
        let atom = problem.atom(id).unwrap();
        assert_eq!(atom.expr.v, want_v, "{id}: v mismatch");
        assert_eq!(atom.expr.m, want_m, "{id}: M mismatch");
    }
    announce!("ACCEPTANCE 3: PASS - assembled GDLS atoms equal the reference (v, M) matrices exactly");
}

#[test]
fn acceptance_4_certificate_soundness() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    for (name, problem) in corpus() {
        let (_, cert) = extract(&problem);
        let tau = cert.tau.value;
        let (mu, l) = (
            to_f64(&problem.class.mu),
            to_f64(problem.class.l.as_ref().unwrap()),
        );
        let r = to_f64(&problem.init.radius);
        for trial in 0..100 {
            let dim = 5;
            let h = DVector::from_fn(dim, |_, _| rng.gen_range(mu..=l));
            let mut x0 = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            // place the initial point exactly on the initialization boundary
            let probe = run_method(&problem.method, &h, &x0);
            x0 *= r / init_value(&problem, &probe).sqrt();
            let traj = run_method(&problem.method, &h, &x0);
            let metric = metric_value(&problem, &traj);
            let init = init_value(&problem, &traj);
            assert!(
                metric <= tau * init * (1.0 + 1e-9),
                "{name} trial {trial}: metric {metric} > tau*init {}",
                tau * init
            );
        }
    }
    announce!("ACCEPTANCE 4: PASS - certified bound holds on 100 random quadratics per corpus problem");
}

#[test]
fn acceptance_5_tightness() {
    for (name, problem) in corpus() {
        let sol = solve(&problem);
        let wc = reconstruct_worst_case(&problem, &sol.g, &sol.f, 1e-6).unwrap();
        // evaluate the metric on the reconstructed data (points[0] is the
        // optimizer; method point `at` sits at index `at + 1`)
        let at = |i: usize| &wc.points[i + 1];
        let achieved = match &problem.metric {
            PerformanceMetric::FunctionValueGap { at: i } => at(*i).f - wc.points[0].f,
            PerformanceMetric::DistanceSquared { at: i } => at(*i)
                .x
                .iter()
                .zip(&wc.points[0].x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
            PerformanceMetric::GradientNormSquared { at: i } => {
                at(*i).g.iter().map(|v| v * v).sum()
            }
            PerformanceMetric::MinGradientNormSquared { over } => over
                .iter()
                .map(|&i| at(i).g.iter().map(|v| v * v).sum())
                .fold(f64::INFINITY, f64::min),
        };
        assert!(
            (achieved - sol.objective).abs() < 1e-5,
            "{name}: reconstructed {achieved} vs objective {}",
            sol.objective
        );
        let membership = membership_check(&wc.triples(), &problem.class, 1e-6).unwrap();
        assert!(
            membership.ok,
            "{name}: worst violation {:?}",
            membership.worst_violation
        );
    }
    announce!("ACCEPTANCE 5: PASS - reconstructed instances achieve the objective (1e-5) and interpolate (1e-6)");
}

#[test]
fn acceptance_6_method_recovery() {
    // GDLS section-5 problem: the grouped algorithm atom is
    // x_1 - x_0 + (2/(L+mu)) g_0, i.e. gradient descent with step 2/(L+mu).
    let (l, mu) = (rint(1), ratio(1, 10));
    let problem = gdls_problem(l.clone(), mu.clone());
    let (sol, cert) = extract(&problem);
    let grouped = certificate::group_algorithm_constraints(&cert, &problem).unwrap();
    let step = ratio(2, 1) / (l.clone() + &mu);
    let mut want = pepcert::expr::VectorExpr::label(BasisLabel::FreePoint(1));
    want.add_term(BasisLabel::Init, -rint(1));
    want.add_term(BasisLabel::Gradient(0), step.clone());
    assert_eq!(grouped[&1], want);

    let table = certificate::recover_explicit_method(&grouped, &problem).unwrap();
    assert_eq!(table.gamma, vec![vec![step.clone()]]);
    let gd = methods::gd(step, 1);
    let gd_problem = build(&problem.class, &gd, &problem.metric, &problem.init).unwrap();
    let gd_sol = solve(&gd_problem);
    assert!(
        (gd_sol.tau - sol.tau).abs() < 1e-6,
        "{} vs {}",
        gd_sol.tau,
        sol.tau
    );

    // GFOM T=2 on the smooth class round-trips through its recovered table.
    let f01 = FunctionClassSpec::new(rint(0), Some(rint(1))).unwrap();
    let gfom = methods::gfom(2);
    let metric = PerformanceMetric::FunctionValueGap {
        at: gfom.final_iterate(),
    };
    let init = InitialCondition::new(InitKind::DistanceSquared, rint(1)).unwrap();
    let gfom_problem = build(&f01, &gfom, &metric, &init).unwrap();
    let (gfom_sol, gfom_cert) = extract(&gfom_problem);
    let grouped = certificate::group_algorithm_constraints(&gfom_cert, &gfom_problem).unwrap();
    let table = certificate::recover_explicit_method(&grouped, &gfom_problem).unwrap();
    let recovered = methods::explicit_method(table).unwrap();
    let metric = PerformanceMetric::FunctionValueGap {
        at: recovered.final_iterate(),
    };
    let rec_problem = build(&f01, &recovered, &metric, &init).unwrap();
    let rec_sol = solve(&rec_problem);
    assert!(
        (rec_sol.objective - gfom_sol.objective).abs() < 1e-6,
        "{} vs {}",
        rec_sol.objective,
        gfom_sol.objective
    );
    announce!("ACCEPTANCE 6: PASS - GDLS recovers GD with step 2/(L+mu); GFOM T=2 recovery round-trips");
}

#[test]
fn acceptance_7_lyapunov_decrease() {
    let t_max = 5;
    let f01 = FunctionClassSpec::new(rint(0), Some(rint(1))).unwrap();
    let nag = methods::nag(&rint(1), t_max);
    let problem = build(
        &f01,
        &nag,
        &PerformanceMetric::FunctionValueGap {
            at: nag.final_iterate(),
        },
        &InitialCondition::new(InitKind::DistanceSquared, rint(1)).unwrap(),
    )
    .unwrap();
    let cert = lyapunov::nag_certificate(&problem).unwrap();
    let seq = lyapunov::build_potentials(&problem, &cert).unwrap();

    // V_0 equals the initialization quantity exactly.
    let mut init = problem.init_atom().expr.clone();
    init.c = Rat::zero();
    assert_eq!(seq.potentials[0], init);

    // One-step decrease holds at every step.
    for t in 0..t_max {
        let check =
            lyapunov::verify_decrease(&problem, &seq, t, &SolverOptions::default(), 1e-8).unwrap();
        assert!(check.pass, "step {t}: max increase {}", check.max_increase);
    }

    // Leading terms of V_t (t >= 1): coefficient lambda_t^2 / lambda_T^2 on
    // f(x_t) - f_*, the carried initialization term, and the (L/2)-weighted
    // squared form on lambda_t x_t + (1 - lambda_t) x_{t-1} - x_*; what
    // remains after subtracting all three must live on gradients only.
    let lam: Vec<f64> = std::iter::once(0.0)
        .chain(problem.method.momentum.iter().copied())
        .collect();
    let lam_t2 = lam[t_max] * lam[t_max];
    let basis = &problem.basis;
    let rat = |x: f64| Rat::from_float(x).unwrap();
    let by_name = |name: &str| {
        problem
            .points
            .points
            .iter()
            .find(|p| p.name == name)
            .unwrap()
            .clone()
    };
    for t in 1..=t_max {
        let xt = by_name(&format!("{t}"));
        let prev = by_name(&format!("{}", t - 1));
        let z = xt
            .position
            .scale(&rat(lam[t]))
            .add(&prev.position.scale(&rat(1.0 - lam[t])))
            .sub(&VectorExpr::label(BasisLabel::Star));
        let zz = ScalarExpr::inner_product(basis, &z, &z).unwrap();

        let mut rem = seq.potentials[t].clone();
        // lambda_t^2 / lambda_T^2 (f(x_t) - f_*)
        let lam2 = rat(lam[t] * lam[t] / lam_t2);
        rem.add_scaled(&-lam2.clone(), &ScalarExpr::fval(basis, xt.fval).unwrap())
            .unwrap();
        rem.add_scaled(&lam2, &ScalarExpr::fval(basis, 0).unwrap())
            .unwrap();
        // (1 - L/(2 lambda_T^2)) * ||x_0 - x_*||^2  (L = 1)
        rem.add_scaled(&-rat(1.0 - 0.5 / lam_t2), &init).unwrap();
        // (L/2) / lambda_T^2 * ||z||^2
        rem.add_scaled(&-rat(0.5 / lam_t2), &zz).unwrap();

        for w in &rem.v {
            assert!(to_f64(w).abs() < 1e-12, "t={t}: fval residual {w}");
        }
        for (r, row) in rem.m.iter().enumerate() {
            for (c, w) in row.iter().enumerate() {
                let grad_grad = matches!(basis.labels()[r], BasisLabel::Gradient(_))
                    && matches!(basis.labels()[c], BasisLabel::Gradient(_));
                assert!(
                    grad_grad || to_f64(w).abs() < 1e-12,
                    "t={t}: residual entry ({r},{c}) = {}",
                    to_f64(w)
                );
            }
        }
    }

    // O(1/T^2): lambda_T >= (T+1)/2 for T <= 20.
    for (i, &l) in methods::nag_momentum(20).iter().enumerate() {
        let t = i + 1;
        assert!(l >= (t as f64 + 1.0) / 2.0 - 1e-12, "T={t}");
    }
    announce!("ACCEPTANCE 7: PASS - NAG potentials start at the init, decrease per step, match the lambda_t^2 and (L/2) forms, and lambda_T >= (T+1)/2");
}

#[test]
fn acceptance_8_quadratic_rates() {
    // GD with step 2/(L+mu): contraction (L-mu)/(L+mu), exactly.
    let (l, mu) = (rint(1), ratio(1, 10));
    let step = ratio(2, 1) / (l.clone() + &mu);
    let ps = quadratic::residual_polynomials(&methods::gd(step.clone(), 1)).unwrap();
    let wc = quadratic::worst_case_quadratic(&ps[1], &mu, &l).unwrap();
    assert_eq!(wc.value, to_f64(&ratio(9, 11)));

    // GD with step 1/L over T steps: (1 - mu/L)^T at lambda = mu, exactly.
    let t_max = 4;
    let (l2, mu2) = (rint(2), ratio(1, 4));
    let ps = quadratic::residual_polynomials(&methods::gd(l2.clone().recip(), t_max)).unwrap();
    let wc2 = quadratic::worst_case_quadratic(&ps[t_max], &mu2, &l2).unwrap();
    let mut expect = rint(1);
    let base = rint(1) - mu2.clone() / &l2;
    for _ in 0..t_max {
        expect *= &base;
    }
    assert_eq!(wc2.value, to_f64(&expect));
    assert_eq!(wc2.at, to_f64(&mu2));

    // Class inclusion: the quadratic worst case never exceeds the F_{mu,L}
    // PEP worst case for the same method and metric.
    let gd = methods::gd(step, 2);
    let class = FunctionClassSpec::new(mu.clone(), Some(l.clone())).unwrap();
    let problem = build(
        &class,
        &gd,
        &PerformanceMetric::DistanceSquared {
            at: gd.final_iterate(),
        },
        &InitialCondition::new(InitKind::DistanceSquared, rint(1)).unwrap(),
    )
    .unwrap();
    let sol = solve(&problem);
    let ps = quadratic::residual_polynomials(&gd).unwrap();
    let wc = quadratic::worst_case_quadratic(&ps[2], &mu, &l).unwrap();
    assert!(
        wc.value * wc.value <= sol.objective + 1e-6,
        "{} vs {}",
        wc.value * wc.value,
        sol.objective
    );
    announce!("ACCEPTANCE 8: PASS - quadratic rates exact for GD and dominated by the F_(mu,L) worst case");
}

#[test]
fn acceptance_9_unused_constraints() {
    let problem = gdls_problem(rint(1), ratio(1, 10));
    let (_, cert) = extract(&problem);
    let report = certificate::unused_constraints(&cert, &problem, 1e-7);
    assert_eq!(report.ids, vec!["IC(0,*)", "IC(1,*)", "IC(1,0)"]);
    announce!("ACCEPTANCE 9: PASS - unused constraints are exactly IC(0,*), IC(1,*), IC(1,0)");
}

// ---------------------------------------------------------------------------
// Criterion 10: CLI round trip
// ---------------------------------------------------------------------------

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pepcert"))
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

#[test]
fn acceptance_10_cli_round_trip() {
    let root = repo_root();
    let corpus_dir = root.join("corpus");
    let out_root = tempfile::tempdir().unwrap();
    let mut configs: Vec<PathBuf> = std::fs::read_dir(&corpus_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    configs.sort();
    assert!(!configs.is_empty());

    let mut first_cert = None;
    for config in &configs {
        let name = config.file_stem().unwrap().to_string_lossy().to_string();
        let out = out_root.path().join(&name);
        let status = cli()
            .args(["analyze".as_ref(), config.as_os_str()])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "analyze {name}");
        let cert = out.join("cert.json");
        let status = cli()
            .arg("verify")
            .arg(&cert)
            .arg(config)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0), "verify {name}");
        if name == "gdls_golden" {
            first_cert = Some(cert);
        }
    }

    // Tampered certificate: scale the rate down and re-verify.
    let cert_path = first_cert.unwrap();
    let mut cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
    cert["tau"] = serde_json::json!({ "value": 0.5 });
    let tampered = out_root.path().join("tampered.json");
    std::fs::write(&tampered, serde_json::to_string(&cert).unwrap()).unwrap();
    let status = cli()
        .arg("verify")
        .arg(&tampered)
        .arg(corpus_dir.join("gdls_golden.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3), "tampered certificate");

    // Certificate against a different problem: fingerprint mismatch.
    let status = cli()
        .arg("verify")
        .arg(&cert_path)
        .arg(corpus_dir.join("gdls_strong.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4), "mismatched config");
    announce!("ACCEPTANCE 10: PASS - analyze/verify round-trips on the corpus; tampering exits 3, mismatch exits 4");
}
