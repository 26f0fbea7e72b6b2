//! Batch front door: parse a problem config, run the requested analyses,
//! and emit reports, certificates, and proofs.
//!
//! Exit codes: 0 certified pass, 1 configuration or I/O error, 2 solver
//! failure, 3 verification failure, 4 certificate/config mismatch.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pepcert::builder::reconstruct_worst_case;
use pepcert::certificate::{self, Certificate, CertError};
use pepcert::lyapunov;
use pepcert::quadratic;
use pepcert::sdp::{self, PrimalDualSolution, SolveStatus};

use config::{resolve, ProblemConfig, ResolvedConfig};

#[derive(Parser)]
#[command(name = "pepcert", about = "Worst-case analysis of first-order methods")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the performance-estimation problem and emit the artifacts.
    Analyze {
        config: PathBuf,
        /// Output directory for report.md, cert.json, proof.md, ..
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Override the solver tolerance from the config.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Re-check a certificate against a problem config.
    Verify { cert: PathBuf, config: PathBuf },
    /// Print the residual-polynomial rate table for a quadratic-class analysis.
    Quadratic { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Analyze { config, out, tol } => analyze(&config, &out, tol),
        Cmd::Verify { cert, config } => verify(&cert, &config),
        Cmd::Quadratic { config } => quadratic_table(&config),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn load_config(path: &Path) -> Result<(ProblemConfig, ResolvedConfig), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let cfg: ProblemConfig = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let resolved = resolve(&cfg).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((cfg, resolved))
}

fn write_artifact(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn analyze(config_path: &Path, out: &Path, tol: Option<f64>) -> Result<u8, String> {
    let (cfg, resolved) = load_config(config_path)?;
    let problem = &resolved.problem;
    let mut opts = resolved.options;
    if let Some(t) = tol {
        opts.tol = t;
    }

    let solution = match sdp::solve(problem, &opts) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return Ok(2);
        }
    };
    let mut report = report_header(&cfg, problem, &solution, &opts);
    if solution.status != SolveStatus::Optimal {
        report.push_str("\nSolver did not converge; no certificate emitted.\n");
        write_artifact(out, "report.md", &report)?;
        eprintln!("solver failure: status {:?}", solution.status);
        return Ok(2);
    }

    // Certificate: the canonical analytic one when the method admits it,
    // otherwise extracted from the solver's dual point.
    let cert = match lyapunov::nag_certificate(problem) {
        Ok(c) => c,
        Err(_) => certificate::extract(&solution, problem, opts.tol)
            .map_err(|e| format!("extraction: {e}"))?,
    };
    let verdict = certificate::verify(&cert, problem, certificate::DEFAULT_EPS)
        .map_err(|e| format!("verification: {e}"))?;

    write!(
        report,
        "\n## Certificate\n\n\
         - rate tau = {}\n\
         - verdict: {}\n\
         - dual vector residual: {:.3e}\n\
         - min slack eigenvalue: {:.3e}\n",
        fmt_cert_value(&cert.tau),
        if verdict.pass { "PASS" } else { "FAIL" },
        verdict.vector_residual,
        verdict.min_eig_slack,
    )
    .unwrap();

    let unused = certificate::unused_constraints(&cert, problem, 1e-7);
    if !unused.ids.is_empty() {
        write!(
            report,
            "\nUnused constraints: {}. {}\n",
            unused.ids.join(", "),
            unused.note
        )
        .unwrap();
    }

    if cfg.analyses.backtracking_report {
        let bt = certificate::backtracking_report(&cert, problem, 1e-7);
        write!(
            report,
            "\n## Backtracking compatibility\n\n\
             - parameter-free atoms: {}\n\
             - observable atoms: {}\n\
             - unobservable atoms: {}\n\
             - compatible: {}\n",
            list_or_none(&bt.parameter_free),
            list_or_none(&bt.observable),
            list_or_none(&bt.unobservable),
            bt.compatible,
        )
        .unwrap();
    }

    if cfg.analyses.certificate {
        let json = serde_json::to_string_pretty(&cert).map_err(|e| e.to_string())?;
        write_artifact(out, "cert.json", &(json + "\n"))?;
    }
    if cfg.analyses.proof {
        let proof = certificate::render_proof(&cert, problem).map_err(|e| format!("proof: {e}"))?;
        write_artifact(out, "proof.md", &proof)?;
    }
    if cfg.analyses.lyapunov {
        write_artifact(out, "lyapunov.md", &lyapunov_doc(problem, &cert, &opts)?)?;
    }
    if cfg.analyses.quadratic {
        write_artifact(out, "quadratic.md", &quadratic_doc(problem)?)?;
    }
    if cfg.analyses.worst_case_instance {
        let wc = reconstruct_worst_case(problem, &solution.g, &solution.f, 1e-7)
            .map_err(|e| format!("worst-case instance: {e}"))?;
        let json = serde_json::to_string_pretty(&wc).map_err(|e| e.to_string())?;
        write_artifact(out, "worst_case.json", &(json + "\n"))?;
    }
    write_artifact(out, "report.md", &report)?;

    Ok(if verdict.pass { 0 } else { 3 })
}

fn verify(cert_path: &Path, config_path: &Path) -> Result<u8, String> {
    let (_, resolved) = load_config(config_path)?;
    let text = std::fs::read_to_string(cert_path)
        .map_err(|e| format!("cannot read {}: {e}", cert_path.display()))?;
    let cert: Certificate =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", cert_path.display()))?;
    match certificate::verify(&cert, &resolved.problem, cert.tolerances.eps) {
        Ok(report) if report.pass => {
            println!("PASS");
            Ok(0)
        }
        Ok(report) => {
            println!(
                "FAIL (vector residual {:.3e}, min slack eigenvalue {:.3e}, sign violations: {})",
                report.vector_residual,
                report.min_eig_slack,
                list_or_none(&report.sign_violations),
            );
            Ok(3)
        }
        Err(CertError::FingerprintMismatch) => {
            println!("MISMATCH: certificate was issued for a different problem");
            Ok(4)
        }
        Err(e) => Err(e.to_string()),
    }
}

fn quadratic_table(config_path: &Path) -> Result<u8, String> {
    let (_, resolved) = load_config(config_path)?;
    print!("{}", quadratic_doc(&resolved.problem)?);
    Ok(0)
}

fn report_header(
    cfg: &ProblemConfig,
    problem: &pepcert::builder::PepProblem,
    solution: &PrimalDualSolution,
    opts: &pepcert::sdp::SolverOptions,
) -> String {
    let mut doc = String::new();
    writeln!(doc, "# Worst-case analysis report").unwrap();
    writeln!(doc).unwrap();
    writeln!(doc, "- method: {} (T = {})", problem.method.name, cfg.t).unwrap();
    writeln!(
        doc,
        "- class: F_{{mu, L}} with mu = {}, L = {}",
        problem.class.mu,
        problem
            .class
            .l
            .as_ref()
            .map_or("inf".to_string(), |l| l.to_string())
    )
    .unwrap();
    writeln!(doc, "- metric: {:?}", problem.metric).unwrap();
    writeln!(doc, "- initialization: {}", problem.init_atom().pretty).unwrap();
    writeln!(doc, "- fingerprint: `{}`", problem.fingerprint()).unwrap();
    writeln!(doc).unwrap();
    writeln!(doc, "## Solver").unwrap();
    writeln!(doc).unwrap();
    writeln!(
        doc,
        "- status: {:?} after {} iterations (tol {:.1e})",
        solution.status, solution.iterations, opts.tol
    )
    .unwrap();
    writeln!(doc, "- objective (worst case): {:.12}", solution.objective).unwrap();
    writeln!(doc, "- rate tau: {:.12}", solution.tau).unwrap();
    writeln!(doc, "- duality gap: {:.3e}", solution.gap).unwrap();
    writeln!(
        doc,
        "- residuals: primal {:.3e}, dual {:.3e}, min eig G {:.3e}, min eig slack {:.3e}",
        solution.residuals.primal,
        solution.residuals.dual,
        solution.residuals.min_eig_g,
        solution.residuals.min_eig_slack
    )
    .unwrap();
    doc
}

fn lyapunov_doc(
    problem: &pepcert::builder::PepProblem,
    cert: &Certificate,
    opts: &pepcert::sdp::SolverOptions,
) -> Result<String, String> {
    let seq = lyapunov::build_potentials(problem, cert).map_err(|e| format!("lyapunov: {e}"))?;
    let mut doc = String::new();
    writeln!(doc, "# Potential sequence").unwrap();
    writeln!(doc).unwrap();
    writeln!(
        doc,
        "V_t accumulates the initialization quantity and the weighted \
         constraints observed before step t."
    )
    .unwrap();
    writeln!(doc).unwrap();
    writeln!(doc, "| step | atoms in V_t+1 - V_t | max increase | decrease |").unwrap();
    writeln!(doc, "|------|----------------------|--------------|----------|").unwrap();
    for t in 0..seq.horizon() {
        let check = lyapunov::verify_decrease(problem, &seq, t, opts, 1e-8)
            .map_err(|e| format!("lyapunov step {t}: {e}"))?;
        let atoms: Vec<&str> = seq.increments[t].iter().map(|(id, _)| id.as_str()).collect();
        writeln!(
            doc,
            "| {t} | {} | {:.3e} | {} |",
            if atoms.is_empty() {
                "(none)".to_string()
            } else {
                atoms.join(", ")
            },
            check.max_increase,
            if check.pass { "PASS" } else { "FAIL" }
        )
        .unwrap();
    }
    Ok(doc)
}

fn quadratic_doc(problem: &pepcert::builder::PepProblem) -> Result<String, String> {
    let mu = &problem.class.mu;
    let l = problem
        .class
        .l
        .as_ref()
        .ok_or("quadratic analysis requires a finite L")?;
    let ps = quadratic::residual_polynomials(&problem.method)
        .map_err(|e| format!("quadratic: {e}"))?;
    let mut doc = String::new();
    writeln!(doc, "# Quadratic-class rates").unwrap();
    writeln!(doc).unwrap();
    writeln!(
        doc,
        "Worst case of |P_t| over Hessian spectra in [{mu}, {l}]."
    )
    .unwrap();
    writeln!(doc).unwrap();
    writeln!(doc, "| t | degree | sup |P_t| | attained at |").unwrap();
    writeln!(doc, "|---|--------|-----------|-------------|").unwrap();
    for (t, p) in ps.iter().enumerate() {
        let wc = quadratic::worst_case_quadratic(p, mu, l).map_err(|e| format!("quadratic: {e}"))?;
        writeln!(
            doc,
            "| {t} | {} | {:.12} | {:.12} |",
            p.degree(),
            wc.value,
            wc.at
        )
        .unwrap();
    }
    Ok(doc)
}

fn fmt_cert_value(v: &pepcert::certificate::CertValue) -> String {
    match &v.exact {
        Some(e) => format!("{} ({:.12})", e, v.value),
        None => format!("{:.12}", v.value),
    }
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "(none)".to_string()
    } else {
        items.join(", ")
    }
}
