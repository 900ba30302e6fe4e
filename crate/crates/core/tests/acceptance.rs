//! Acceptance run: every experiment at its default configuration, one
//! PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

use std::collections::HashMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use kinfrac::experiment::{execute, ExperimentKind, Metric, Report, RunConfig};

struct Runs(HashMap<&'static str, Report>);

impl Runs {
    fn get(&mut self, kind: ExperimentKind) -> &Report {
        self.0.entry(kind.name()).or_insert_with(|| {
            let start = Instant::now();
            let mut cfg = RunConfig::new(kind);
            cfg.seed = Some(1);
            let r = execute(&cfg, Path::new(".")).unwrap_or_else(|e| panic!("{}: {e}", kind.name()));
            eprintln!("  ({} took {:.1} s)", kind.name(), start.elapsed().as_secs_f64());
            r
        })
    }
}

/// Metrics named exactly or starting with `prefix/`.
fn pick<'a>(report: &'a Report, names: &[&str]) -> Vec<&'a Metric> {
    let picked: Vec<&Metric> = report
        .metrics
        .iter()
        .filter(|m| {
            names
                .iter()
                .any(|n| m.name == *n || m.name.starts_with(&format!("{n}/")))
        })
        .collect();
    assert!(!picked.is_empty(), "no metric matches {names:?}");
    picked
}

fn worst(ms: &[&Metric]) -> String {
    let mut by_name: Vec<String> = Vec::new();
    for m in ms {
        let head = m.name.split('/').next().unwrap_or(&m.name);
        if by_name.iter().any(|s| s.starts_with(&format!("{head}="))) {
            continue;
        }
        let same: Vec<&&Metric> = ms.iter().filter(|x| x.name.split('/').next() == Some(head)).collect();
        let extreme = match m.comparison {
            kinfrac::experiment::Comparison::AtLeast => same.iter().map(|x| x.value).fold(f64::INFINITY, f64::min),
            _ => same.iter().map(|x| x.value).fold(f64::NEG_INFINITY, f64::max),
        };
        by_name.push(format!("{head}={extreme:.3e}"));
    }
    by_name.join(" ")
}

fn line(k: usize, what: &str, ms: &[&Metric]) -> bool {
    let ok = ms.iter().all(|m| m.pass);
    println!("{} {k:>2} {what}: {}", if ok { "PASS" } else { "FAIL" }, worst(ms));
    for m in ms.iter().filter(|m| !m.pass) {
        println!(
            "        failed {} = {:e} (threshold {:?})",
            m.name, m.value, m.threshold
        );
    }
    ok
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut runs = Runs(HashMap::new());
    let mut all = true;
    use ExperimentKind::*;

    let r = runs.get(OperatorIdentity);
    all &= line(
        1,
        "generator equals complement form (disk, L-shape)",
        &pick(r, &["max_rel_err"]),
    );

    let r = runs.get(ConvexVsNonconvex);
    all &= line(
        2,
        "convex agreement, hidden-bump discrepancy",
        &pick(r, &["convex_max_rel_diff", "nonconvex_min_rel_diff"]),
    );

    let r = runs.get(HAlphaBound);
    all &= line(
        3,
        "h_alpha radial reduction and closed forms",
        &pick(
            r,
            &[
                "reduction_max_rel_err",
                "radial_identity_rel_err",
                "interval_center_rel_err",
                "disk_center_rel_err",
            ],
        ),
    );
    let mut bound = pick(r, &["blowup_slope_dev"]);
    bound.extend(
        pick(r, &["sup_h_delta_alpha"])
            .into_iter()
            .filter(|m| !m.value.is_finite()),
    );
    all &= line(4, "h_alpha * delta^alpha bounded toward the boundary", &bound);

    let r = runs.get(Lemma3Convergence);
    all &= line(
        5,
        "adjoint kinetic limit rates",
        &pick(r, &["order_dev", "error_increases", "log_constant_growth"]),
    );
    all &= line(6, "chi_eps norm below phi norm", &pick(r, &["lemma2_max_norm_ratio"]));

    let r = runs.get(KineticSweep);
    all &= line(
        7,
        "kinetic MC approaches the grid solver",
        &pick(r, &["kinetic_l1_smallest_eps", "kinetic_l1_increases"]),
    );
    let kinetic_solver: Vec<Metric> = pick(r, &["solver_min_value", "solver_l2_increases"])
        .into_iter()
        .cloned()
        .collect();

    let r = runs.get(JumpVsPde);
    all &= line(
        8,
        "jump process matches the grid solver, kill hazard",
        &pick(
            r,
            &[
                "jump_l1",
                "hazard_sigma_above_h",
                "hazard_final_sigma_dev",
                "hazard_downward_steps",
            ],
        ),
    );
    let mut solver = pick(r, &["solver_min_value", "solver_l2_increases", "refinement_min_ratio"]);
    solver.extend(kinetic_solver.iter());
    all &= line(9, "solver positivity, L2 decay, weak residual refinement", &solver);

    let r = runs.get(SamplerTests);
    all &= line(
        10,
        "equilibrium sampler KS and mass",
        &pick(r, &["ks_p_value", "mass_quadrature_err"]),
    );

    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
