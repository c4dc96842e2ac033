//! Batch command-line front end: load a scenario, run residue or
//! integration commands, check the localization identity, or run the
//! built-in invariant suite. Reports are JSON on stdout; errors go to
//! stderr with machine-readable codes.
//!
//! Exit codes: 0 ok, 1 validation, 2 math-domain, 3 non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use superloc::berezin::integrate_chart;
use superloc::expr::OpaqueRegistry;
use superloc::quad::QuadError;
use superloc::residue::{
    berezinian_of_field, check_localization, scenario_residue, ResidueError,
};
use superloc::scenario::{Mode, Scenario, ScenarioError};
use superloc::selftest::run_selftest;

#[derive(Parser)]
#[command(
    name = "superloc",
    about = "Residue localization on complex supermanifold charts",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Path to the scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Pretty-print the JSON report.
    #[arg(long)]
    pretty: bool,
    /// Emit compact JSON (the default; kept for symmetry with --pretty).
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Residue at one singular point via the scenario's mode.
    Residue {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Index into the scenario's points array.
        #[arg(long, default_value_t = 0)]
        point: usize,
        /// Override the scenario mode (strict | f_zero | general).
        #[arg(long)]
        mode: Option<String>,
    },
    /// Residue at one point, forcing the generalized decomposition formula.
    ResidueGeneral {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Berezinian of the field's super-Jacobian at one point.
    Berezinian {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 0)]
        point: usize,
    },
    /// Chart integral of the scenario's form.
    Integrate {
        #[command(flatten)]
        common: ScenarioArgs,
    },
    /// Localization consistency check: exact residue sum vs chart integral.
    Check {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Pass/fail tolerance on |sum - integral| (default: the quad tol).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the built-in invariant suite.
    Selftest {
        /// Loosen the numeric checks (exact checks are unaffected).
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long)]
        pretty: bool,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Serialize)]
struct ResidueReport {
    residue: [f64; 2],
    mode: String,
    point: usize,
    hypothesis: &'static str,
}

fn hypothesis_note(sc: &Scenario, mode: Mode) -> &'static str {
    match mode {
        Mode::Strict => {
            if sc.field.is_f_zero() {
                "every dz-component vanishes; parity hypothesis vacuous"
            } else {
                "parity hypothesis enforced (xi-count matches the parity of n)"
            }
        }
        Mode::FZero => "dz-components verified identically zero; no parity constraint",
        Mode::General => "decomposition validated symbolically against the field",
    }
}

#[derive(Serialize)]
struct IntegrateReport {
    integral: [f64; 2],
}

fn fail(code: i32, kind: &str, message: String) -> ExitCode {
    eprintln!(
        "{}",
        json!({ "error": kind, "message": message, "exit": code })
    );
    ExitCode::from(code as u8)
}

fn scenario_fail(e: ScenarioError) -> ExitCode {
    fail(1, "validation", e.to_string())
}

fn residue_fail(e: ResidueError) -> ExitCode {
    let code = e.exit_code();
    let kind = match code {
        1 => "validation",
        2 => "math-domain",
        _ => "non-convergence",
    };
    fail(code, kind, e.to_string())
}

fn quad_fail(e: QuadError) -> ExitCode {
    let code = match e {
        QuadError::BadSpec(_) => 1,
        QuadError::NodeFailure { .. } => 2,
        _ => 3,
    };
    let kind = match code {
        1 => "validation",
        2 => "math-domain",
        _ => "non-convergence",
    };
    fail(code, kind, e.to_string())
}

fn emit<T: Serialize>(value: &T, pretty: bool) {
    let text = if pretty {
        serde_json::to_string_pretty(value)
    } else {
        serde_json::to_string(value)
    }
    .expect("report serialization");
    out_line(&text);
}

/// Print a line, tolerating a closed pipe.
fn out_line(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{text}");
}

fn load(common: &ScenarioArgs) -> Result<Scenario, ExitCode> {
    Scenario::load(&common.scenario).map_err(scenario_fail)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let reg = OpaqueRegistry::builtin();
    match cli.command {
        Command::Residue {
            common,
            point,
            mode,
        } => {
            let sc = match load(&common) {
                Ok(s) => s,
                Err(e) => return e,
            };
            let mode_override = match mode.as_deref().map(str::parse::<Mode>) {
                None => None,
                Some(Ok(m)) => Some(m),
                Some(Err(e)) => return fail(1, "validation", e),
            };
            let mode = mode_override.unwrap_or(sc.mode);
            match scenario_residue(&sc, point, mode_override, &reg) {
                Ok(r) => {
                    emit(
                        &ResidueReport {
                            residue: [r.re, r.im],
                            mode: mode.as_str().to_string(),
                            point,
                            hypothesis: hypothesis_note(&sc, mode),
                        },
                        common.pretty,
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => residue_fail(e),
            }
        }
        Command::ResidueGeneral { common, point } => {
            let sc = match load(&common) {
                Ok(s) => s,
                Err(e) => return e,
            };
            match scenario_residue(&sc, point, Some(Mode::General), &reg) {
                Ok(r) => {
                    emit(
                        &ResidueReport {
                            residue: [r.re, r.im],
                            mode: "general".into(),
                            point,
                            hypothesis: hypothesis_note(&sc, Mode::General),
                        },
                        common.pretty,
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => residue_fail(e),
            }
        }
        Command::Berezinian { common, point } => {
            let sc = match load(&common) {
                Ok(s) => s,
                Err(e) => return e,
            };
            let Some(pt) = sc.points.get(point) else {
                return fail(
                    1,
                    "validation",
                    format!("point index {point} out of range ({} points)", sc.points.len()),
                );
            };
            match berezinian_of_field(&sc.field, &pt.z, &reg) {
                Ok(ber) => {
                    emit(&json!({ "berezinian": ber.to_records(), "point": point }), common.pretty);
                    ExitCode::SUCCESS
                }
                Err(e) => residue_fail(e),
            }
        }
        Command::Integrate { common } => {
            let sc = match load(&common) {
                Ok(s) => s,
                Err(e) => return e,
            };
            match integrate_chart(&sc.form, &sc.quad, &reg) {
                Ok(v) => {
                    emit(&IntegrateReport { integral: [v.re, v.im] }, common.pretty);
                    ExitCode::SUCCESS
                }
                Err(e) => quad_fail(e),
            }
        }
        Command::Check { common, tol } => {
            let sc = match load(&common) {
                Ok(s) => s,
                Err(e) => return e,
            };
            match check_localization(&sc, tol, &reg) {
                Ok(report) => {
                    emit(&report, common.pretty);
                    if report.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(2)
                    }
                }
                Err(e) => residue_fail(e),
            }
        }
        Command::Selftest { tol, pretty, json: _ } => {
            let results = run_selftest(tol, None);
            let all_pass = results.iter().all(|r| r.pass);
            if pretty {
                for r in &results {
                    out_line(&format!(
                        "{} {:36} {}",
                        if r.pass { "PASS" } else { "FAIL" },
                        r.name,
                        r.detail
                    ));
                }
                out_line(if all_pass { "all checks passed" } else { "FAILURES present" });
            } else {
                emit(
                    &json!({ "checks": results, "all_pass": all_pass }),
                    false,
                );
            }
            if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
