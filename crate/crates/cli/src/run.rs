use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use mls_collocation::fredholm::{approximation_study, convergence_study, solve_level, FredholmProblem};

use crate::config::{Cli, Command, RunConfig};
use crate::report::{render_diagnostics, render_nodes, render_report, DiagnoseRow, Failure, NodeRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Rendered output; `failed` marks a run cut short by a numerical failure.
struct Outcome {
    text: String,
    failed: bool,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (command, raw) = cli.command.split();
    let config = match raw
        .settings()
        .and_then(|s| RunConfig::from_settings(command, &s))
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    let outcome = execute(&config);
    let written = match &config.out {
        Some(path) => std::fs::write(path, &outcome.text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .write_all(outcome.text.as_bytes())
            .map_err(|e| format!("cannot write to standard output: {e}")),
    };
    if let Err(message) = written {
        eprintln!("error: {message}");
        return EXIT_NUMERICAL;
    }
    if outcome.failed {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    }
}

fn report_failure(failure: Option<Failure>) -> (Option<Failure>, bool) {
    if let Some(f) = &failure {
        eprintln!("error: level {} failed: {}", f.level, f.message);
    }
    let failed = failure.is_some();
    (failure, failed)
}

fn problem(config: &RunConfig) -> &FredholmProblem {
    config
        .problem
        .as_ref()
        .expect("validated configs carry a problem for this command")
}

fn execute(config: &RunConfig) -> Outcome {
    match config.command {
        Command::Study | Command::Approx => {
            let result = if config.command == Command::Study {
                convergence_study(problem(config), &config.study)
            } else {
                let exact = config.exact.as_ref().expect("approx requires an exact function");
                approximation_study(exact, &config.domain, &config.study)
            };
            let (records, failure) = match result {
                Ok(report) => (report.records, None),
                Err(e) => (
                    e.partial.records,
                    Some(Failure {
                        level: e.level,
                        message: e.source.to_string(),
                    }),
                ),
            };
            let (failure, failed) = report_failure(failure);
            Outcome {
                text: render_report(&records, failure.as_ref(), config.format),
                failed,
            }
        }
        Command::Solve => {
            let n = config.study.levels[0];
            let (rows, failure) = match solve_nodes(config, n) {
                Ok(rows) => (rows, None),
                Err(message) => (Vec::new(), Some(Failure { level: n, message })),
            };
            let (failure, failed) = report_failure(failure);
            Outcome {
                text: render_nodes(config.domain.dim(), &rows, failure.as_ref(), config.format),
                failed,
            }
        }
        Command::Diagnose => {
            let mut rows = Vec::new();
            let mut failure = None;
            for &n in &config.study.levels {
                match diagnose_level(config, n) {
                    Ok(row) => rows.push(row),
                    Err(message) => {
                        failure = Some(Failure { level: n, message });
                        break;
                    }
                }
            }
            let (failure, failed) = report_failure(failure);
            Outcome {
                text: render_diagnostics(&rows, failure.as_ref(), config.format),
                failed,
            }
        }
    }
}

fn solve_nodes(config: &RunConfig, n: usize) -> Result<Vec<NodeRow>, String> {
    let problem = problem(config);
    let sol = solve_level(problem, &config.study, n).map_err(|e| e.to_string())?;
    eprintln!("residual {:e}", sol.residual());
    sol.model()
        .points()
        .iter()
        .zip(sol.coefficients())
        .enumerate()
        .map(|(j, (x, &u))| {
            Ok(NodeRow {
                j,
                x: x.to_vec(),
                u_tilde: u,
                u_exact: problem.exact_at(x).map_err(|e| e.to_string())?,
            })
        })
        .collect()
}

fn diagnose_level(config: &RunConfig, n: usize) -> Result<DiagnoseRow, String> {
    let inner = || -> mls_collocation::Result<DiagnoseRow> {
        let sol = solve_level(problem(config), &config.study, n)?;
        let dense = config.study.dense_grid(&config.domain)?;
        let d = sol.diagnose(&dense)?;
        let model = sol.model();
        Ok(DiagnoseRow {
            level: n,
            N: model.len(),
            h: model.fill_distance(),
            q: model.points().separation_distance().ok(),
            cqu: d.cqu,
            delta: model.radius(),
            phi_inv_norm: d.phi_inv_norm,
            c1: d.c1,
            fn_norm: d.fn_norm,
            cond_est: d.condition,
        })
    };
    inner().map_err(|e| e.to_string())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::REPORT_HEADER;
    use std::path::Path;

    fn run_with(args: &[&str]) -> i32 {
        run(std::iter::once("mlscol").chain(args.iter().copied()))
    }

    fn degenerate_study(out: &Path) -> Vec<String> {
        [
            "study", "--dim", "1", "--domain", "0,1", "--lambda", "1", "--kernel", "x*s", "--rhs", "4*x/3",
            "--exact", "x", "--m", "1", "--levels", "11,21,41", "--quad", "gl:4", "--out",
        ]
        .iter()
        .map(|s| s.to_string())
        .chain(std::iter::once(out.display().to_string()))
        .collect()
    }

    fn as_strs(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }

    #[test]
    fn degenerate_study_is_exact_at_every_level() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run.csv");
        assert_eq!(run_with(&as_strs(&degenerate_study(&out))), EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 3);
        for row in rows {
            let err: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
            assert!(err <= 1e-10);
        }
    }

    #[test]
    fn approx_final_rate_in_band() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("approx.csv");
        let code = run_with(&[
            "approx", "--dim", "1", "--exact", "sin(pi*x)", "--m", "2", "--levels", "21,41,81", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        let rate: f64 = text.lines().last().unwrap().split(',').nth(7).unwrap().parse().unwrap();
        assert!((2.7..=3.5).contains(&rate), "{rate}");
    }

    #[test]
    fn config_errors_exit_two_and_write_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("bad.csv");
        let out_s = out.to_str().unwrap();
        for args in [
            vec!["solve", "--kernel", "x+*s", "--rhs", "x", "--levels", "11", "--out", out_s],
            vec!["study", "--kernel", "x*s", "--rhs", "x", "--levels", "0", "--out", out_s],
            vec!["study", "--kernel", "x*y", "--rhs", "x", "--levels", "5", "--out", out_s],
            vec!["study", "--kernel", "x", "--rhs", "s", "--levels", "5", "--out", out_s],
            vec!["study", "--bogus", "--out", out_s],
            vec!["approx", "--levels", "5", "--out", out_s],
        ] {
            assert_eq!(run_with(&args), EXIT_CONFIG, "{args:?}");
            assert!(!out.exists(), "{args:?}");
        }
    }

    #[test]
    fn numerical_failure_writes_partial_report_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("fail.csv");
        // λ = -1 with κ ≡ 1 is singular; the exact-free study fails on its
        // reference level before any row is produced.
        let code = run_with(&[
            "study", "--kernel", "1", "--rhs", "x", "--lambda", "-1", "--m", "0", "--levels", "11", "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_NUMERICAL);
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert!(lines[1].starts_with("# failure level=21:"), "{}", lines[1]);

        let jsonl = dir.path().join("fail.jsonl");
        let code = run_with(&[
            "study", "--kernel", "1", "--rhs", "x", "--exact", "x", "--lambda", "-1", "--m", "0", "--levels",
            "11", "--format", "jsonl", "--out", jsonl.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_NUMERICAL);
        let v: serde_json::Value = serde_json::from_str(std::fs::read_to_string(&jsonl).unwrap().trim()).unwrap();
        assert_eq!(v["failure"]["level"], 11);
    }

    #[test]
    fn unwritable_output_exits_one() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("missing").join("run.csv");
        assert_eq!(run_with(&as_strs(&degenerate_study(&out))), EXIT_NUMERICAL);
    }

    #[test]
    fn config_file_supplies_defaults_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.cfg");
        std::fs::write(
            &cfg,
            "# degenerate kernel\nkernel = x*s\nrhs = 4*x/3\nexact = x\nm = 1\nlevels = 5,9\nquad = gl:4\n",
        )
        .unwrap();
        let out = dir.path().join("run.csv");
        let code = run_with(&[
            "study", "--config", cfg.to_str().unwrap(), "--levels", "7", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("7,7,"));
    }

    #[test]
    fn solve_and_diagnose_tables() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("solve.csv");
        let common = ["--kernel", "exp(x-s)", "--exact", "sin(pi*x)", "--m", "2", "--quad", "gl:8"];
        let mut args = vec!["solve"];
        args.extend(common);
        args.extend(["--levels", "21", "--out", out.to_str().unwrap()]);
        assert_eq!(run_with(&args), EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "j,x,u_tilde,u_exact");
        assert_eq!(text.lines().count(), 22);
        for row in text.lines().skip(1) {
            let c: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
            assert!((c[2] - c[3]).abs() < 1e-3);
        }

        let out = dir.path().join("diag.csv");
        let mut args = vec!["diagnose"];
        args.extend(common);
        args.extend(["--levels", "21,41", "--out", out.to_str().unwrap()]);
        assert_eq!(run_with(&args), EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        assert_eq!(text.lines().next().unwrap(), crate::report::DIAGNOSE_HEADER);
        for row in text.lines().skip(1) {
            assert!(row.split(',').all(|c| !c.is_empty()), "{row}");
        }
    }

    #[test]
    fn timings_are_opt_in() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("t.csv");
        let mut args = degenerate_study(&out);
        args.push("--timings".into());
        assert_eq!(run_with(&as_strs(&args)), EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert!(row[12].parse::<f64>().is_ok() && row[13].parse::<f64>().is_ok());
    }

    #[test]
    fn two_dimensional_study_runs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("2d.jsonl");
        let code = run_with(&[
            "study", "--dim", "2", "--kernel", "x1*s1 + x2*s2", "--exact", "x1 + x2^2", "--m", "2", "--levels",
            "6,9", "--dense", "21", "--format", "jsonl", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(&out).unwrap();
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["err_uN_inf"].as_f64().unwrap() < 1e-9);
        }
    }
}
