//! CSV and JSON-lines rendering. Floats are printed with 17 significant
//! digits so that parsing the output recovers every value exactly.

use mls_collocation::LevelRecord;
use serde::Serialize;

use crate::config::Format;

pub const REPORT_HEADER: &str = "level,N,h,delta,quad_points,err_uN_inf,err_vN_inf,rate_uN,rate_vN,phi_inv_norm,c1,fn_norm,assemble_ms,solve_ms";

pub const DIAGNOSE_HEADER: &str = "level,N,h,q,cqu,delta,phi_inv_norm,c1,fn_norm,cond_est";

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn int_cell(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

/// A run that stopped early.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub level: usize,
    pub message: String,
}

#[derive(Serialize)]
struct FailureRecord<'a> {
    failure: &'a Failure,
}

#[allow(non_snake_case)]
#[derive(Serialize)]
struct ReportRow {
    level: usize,
    N: usize,
    h: f64,
    delta: f64,
    quad_points: Option<usize>,
    err_uN_inf: f64,
    err_vN_inf: Option<f64>,
    rate_uN: Option<f64>,
    rate_vN: Option<f64>,
    phi_inv_norm: Option<f64>,
    c1: Option<f64>,
    fn_norm: Option<f64>,
    assemble_ms: Option<f64>,
    solve_ms: Option<f64>,
}

impl From<&LevelRecord> for ReportRow {
    fn from(r: &LevelRecord) -> Self {
        Self {
            level: r.level,
            N: r.n_points,
            h: r.h,
            delta: r.delta,
            quad_points: r.quad_points,
            err_uN_inf: r.err_un,
            err_vN_inf: r.err_vn,
            rate_uN: r.rate_un,
            rate_vN: r.rate_vn,
            phi_inv_norm: r.phi_inv_norm,
            c1: r.c1,
            fn_norm: r.fn_norm,
            assemble_ms: r.assemble_ms,
            solve_ms: r.solve_ms,
        }
    }
}

fn report_csv_row(r: &LevelRecord) -> String {
    [
        r.level.to_string(),
        r.n_points.to_string(),
        fmt_float(r.h),
        fmt_float(r.delta),
        int_cell(r.quad_points),
        fmt_float(r.err_un),
        cell(r.err_vn),
        cell(r.rate_un),
        cell(r.rate_vn),
        cell(r.phi_inv_norm),
        cell(r.c1),
        cell(r.fn_norm),
        cell(r.assemble_ms),
        cell(r.solve_ms),
    ]
    .join(",")
}

fn jsonl_line<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("report rows serialize")
}

fn failure_line(failure: &Failure, format: Format) -> String {
    match format {
        Format::Csv => format!("# failure level={}: {}", failure.level, failure.message.replace('\n', " ")),
        Format::Jsonl => jsonl_line(&FailureRecord { failure }),
    }
}

fn finish(mut lines: Vec<String>, failure: Option<&Failure>, format: Format) -> String {
    if let Some(f) = failure {
        lines.push(failure_line(f, format));
    }
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    text
}

/// Convergence table, optionally followed by a failure record.
pub fn render_report(records: &[LevelRecord], failure: Option<&Failure>, format: Format) -> String {
    let lines = match format {
        Format::Csv => std::iter::once(REPORT_HEADER.to_string())
            .chain(records.iter().map(report_csv_row))
            .collect(),
        Format::Jsonl => records.iter().map(|r| jsonl_line(&ReportRow::from(r))).collect(),
    };
    finish(lines, failure, format)
}

/// Nodal values of a single solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeRow {
    pub j: usize,
    pub x: Vec<f64>,
    pub u_tilde: f64,
    pub u_exact: Option<f64>,
}

pub fn render_nodes(dim: usize, rows: &[NodeRow], failure: Option<&Failure>, format: Format) -> String {
    let lines = match format {
        Format::Csv => {
            let coords = if dim == 1 { "x".to_string() } else { (1..=dim).map(|a| format!("x{a}")).collect::<Vec<_>>().join(",") };
            std::iter::once(format!("j,{coords},u_tilde,u_exact"))
                .chain(rows.iter().map(|r| {
                    let mut cells = vec![r.j.to_string()];
                    cells.extend(r.x.iter().copied().map(fmt_float));
                    cells.push(fmt_float(r.u_tilde));
                    cells.push(cell(r.u_exact));
                    cells.join(",")
                }))
                .collect()
        }
        Format::Jsonl => rows.iter().map(jsonl_line).collect(),
    };
    finish(lines, failure, format)
}

/// Stability measurements at one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct DiagnoseRow {
    pub level: usize,
    pub N: usize,
    pub h: f64,
    pub q: Option<f64>,
    pub cqu: Option<f64>,
    pub delta: f64,
    pub phi_inv_norm: Option<f64>,
    pub c1: Option<f64>,
    pub fn_norm: Option<f64>,
    pub cond_est: Option<f64>,
}

pub fn render_diagnostics(rows: &[DiagnoseRow], failure: Option<&Failure>, format: Format) -> String {
    let lines = match format {
        Format::Csv => std::iter::once(DIAGNOSE_HEADER.to_string())
            .chain(rows.iter().map(|r| {
                [
                    r.level.to_string(),
                    r.N.to_string(),
                    fmt_float(r.h),
                    cell(r.q),
                    cell(r.cqu),
                    fmt_float(r.delta),
                    cell(r.phi_inv_norm),
                    cell(r.c1),
                    cell(r.fn_norm),
                    cell(r.cond_est),
                ]
                .join(",")
            }))
            .collect(),
        Format::Jsonl => rows.iter().map(jsonl_line).collect(),
    };
    finish(lines, failure, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(level: usize, h: f64, err: f64) -> LevelRecord {
        LevelRecord {
            level,
            n_points: level,
            h,
            delta: 4.0 * h,
            quad_points: Some(8),
            err_un: err,
            err_vn: Some(err / 3.0),
            phi_inv_norm: Some(2.2),
            c1: Some(1.0 + h),
            fn_norm: Some(std::f64::consts::E - 1.0),
            ..Default::default()
        }
    }

    fn three_levels() -> Vec<LevelRecord> {
        let mut rows = vec![record(11, 0.05, 1e-2), record(21, 0.025, 2.5e-3), record(41, 0.0125, 7e-4)];
        for i in 1..rows.len() {
            rows[i].rate_un = Some((rows[i - 1].err_un / rows[i].err_un).log2());
            rows[i].rate_vn = rows[i].rate_un;
        }
        rows
    }

    fn opt(cell: &str) -> Option<f64> {
        (!cell.is_empty()).then(|| cell.parse().unwrap())
    }

    #[test]
    fn header_has_fourteen_columns() {
        assert_eq!(REPORT_HEADER.split(',').count(), 14);
    }

    #[test]
    fn one_level_report_has_empty_rates() {
        let text = render_report(&[record(11, 0.05, 1e-2)], None, Format::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], REPORT_HEADER);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), 14);
        assert_eq!((cells[7], cells[8]), ("", ""));
        assert_eq!((cells[12], cells[13]), ("", ""));
    }

    #[test]
    fn three_level_report_has_two_populated_rates() {
        let text = render_report(&three_levels(), None, Format::Csv);
        let populated = text
            .lines()
            .skip(1)
            .filter(|l| !l.split(',').nth(7).unwrap().is_empty())
            .count();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(populated, 2);
    }

    #[test]
    fn csv_round_trips_exactly() {
        let rows = three_levels();
        let text = render_report(&rows, None, Format::Csv);
        for (line, r) in text.lines().skip(1).zip(&rows) {
            let c: Vec<&str> = line.split(',').collect();
            assert_eq!(c[0].parse::<usize>().unwrap(), r.level);
            assert_eq!(c[1].parse::<usize>().unwrap(), r.n_points);
            assert_eq!(c[2].parse::<f64>().unwrap(), r.h);
            assert_eq!(c[3].parse::<f64>().unwrap(), r.delta);
            assert_eq!(c[4].parse::<usize>().ok(), r.quad_points);
            assert_eq!(c[5].parse::<f64>().unwrap(), r.err_un);
            assert_eq!(opt(c[6]), r.err_vn);
            assert_eq!(opt(c[7]), r.rate_un);
            assert_eq!(opt(c[8]), r.rate_vn);
            assert_eq!(opt(c[9]), r.phi_inv_norm);
            assert_eq!(opt(c[10]), r.c1);
            assert_eq!(opt(c[11]), r.fn_norm);
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn jsonl_mirrors_csv_fields() {
        let rows = three_levels();
        let text = render_report(&rows, None, Format::Jsonl);
        let header: Vec<&str> = REPORT_HEADER.split(',').collect();
        for (line, r) in text.lines().zip(&rows) {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let obj = v.as_object().unwrap();
            assert_eq!(obj.keys().count(), 14);
            for key in &header {
                assert!(obj.contains_key(*key), "{key}");
            }
            assert_eq!(obj["err_uN_inf"].as_f64().unwrap(), r.err_un);
            assert_eq!(obj["rate_uN"].as_f64(), r.rate_un);
        }
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert!(first["rate_uN"].is_null());
    }

    #[test]
    fn failure_records_follow_partial_rows() {
        let failure = Failure {
            level: 81,
            message: "collocation system is not solvable".into(),
        };
        let csv = render_report(&three_levels()[..1], Some(&failure), Format::Csv);
        assert_eq!(csv.lines().last().unwrap(), "# failure level=81: collocation system is not solvable");
        let jsonl = render_report(&[], Some(&failure), Format::Jsonl);
        let v: serde_json::Value = serde_json::from_str(jsonl.trim()).unwrap();
        assert_eq!(v["failure"]["level"], 81);
    }

    #[test]
    fn node_table_columns_follow_dimension() {
        let rows = [NodeRow {
            j: 0,
            x: vec![0.5, 0.25],
            u_tilde: 1.0,
            u_exact: None,
        }];
        let text = render_nodes(2, &rows, None, Format::Csv);
        assert_eq!(text.lines().next().unwrap(), "j,x1,x2,u_tilde,u_exact");
        assert!(text.lines().nth(1).unwrap().ends_with(','));
    }
}
