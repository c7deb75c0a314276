//! Refinement studies: errors, observed rates and diagnostics per level.

use rayon::prelude::*;

use super::{solve_collocation, CollocationSolution, FredholmProblem, SolveOptions};
use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::geometry::{generate_nodes, DomainBox, NodeKind, PointSet};
use crate::mls::{MlsConfig, MlsModel};
use crate::quadrature::{tensor_rule, QuadSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub mls: MlsConfig,
    pub node_kind: NodeKind,
    /// Nodes per axis at each level.
    pub levels: Vec<usize>,
    /// `None` uses Gauss–Legendre with `max(2(m + 1), n_per_axis)` points
    /// per axis, so the rule refines with the trial set.
    pub quadrature: Option<QuadSpec>,
    pub seed: u64,
    /// Test-to-trial point ratio `M / N`; values above 1 oversample.
    pub oversample: f64,
    /// Dense error grid per axis; `None` means 1001 in 1D and 101 in 2D.
    pub dense_per_axis: Option<usize>,
    pub diagnostics: bool,
    pub timings: bool,
}

impl StudyConfig {
    pub fn new(mls: MlsConfig, levels: Vec<usize>) -> Self {
        Self {
            mls,
            node_kind: NodeKind::UniformGrid,
            levels,
            quadrature: None,
            seed: 0,
            oversample: 1.0,
            dense_per_axis: None,
            diagnostics: true,
            timings: false,
        }
    }

    pub fn with_quadrature(mut self, spec: QuadSpec) -> Self {
        self.quadrature = Some(spec);
        self
    }

    pub fn quad_spec(&self, n_per_axis: usize) -> QuadSpec {
        self.quadrature.unwrap_or_else(|| {
            QuadSpec::gauss((2 * (self.mls.degree as usize + 1)).max(n_per_axis))
        })
    }

    pub fn dense_grid(&self, domain: &DomainBox) -> Result<PointSet> {
        let per_axis = self
            .dense_per_axis
            .unwrap_or(if domain.dim() == 1 { 1001 } else { 101 });
        domain.grid(per_axis)
    }

    fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(invalid("at least one refinement level is required"));
        }
        if self.levels.contains(&0) {
            return Err(invalid("levels must be positive node counts per axis"));
        }
        if !(self.oversample >= 1.0 && self.oversample.is_finite()) {
            return Err(invalid("oversampling ratio must be at least 1"));
        }
        Ok(())
    }

    /// Test points per axis for a trial level.
    fn test_per_axis(&self, n: usize, dim: usize) -> usize {
        if self.oversample <= 1.0 {
            return n;
        }
        let factor = self.oversample.powf(1.0 / dim as f64);
        ((n.saturating_sub(1)) as f64 * factor).round() as usize + 1
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelRecord {
    /// Nodes per axis.
    pub level: usize,
    pub n_points: usize,
    pub h: f64,
    pub delta: f64,
    pub quad_points: Option<usize>,
    pub err_un: f64,
    pub err_vn: Option<f64>,
    pub rate_un: Option<f64>,
    pub rate_vn: Option<f64>,
    pub phi_inv_norm: Option<f64>,
    pub c1: Option<f64>,
    pub fn_norm: Option<f64>,
    pub assemble_ms: Option<f64>,
    pub solve_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceReport {
    pub records: Vec<LevelRecord>,
}

impl ConvergenceReport {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&LevelRecord> {
        self.records.last()
    }

    fn push(&mut self, mut record: LevelRecord) {
        if let Some(prev) = self.records.last() {
            record.rate_un = observed_rate(prev.err_un, record.err_un, prev.h, record.h);
            record.rate_vn = match (prev.err_vn, record.err_vn) {
                (Some(a), Some(b)) => observed_rate(a, b, prev.h, record.h),
                _ => None,
            };
        }
        self.records.push(record);
    }
}

/// `log(e_prev / e_cur) / log(h_prev / h_cur)`.
pub fn observed_rate(e_prev: f64, e_cur: f64, h_prev: f64, h_cur: f64) -> Option<f64> {
    let rate = (e_prev / e_cur).ln() / (h_prev / h_cur).ln();
    rate.is_finite().then_some(rate)
}

/// A study that stopped early; `partial` holds the completed levels.
/// `level` is the failing node count per axis, or 0 for setup failures.
#[derive(Debug, Clone, thiserror::Error)]
#[error("level {level} failed: {source}")]
pub struct StudyError {
    pub level: usize,
    pub partial: ConvergenceReport,
    #[source]
    pub source: Error,
}

fn fail(level: usize, partial: &ConvergenceReport, source: Error) -> StudyError {
    StudyError {
        level,
        partial: partial.clone(),
        source,
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn eval_on<F>(grid: &PointSet, f: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    (0..grid.len()).into_par_iter().map(|i| f(grid.point(i))).collect()
}

/// Builds the trial model, test points and rule for one level and solves.
pub fn solve_level(
    problem: &FredholmProblem,
    config: &StudyConfig,
    n_per_axis: usize,
) -> Result<CollocationSolution> {
    let domain = problem.domain();
    let trial = generate_nodes(config.node_kind, n_per_axis, domain, config.seed)?;
    let model = MlsModel::build(trial.clone(), &config.mls, domain)?;
    let test = if config.oversample > 1.0 {
        let m = config.test_per_axis(n_per_axis, domain.dim());
        generate_nodes(config.node_kind, m, domain, config.seed.wrapping_add(1))?
    } else {
        trial
    };
    let rule = tensor_rule(config.quad_spec(n_per_axis), domain)?;
    let options = SolveOptions {
        condition_estimate: config.diagnostics,
        force_least_squares: false,
    };
    solve_collocation(problem, &model, &test, &rule, options)
}

/// Solves the problem at every level and tabulates sup-norm errors of
/// `u_N` and `v_N` on a dense grid.
///
/// Errors are measured against the exact solution when one is given,
/// otherwise against `v_N` of a reference level with twice the resolution of
/// the finest requested level.
pub fn convergence_study(
    problem: &FredholmProblem,
    config: &StudyConfig,
) -> std::result::Result<ConvergenceReport, StudyError> {
    let mut report = ConvergenceReport::default();
    config.validate().map_err(|e| fail(0, &report, e))?;
    let dense = config
        .dense_grid(problem.domain())
        .map_err(|e| fail(0, &report, e))?;
    let reference: Vec<f64> = match problem.exact() {
        Some(_) => eval_on(&dense, |x| Ok(problem.exact_at(x)?.unwrap_or(0.0)))
            .map_err(|e| fail(0, &report, e))?,
        None => {
            let finest = *config.levels.iter().max().unwrap_or(&1);
            let n_ref = 2 * finest.saturating_sub(1) + 1;
            let mut ref_config = config.clone();
            ref_config.diagnostics = false;
            solve_level(problem, &ref_config, n_ref)
                .and_then(|sol| eval_on(&dense, |x| sol.eval_vn(x)))
                .map_err(|e| fail(n_ref, &report, e))?
        }
    };

    for &n in &config.levels {
        let level = || -> Result<LevelRecord> {
            let sol = solve_level(problem, config, n)?;
            let un = eval_on(&dense, |x| sol.eval_un(x))?;
            let vn = eval_on(&dense, |x| sol.eval_vn(x))?;
            let model = sol.model();
            let mut record = LevelRecord {
                level: n,
                n_points: model.len(),
                h: model.fill_distance(),
                delta: model.radius(),
                quad_points: Some(sol.rule().len()),
                err_un: max_abs_diff(&un, &reference),
                err_vn: Some(max_abs_diff(&vn, &reference)),
                ..LevelRecord::default()
            };
            if config.diagnostics {
                let d = sol.diagnose(&dense)?;
                record.phi_inv_norm = d.phi_inv_norm;
                record.c1 = d.c1;
                record.fn_norm = d.fn_norm;
            }
            if config.timings {
                record.assemble_ms = Some(ms(sol.assemble_time()));
                record.solve_ms = Some(ms(sol.solve_time()));
            }
            Ok(record)
        };
        let record = level().map_err(|e| fail(n, &report, e))?;
        report.push(record);
    }
    Ok(report)
}

/// MLS approximation of `exact` sampled at the trial points of each level.
pub fn approximation_study(
    exact: &Expr,
    domain: &DomainBox,
    config: &StudyConfig,
) -> std::result::Result<ConvergenceReport, StudyError> {
    let mut report = ConvergenceReport::default();
    config.validate().map_err(|e| fail(0, &report, e))?;
    let eval = |x: &[f64]| {
        exact.eval_x(x).map_err(|source| Error::EvalAt {
            what: "exact solution",
            point: x.to_vec(),
            source,
        })
    };
    let dense = config.dense_grid(domain).map_err(|e| fail(0, &report, e))?;
    let reference = eval_on(&dense, eval).map_err(|e| fail(0, &report, e))?;
    for &n in &config.levels {
        let level = || -> Result<LevelRecord> {
            let trial = generate_nodes(config.node_kind, n, domain, config.seed)?;
            let nodal = trial.iter().map(eval).collect::<Result<Vec<_>>>()?;
            let model = MlsModel::build(trial, &config.mls, domain)?;
            let approx = eval_on(&dense, |x| model.approximate(&nodal, x))?;
            Ok(LevelRecord {
                level: n,
                n_points: model.len(),
                h: model.fill_distance(),
                delta: model.radius(),
                err_un: max_abs_diff(&approx, &reference),
                c1: if config.diagnostics {
                    Some(model.stability_constant(&dense)?)
                } else {
                    None
                },
                ..LevelRecord::default()
            })
        };
        let record = level().map_err(|e| fail(n, &report, e))?;
        report.push(record);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_quartered_error_is_two() {
        let r = observed_rate(1e-2, 2.5e-3, 0.1, 0.05).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        assert_eq!(observed_rate(0.0, 0.0, 0.1, 0.05), None);
    }

    #[test]
    fn first_level_has_no_rate() {
        let mut report = ConvergenceReport::default();
        report.push(LevelRecord {
            h: 0.1,
            err_un: 1e-2,
            err_vn: Some(1e-2),
            ..Default::default()
        });
        report.push(LevelRecord {
            h: 0.05,
            err_un: 2.5e-3,
            err_vn: None,
            ..Default::default()
        });
        assert_eq!(report.records[0].rate_un, None);
        assert!((report.records[1].rate_un.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(report.records[1].rate_vn, None);
    }

    #[test]
    fn oversampled_test_counts() {
        let mut c = StudyConfig::new(MlsConfig::new(1), vec![11]);
        assert_eq!(c.test_per_axis(11, 1), 11);
        c.oversample = 2.0;
        assert_eq!(c.test_per_axis(11, 1), 21);
        c.oversample = 4.0;
        assert_eq!(c.test_per_axis(11, 2), 21);
    }
}
