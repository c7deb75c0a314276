//! Discrete MLS collocation for `λ u(x) + ∫_Ω κ(x, s) u(s) ds = f(x)`.
//!
//! With trial points `X`, test points `Y` and a quadrature rule `(τ_k, ω_k)`
//! the nodal unknowns `ũ_j` solve
//!
//! ```text
//! Σ_j [ λ φ_j(y_i) + Σ_k κ(y_i, τ_k) φ_j(τ_k) ω_k ] ũ_j = f(y_i).
//! ```
//!
//! The collocation solution is `u_N = Σ_j φ_j ũ_j`; the iterated solution is
//! `v_N = (f − F_N u_N) / λ` with `F_N g(x) = Σ_k κ(x, τ_k) g(τ_k) ω_k`.

mod study;

pub use study::{
    approximation_study, convergence_study, observed_rate, solve_level, ConvergenceReport, LevelRecord,
    StudyConfig, StudyError,
};

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::expr::Expr;
use crate::geometry::{DomainBox, PointSet};
use crate::linalg::{qr_lstsq, vec_norm_inf, DenseMatrix, LinalgError, Lu};
use crate::mls::{MlsModel, ShapeEval};
use crate::quadrature::{tensor_rule, QuadSpec, QuadratureRule};

/// Gauss–Legendre points per axis of the rule used to manufacture `f`.
pub const REFERENCE_GAUSS_POINTS: usize = 64;

/// Relative residual accepted for a square collocation solve.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Right-hand side `f`.
#[derive(Debug, Clone)]
pub enum Rhs {
    Expr(Expr),
    /// `f = λ u + ∫ κ(·, s) u(s) ds` for a known `u`, the integral taken by
    /// a fixed reference rule.
    Manufactured(Manufactured),
}

#[derive(Debug, Clone)]
pub struct Manufactured {
    rule: QuadratureRule,
    exact_at_nodes: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FredholmProblem {
    lambda: f64,
    kernel: Expr,
    rhs: Rhs,
    exact: Option<Expr>,
    domain: DomainBox,
}

impl FredholmProblem {
    pub fn new(
        lambda: f64,
        kernel: Expr,
        rhs: Expr,
        exact: Option<Expr>,
        domain: DomainBox,
    ) -> Result<Self> {
        check_x_only(&rhs, domain.dim(), "right-hand side")?;
        Self::with_rhs(lambda, kernel, Rhs::Expr(rhs), exact, domain)
    }

    /// Problem whose right-hand side is manufactured from `exact` with a
    /// 64-point-per-axis Gauss–Legendre reference integration.
    pub fn manufactured(lambda: f64, kernel: Expr, exact: Expr, domain: DomainBox) -> Result<Self> {
        check_x_only(&exact, domain.dim(), "exact solution")?;
        let rule = tensor_rule(QuadSpec::gauss(REFERENCE_GAUSS_POINTS), &domain)?;
        let exact_at_nodes = rule
            .nodes()
            .map(|t| {
                exact.eval_x(t).map_err(|source| Error::EvalAt {
                    what: "exact solution",
                    point: t.to_vec(),
                    source,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rhs = Rhs::Manufactured(Manufactured {
            rule,
            exact_at_nodes,
        });
        Self::with_rhs(lambda, kernel, rhs, Some(exact), domain)
    }

    fn with_rhs(
        lambda: f64,
        kernel: Expr,
        rhs: Rhs,
        exact: Option<Expr>,
        domain: DomainBox,
    ) -> Result<Self> {
        if !(lambda != 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("lambda must be finite and nonzero, got {lambda}")));
        }
        if !kernel.has_dim(domain.dim()) {
            return Err(invalid("kernel variables do not match the domain dimension"));
        }
        if let Some(u) = &exact {
            check_x_only(u, domain.dim(), "exact solution")?;
        }
        Ok(Self {
            lambda,
            kernel,
            rhs,
            exact,
            domain,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernel(&self) -> &Expr {
        &self.kernel
    }

    pub fn rhs(&self) -> &Rhs {
        &self.rhs
    }

    pub fn exact(&self) -> Option<&Expr> {
        self.exact.as_ref()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn kernel_at(&self, x: &[f64], s: &[f64]) -> Result<f64> {
        self.kernel.eval_xs(x, s).map_err(|source| Error::EvalAt {
            what: "kernel",
            point: [x, s].concat(),
            source,
        })
    }

    pub fn rhs_at(&self, x: &[f64]) -> Result<f64> {
        match &self.rhs {
            Rhs::Expr(f) => f.eval_x(x).map_err(|source| Error::EvalAt {
                what: "right-hand side",
                point: x.to_vec(),
                source,
            }),
            Rhs::Manufactured(m) => {
                let mut integral = 0.0;
                for ((t, w), u) in m.rule.nodes().zip(m.rule.weights()).zip(&m.exact_at_nodes) {
                    integral += self.kernel_at(x, t)? * u * w;
                }
                Ok(self.lambda * self.exact_at(x)?.unwrap_or(0.0) + integral)
            }
        }
    }

    pub fn exact_at(&self, x: &[f64]) -> Result<Option<f64>> {
        self.exact
            .as_ref()
            .map(|u| {
                u.eval_x(x).map_err(|source| Error::EvalAt {
                    what: "exact solution",
                    point: x.to_vec(),
                    source,
                })
            })
            .transpose()
    }
}

fn check_x_only(e: &Expr, dim: usize, what: &str) -> Result<()> {
    if e.uses_s() {
        return Err(invalid(format!("{what} may only depend on x")));
    }
    if !e.has_dim(dim) {
        return Err(invalid(format!("{what} variables do not match the domain dimension")));
    }
    Ok(())
}

fn check_compatible(problem: &FredholmProblem, model: &MlsModel, rule: &QuadratureRule) -> Result<()> {
    if model.points().dim() != problem.dim() || rule.dim() != problem.dim() {
        return Err(invalid("problem, model and quadrature dimensions differ"));
    }
    if rule.is_empty() {
        return Err(invalid("quadrature rule is empty"));
    }
    Ok(())
}

/// Shape values at every quadrature node, computed once per assembly.
pub fn quadrature_shape_cache(model: &MlsModel, rule: &QuadratureRule) -> Result<Vec<ShapeEval>> {
    model.shape_values_flat(rule.node_coords())
}

/// Collocation matrix `B` (M×N) and right-hand side `f(Y)`.
pub fn assemble(
    problem: &FredholmProblem,
    model: &MlsModel,
    test_points: &PointSet,
    rule: &QuadratureRule,
) -> Result<(DenseMatrix, Vec<f64>)> {
    check_compatible(problem, model, rule)?;
    if test_points.dim() != problem.dim() {
        return Err(invalid("test point dimension differs from the problem"));
    }
    if test_points.len() < model.len() {
        return Err(invalid(format!(
            "need at least as many test points as trial points ({} < {})",
            test_points.len(),
            model.len()
        )));
    }
    let cache = quadrature_shape_cache(model, rule)?;
    let n = model.len();
    let lambda = problem.lambda();
    let rows: Vec<(Vec<f64>, f64)> = (0..test_points.len())
        .into_par_iter()
        .map(|i| {
            let y = test_points.point(i);
            let mut row = vec![0.0; n];
            let own = model.shape_values(y)?;
            for (&j, &phi) in own.indices.iter().zip(&own.values) {
                row[j] = lambda * phi;
            }
            for ((tau, w), shape) in rule.nodes().zip(rule.weights()).zip(&cache) {
                let c = problem.kernel_at(y, tau)? * w;
                if c == 0.0 {
                    continue;
                }
                for (&j, &phi) in shape.indices.iter().zip(&shape.values) {
                    row[j] += c * phi;
                }
            }
            Ok((row, problem.rhs_at(y)?))
        })
        .collect::<Result<_>>()?;
    let mut matrix = DenseMatrix::zeros(test_points.len(), n);
    let mut rhs = Vec::with_capacity(rows.len());
    for (i, (row, f)) in rows.into_iter().enumerate() {
        matrix.row_mut(i).copy_from_slice(&row);
        rhs.push(f);
    }
    Ok((matrix, rhs))
}

/// `F_N u(x) = Σ_k κ(x, τ_k) u(τ_k) ω_k`.
pub fn apply_fn<U>(problem: &FredholmProblem, rule: &QuadratureRule, mut u: U, x: &[f64]) -> Result<f64>
where
    U: FnMut(&[f64]) -> Result<f64>,
{
    rule.try_integrate(|t| Ok(problem.kernel_at(x, t)? * u(t)?))
}

/// `‖F_N‖ = max_x Σ_k |ω_k κ(x, τ_k)|` over the probe points.
pub fn operator_norm_fn(problem: &FredholmProblem, rule: &QuadratureRule, probes: &PointSet) -> Result<f64> {
    if probes.is_empty() {
        return Err(invalid("operator norm needs at least one probe"));
    }
    let sums: Vec<f64> = (0..probes.len())
        .into_par_iter()
        .map(|i| {
            let x = probes.point(i);
            let mut total = 0.0;
            for (t, w) in rule.nodes().zip(rule.weights()) {
                total += (w * problem.kernel_at(x, t)?).abs();
            }
            Ok(total)
        })
        .collect::<Result<_>>()?;
    Ok(sums.into_iter().fold(0.0, f64::max))
}

/// Coefficients `c` of `P_N u = Σ_j φ_j c_j` interpolating `samples` at `Y`,
/// i.e. the solution of `Φ_N c = samples`.
pub fn projection_interpolate(model: &MlsModel, test_points: &PointSet, samples: &[f64]) -> Result<Vec<f64>> {
    if test_points.len() != model.len() {
        return Err(invalid("projection needs as many test points as trial points"));
    }
    if samples.len() != test_points.len() {
        return Err(invalid("one sample per test point is required"));
    }
    let phi = model.shape_matrix(test_points)?;
    let lu = Lu::factor(&phi).map_err(Error::ProjectionUndefined)?;
    Ok(lu.solve(samples))
}

/// Measured quantities controlling stability of the scheme.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Diagnostics {
    /// `‖Φ_N⁻¹‖_∞` (square case only).
    pub phi_inv_norm: Option<f64>,
    /// `max_x Σ_j |φ_j(x)|`.
    pub c1: Option<f64>,
    /// `‖F_N‖`.
    pub fn_norm: Option<f64>,
    /// `h_{X,Ω} / q_X`.
    pub cqu: Option<f64>,
    /// `‖B‖_∞ ‖B⁻¹‖_∞` of the collocation matrix (square case only).
    pub condition: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Compute the exact condition number of the square system (N extra
    /// triangular solves).
    pub condition_estimate: bool,
    /// Force the least squares path even for square systems.
    pub force_least_squares: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            condition_estimate: true,
            force_least_squares: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CollocationSolution {
    problem: FredholmProblem,
    model: MlsModel,
    test_points: PointSet,
    rule: QuadratureRule,
    coefficients: Vec<f64>,
    un_at_nodes: Vec<f64>,
    residual: f64,
    diagnostics: Diagnostics,
    assemble_time: Duration,
    solve_time: Duration,
}

/// Assembles and solves the collocation system.
pub fn solve_collocation(
    problem: &FredholmProblem,
    model: &MlsModel,
    test_points: &PointSet,
    rule: &QuadratureRule,
    options: SolveOptions,
) -> Result<CollocationSolution> {
    let started = Instant::now();
    let (matrix, rhs) = assemble(problem, model, test_points, rule)?;
    let assemble_time = started.elapsed();

    let started = Instant::now();
    let square = matrix.is_square() && !options.force_least_squares;
    let mut diagnostics = Diagnostics::default();
    let coefficients = if square {
        let lu = Lu::factor(&matrix).map_err(|source| {
            let magnitude = match source {
                LinalgError::Singular { magnitude, .. } => magnitude,
                _ => 0.0,
            };
            Error::Solvability {
                condition_estimate: matrix.norm_inf() / magnitude,
                source,
            }
        })?;
        if options.condition_estimate {
            diagnostics.condition = Some(matrix.norm_inf() * lu.inverse_norm_inf());
        }
        lu.solve(&rhs)
    } else {
        qr_lstsq(&matrix, &rhs).map_err(|source| Error::Solvability {
            condition_estimate: f64::INFINITY,
            source,
        })?
    };
    let solve_time = started.elapsed();

    let applied = matrix.matvec(&coefficients);
    let residual = vec_norm_inf(
        &applied
            .iter()
            .zip(&rhs)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    if square && !(residual <= RESIDUAL_TOLERANCE * vec_norm_inf(&rhs).max(1.0)) {
        return Err(Error::Solvability {
            condition_estimate: diagnostics.condition.unwrap_or(f64::NAN),
            source: LinalgError::Singular {
                index: 0,
                magnitude: residual,
            },
        });
    }

    if let Ok(q) = model.points().separation_distance() {
        diagnostics.cqu = Some(model.fill_distance() / q);
    }
    let cache = quadrature_shape_cache(model, rule)?;
    let un_at_nodes = cache.iter().map(|s| s.apply(&coefficients)).collect();

    Ok(CollocationSolution {
        problem: problem.clone(),
        model: model.clone(),
        test_points: test_points.clone(),
        rule: rule.clone(),
        coefficients,
        un_at_nodes,
        residual,
        diagnostics,
        assemble_time,
        solve_time,
    })
}

impl CollocationSolution {
    /// Nodal values `ũ_j`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn model(&self) -> &MlsModel {
        &self.model
    }

    pub fn problem(&self) -> &FredholmProblem {
        &self.problem
    }

    pub fn test_points(&self) -> &PointSet {
        &self.test_points
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// `‖B ũ − f(Y)‖_∞`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn assemble_time(&self) -> Duration {
        self.assemble_time
    }

    pub fn solve_time(&self) -> Duration {
        self.solve_time
    }

    /// `u_N(x) = Σ_j φ_j(x) ũ_j`.
    pub fn eval_un(&self, x: &[f64]) -> Result<f64> {
        self.model.approximate(&self.coefficients, x)
    }

    /// `v_N(x) = (f(x) − F_N u_N(x)) / λ`, with `u_N(τ_k)` cached.
    pub fn eval_vn(&self, x: &[f64]) -> Result<f64> {
        let mut integral = 0.0;
        for ((t, w), u) in self.rule.nodes().zip(self.rule.weights()).zip(&self.un_at_nodes) {
            integral += self.problem.kernel_at(x, t)? * u * w;
        }
        Ok((self.problem.rhs_at(x)? - integral) / self.problem.lambda())
    }

    /// Fills the probe-based diagnostics: `‖Φ_N⁻¹‖_∞` (square case), the
    /// stability constant and `‖F_N‖`.
    pub fn diagnose(&self, probes: &PointSet) -> Result<Diagnostics> {
        let mut d = self.diagnostics;
        if self.test_points.len() == self.model.len() {
            d.phi_inv_norm = Some(phi_inverse_norm(&self.model, &self.test_points)?);
        }
        d.c1 = Some(self.model.stability_constant(probes)?);
        d.fn_norm = Some(operator_norm_fn(&self.problem, &self.rule, probes)?);
        Ok(d)
    }
}

/// Exact `‖Φ_N⁻¹‖_∞` for `Φ_N[i][j] = φ_j(y_i)`.
pub fn phi_inverse_norm(model: &MlsModel, test_points: &PointSet) -> Result<f64> {
    let phi = model.shape_matrix(test_points)?;
    crate::linalg::inf_norm_inverse(&phi).map_err(Error::ProjectionUndefined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mls::MlsConfig;
    use approx::assert_abs_diff_eq;

    fn unit() -> DomainBox {
        DomainBox::unit(1).unwrap()
    }

    fn e(t: &str) -> Expr {
        Expr::parse(t, 1).unwrap()
    }

    fn gl(n: usize) -> QuadratureRule {
        tensor_rule(QuadSpec::gauss(n), &unit()).unwrap()
    }

    fn model(n: usize, m: u32) -> MlsModel {
        MlsModel::build(unit().grid(n).unwrap(), &MlsConfig::new(m), &unit()).unwrap()
    }

    #[test]
    fn zero_kernel_gives_scaled_shape_matrix() {
        let p = FredholmProblem::new(2.5, e("0"), e("x"), None, unit()).unwrap();
        let mdl = model(9, 2);
        let y = mdl.points().clone();
        let (b, rhs) = assemble(&p, &mdl, &y, &gl(4)).unwrap();
        let phi = mdl.shape_matrix(&y).unwrap();
        for (a, c) in b.as_slice().iter().zip(phi.as_slice()) {
            assert_eq!(*a, 2.5 * c);
        }
        assert_eq!(rhs, y.coords());
    }

    #[test]
    fn single_node_system() {
        let x = PointSet::new(1, vec![0.5]).unwrap();
        let mdl = MlsModel::build(x.clone(), &MlsConfig::new(0).with_sigma(2.0), &unit()).unwrap();
        let p = FredholmProblem::new(1.0, e("1"), e("1"), None, unit()).unwrap();
        let (b, _) = assemble(&p, &mdl, &x, &gl(2)).unwrap();
        assert_abs_diff_eq!(b[(0, 0)], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_solution_without_kernel() {
        let p = FredholmProblem::new(2.0, e("0"), e("2"), None, unit()).unwrap();
        let mdl = model(11, 1);
        let sol = solve_collocation(&p, &mdl, mdl.points(), &gl(4), SolveOptions::default()).unwrap();
        for u in sol.coefficients() {
            assert_abs_diff_eq!(*u, 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sol.eval_un(mdl.points().point(3)).unwrap(), 1.0, epsilon = 1e-12);
        // κ ≡ 0: v_N = f / λ exactly
        assert_eq!(sol.eval_vn(&[0.37]).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_kernel_is_solved_exactly() {
        let p = FredholmProblem::new(1.0, e("x*s"), e("4*x/3"), Some(e("x")), unit()).unwrap();
        for m in [1, 2] {
            let mdl = model(11, m);
            let sol = solve_collocation(&p, &mdl, mdl.points(), &gl(2), SolveOptions::default()).unwrap();
            for (u, x) in sol.coefficients().iter().zip(mdl.points().iter()) {
                assert_abs_diff_eq!(*u, x[0], epsilon = 1e-10);
            }
            assert_abs_diff_eq!(sol.eval_un(&[0.3]).unwrap(), 0.3, epsilon = 1e-10);
            assert!(sol.residual() <= 1e-9 * (4.0 / 3.0));
            let un = sol.eval_un(&[0.71]).unwrap();
            assert_eq!(un, mdl.approximate(sol.coefficients(), &[0.71]).unwrap());
        }
    }

    #[test]
    fn apply_fn_examples() {
        let rule = gl(3);
        let ones = FredholmProblem::new(1.0, e("1"), e("0"), None, unit()).unwrap();
        assert_abs_diff_eq!(apply_fn(&ones, &rule, |_| Ok(1.0), &[0.2]).unwrap(), 1.0, epsilon = 1e-15);

        let p = FredholmProblem::new(1.0, e("x*s"), e("0"), None, unit()).unwrap();
        for x in [0.0, 0.4, 1.0] {
            let got = apply_fn(&p, &rule, |s| Ok(s[0]), &[x]).unwrap();
            assert_abs_diff_eq!(got, x / 3.0, epsilon = 1e-14);
            let direct = rule.integrate(|s| x * s[0] * s[0]);
            assert_eq!(got, direct);
        }
    }

    #[test]
    fn operator_norm_examples() {
        let probes = unit().grid(1001).unwrap();
        let ones = FredholmProblem::new(1.0, e("1"), e("0"), None, unit()).unwrap();
        assert_abs_diff_eq!(operator_norm_fn(&ones, &gl(5), &probes).unwrap(), 1.0, epsilon = 1e-14);
        let p = FredholmProblem::new(1.0, e("x*s"), e("0"), None, unit()).unwrap();
        assert_abs_diff_eq!(operator_norm_fn(&p, &gl(8), &probes).unwrap(), 0.5, epsilon = 1e-3);
        let z = FredholmProblem::new(1.0, e("0"), e("0"), None, unit()).unwrap();
        assert_eq!(operator_norm_fn(&z, &gl(8), &probes).unwrap(), 0.0);
    }

    #[test]
    fn nonnegative_kernel_norm_is_fn_of_one() {
        let probes = unit().grid(201).unwrap();
        let p = FredholmProblem::new(1.0, e("exp(x-s)"), e("0"), None, unit()).unwrap();
        let rule = gl(6);
        let norm = operator_norm_fn(&p, &rule, &probes).unwrap();
        let via_fn = probes
            .iter()
            .map(|x| apply_fn(&p, &rule, |_| Ok(1.0), x).unwrap())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(norm, via_fn, epsilon = 1e-14 * norm);
    }

    #[test]
    fn projection_recovers_members_and_constants() {
        let mdl = model(15, 2);
        let y = mdl.points().clone();
        let coef: Vec<f64> = (0..mdl.len()).map(|j| (j as f64 * 0.7).sin()).collect();
        let samples: Vec<f64> = y.iter().map(|p| mdl.approximate(&coef, p).unwrap()).collect();
        let back = projection_interpolate(&mdl, &y, &samples).unwrap();
        for (a, b) in back.iter().zip(&coef) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
        let c = projection_interpolate(&mdl, &y, &vec![3.5; y.len()]).unwrap();
        for v in c {
            assert_abs_diff_eq!(v, 3.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_bad_problems() {
        assert!(FredholmProblem::new(0.0, e("x*s"), e("x"), None, unit()).is_err());
        assert!(FredholmProblem::new(1.0, e("x*s"), e("x*s"), None, unit()).is_err());
        let k2 = Expr::parse("x1*s1", 2).unwrap();
        assert!(FredholmProblem::new(1.0, k2, e("x"), None, unit()).is_err());
    }

    #[test]
    fn evaluation_errors_carry_location() {
        let p = FredholmProblem::new(1.0, e("log(x-s)"), e("x"), None, unit()).unwrap();
        let mdl = model(5, 1);
        match assemble(&p, &mdl, mdl.points(), &gl(2)) {
            Err(Error::EvalAt { what, point, .. }) => {
                assert_eq!(what, "kernel");
                assert_eq!(point.len(), 2);
            }
            other => panic!("expected evaluation error, got {other:?}"),
        }
    }

    #[test]
    fn manufactured_rhs_matches_closed_form() {
        // f = u + ∫ x s · s ds = x + x/3
        let p = FredholmProblem::manufactured(1.0, e("x*s"), e("x"), unit()).unwrap();
        for x in [0.0, 0.25, 1.0] {
            assert_abs_diff_eq!(p.rhs_at(&[x]).unwrap(), 4.0 * x / 3.0, epsilon = 1e-14);
        }
    }
}
