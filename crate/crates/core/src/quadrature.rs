//! Quadrature rules `∫_Ω g(s) ds ≈ Σ_k g(τ_k) ω_k` on boxes.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::DomainBox;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn new(dim: usize, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || nodes.len() != weights.len() * dim {
            return Err(invalid("quadrature node and weight counts do not match"));
        }
        Ok(Self { dim, nodes, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes `Q_N`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flat node coordinates.
    pub fn node_coords(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ_k g(τ_k) ω_k`, summed in node order.
    pub fn integrate<G: FnMut(&[f64]) -> f64>(&self, mut g: G) -> f64 {
        self.nodes()
            .zip(&self.weights)
            .map(|(t, w)| g(t) * w)
            .sum()
    }

    /// Fallible variant of [`integrate`](Self::integrate) with the same
    /// summation order.
    pub fn try_integrate<E, G>(&self, mut g: G) -> std::result::Result<f64, E>
    where
        G: FnMut(&[f64]) -> std::result::Result<f64, E>,
    {
        let mut total = 0.0;
        for (t, w) in self.nodes().zip(&self.weights) {
            total += g(t)? * w;
        }
        Ok(total)
    }
}

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// `n`-point Gauss–Legendre rule on `[a, b]`, nodes ascending.
///
/// Roots of `P_n` come from Newton iteration started at the Chebyshev-like
/// guess `cos(π(i − ¼)/(n + ½))`; weights are `2 / ((1 − x²) P_n'(x)²)`.
pub fn gauss_legendre_1d(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(invalid("Gauss-Legendre rule needs at least one node"));
    }
    if !(a < b) {
        return Err(invalid(format!("need a < b, got [{a}, {b}]")));
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    if n == 1 {
        nodes[0] = mid;
        weights[0] = b - a;
        return QuadratureRule::new(1, nodes, weights);
    }
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_with_derivative(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= NEWTON_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NumericalFailure(format!(
                "Newton iteration for Gauss-Legendre root {i} of {n} did not converge"
            )));
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x is the (i+1)-th largest root
        nodes[n - 1 - i] = mid + half * x;
        nodes[i] = mid - half * x;
        weights[n - 1 - i] = half * w;
        weights[i] = half * w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = mid;
    }
    QuadratureRule::new(1, nodes, weights)
}

/// Composite trapezoid rule with `n ≥ 2` equispaced nodes on `[a, b]`.
pub fn composite_trapezoid_1d(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n < 2 {
        return Err(invalid("composite trapezoid needs at least two nodes"));
    }
    if !(a < b) {
        return Err(invalid(format!("need a < b, got [{a}, {b}]")));
    }
    let h = (b - a) / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n)
        .map(|k| if k + 1 == n { b } else { a + h * k as f64 })
        .collect();
    let mut weights = vec![h; n];
    weights[0] = 0.5 * h;
    weights[n - 1] = 0.5 * h;
    QuadratureRule::new(1, nodes, weights)
}

/// Cartesian product of one-dimensional rules; axis 0 varies fastest.
pub fn tensor_product(axes: &[QuadratureRule]) -> Result<QuadratureRule> {
    if axes.is_empty() || axes.iter().any(|r| r.dim() != 1) {
        return Err(invalid("tensor product needs one-dimensional factor rules"));
    }
    let dim = axes.len();
    let total: usize = axes.iter().map(QuadratureRule::len).product();
    let mut nodes = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for rule in axes {
            let k = rem % rule.len();
            rem /= rule.len();
            nodes.push(rule.node(k)[0]);
            w *= rule.weights()[k];
        }
        weights.push(w);
    }
    QuadratureRule::new(dim, nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuadKind {
    GaussLegendre,
    Trapezoid,
}

/// A one-dimensional rule family and its per-axis node count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadSpec {
    pub kind: QuadKind,
    pub per_axis: usize,
}

impl QuadSpec {
    pub fn gauss(per_axis: usize) -> Self {
        Self {
            kind: QuadKind::GaussLegendre,
            per_axis,
        }
    }

    pub fn trapezoid(per_axis: usize) -> Self {
        Self {
            kind: QuadKind::Trapezoid,
            per_axis,
        }
    }

    pub fn rule_1d(&self, a: f64, b: f64) -> Result<QuadratureRule> {
        match self.kind {
            QuadKind::GaussLegendre => gauss_legendre_1d(self.per_axis, a, b),
            QuadKind::Trapezoid => composite_trapezoid_1d(self.per_axis, a, b),
        }
    }
}

impl std::fmt::Display for QuadSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self.kind {
            QuadKind::GaussLegendre => "gl",
            QuadKind::Trapezoid => "trap",
        };
        write!(f, "{tag}:{}", self.per_axis)
    }
}

impl std::str::FromStr for QuadSpec {
    type Err = String;

    /// `gl:<n>` or `trap:<n>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, n) = s
            .split_once(':')
            .ok_or_else(|| format!("quadrature '{s}' is not of the form gl:<n> or trap:<n>"))?;
        let per_axis: usize = n
            .trim()
            .parse()
            .map_err(|_| format!("quadrature node count '{n}' is not a positive integer"))?;
        let spec = match kind.trim() {
            "gl" => Self::gauss(per_axis),
            "trap" => Self::trapezoid(per_axis),
            other => return Err(format!("unknown quadrature kind '{other}' (expected gl or trap)")),
        };
        let min = if spec.kind == QuadKind::Trapezoid { 2 } else { 1 };
        if per_axis < min {
            return Err(format!("quadrature '{s}' needs at least {min} nodes per axis"));
        }
        Ok(spec)
    }
}

/// Tensor rule of `spec` over `domain`.
pub fn tensor_rule(spec: QuadSpec, domain: &DomainBox) -> Result<QuadratureRule> {
    let axes = (0..domain.dim())
        .map(|axis| spec.rule_1d(domain.lower()[axis], domain.upper()[axis]))
        .collect::<Result<Vec<_>>>()?;
    tensor_product(&axes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn gauss_small_rules() {
        let r = gauss_legendre_1d(1, 0.0, 1.0).unwrap();
        assert_eq!(r.node(0), &[0.5]);
        assert_eq!(r.weights(), &[1.0]);

        let r = gauss_legendre_1d(2, -1.0, 1.0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert_abs_diff_eq!(r.node(0)[0], -s, epsilon = 1e-15);
        assert_abs_diff_eq!(r.node(1)[0], s, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[1], 1.0, epsilon = 1e-15);

        let r = gauss_legendre_1d(2, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.integrate(|s| s[0].powi(3)), 0.25, epsilon = 1e-15);
        assert!(gauss_legendre_1d(0, 0.0, 1.0).is_err());
        assert!(gauss_legendre_1d(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn gauss_exactness_up_to_degree_2n_minus_1() {
        for n in 1..=10usize {
            let r = gauss_legendre_1d(n, -1.0, 1.0).unwrap();
            for deg in 0..2 * n as i32 {
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                let got = r.integrate(|s| s[0].powi(deg));
                assert!((got - exact).abs() <= 1e-13 * exact.abs().max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn large_gauss_rules_converge() {
        for n in [64, 128] {
            let r = gauss_legendre_1d(n, 0.0, 1.0).unwrap();
            assert_relative_eq!(r.weight_sum(), 1.0, max_relative = 1e-13);
            assert!(r.nodes().zip(r.nodes().skip(1)).all(|(a, b)| a[0] < b[0]));
        }
    }

    #[test]
    fn trapezoid_examples() {
        let r = composite_trapezoid_1d(2, 0.0, 1.0).unwrap();
        assert_eq!(r.integrate(|s| s[0]), 0.5);
        assert_eq!(r.integrate(|s| s[0] * s[0]), 0.5);
        let r = composite_trapezoid_1d(101, 0.0, 1.0).unwrap();
        assert!((r.integrate(|s| s[0] * s[0]) - 1.0 / 3.0).abs() <= 2e-5);
        assert!(composite_trapezoid_1d(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn tensor_examples() {
        let unit2 = DomainBox::unit(2).unwrap();
        let mid = tensor_rule(QuadSpec::gauss(1), &unit2).unwrap();
        assert_eq!(mid.node(0), &[0.5, 0.5]);
        assert_eq!(mid.weights(), &[1.0]);

        let gl = tensor_rule(QuadSpec::gauss(2), &unit2).unwrap();
        assert_abs_diff_eq!(gl.integrate(|p| p[0] * p[1]), 0.25, epsilon = 1e-15);

        let b = DomainBox::new(vec![-1.0, 2.0], vec![3.0, 2.5]).unwrap();
        for spec in [QuadSpec::gauss(5), QuadSpec::trapezoid(7)] {
            let r = tensor_rule(spec, &b).unwrap();
            assert_relative_eq!(r.weight_sum(), b.volume(), max_relative = 1e-12);
            assert!(r.nodes().all(|p| b.contains(p)));
        }
    }

    #[test]
    fn integrate_examples() {
        let r = gauss_legendre_1d(5, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(r.integrate(|_| 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.integrate(|s| s[0]), 0.5, epsilon = 1e-15);
        let r = gauss_legendre_1d(8, 0.0, 1.0).unwrap();
        // e − 1 as a partial sum of Σ 1/k!, k ≥ 1
        let mut series = 0.0;
        let mut term = 1.0;
        for k in 1..30 {
            term /= k as f64;
            series += term;
        }
        assert_abs_diff_eq!(r.integrate(|s| s[0].exp()), series, epsilon = 1e-12);
    }

    #[test]
    fn gauss_error_decreases_with_doubling() {
        let exact = 1f64.exp() - 1.0;
        let mut prev = f64::INFINITY;
        for n in [1, 2, 4, 8, 16] {
            let err = (gauss_legendre_1d(n, 0.0, 1.0).unwrap().integrate(|s| s[0].exp()) - exact).abs();
            assert!(err < prev || err < 1e-14, "n={n}: {err} vs {prev}");
            prev = err;
        }
        assert!(prev < 1e-14);
    }

    #[test]
    fn quad_spec_parsing() {
        assert_eq!("gl:4".parse::<QuadSpec>().unwrap(), QuadSpec::gauss(4));
        assert_eq!("trap:21".parse::<QuadSpec>().unwrap(), QuadSpec::trapezoid(21));
        assert!("trap:1".parse::<QuadSpec>().is_err());
        assert!("simpson:3".parse::<QuadSpec>().is_err());
        assert!("gl4".parse::<QuadSpec>().is_err());
        assert_eq!(QuadSpec::gauss(8).to_string(), "gl:8");
    }
}
