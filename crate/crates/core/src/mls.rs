//! Moving least squares shape functions and the approximation operator
//! `s_{u,X}(x) = Σ_j φ_j(x) u(x_j)`.
//!
//! At each evaluation point `x` the local Gram system
//! `A(x) = Σ_{j∈J(x)} w_j(x) p(x_j) p(x_j)ᵀ` is assembled in the monomial
//! basis shifted to `x` and scaled by `h`, so that `p(x) = e₁`. Solving
//! `A(x) λ = e₁` gives `φ_j(x) = w_j(x) ⟨λ, p(x_j)⟩`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::geometry::{default_probe_count, distance, fill_distance, DomainBox, NeighborIndex, PointSet};
use crate::linalg::{cholesky_factor, cholesky_substitute, DenseMatrix, LinalgError};
use crate::polybasis::PolyBasis;
use crate::weights::{WeightKind, WeightSpec};

/// Length used to scale the shifted monomials.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BasisScale {
    /// Global fill distance `h_{X,Ω}`.
    #[default]
    FillDistance,
    /// The (unretried) support radius `δ`.
    SupportRadius,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlsConfig {
    pub degree: u32,
    pub weight: WeightKind,
    /// Support radius factor, `δ = σ h`. `None` means `2(m + 1)`.
    pub sigma: Option<f64>,
    pub basis_scale: BasisScale,
    /// Probe grid per axis for the fill distance; `None` picks ten probe
    /// cells per node gap.
    pub probe_per_axis: Option<usize>,
    /// Gram degeneracy retries, each growing the radius by `retry_growth`.
    pub max_retries: u32,
    pub retry_growth: f64,
}

impl MlsConfig {
    pub fn new(degree: u32) -> Self {
        Self {
            degree,
            weight: WeightKind::default(),
            sigma: None,
            basis_scale: BasisScale::default(),
            probe_per_axis: None,
            max_retries: 3,
            retry_growth: 1.3,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn with_weight(mut self, weight: WeightKind) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_basis_scale(mut self, scale: BasisScale) -> Self {
        self.basis_scale = scale;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(default_sigma(self.degree))
    }
}

/// `2(m + 1)`.
pub fn default_sigma(degree: u32) -> f64 {
    2.0 * (degree as f64 + 1.0)
}

/// Which basis to use when forming a Gram matrix explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFrame {
    ShiftedScaled,
    /// Unshifted, unscaled monomials `y^α`.
    Monomial,
}

/// Shape function values at one point. Entries outside `indices` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEval {
    pub x: Vec<f64>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Support radius actually used (larger than `δ` after retries).
    pub radius: f64,
}

impl ShapeEval {
    /// `Σ_{j∈J(x)} φ_j(x) u_j`.
    pub fn apply(&self, nodal: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &phi)| phi * nodal[j])
            .sum()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn value_of(&self, j: usize) -> f64 {
        self.indices
            .binary_search(&j)
            .map_or(0.0, |pos| self.values[pos])
    }
}

#[derive(Debug, Clone)]
pub struct MlsModel {
    points: PointSet,
    domain: DomainBox,
    basis: PolyBasis,
    weight: WeightSpec,
    index: NeighborIndex,
    fill: f64,
    scale: f64,
    sigma: f64,
    max_retries: u32,
    retry_growth: f64,
}

impl MlsModel {
    /// Builds the model with `δ = σ h_{X,Ω}`.
    pub fn build(points: PointSet, config: &MlsConfig, domain: &DomainBox) -> Result<Self> {
        if points.dim() != domain.dim() {
            return Err(invalid("point set and domain dimensions differ"));
        }
        let sigma = config.sigma();
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(invalid(format!("support factor sigma must be positive, got {sigma}")));
        }
        if !(config.retry_growth >= 1.0) {
            return Err(invalid("retry growth must be at least 1"));
        }
        let probes = config
            .probe_per_axis
            .unwrap_or_else(|| default_probe_count(&points));
        let fill = fill_distance(&points, domain, probes)?;
        let radius = sigma * fill;
        if !(radius > 0.0) {
            return Err(invalid(format!("computed support radius {radius} is not positive")));
        }
        let scale = match config.basis_scale {
            BasisScale::FillDistance => fill,
            BasisScale::SupportRadius => radius,
            BasisScale::Fixed(s) => s,
        };
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid(format!("basis scale must be positive, got {scale}")));
        }
        let basis = PolyBasis::new(points.dim(), config.degree)?;
        let weight = WeightSpec::new(config.weight, radius)?;
        let index = NeighborIndex::new(&points, radius);
        Ok(Self {
            points,
            domain: domain.clone(),
            basis,
            weight,
            index,
            fill,
            scale,
            sigma,
            max_retries: config.max_retries,
            retry_growth: config.retry_growth,
        })
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn basis(&self) -> &PolyBasis {
        &self.basis
    }

    pub fn degree(&self) -> u32 {
        self.basis.degree()
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    /// Support radius `δ`.
    pub fn radius(&self) -> f64 {
        self.weight.radius
    }

    pub fn fill_distance(&self) -> f64 {
        self.fill
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn basis_scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn neighbors(&self, x: &[f64], radius: f64) -> Vec<usize> {
        self.index.neighbors(x, radius)
    }

    /// Shape function values `φ_j(x)` for `j ∈ J(x)`.
    ///
    /// A singular local Gram matrix is retried with the radius grown by
    /// `retry_growth`, up to `max_retries` times.
    pub fn shape_values(&self, x: &[f64]) -> Result<ShapeEval> {
        if x.len() != self.points.dim() {
            return Err(invalid(format!(
                "evaluation point has {} coordinates, expected {}",
                x.len(),
                self.points.dim()
            )));
        }
        let mut radius = self.weight.radius;
        let mut indices = self.index.neighbors(x, radius);
        if indices.is_empty() {
            return Err(Error::NoCoverage {
                x: x.to_vec(),
                radius,
            });
        }
        let mut attempt = 0;
        loop {
            match self.local_values(x, &indices, radius) {
                Ok(values) => {
                    return Ok(ShapeEval {
                        x: x.to_vec(),
                        indices,
                        values,
                        radius,
                    })
                }
                Err(LinalgError::NotPositiveDefinite { .. }) if attempt < self.max_retries => {
                    attempt += 1;
                    radius *= self.retry_growth;
                    indices = self.index.neighbors(x, radius);
                }
                Err(_) => {
                    return Err(Error::NonUnisolvent {
                        x: x.to_vec(),
                        indices,
                        radius,
                    })
                }
            }
        }
    }

    fn local_values(&self, x: &[f64], indices: &[usize], radius: f64) -> Result<Vec<f64>, LinalgError> {
        let q = self.basis.len();
        let spec = WeightSpec {
            kind: self.weight.kind,
            radius,
        };
        let mut p = vec![0.0; indices.len() * q];
        let mut w = Vec::with_capacity(indices.len());
        let mut gram = DenseMatrix::zeros(q, q);
        for (row, &j) in p.chunks_exact_mut(q).zip(indices) {
            let xj = self.points.point(j);
            self.basis.fill_shifted_scaled(xj, x, self.scale, row);
            let wj = spec.at_distance(distance(x, xj));
            w.push(wj);
            if wj == 0.0 {
                continue;
            }
            for a in 0..q {
                let wa = wj * row[a];
                for b in 0..=a {
                    gram[(a, b)] += wa * row[b];
                }
            }
        }
        let l = cholesky_factor(&gram)?;
        let mut e1 = vec![0.0; q];
        e1[0] = 1.0;
        let lambda = cholesky_substitute(&l, &e1);
        Ok(p
            .chunks_exact(q)
            .zip(&w)
            .map(|(row, &wj)| wj * row.iter().zip(&lambda).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    /// Shape values at many points, evaluated in parallel.
    pub fn shape_values_at(&self, points: &PointSet) -> Result<Vec<ShapeEval>> {
        self.shape_values_flat(points.coords())
    }

    /// Same as [`shape_values_at`](Self::shape_values_at) for flat
    /// coordinates, e.g. quadrature nodes.
    pub fn shape_values_flat(&self, coords: &[f64]) -> Result<Vec<ShapeEval>> {
        let dim = self.points.dim();
        coords
            .par_chunks_exact(dim)
            .map(|x| self.shape_values(x))
            .collect()
    }

    /// `s_{u,X}(x)`.
    pub fn approximate(&self, nodal: &[f64], x: &[f64]) -> Result<f64> {
        self.check_nodal(nodal)?;
        Ok(self.shape_values(x)?.apply(nodal))
    }

    pub(crate) fn check_nodal(&self, nodal: &[f64]) -> Result<()> {
        if nodal.len() != self.len() {
            return Err(invalid(format!(
                "expected {} nodal values, got {}",
                self.len(),
                nodal.len()
            )));
        }
        Ok(())
    }

    /// Measured `C₁ = max_x Σ_j |φ_j(x)|` over the probe points.
    pub fn stability_constant(&self, probes: &PointSet) -> Result<f64> {
        let sums: Vec<f64> = (0..probes.len())
            .into_par_iter()
            .map(|i| self.shape_values(probes.point(i)).map(|s| s.abs_sum()))
            .collect::<Result<_>>()?;
        Ok(sums.into_iter().fold(0.0, f64::max))
    }

    /// Dense `Φ` with `Φ[i][j] = φ_j(y_i)`.
    pub fn shape_matrix(&self, at: &PointSet) -> Result<DenseMatrix> {
        let evals = self.shape_values_at(at)?;
        let mut phi = DenseMatrix::zeros(at.len(), self.len());
        for (i, s) in evals.iter().enumerate() {
            let row = phi.row_mut(i);
            for (&j, &v) in s.indices.iter().zip(&s.values) {
                row[j] = v;
            }
        }
        Ok(phi)
    }

    /// Local Gram matrix `P W(x) Pᵀ` at radius `δ` in the requested basis.
    pub fn gram_matrix(&self, x: &[f64], frame: BasisFrame) -> DenseMatrix {
        let q = self.basis.len();
        let mut gram = DenseMatrix::zeros(q, q);
        let mut row = vec![0.0; q];
        for j in self.index.neighbors(x, self.weight.radius) {
            let xj = self.points.point(j);
            match frame {
                BasisFrame::ShiftedScaled => self.basis.fill_shifted_scaled(xj, x, self.scale, &mut row),
                BasisFrame::Monomial => row.copy_from_slice(&self.basis.eval_monomial(xj)),
            }
            let wj = self.weight.at_distance(distance(x, xj));
            for a in 0..q {
                for b in 0..q {
                    gram[(a, b)] += wj * row[a] * row[b];
                }
            }
        }
        gram
    }
}
