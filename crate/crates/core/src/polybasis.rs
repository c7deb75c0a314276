//! Multi-indices and the shifted, scaled monomial basis of P^d_m.

use crate::error::{invalid, Result};

/// Multi-index `α ∈ N₀^d`; unused trailing slots stay zero.
pub type MultiIndex = Vec<u32>;

/// All `α` with `|α| ≤ degree` in graded lexicographic order: by total
/// degree, then by descending first component, and so on.
pub fn multi_indices(dim: usize, degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    for total in 0..=degree {
        push_compositions(total, 0, &mut current, &mut out);
    }
    out
}

fn push_compositions(remaining: u32, axis: usize, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if axis + 1 == current.len() {
        current[axis] = remaining;
        out.push(current.clone());
        return;
    }
    for first in (0..=remaining).rev() {
        current[axis] = first;
        push_compositions(remaining - first, axis + 1, current, out);
    }
    current[axis] = 0;
}

/// `binomial(m + d, d)`.
pub fn dimension_of(dim: usize, degree: u32) -> usize {
    let (n, k) = (degree as u64 + dim as u64, dim as u64);
    let mut acc = 1u64;
    for i in 1..=k {
        acc = acc * (n - k + i) / i;
    }
    acc as usize
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyBasis {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
}

impl PolyBasis {
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("basis dimension must be positive"));
        }
        Ok(Self {
            dim,
            degree,
            indices: multi_indices(dim, degree),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of basis functions `Q`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Values `(y − center)^α / h^{|α|}` for every basis index.
    pub fn eval_shifted_scaled(&self, y: &[f64], center: &[f64], h: f64) -> Result<Vec<f64>> {
        if !(h > 0.0) {
            return Err(invalid(format!("basis scale must be positive, got {h}")));
        }
        let mut out = vec![0.0; self.len()];
        self.fill_shifted_scaled(y, center, h, &mut out);
        Ok(out)
    }

    /// Unchecked variant writing into `out`; `h` must be positive.
    pub(crate) fn fill_shifted_scaled(&self, y: &[f64], center: &[f64], h: f64, out: &mut [f64]) {
        let stride = self.degree as usize + 1;
        // powers[axis * stride + k] = ((y - c) / h)^k
        let mut powers = vec![1.0; self.dim * stride];
        for axis in 0..self.dim {
            let t = (y[axis] - center[axis]) / h;
            let row = &mut powers[axis * stride..(axis + 1) * stride];
            for k in 1..stride {
                row[k] = row[k - 1] * t;
            }
        }
        for (slot, alpha) in out.iter_mut().zip(&self.indices) {
            *slot = alpha
                .iter()
                .enumerate()
                .map(|(axis, &e)| powers[axis * stride + e as usize])
                .product();
        }
    }

    /// Plain monomials `y^α`, used to compare against the stabilised basis.
    pub fn eval_monomial(&self, y: &[f64]) -> Vec<f64> {
        self.indices
            .iter()
            .map(|alpha| {
                alpha
                    .iter()
                    .zip(y)
                    .map(|(&e, &v)| v.powi(e as i32))
                    .product()
            })
            .collect()
    }
}
