//! Domains, node sets and fixed-radius neighbor search.
//!
//! Points are stored flat (`dim` coordinates per point) and indexed from 0.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};

/// Axis-aligned box `[lower_0, upper_0] × ... ` in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(invalid("box bounds have different dimensions"));
        }
        if !(1..=2).contains(&lower.len()) {
            return Err(invalid(format!(
                "only dimensions 1 and 2 are supported, got {}",
                lower.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("axis {i}: need lower < upper, got [{lo}, {hi}]")));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }

    /// Tensor grid with `per_axis` equispaced points per axis, endpoints
    /// included. Axis 0 varies fastest.
    pub fn grid(&self, per_axis: usize) -> Result<PointSet> {
        generate_nodes(NodeKind::UniformGrid, per_axis, self, 0)
    }
}

/// An ordered set of distinct points in R^d.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    separation: OnceLock<f64>,
}

impl PartialEq for PointSet {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coords == other.coords
    }
}

impl PointSet {
    /// Builds a point set from flat coordinates. Rejects empty sets,
    /// non-finite coordinates and repeated points.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be positive"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(invalid(format!(
                "{} coordinates do not form a nonempty set of {dim}-dimensional points",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("point coordinates must be finite"));
        }
        let mut seen = HashSet::with_capacity(coords.len() / dim);
        for (i, p) in coords.chunks_exact(dim).enumerate() {
            // -0.0 and 0.0 are the same point
            let key: Vec<u64> = p.iter().map(|c| (c + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(invalid(format!("point {i} duplicates an earlier point")));
            }
        }
        Ok(Self {
            dim,
            coords,
            separation: OnceLock::new(),
        })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(invalid("points have inconsistent dimensions"));
        }
        Self::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn all_inside(&self, domain: &DomainBox) -> bool {
        self.iter().all(|p| domain.contains(p))
    }

    /// Half the minimal pairwise distance, cached after the first call.
    pub fn separation_distance(&self) -> Result<f64> {
        if let Some(q) = self.separation.get() {
            return Ok(*q);
        }
        let q = separation_distance(self)?;
        Ok(*self.separation.get_or_init(|| q))
    }
}

/// Node families for refinement studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    UniformGrid,
    Halton,
    PerturbedGrid,
}

impl std::str::FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "uniform" | "uniform-grid" => Ok(Self::UniformGrid),
            "halton" => Ok(Self::Halton),
            "perturbed" | "perturbed-grid" => Ok(Self::PerturbedGrid),
            other => Err(format!(
                "unknown node kind '{other}' (expected uniform-grid, halton or perturbed-grid)"
            )),
        }
    }
}

/// Largest per-axis offset of a perturbed grid node, as a fraction of the
/// grid spacing.
pub const PERTURBATION_FRACTION: f64 = 0.25;

/// Generates `n_per_axis^d` nodes inside `domain`.
///
/// * `UniformGrid` – equispaced with endpoints; a single node sits at the
///   box center.
/// * `Halton` – radical inverse in base 2 (and 3 for the second axis) of
///   the indices `1..=N`, mapped affinely into the box.
/// * `PerturbedGrid` – the uniform grid with every coordinate whose grid
///   index is interior along that axis displaced by a uniform offset in
///   `[-0.25, 0.25]` grid spacings. `seed` drives a ChaCha8 stream; it is
///   ignored by the other kinds.
pub fn generate_nodes(
    kind: NodeKind,
    n_per_axis: usize,
    domain: &DomainBox,
    seed: u64,
) -> Result<PointSet> {
    if n_per_axis == 0 {
        return Err(invalid("n_per_axis must be at least 1"));
    }
    let dim = domain.dim();
    let total = n_per_axis
        .checked_pow(dim as u32)
        .ok_or_else(|| invalid("node count overflows"))?;
    let mut coords = Vec::with_capacity(total * dim);
    match kind {
        NodeKind::UniformGrid | NodeKind::PerturbedGrid => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let perturb = kind == NodeKind::PerturbedGrid;
            for flat in 0..total {
                let mut rem = flat;
                for axis in 0..dim {
                    let k = rem % n_per_axis;
                    rem /= n_per_axis;
                    let mut c = grid_coordinate(domain, axis, k, n_per_axis);
                    if perturb && k > 0 && k + 1 < n_per_axis {
                        let spacing = domain.width(axis) / (n_per_axis - 1) as f64;
                        let t: f64 = rng.gen_range(-PERTURBATION_FRACTION..=PERTURBATION_FRACTION);
                        c += t * spacing;
                    }
                    coords.push(c);
                }
            }
        }
        NodeKind::Halton => {
            const BASES: [u64; 2] = [2, 3];
            for i in 1..=total as u64 {
                for (axis, &base) in BASES.iter().enumerate().take(dim) {
                    let t = radical_inverse(i, base);
                    coords.push(domain.lower[axis] + t * domain.width(axis));
                }
            }
        }
    }
    PointSet::new(dim, coords)
}

fn grid_coordinate(domain: &DomainBox, axis: usize, k: usize, n: usize) -> f64 {
    let (lo, hi) = (domain.lower[axis], domain.upper[axis]);
    if n == 1 {
        return 0.5 * (lo + hi);
    }
    if k + 1 == n {
        return hi;
    }
    lo + (hi - lo) * (k as f64 / (n - 1) as f64)
}

/// Van der Corput radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut value = 0.0;
    while i > 0 {
        value += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    value
}

/// Fill distance `sup_{x∈Ω} min_j ‖x − x_j‖₂`.
///
/// In one dimension the supremum sits at a gap midpoint or an end of the
/// interval and is computed exactly. In two dimensions it is taken over a
/// `probe_per_axis^2` grid including the boundary, so the result never
/// exceeds the true fill distance and falls short of it by at most half a
/// probe cell diagonal.
pub fn fill_distance(points: &PointSet, domain: &DomainBox, probe_per_axis: usize) -> Result<f64> {
    if points.is_empty() {
        return Err(invalid("fill distance of an empty point set"));
    }
    if probe_per_axis < 2 {
        return Err(invalid("probe_per_axis must be at least 2"));
    }
    if points.dim() != domain.dim() {
        return Err(invalid("point set and domain dimensions differ"));
    }
    if domain.dim() == 1 {
        let mut xs: Vec<f64> = points.coords().to_vec();
        xs.sort_by(f64::total_cmp);
        let inner = xs.windows(2).map(|w| 0.5 * (w[1] - w[0])).fold(0.0, f64::max);
        let ends = (xs[0] - domain.lower()[0]).max(domain.upper()[0] - xs[xs.len() - 1]);
        return Ok(inner.max(ends));
    }
    let probes = domain.grid(probe_per_axis)?;
    // bucket cell sized to the typical spacing keeps ring searches short
    let typical = (domain.volume() / points.len() as f64).powf(1.0 / domain.dim() as f64);
    let index = NeighborIndex::new(points, typical);
    let mut fill: f64 = 0.0;
    for p in probes.iter() {
        fill = fill.max(index.nearest_distance(p, typical));
    }
    Ok(fill)
}

/// Probe density used when no explicit count is given: ten probe cells per
/// typical node gap, which lands probes on gap midpoints of uniform grids.
pub fn default_probe_count(points: &PointSet) -> usize {
    let per_axis = (points.len() as f64).powf(1.0 / points.dim() as f64).round() as usize;
    10 * per_axis.saturating_sub(1).max(1) + 1
}

/// Half the minimal pairwise distance between distinct points (exact).
pub fn separation_distance(points: &PointSet) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(invalid("separation distance needs at least two points"));
    }
    let min = if points.dim() == 1 {
        let mut xs: Vec<f64> = points.coords().to_vec();
        xs.sort_by(f64::total_cmp);
        xs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    } else {
        let mut best = f64::INFINITY;
        for i in 0..n {
            let pi = points.point(i);
            for j in i + 1..n {
                best = best.min(distance(pi, points.point(j)));
            }
        }
        best
    };
    Ok(0.5 * min)
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Uniform bucket grid over a point set for exact fixed-radius queries.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    dim: usize,
    coords: Vec<f64>,
    origin: [f64; 2],
    cell: f64,
    shape: [usize; 2],
    // CSR layout: points of cell c are order[start[c]..start[c + 1]]
    start: Vec<usize>,
    order: Vec<usize>,
}

impl NeighborIndex {
    /// Buckets `points` into square cells of side `cell` (clamped to a
    /// sane range relative to the bounding box).
    pub fn new(points: &PointSet, cell: f64) -> Self {
        let dim = points.dim();
        let mut lo = [0.0; 2];
        let mut hi = [0.0; 2];
        for axis in 0..dim {
            lo[axis] = f64::INFINITY;
            hi[axis] = f64::NEG_INFINITY;
        }
        for p in points.iter() {
            for axis in 0..dim {
                lo[axis] = lo[axis].min(p[axis]);
                hi[axis] = hi[axis].max(p[axis]);
            }
        }
        let extent = (0..dim).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let mut cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        // at most ~4096 cells per axis
        if extent > 0.0 {
            cell = cell.max(extent / 4096.0);
        }
        let mut shape = [1usize; 2];
        for axis in 0..dim {
            shape[axis] = ((hi[axis] - lo[axis]) / cell).floor() as usize + 1;
        }
        let ncells = shape[0] * shape[1];
        let mut counts = vec![0usize; ncells + 1];
        let cell_of: Vec<usize> = points
            .iter()
            .map(|p| {
                let mut c = [0usize; 2];
                for axis in 0..dim {
                    c[axis] = (((p[axis] - lo[axis]) / cell).floor() as usize).min(shape[axis] - 1);
                }
                c[0] + shape[0] * c[1]
            })
            .collect();
        for &c in &cell_of {
            counts[c + 1] += 1;
        }
        for c in 0..ncells {
            counts[c + 1] += counts[c];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (j, &c) in cell_of.iter().enumerate() {
            order[fill[c]] = j;
            fill[c] += 1;
        }
        Self {
            dim,
            coords: points.coords().to_vec(),
            origin: lo,
            cell,
            shape,
            start: counts,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    /// `J(x) = { j : ‖x − x_j‖₂ ≤ radius }` in ascending index order.
    pub fn neighbors(&self, x: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.neighbors_into(x, radius, &mut out);
        out
    }

    pub fn neighbors_into(&self, x: &[f64], radius: f64, out: &mut Vec<usize>) {
        out.clear();
        if !(radius >= 0.0) || x.len() != self.dim {
            return;
        }
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        for axis in 0..self.dim {
            let a = ((x[axis] - radius - self.origin[axis]) / self.cell).floor();
            let b = ((x[axis] + radius - self.origin[axis]) / self.cell).floor();
            if b < 0.0 || a > (self.shape[axis] - 1) as f64 {
                return;
            }
            lo[axis] = a.max(0.0) as usize;
            hi[axis] = (b as usize).min(self.shape[axis] - 1);
        }
        let r2 = radius * radius;
        for cy in lo[1]..=hi[1] {
            for cx in lo[0]..=hi[0] {
                let c = cx + self.shape[0] * cy;
                for &j in &self.order[self.start[c]..self.start[c + 1]] {
                    let d2: f64 = self
                        .point(j)
                        .iter()
                        .zip(x)
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum();
                    if d2 <= r2 {
                        out.push(j);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Distance from `x` to the closest indexed point, searching balls of
    /// doubling radius starting at `start_radius`.
    pub fn nearest_distance(&self, x: &[f64], start_radius: f64) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        let mut radius = if start_radius > 0.0 { start_radius } else { self.cell };
        let mut found = Vec::new();
        loop {
            self.neighbors_into(x, radius, &mut found);
            if !found.is_empty() {
                return found
                    .iter()
                    .map(|&j| distance(self.point(j), x))
                    .fold(f64::INFINITY, f64::min);
            }
            radius *= 2.0;
        }
    }
}

/// Measured quasi-uniformity constant `h / q`.
pub fn quasi_uniformity(fill: f64, separation: f64) -> f64 {
    fill / separation
}
