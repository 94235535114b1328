//! Periodic lattices on the unit torus and the fields that live on them.
//!
//! Nodes sit at `y = h * (i_0, i_1, ...)` with `h = 1/N`. The flat index of a
//! node is `i_0 + N * i_1`, so axis 0 is contiguous in memory. All index
//! arithmetic wraps modulo `N`.
//!
//! The discrete gradient uses forward differences and the divergence uses
//! backward differences, which makes `divergence = -gradient^T` exactly.

use crate::error::{Error, Result};
use crate::real::Real;

/// Uniform node lattice on `(0,1)^n`, `n` in {1, 2}, with `N` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PeriodicGrid {
    dimension: usize,
    resolution: usize,
}

impl PeriodicGrid {
    pub fn new(dimension: usize, resolution: usize) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        if resolution < 4 {
            return Err(Error::ResolutionTooSmall(resolution));
        }
        // h * N must be exactly one in the working arithmetic.
        let h = 1.0 / resolution as f64;
        if h * resolution as f64 != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "resolution {resolution}: 1/N * N is not exactly 1 in f64"
            )));
        }
        Ok(Self {
            dimension,
            resolution,
        })
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Nodes per axis.
    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    #[inline]
    pub fn spacing<T: Real>(&self) -> T {
        T::one() / T::from_count(self.resolution)
    }

    /// Quadrature weight of a single node, `h^n`.
    #[inline]
    pub fn cell_volume<T: Real>(&self) -> T {
        self.spacing::<T>().powi(self.dimension as i32)
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.resolution.pow(self.dimension as u32)
    }

    /// Flat-index offset of a unit step along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.resolution.pow(axis as u32)
    }

    /// Multi-index of a flat node index.
    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        let n = self.resolution;
        if self.dimension == 1 {
            [idx, 0]
        } else {
            [idx % n, idx / n]
        }
    }

    #[inline]
    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        mi[0] % self.resolution + self.resolution * (mi[1] % self.resolution)
    }

    /// Coordinates of a node on `[0,1)^n`; unused axes are zero.
    #[inline]
    pub fn coords<T: Real>(&self, idx: usize) -> [T; 2] {
        let h = self.spacing::<T>();
        let mi = self.multi_index(idx);
        [T::from_count(mi[0]) * h, T::from_count(mi[1]) * h]
    }

    /// Index of the neighbour one step forward along `axis`, wrapping.
    #[inline]
    pub fn forward(&self, idx: usize, axis: usize) -> usize {
        let n = self.resolution;
        let s = self.stride(axis);
        let pos = (idx / s) % n;
        if pos + 1 == n {
            idx + s - n * s
        } else {
            idx + s
        }
    }

    /// Index of the neighbour one step backward along `axis`, wrapping.
    #[inline]
    pub fn backward(&self, idx: usize, axis: usize) -> usize {
        let n = self.resolution;
        let s = self.stride(axis);
        let pos = (idx / s) % n;
        if pos == 0 {
            idx + n * s - s
        } else {
            idx - s
        }
    }

    /// Cyclic shift of a node by `offset` steps on each axis (taken mod N;
    /// the second entry is ignored in 1D).
    pub fn shifted(&self, idx: usize, offset: [usize; 2]) -> usize {
        let n = self.resolution;
        let mi = self.multi_index(idx);
        let second = if self.dimension == 2 {
            (mi[1] + offset[1]) % n
        } else {
            0
        };
        self.flat_index([(mi[0] + offset[0]) % n, second])
    }
}

/// Builds a grid, rejecting unsupported dimensions and resolutions below four.
pub fn make_grid(dimension: usize, resolution: usize) -> Result<PeriodicGrid> {
    PeriodicGrid::new(dimension, resolution)
}

/// Node values on a grid, with an optional per-node `-inf` flag.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: PeriodicGrid,
    values: Vec<T>,
    // `Some(mask)` only when at least one node is flagged as -inf.
    neg_inf: Option<Vec<bool>>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: PeriodicGrid, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::FieldNotFinite(format!("node {i} = {}", values[i])));
        }
        Ok(Self {
            grid,
            values,
            neg_inf: None,
        })
    }

    /// Field with explicit `-inf` nodes. Values at flagged nodes are ignored
    /// and stored as zero.
    pub fn with_sentinels(
        grid: PeriodicGrid,
        mut values: Vec<T>,
        neg_inf: Vec<bool>,
    ) -> Result<Self> {
        if neg_inf.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} sentinel flags for {} nodes",
                neg_inf.len(),
                grid.node_count()
            )));
        }
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        for (i, (v, &s)) in values.iter_mut().zip(&neg_inf).enumerate() {
            if s {
                *v = T::zero();
            } else if !v.is_finite() {
                return Err(Error::FieldNotFinite(format!("node {i} = {v}")));
            }
        }
        let neg_inf = if neg_inf.iter().any(|&s| s) {
            Some(neg_inf)
        } else {
            None
        };
        Ok(Self {
            grid,
            values,
            neg_inf,
        })
    }

    pub fn constant(grid: PeriodicGrid, value: T) -> Self {
        Self {
            grid,
            values: vec![value; grid.node_count()],
            neg_inf: None,
        }
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f` at node coordinates.
    pub fn from_fn(grid: PeriodicGrid, f: impl Fn([T; 2]) -> T) -> Result<Self> {
        let values = (0..grid.node_count()).map(|i| f(grid.coords(i))).collect();
        Self::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Raw node values. Sentinel nodes read as zero here; check
    /// [`ScalarField::is_neg_inf`] before trusting them.
    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn is_neg_inf(&self, idx: usize) -> bool {
        self.neg_inf.as_ref().is_some_and(|m| m[idx])
    }

    #[inline]
    pub fn has_sentinels(&self) -> bool {
        self.neg_inf.is_some()
    }

    pub fn sentinel_mask(&self) -> Option<&[bool]> {
        self.neg_inf.as_deref()
    }

    /// Node value with `-inf` for flagged nodes.
    #[inline]
    pub fn get(&self, idx: usize) -> T {
        if self.is_neg_inf(idx) {
            T::neg_infinity()
        } else {
            self.values[idx]
        }
    }

    /// Mask of the finite nodes.
    pub fn finite_mask(&self) -> SupportMask {
        let inside = (0..self.len()).map(|i| !self.is_neg_inf(i)).collect();
        SupportMask {
            grid: self.grid,
            inside,
        }
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match &self.neg_inf {
            Some(m) => {
                let i = m.iter().position(|&s| s).unwrap_or(0);
                Err(Error::FieldNotFinite(format!("node {i} is -inf")))
            }
            None => Ok(()),
        }
    }

    /// Applies `f` to every finite value, keeping sentinels.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        let values: Vec<T> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.is_neg_inf(i) { T::zero() } else { f(v) })
            .collect();
        match &self.neg_inf {
            Some(m) => Self::with_sentinels(self.grid, values, m.clone()),
            None => Self::new(self.grid, values),
        }
    }

    /// Max over finite nodes, `None` if every node is a sentinel.
    pub fn max_finite(&self) -> Option<T> {
        (0..self.len())
            .filter(|&i| !self.is_neg_inf(i))
            .map(|i| self.values[i])
            .fold(None, |acc, v| Some(acc.map_or(v, |a: T| a.max(v))))
    }

    pub fn min_finite(&self) -> Option<T> {
        (0..self.len())
            .filter(|&i| !self.is_neg_inf(i))
            .map(|i| self.values[i])
            .fold(None, |acc, v| Some(acc.map_or(v, |a: T| a.min(v))))
    }

    /// Field cyclically shifted so that node `i` moves to `i + offset`.
    pub fn cyclic_shift(&self, offset: [usize; 2]) -> Self {
        let n = self.len();
        let mut values = vec![T::zero(); n];
        let mut mask = self.neg_inf.as_ref().map(|_| vec![false; n]);
        for i in 0..n {
            let j = self.grid.shifted(i, offset);
            values[j] = self.values[i];
            if let Some(m) = mask.as_mut() {
                m[j] = self.is_neg_inf(i);
            }
        }
        Self {
            grid: self.grid,
            values,
            neg_inf: mask,
        }
    }
}

/// `n` component arrays on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    grid: PeriodicGrid,
    components: Vec<Vec<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(grid: PeriodicGrid, components: Vec<Vec<T>>) -> Result<Self> {
        if components.len() != grid.dimension() {
            return Err(Error::ShapeMismatch(format!(
                "{} components on a {}-dimensional grid",
                components.len(),
                grid.dimension()
            )));
        }
        for (k, c) in components.iter().enumerate() {
            if c.len() != grid.node_count() {
                return Err(Error::ShapeMismatch(format!(
                    "component {k} has {} entries for {} nodes",
                    c.len(),
                    grid.node_count()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::FieldNotFinite(format!("component {k}")));
            }
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            components: vec![vec![T::zero(); grid.node_count()]; grid.dimension()],
        }
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn component(&self, axis: usize) -> &[T] {
        &self.components[axis]
    }

    pub fn components(&self) -> &[Vec<T>] {
        &self.components
    }

    /// Euclidean norm of the vector at a node.
    pub fn norm_at(&self, idx: usize) -> T {
        self.components
            .iter()
            .map(|c| c[idx] * c[idx])
            .sum::<T>()
            .sqrt()
    }

    pub fn cyclic_shift(&self, offset: [usize; 2]) -> Self {
        let n = self.grid.node_count();
        let components = self
            .components
            .iter()
            .map(|c| {
                let mut out = vec![T::zero(); n];
                for (i, &v) in c.iter().enumerate() {
                    out[self.grid.shifted(i, offset)] = v;
                }
                out
            })
            .collect();
        Self {
            grid: self.grid,
            components,
        }
    }
}

/// Boolean node mask, used for supports and candidate sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportMask {
    grid: PeriodicGrid,
    inside: Vec<bool>,
}

impl SupportMask {
    pub fn new(grid: PeriodicGrid, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} mask entries for {} nodes",
                inside.len(),
                grid.node_count()
            )));
        }
        Ok(Self { grid, inside })
    }

    pub fn full(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            inside: vec![true; grid.node_count()],
        }
    }

    pub fn empty(grid: PeriodicGrid) -> Self {
        Self {
            grid,
            inside: vec![false; grid.node_count()],
        }
    }

    pub fn from_fn(grid: PeriodicGrid, f: impl Fn(usize) -> bool) -> Self {
        Self {
            grid,
            inside: (0..grid.node_count()).map(f).collect(),
        }
    }

    #[inline]
    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.inside
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn is_full(&self) -> bool {
        self.inside.iter().all(|&b| b)
    }

    pub fn is_empty(&self) -> bool {
        !self.inside.iter().any(|&b| b)
    }

    /// Lebesgue measure `h^n * #inside`.
    pub fn measure<T: Real>(&self) -> T {
        self.grid.cell_volume::<T>() * T::from_count(self.count())
    }

    pub fn perimeter<T: Real>(&self) -> T {
        perimeter_indicator(self)
    }

    /// Nodes inside whose neighbours along every axis are also inside.
    pub fn interior(&self) -> SupportMask {
        let g = self.grid;
        Self::from_fn(g, |i| {
            self.inside[i]
                && (0..g.dimension())
                    .all(|k| self.inside[g.forward(i, k)] && self.inside[g.backward(i, k)])
        })
    }

    pub fn cyclic_shift(&self, offset: [usize; 2]) -> Self {
        let mut inside = vec![false; self.inside.len()];
        for (i, &b) in self.inside.iter().enumerate() {
            inside[self.grid.shifted(i, offset)] = b;
        }
        Self {
            grid: self.grid,
            inside,
        }
    }

    /// Connected runs of a 1D mask as `(first, last)` node indices, inclusive.
    /// A run may wrap through the origin, in which case `first > last`.
    /// Returns an empty list for the empty mask and `[(0, N-1)]` for the full one.
    pub fn runs_1d(&self) -> Vec<(usize, usize)> {
        let n = self.inside.len();
        if self.is_empty() {
            return Vec::new();
        }
        if self.is_full() {
            return vec![(0, n - 1)];
        }
        // Start scanning just after an outside node so that no run is split.
        let start = (0..n).find(|&i| !self.inside[i]).unwrap_or(0);
        let mut runs = Vec::new();
        let mut current: Option<usize> = None;
        for step in 1..=n {
            let i = (start + step) % n;
            match (self.inside[i], current) {
                (true, None) => current = Some(i),
                (false, Some(first)) => {
                    runs.push((first, (i + n - 1) % n));
                    current = None;
                }
                _ => {}
            }
        }
        if let Some(first) = current {
            runs.push((first, (start + n - 1) % n));
        }
        runs
    }
}

/// Forward-difference gradient with periodic wrap.
pub fn gradient<T: Real>(f: &ScalarField<T>) -> Result<VectorField<T>> {
    f.ensure_finite()?;
    let grid = *f.grid();
    let mut components = vec![vec![T::zero(); grid.node_count()]; grid.dimension()];
    stencil::gradient(&grid, f.values(), &mut components);
    Ok(VectorField { grid, components })
}

/// Backward-difference divergence, the negative adjoint of [`gradient`].
pub fn divergence<T: Real>(v: &VectorField<T>) -> ScalarField<T> {
    let grid = *v.grid();
    let mut out = vec![T::zero(); grid.node_count()];
    stencil::divergence(&grid, v.components(), &mut out);
    ScalarField {
        grid,
        values: out,
        neg_inf: None,
    }
}

/// Midpoint rule `h^n * sum(values)`. Rejects fields with sentinel nodes.
pub fn integrate<T: Real>(f: &ScalarField<T>) -> Result<T> {
    f.ensure_finite()?;
    Ok(f.grid().cell_volume::<T>() * f.values().iter().copied().sum::<T>())
}

/// Discrete periodic perimeter: `h^(n-1)` times the number of facets across
/// which the mask changes value, wrap-around facets included.
pub fn perimeter_indicator<T: Real>(mask: &SupportMask) -> T {
    let g = mask.grid();
    let mut crossings = 0usize;
    for axis in 0..g.dimension() {
        for i in 0..g.node_count() {
            if mask.inside[i] != mask.inside[g.forward(i, axis)] {
                crossings += 1;
            }
        }
    }
    g.spacing::<T>().powi(g.dimension() as i32 - 1) * T::from_count(crossings)
}

/// Discrete inner product `sum_i a_i b_i` without quadrature weight.
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Slice-level kernels shared by the solvers. Callers guarantee lengths.
pub(crate) mod stencil {
    use super::PeriodicGrid;
    use crate::real::Real;

    pub fn gradient<T: Real>(grid: &PeriodicGrid, f: &[T], out: &mut [Vec<T>]) {
        let inv_h = T::from_count(grid.resolution());
        for (axis, comp) in out.iter_mut().enumerate().take(grid.dimension()) {
            for (i, o) in comp.iter_mut().enumerate() {
                *o = (f[grid.forward(i, axis)] - f[i]) * inv_h;
            }
        }
    }

    pub fn divergence<T: Real>(grid: &PeriodicGrid, v: &[Vec<T>], out: &mut [T]) {
        let inv_h = T::from_count(grid.resolution());
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (axis, comp) in v.iter().enumerate().take(grid.dimension()) {
                acc += comp[i] - comp[grid.backward(i, axis)];
            }
            *o = acc * inv_h;
        }
    }
}
