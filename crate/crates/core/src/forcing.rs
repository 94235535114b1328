//! Periodic forcing terms given by a truncated Fourier series.
//!
//! `g(y) = a0 + sum_k [ a_k cos(2 pi k.y) + b_k sin(2 pi k.y) ]` with integer
//! wave vectors `k != 0`, so the mean of `g` over the unit cell is exactly `a0`.

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::real::Real;

/// One Fourier mode. Only the first `dimension` entries of `k` are used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode<T> {
    pub k: [i64; 2],
    pub cos: T,
    pub sin: T,
}

impl<T: Real> Mode<T> {
    pub fn cosine(k: [i64; 2], amplitude: T) -> Self {
        Self {
            k,
            cos: amplitude,
            sin: T::zero(),
        }
    }

    pub fn sine(k: [i64; 2], amplitude: T) -> Self {
        Self {
            k,
            cos: T::zero(),
            sin: amplitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forcing<T> {
    dimension: usize,
    a0: T,
    modes: Vec<Mode<T>>,
}

impl<T: Real> Forcing<T> {
    pub fn new(dimension: usize, a0: T, modes: Vec<Mode<T>>) -> Result<Self> {
        if dimension != 1 && dimension != 2 {
            return Err(Error::UnsupportedDimension(dimension));
        }
        if !a0.is_finite() {
            return Err(Error::InvalidParameter("a0 must be finite".into()));
        }
        for m in &modes {
            if m.k[..dimension].iter().all(|&k| k == 0) {
                return Err(Error::InvalidParameter(
                    "wave vector k = 0 is not allowed; put the mean in a0".into(),
                ));
            }
            if dimension == 1 && m.k[1] != 0 {
                return Err(Error::InvalidParameter(
                    "one-dimensional forcing with a second wave-vector component".into(),
                ));
            }
            if !m.cos.is_finite() || !m.sin.is_finite() {
                return Err(Error::InvalidParameter(
                    "mode coefficients must be finite".into(),
                ));
            }
        }
        Ok(Self {
            dimension,
            a0,
            modes,
        })
    }

    pub fn constant(dimension: usize, a0: T) -> Result<Self> {
        Self::new(dimension, a0, Vec::new())
    }

    /// `a0 + amplitude * cos(2 pi y_1)`, the workhorse forcing of the tests.
    pub fn cosine_1d(a0: T, amplitude: T) -> Self {
        Self {
            dimension: 1,
            a0,
            modes: vec![Mode::cosine([1, 0], amplitude)],
        }
    }

    #[inline]
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Exact mean over the unit cell.
    #[inline]
    pub fn mean(&self) -> T {
        self.a0
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    #[inline]
    fn phase(&self, m: &Mode<T>, y: [T; 2]) -> T {
        let mut s = T::from_i64(m.k[0]).unwrap() * y[0];
        if self.dimension == 2 {
            s += T::from_i64(m.k[1]).unwrap() * y[1];
        }
        T::TAU() * s
    }

    pub fn eval(&self, y: [T; 2]) -> T {
        self.modes.iter().fold(self.a0, |acc, m| {
            let (s, c) = self.phase(m, y).sin_cos();
            acc + m.cos * c + m.sin * s
        })
    }

    /// Analytic gradient; the second entry is zero in 1D.
    pub fn gradient(&self, y: [T; 2]) -> [T; 2] {
        let mut d = [T::zero(); 2];
        for m in &self.modes {
            let (s, c) = self.phase(m, y).sin_cos();
            let amp = T::TAU() * (m.sin * c - m.cos * s);
            for (axis, dk) in d.iter_mut().enumerate().take(self.dimension) {
                *dk += amp * T::from_i64(m.k[axis]).unwrap();
            }
        }
        d
    }

    pub fn gradient_norm(&self, y: [T; 2]) -> T {
        let d = self.gradient(y);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Sup of `|a_k| + |b_k|` summed over modes; bounds `|g - a0|`.
    pub fn amplitude_bound(&self) -> T {
        self.modes.iter().map(|m| m.cos.abs() + m.sin.abs()).sum()
    }

    fn check_grid(&self, grid: &PeriodicGrid) -> Result<()> {
        if grid.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: grid.dimension(),
            });
        }
        Ok(())
    }
}

/// Evaluates `g` at every node of `grid`.
pub fn sample<T: Real>(g: &Forcing<T>, grid: &PeriodicGrid) -> Result<ScalarField<T>> {
    g.check_grid(grid)?;
    ScalarField::from_fn(*grid, |y| g.eval(y))
}

/// Summary statistics of a forcing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingStats<T> {
    pub mean: T,
    pub min: T,
    pub max: T,
    pub oscillation: T,
    pub sup_grad: T,
    /// Resolution at which the grid estimates stabilised.
    pub resolution: usize,
}

const STATS_TOLERANCE: f64 = 1e-6;
const STATS_MAX_NODES: usize = 1 << 22;

fn grid_extrema<T: Real>(g: &Forcing<T>, grid: &PeriodicGrid) -> (T, T, T) {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    let mut dmax = T::zero();
    for i in 0..grid.node_count() {
        let y = grid.coords::<T>(i);
        let v = g.eval(y);
        lo = lo.min(v);
        hi = hi.max(v);
        dmax = dmax.max(g.gradient_norm(y));
    }
    (lo, hi, dmax)
}

/// Mean (exact), and min, max, sup|Dg| estimated on `grid` (or a minimum
/// working resolution if `grid` is coarser), then on grids of doubled
/// resolution until every estimate moves by less than `1e-6` on two
/// consecutive doublings.
pub fn stats<T: Real>(g: &Forcing<T>, grid: &PeriodicGrid) -> Result<ForcingStats<T>> {
    g.check_grid(grid)?;
    let tol = T::lit(STATS_TOLERANCE);
    let floor = if grid.dimension() == 1 { 256 } else { 128 };
    let mut current = PeriodicGrid::new(grid.dimension(), grid.resolution().max(floor))?;
    let (mut lo, mut hi, mut dmax) = grid_extrema(g, &current);
    let mut quiet = 0;
    loop {
        if current.node_count() * (1 << current.dimension()) > STATS_MAX_NODES {
            break;
        }
        let finer = PeriodicGrid::new(current.dimension(), current.resolution() * 2)?;
        let (l2, h2, d2) = grid_extrema(g, &finer);
        // Finer grids contain the coarser nodes, so extrema only widen.
        let change = (l2 - lo).abs().max((h2 - hi).abs()).max((d2 - dmax).abs());
        lo = lo.min(l2);
        hi = hi.max(h2);
        dmax = dmax.max(d2);
        current = finer;
        if change < tol {
            quiet += 1;
            if quiet == 2 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    Ok(ForcingStats {
        mean: g.mean(),
        min: lo,
        max: hi,
        oscillation: hi - lo,
        sup_grad: dmax,
        resolution: current.resolution(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, make_grid};
    use std::f64::consts::PI;

    #[test]
    fn sample_constant_and_single_mode() {
        let g = make_grid(1, 4).unwrap();
        let one = Forcing::<f64>::constant(1, 1.0).unwrap();
        assert!(sample(&one, &g).unwrap().values().iter().all(|&v| v == 1.0));
        let c = Forcing::<f64>::cosine_1d(0.0, 1.0);
        let s = sample(&c, &g).unwrap();
        let expected = [1.0, 0.0, -1.0, 0.0];
        for (a, b) in s.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sampled_mean_is_a0() {
        let g = make_grid(1, 64).unwrap();
        let f = Forcing::<f64>::cosine_1d(0.5, 3.0);
        assert!((integrate(&sample(&f, &g).unwrap()).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let f = Forcing::<f64>::cosine_1d(0.5, 3.0);
        let g = make_grid(2, 8).unwrap();
        assert!(matches!(
            sample(&f, &g),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_wave_vector_rejected() {
        let r = Forcing::<f64>::new(1, 0.0, vec![Mode::cosine([0, 0], 1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn stats_of_single_modes() {
        let g = make_grid(1, 64).unwrap();
        let s = stats(&Forcing::<f64>::cosine_1d(1.0, 0.5), &g).unwrap();
        assert_eq!(s.mean, 1.0);
        assert!((s.min - 0.5).abs() < 1e-12);
        assert!((s.max - 1.5).abs() < 1e-12);
        assert!((s.oscillation - 1.0).abs() < 1e-12);
        assert!((s.sup_grad - PI).abs() < 1e-6);

        let s = stats(&Forcing::<f64>::cosine_1d(0.5, 3.0), &g).unwrap();
        assert_eq!(s.mean, 0.5);
        assert!((s.min + 2.5).abs() < 1e-12);
        assert!((s.max - 3.5).abs() < 1e-12);
        assert!((s.oscillation - 6.0).abs() < 1e-12);
        assert!((s.sup_grad - 6.0 * PI).abs() < 1e-5);

        let s = stats(&Forcing::<f64>::constant(1, 0.7).unwrap(), &g).unwrap();
        assert_eq!(
            (s.mean, s.min, s.max, s.oscillation, s.sup_grad),
            (0.7, 0.7, 0.7, 0.0, 0.0)
        );
    }

    #[test]
    fn stats_refines_off_node_extrema() {
        // Maximum at y = 0.1, which is not a node of any dyadic grid.
        let f = Forcing::<f64>::new(
            1,
            0.0,
            vec![Mode {
                k: [1, 0],
                cos: (0.2 * PI).cos(),
                sin: (0.2 * PI).sin(),
            }],
        )
        .unwrap();
        let s = stats(&f, &make_grid(1, 8).unwrap()).unwrap();
        assert!((s.max - 1.0).abs() < 1e-6, "max = {}", s.max);
        assert!(s.resolution > 8);
    }

    #[test]
    fn two_dimensional_gradient() {
        let f = Forcing::<f64>::new(2, 1.0, vec![Mode::cosine([1, 1], 0.5)]).unwrap();
        let y = [0.125, 0.0];
        let d = f.gradient(y);
        let expected = -0.5 * 2.0 * PI * (2.0 * PI * 0.125).sin();
        assert!((d[0] - expected).abs() < 1e-14);
        assert!((d[1] - expected).abs() < 1e-14);
    }
}
