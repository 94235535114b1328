//! Profile recovery `psi = log(c Psi) / c` and its diagnostics.

use super::MuSample;
use crate::error::{Error, Result};
use crate::forcing::{sample, Forcing};
use crate::grid::{stencil, ScalarField, SupportMask};
use crate::real::Real;

/// Relative threshold defining the support `{Psi > tau max Psi}`.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-3;

/// A (possibly generalized) traveling wave.
#[derive(Debug, Clone)]
pub struct WaveSolution<T> {
    pub speed: T,
    /// Finite exactly on `support`, `-inf` elsewhere, with max 0.
    pub profile: ScalarField<T>,
    pub support: SupportMask,
    /// Sup of the discrete profile-equation residual over interior nodes of
    /// the support (0 if the support has no interior node).
    pub profile_residual: T,
    pub perimeter_gap: T,
    pub threshold: T,
}

/// Thresholds the minimizer, takes logarithms and fills in the diagnostics.
pub fn extract_profile<T: Real>(
    sample_: &MuSample<T>,
    g: &Forcing<T>,
    speed: T,
    tau: T,
) -> Result<WaveSolution<T>> {
    if !(speed > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "speed {speed} must be positive"
        )));
    }
    if !(tau >= T::zero() && tau < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "threshold {tau} outside [0, 1)"
        )));
    }
    let psi = &sample_.minimizer;
    let grid = *psi.grid();
    let top = psi.values().iter().copied().fold(T::zero(), T::max);
    if !(top > T::zero()) {
        return Err(Error::EmptySupport);
    }
    let cut = tau * top;
    let support = SupportMask::from_fn(grid, |i| psi.values()[i] > cut);
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    // max of log(c Psi)/c sits at max Psi, so shifting by it gives log(Psi/top)/c
    let values: Vec<T> = psi
        .values()
        .iter()
        .zip(support.as_slice())
        .map(|(&v, &inside)| {
            if inside {
                (v / top).ln() / speed
            } else {
                T::zero()
            }
        })
        .collect();
    let flags = support.as_slice().iter().map(|&b| !b).collect();
    let profile = ScalarField::with_sentinels(grid, values, flags)?;
    wave_from_profile(profile, g, speed, tau)
}

/// Rebuilds a wave from a stored profile: the support is the set of finite
/// nodes and both diagnostics are recomputed.
pub fn wave_from_profile<T: Real>(
    profile: ScalarField<T>,
    g: &Forcing<T>,
    speed: T,
    tau: T,
) -> Result<WaveSolution<T>> {
    if !(speed > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "speed {speed} must be positive"
        )));
    }
    let support = profile.finite_mask();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let grid = *profile.grid();
    let g_samples = sample(g, &grid)?;
    let profile_residual = residual(&profile, &support, g_samples.values(), speed);
    let mut sol = WaveSolution {
        speed,
        profile,
        support,
        profile_residual,
        perimeter_gap: T::zero(),
        threshold: tau,
    };
    sol.perimeter_gap = check_perimeter_identity(&sol, g)?;
    Ok(sol)
}

/// Sup over interior nodes of
/// `| -div(D psi / sqrt(1 + |D psi|^2)) + c / sqrt(1 + |D psi|^2) - g |`
/// with forward differences for `D` and backward ones for `div`.
fn residual<T: Real>(profile: &ScalarField<T>, support: &SupportMask, g: &[T], c: T) -> T {
    let grid = *profile.grid();
    let interior = support.interior();
    if interior.is_empty() {
        return T::zero();
    }
    let n = grid.node_count();
    let dim = grid.dimension();
    let mut grad = vec![vec![T::zero(); n]; dim];
    stencil::gradient(&grid, profile.values(), &mut grad);
    let mut inv_area = vec![T::zero(); n];
    let mut flux = vec![vec![T::zero(); n]; dim];
    for i in 0..n {
        // only meaningful where i and its forward neighbours are in the support
        let mut s = T::one();
        for comp in &grad {
            s += comp[i] * comp[i];
        }
        let r = T::one() / s.sqrt();
        inv_area[i] = r;
        for k in 0..dim {
            flux[k][i] = grad[k][i] * r;
        }
    }
    let mut div = vec![T::zero(); n];
    stencil::divergence(&grid, &flux, &mut div);
    (0..n)
        .filter(|&i| interior.contains(i))
        .map(|i| (c * inv_area[i] - div[i] - g[i]).abs())
        .fold(T::zero(), T::max)
}

/// `|Per(E) - int_E (g - c / sqrt(1 + |D psi|^2))| / (1 + Per(E))`.
///
/// The area factor is evaluated as `c Psi / sqrt(c^2 Psi^2 + |D Psi|^2)` on
/// `Psi = exp(c psi)` (zero off the support), which equals
/// `1 / sqrt(1 + |D psi|^2)` in the continuum and stays bounded where `psi`
/// plunges to `-inf` at the edge of the support.
pub fn check_perimeter_identity<T: Real>(sol: &WaveSolution<T>, g: &Forcing<T>) -> Result<T> {
    let grid = *sol.profile.grid();
    let gs = sample(g, &grid)?;
    let c = sol.speed;
    let n = grid.node_count();
    let big_psi: Vec<T> = (0..n)
        .map(|i| {
            if sol.profile.is_neg_inf(i) {
                T::zero()
            } else {
                (c * sol.profile.values()[i]).exp()
            }
        })
        .collect();
    let mut grad = vec![vec![T::zero(); n]; grid.dimension()];
    stencil::gradient(&grid, &big_psi, &mut grad);
    let mut integral = T::zero();
    for i in (0..n).filter(|&i| !sol.profile.is_neg_inf(i)) {
        let cp = c * big_psi[i];
        let mut s = cp * cp;
        for comp in &grad {
            s += comp[i] * comp[i];
        }
        let area = if s > T::zero() {
            cp / s.sqrt()
        } else {
            T::one()
        };
        integral += gs.values()[i] - c * area;
    }
    integral *= grid.cell_volume::<T>();
    let per: T = sol.support.perimeter();
    Ok((per - integral).abs() / (T::one() + per))
}

/// One support endpoint and its distance to the closest zero of `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointDistance<T> {
    pub node: usize,
    pub position: T,
    pub nearest_zero: Option<T>,
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryReport<T> {
    /// The support is the whole torus; there is no boundary to test.
    Vacuous,
    Checked {
        max_distance: T,
        endpoints: Vec<EndpointDistance<T>>,
        zeros: Vec<T>,
    },
}

/// Zeros of a 1D forcing in `[0, 1)`, by a fine sign scan and bisection.
pub fn forcing_zeros_1d<T: Real>(g: &Forcing<T>) -> Vec<T> {
    let kmax = g
        .modes()
        .iter()
        .map(|m| m.k[0].unsigned_abs())
        .max()
        .unwrap_or(0) as usize;
    let m = (256 * kmax).max(4096);
    let at = |i: usize| T::from_count(i) / T::from_count(m);
    let eval = |y: T| g.eval([y, T::zero()]);
    let mut zeros = Vec::new();
    for i in 0..m {
        let (a, b) = (at(i), at(i + 1));
        let (fa, fb) = (eval(a), eval(b));
        if fa == T::zero() {
            zeros.push(a);
            continue;
        }
        if fa * fb < T::zero() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = (lo + hi) * T::lit(0.5);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = eval(mid);
                if (fm < T::zero()) == (flo < T::zero()) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            zeros.push((lo + hi) * T::lit(0.5));
        }
    }
    zeros
}

fn torus_distance<T: Real>(a: T, b: T) -> T {
    let d = (a - b).abs() % T::one();
    d.min(T::one() - d)
}

/// For a 1D wave with support `E != Q`, the distance from every endpoint of
/// every component of `E` to the nearest zero of `g`.
pub fn support_boundary_zeros<T: Real>(
    sol: &WaveSolution<T>,
    g: &Forcing<T>,
) -> Result<BoundaryReport<T>> {
    let grid = *sol.support.grid();
    if grid.dimension() != 1 || g.dimension() != 1 {
        return Err(Error::UnsupportedDimension(grid.dimension()));
    }
    if sol.support.is_full() {
        return Ok(BoundaryReport::Vacuous);
    }
    if sol.support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let zeros = forcing_zeros_1d(g);
    let mut endpoints = Vec::new();
    for (first, last) in sol.support.runs_1d() {
        for node in [first, last] {
            if endpoints
                .iter()
                .any(|e: &EndpointDistance<T>| e.node == node)
            {
                continue;
            }
            let position = grid.coords::<T>(node)[0];
            let nearest = zeros.iter().copied().min_by(|&a, &b| {
                torus_distance(a, position)
                    .partial_cmp(&torus_distance(b, position))
                    .unwrap()
            });
            let distance = nearest.map_or(T::infinity(), |z| torus_distance(z, position));
            endpoints.push(EndpointDistance {
                node,
                position,
                nearest_zero: nearest,
                distance,
            });
        }
    }
    let max_distance = endpoints.iter().map(|e| e.distance).fold(T::zero(), T::max);
    Ok(BoundaryReport::Checked {
        max_distance,
        endpoints,
        zeros,
    })
}
