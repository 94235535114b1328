//! Variational characterization of the wave speed and profile.
//!
//! For a speed `c > 0` the energy
//! `G_c(Psi) = int sqrt(c^2 Psi^2 + |D Psi|^2) - g Psi` is convex and
//! positively one-homogeneous on `Psi >= 0`. Its normalized minimum
//! `mu_c = min { G_c(Psi) : Psi >= 0, int g Psi = 1 }` is continuous and
//! strictly increasing in `c`, and the wave speed is its unique zero.
//! The profile is recovered from a minimizer at that speed through
//! `psi = log(c Psi) / c`, with `psi = -inf` where `Psi` vanishes.

mod profile;
mod solver;
mod speed;

pub use profile::{
    check_perimeter_identity, extract_profile, forcing_zeros_1d, support_boundary_zeros,
    wave_from_profile, BoundaryReport, EndpointDistance, WaveSolution, DEFAULT_SUPPORT_THRESHOLD,
};
pub use solver::{SolverOptions, WarmStart};
pub use speed::{wave_speed, wave_speed_with, SpeedOptions, SpeedResult};

use crate::error::{Error, Result};
use crate::forcing::{sample, Forcing};
use crate::grid::{stencil, PeriodicGrid, ScalarField};
use crate::real::Real;

/// Discrete `G_c`: midpoint rule with the forward-difference gradient.
pub fn eval_gc<T: Real>(psi: &ScalarField<T>, g: &ScalarField<T>, c: T) -> Result<T> {
    if psi.grid() != g.grid() {
        return Err(Error::ShapeMismatch(
            "Psi and g live on different grids".into(),
        ));
    }
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "speed c = {c} must be positive"
        )));
    }
    psi.ensure_finite()?;
    g.ensure_finite()?;
    if let Some(v) = psi.values().iter().find(|&&v| v < T::lit(-1e-14)) {
        return Err(Error::InvalidParameter(format!("negative Psi entry {v}")));
    }
    let grid = *psi.grid();
    let mut grad = vec![vec![T::zero(); grid.node_count()]; grid.dimension()];
    stencil::gradient(&grid, psi.values(), &mut grad);
    let sum: T = psi
        .values()
        .iter()
        .zip(g.values())
        .enumerate()
        .map(|(i, (&p, &gi))| {
            let mut s = c * c * p * p;
            for comp in &grad {
                s += comp[i] * comp[i];
            }
            s.sqrt() - gi * p
        })
        .sum();
    Ok(grid.cell_volume::<T>() * sum)
}

/// One point of the value function `c -> mu_c`.
#[derive(Debug, Clone)]
pub struct MuSample<T> {
    pub c: T,
    /// Objective of the returned minimizer, an upper bound on the discrete `mu_c`.
    pub mu: T,
    /// Certified lower bound on the discrete `mu_c`.
    pub mu_lower: T,
    /// `Psi_c >= 0` with `int g Psi_c = 1`.
    pub minimizer: ScalarField<T>,
    /// `mu - mu_lower`, never negative.
    pub solver_gap: T,
    pub iterations: usize,
    pub(crate) warm: WarmStart<T>,
}

impl<T: Real> MuSample<T> {
    /// Iterates to seed a neighbouring solve on the same grid.
    pub fn warm_start(&self) -> &WarmStart<T> {
        &self.warm
    }

    /// `+1` when `mu_c > 0` is certified, `-1` when `mu_c < 0` is, `0` otherwise.
    pub fn certified_sign(&self) -> i8 {
        if self.mu_lower > T::zero() {
            1
        } else if self.mu < T::zero() {
            -1
        } else {
            0
        }
    }
}

/// Minimizes `G_c` over `{Psi >= 0, int g Psi = 1}` to a certified objective
/// accuracy of `tol_obj`.
pub fn minimize_constrained<T: Real>(
    g: &Forcing<T>,
    c: T,
    grid: &PeriodicGrid,
    tol_obj: T,
) -> Result<MuSample<T>> {
    let samples = sample(g, grid)?;
    let opts = SolverOptions {
        tol_obj,
        ..SolverOptions::default()
    };
    minimize_sampled(&samples, c, None, &opts)
}

/// Same as [`minimize_constrained`] on pre-sampled forcing, with an optional
/// warm start and explicit solver options.
pub fn minimize_sampled<T: Real>(
    g: &ScalarField<T>,
    c: T,
    start: Option<&WarmStart<T>>,
    opts: &SolverOptions<T>,
) -> Result<MuSample<T>> {
    if !(opts.tol_obj > T::zero()) {
        return Err(Error::InvalidParameter("tol_obj must be positive".into()));
    }
    let grid = *g.grid();
    let out = solver::solve(grid, g.values(), c, start, opts)?;
    let gap = out.gap();
    let w = grid.cell_volume::<T>();
    let psi: Vec<T> = out.mass.iter().map(|&m| m / w).collect();
    Ok(MuSample {
        c,
        mu: out.upper,
        mu_lower: out.lower,
        minimizer: ScalarField::new(grid, psi)?,
        solver_gap: gap,
        iterations: out.iterations,
        warm: out.warm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, make_grid, perimeter_indicator, SupportMask};

    #[test]
    fn gc_of_constants() {
        let grid = make_grid(1, 32).unwrap();
        let one = ScalarField::<f64>::constant(grid, 1.0);
        let g = ScalarField::constant(grid, 0.75);
        assert!((eval_gc(&one, &g, 2.0).unwrap() - 1.25).abs() < 1e-14);
    }

    #[test]
    fn gc_of_indicator_is_perimeter_plus_volume_minus_load() {
        let grid = make_grid(1, 64).unwrap();
        let g = sample(&Forcing::<f64>::cosine_1d(0.3, 1.0), &grid).unwrap();
        let set = SupportMask::from_fn(grid, |i| (10..30).contains(&i));
        let chi = ScalarField::new(
            grid,
            (0..64)
                .map(|i| if set.contains(i) { 1.0 } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let c: f64 = 1.7;
        let load: f64 = (0..64)
            .filter(|&i| set.contains(i))
            .map(|i| g.values()[i])
            .sum::<f64>()
            / 64.0;
        // On the lattice the two boundary nodes of the interval each carry
        // sqrt(c^2 chi^2 + |D chi|^2); only the node with chi = 1 sees c.
        let h: f64 = 1.0 / 64.0;
        let inner = 19.0 * h * c; // nodes 10..=28 have zero forward difference
        let last = h * (c * c + 1.0 / (h * h)).sqrt(); // node 29: chi = 1, D chi = -1/h
        let first = h * (1.0 / h); // node 9: chi = 0, D chi = 1/h
        let expected = inner + last + first - load;
        let value = eval_gc(&chi, &g, c).unwrap();
        assert!((value - expected).abs() < 1e-12);
        // Per + c|A| - int_A g up to the O(h) corner term at the last node
        let continuum = perimeter_indicator::<f64>(&set) + c * set.measure::<f64>() - load;
        assert!((value - continuum).abs() <= c * h);
        let twice = eval_gc(&chi.map(|v| 2.0 * v).unwrap(), &g, c).unwrap();
        assert!((twice - 2.0 * value).abs() < 1e-12);
    }

    #[test]
    fn gc_rejects_negative_and_bad_speed() {
        let grid = make_grid(1, 8).unwrap();
        let g = ScalarField::<f64>::constant(grid, 1.0);
        let mut v = vec![1.0; 8];
        v[3] = -1e-3;
        let psi = ScalarField::new(grid, v).unwrap();
        assert!(eval_gc(&psi, &g, 1.0).is_err());
        assert!(eval_gc(&g, &g, 0.0).is_err());
    }

    #[test]
    fn constant_forcing_value_function() {
        for (c, mu) in [(1.0, 0.0), (2.0, 1.0), (0.5, -0.5)] {
            for n in [64, 128, 256] {
                let grid = make_grid(1, n).unwrap();
                let s = minimize_constrained(
                    &Forcing::<f64>::constant(1, 1.0).unwrap(),
                    c,
                    &grid,
                    1e-8,
                )
                .unwrap();
                assert!(
                    (s.mu - mu).abs() <= 1e-8 + s.solver_gap,
                    "c={c} n={n} mu={}",
                    s.mu
                );
                assert!(s.mu_lower <= mu + 1e-12);
                let m = &s.minimizer;
                let load = integrate(&m.map(|v| v * 1.0).unwrap()).unwrap();
                assert!((load - 1.0).abs() < 1e-10);
                assert!(
                    m.values().iter().all(|&v| (v - 1.0).abs() < 1e-3),
                    "c={c} n={n}"
                );
            }
        }
    }

    #[test]
    fn infeasible_forcing_rejected() {
        let grid = make_grid(1, 16).unwrap();
        let g = Forcing::<f64>::constant(1, -1.0).unwrap();
        assert!(matches!(
            minimize_constrained(&g, 1.0, &grid, 1e-6),
            Err(Error::Infeasible(_))
        ));
    }
}
