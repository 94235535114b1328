//! Bisection of the value function `c -> mu_c` for its zero.

use super::solver::SolverOptions;
use super::{minimize_sampled, MuSample};
use crate::conditions::check_gcondition;
use crate::error::{Error, Result};
use crate::forcing::{sample, stats, Forcing};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::real::Real;

/// Endpoint nudge and bracket padding.
const EPS0: f64 = 1e-6;
const MAX_NUDGES: usize = 8;

#[derive(Debug, Clone)]
pub struct SpeedOptions<T> {
    /// Stop when the bracket is at most this wide.
    pub tol_c: T,
    /// Objective accuracy of the final minimizer at the returned speed.
    pub tol_obj: T,
    /// Floor for the objective accuracy used when a sign is hard to resolve.
    pub min_tol_obj: T,
    pub max_iterations: usize,
}

impl<T: Real> Default for SpeedOptions<T> {
    fn default() -> Self {
        Self {
            tol_c: T::lit(1e-3),
            tol_obj: T::lit(1e-6),
            min_tol_obj: T::lit(1e-10),
            max_iterations: SolverOptions::<T>::default().max_iterations,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpeedResult<T> {
    pub speed: T,
    /// Minimizer at `speed`, solved to `tol_obj`.
    pub sample: MuSample<T>,
    /// Final bracket `[lo, hi]` with `mu(lo) < 0 < mu(hi)` certified, unless
    /// the bisection stopped early on an unresolvable sign (then lo == hi).
    pub bracket: (T, T),
    /// Number of constrained solves, the final one included.
    pub solves: usize,
    /// Total primal-dual iterations over all solves.
    pub iterations: usize,
}

/// Speed by bisection to bracket width `tol_c`, with default solver settings.
pub fn wave_speed<T: Real>(
    g: &Forcing<T>,
    grid: &PeriodicGrid,
    tol_c: T,
) -> Result<(T, MuSample<T>)> {
    let opts = SpeedOptions {
        tol_c,
        ..SpeedOptions::default()
    };
    let r = wave_speed_with(g, grid, &opts)?;
    Ok((r.speed, r.sample))
}

struct Bisector<'a, T: Real> {
    g: &'a ScalarField<T>,
    opts: &'a SpeedOptions<T>,
    warm: Option<(T, super::WarmStart<T>)>,
    solves: usize,
    iterations: usize,
}

impl<T: Real> Bisector<'_, T> {
    fn solve(&mut self, c: T, tol_obj: T, stop_on_sign: bool) -> Result<MuSample<T>> {
        let opts = SolverOptions {
            tol_obj,
            max_iterations: self.opts.max_iterations,
            stop_on_sign,
            ..SolverOptions::default()
        };
        let start = self.warm.as_ref().map(|(_, w)| w);
        let s = minimize_sampled(self.g, c, start, &opts)?;
        self.solves += 1;
        self.iterations += s.iterations;
        self.warm = Some((c, s.warm.clone()));
        Ok(s)
    }

    /// Certified sign of `mu_c`, tightening the solver while the dead band
    /// straddles zero. Zero means the root lies within the finest dead band.
    fn sign(&mut self, c: T) -> Result<(i8, MuSample<T>)> {
        let mut tol = self.opts.tol_obj;
        loop {
            let s = self.solve(c, tol, true)?;
            let sg = s.certified_sign();
            if sg != 0 || tol <= self.opts.min_tol_obj {
                return Ok((sg, s));
            }
            tol = (tol * T::lit(0.1)).max(self.opts.min_tol_obj);
        }
    }
}

/// Full bisection report; see [`wave_speed`].
pub fn wave_speed_with<T: Real>(
    g: &Forcing<T>,
    grid: &PeriodicGrid,
    opts: &SpeedOptions<T>,
) -> Result<SpeedResult<T>> {
    if !(opts.tol_c > T::zero()) || !(opts.tol_obj > T::zero()) || !(opts.min_tol_obj > T::zero()) {
        return Err(Error::InvalidParameter(
            "tolerances must be positive".into(),
        ));
    }
    if check_gcondition(g, grid)?.witness.is_none() {
        return Err(Error::HypothesisNotVerified);
    }
    let st = stats(g, grid)?;
    let samples = sample(g, grid)?;
    let eps0 = T::lit(EPS0);
    let mut b = Bisector {
        g: &samples,
        opts,
        warm: None,
        solves: 0,
        iterations: 0,
    };

    if g.modes()
        .iter()
        .all(|m| m.cos == T::zero() && m.sin == T::zero())
    {
        let c = st.max;
        let s = b.solve(c, opts.tol_obj, false)?;
        return Ok(SpeedResult {
            speed: c,
            sample: s,
            bracket: (c, c),
            solves: b.solves,
            iterations: b.iterations,
        });
    }

    let mut lo = st.mean.max(eps0);
    let mut hi = st.max + eps0;
    let (mut s_lo, mut m_lo) = b.sign(lo)?;
    let mut nudges = 0;
    while s_lo == 0 && nudges < MAX_NUDGES && lo > eps0 + eps0 {
        lo -= eps0;
        (s_lo, m_lo) = b.sign(lo)?;
        nudges += 1;
    }
    let (mut s_hi, mut m_hi) = b.sign(hi)?;
    nudges = 0;
    while s_hi == 0 && nudges < MAX_NUDGES {
        hi += eps0;
        (s_hi, m_hi) = b.sign(hi)?;
        nudges += 1;
    }
    if s_lo >= 0 || s_hi <= 0 {
        return Err(Error::BracketFailure {
            mu_lo: m_lo.mu.to_f64_lossy(),
            mu_hi: m_hi.mu.to_f64_lossy(),
        });
    }

    let half = T::lit(0.5);
    while hi - lo > opts.tol_c {
        let mid = (lo + hi) * half;
        let (sg, _) = b.sign(mid)?;
        match sg {
            1 => hi = mid,
            -1 => lo = mid,
            _ => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let speed = (lo + hi) * half;
    let s = b.solve(speed, opts.tol_obj, false)?;
    Ok(SpeedResult {
        speed,
        sample: s,
        bracket: (lo, hi),
        solves: b.solves,
        iterations: b.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn constant_forcing_speed() {
        let grid = make_grid(1, 64).unwrap();
        let (c, s) = wave_speed(&Forcing::<f64>::constant(1, 0.8).unwrap(), &grid, 1e-3).unwrap();
        assert!((c - 0.8).abs() < 1e-3);
        assert!(s.mu.abs() < 1e-5);
    }

    #[test]
    fn refuses_without_witness() {
        let grid = make_grid(1, 64).unwrap();
        let g = Forcing::<f64>::cosine_1d(0.0, 1.0);
        assert!(matches!(
            wave_speed(&g, &grid, 1e-3),
            Err(Error::HypothesisNotVerified)
        ));
    }

    #[test]
    fn oscillating_forcing_speed_in_bracket() {
        let grid = make_grid(1, 64).unwrap();
        let g = Forcing::<f64>::cosine_1d(1.0, 0.5);
        let r = wave_speed_with(&g, &grid, &SpeedOptions::default()).unwrap();
        assert!(r.speed > 1.0 && r.speed < 1.5, "c = {}", r.speed);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-3);
        assert!(r.sample.mu.abs() < 1e-2);
    }
}
