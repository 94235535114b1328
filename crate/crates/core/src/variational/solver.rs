//! Primal-dual solver for the normalized problem
//!
//! ```text
//! mu_c = min { G_c(Psi) : Psi >= 0, int g Psi = 1 },
//! G_c(Psi) = int sqrt(c^2 Psi^2 + |D Psi|^2) - g Psi.
//! ```
//!
//! Working variable is the node mass `y = h^n Psi`, so that
//! `G_c = sum_i |(K y)_i| - sum_i g_i y_i` with `K y = (c y, grad y)` and the
//! constraint reads `sum_i g_i y_i = 1`. The saddle form
//! `min_y max_{|p_i| <= 1} <K y, p> - <g, y>` is solved by the
//! Chambolle-Pock iteration with exact projections on both sides.
//!
//! Certificate. For any dual field `xi` with `|xi_i| <= 1` put
//! `h_i = sqrt(1 - |xi_i|^2)` and `d = c h - div xi - g`. Then
//! `G_c(y) >= <d, y>` for every `y >= 0`. A minimizer also satisfies
//! `c sum y <= mu + 1`, so minimising `<d, y>` over
//! `{y >= 0, <g, y> = 1, sum y <= (U + 1)/c}` (with `U` any upper bound on
//! `mu`) gives a finite lower bound on `mu`. The reported gap is `U - L`.

use crate::error::{Error, Result};
use crate::grid::{stencil, PeriodicGrid};
use crate::real::Real;

/// Knobs of the primal-dual iteration.
#[derive(Debug, Clone)]
pub struct SolverOptions<T> {
    /// Target certified gap on the objective.
    pub tol_obj: T,
    pub max_iterations: usize,
    /// Iterations between certificate evaluations.
    pub check_every: usize,
    /// Stop as soon as the sign of `mu_c` is certified, even if the gap is
    /// still above `tol_obj`. Used while bisecting on the speed.
    pub stop_on_sign: bool,
    /// `sqrt(tau / sigma)` in units of the node volume `h^n`. The primal
    /// unknowns are node masses of size `h^n` while the dual field is O(1);
    /// values near 0.1 work well in both dimensions.
    pub step_ratio: T,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol_obj: T::lit(1e-6),
            max_iterations: 2_000_000,
            check_every: 100,
            stop_on_sign: false,
            step_ratio: T::lit(0.07),
        }
    }
}

/// Iterates that can seed a later solve (another speed, same grid).
#[derive(Debug, Clone)]
pub struct WarmStart<T> {
    pub grid: PeriodicGrid,
    /// Node masses `h^n Psi`.
    pub mass: Vec<T>,
    /// Dual field, `n + 1` components (the first pairs with `c Psi`).
    pub dual: Vec<Vec<T>>,
}

/// Output of one constrained solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome<T> {
    /// Best feasible node masses, normalised so `sum g y = 1`.
    pub mass: Vec<T>,
    pub upper: T,
    pub lower: T,
    pub iterations: usize,
    pub warm: WarmStart<T>,
}

impl<T: Real> SolveOutcome<T> {
    pub fn gap(&self) -> T {
        (self.upper - self.lower).max(T::zero())
    }
}

struct Workspace<T> {
    grid: PeriodicGrid,
    c: T,
    g: Vec<T>,
    grad: Vec<Vec<T>>,
    div: Vec<T>,
}

impl<T: Real> Workspace<T> {
    fn new(grid: PeriodicGrid, c: T, g: Vec<T>) -> Self {
        let n = grid.node_count();
        Self {
            grid,
            c,
            g,
            grad: vec![vec![T::zero(); n]; grid.dimension()],
            div: vec![T::zero(); n],
        }
    }

    /// `sum_i |(K y)_i|`.
    fn norm_k(&mut self, y: &[T]) -> T {
        stencil::gradient(&self.grid, y, &mut self.grad);
        let c = self.c;
        (0..y.len())
            .map(|i| {
                let mut s = c * y[i] * c * y[i];
                for comp in &self.grad {
                    s += comp[i] * comp[i];
                }
                s.sqrt()
            })
            .sum()
    }

    /// Objective on the normalized set, evaluated through homogeneity so the
    /// result does not depend on how exactly `y` meets the constraint.
    fn upper_bound(&mut self, y: &[T]) -> Option<T> {
        let den: T = y.iter().zip(&self.g).map(|(&a, &b)| a * b).sum();
        if den <= T::zero() {
            return None;
        }
        Some(self.norm_k(y) / den - T::one())
    }

    /// Certified lower bound on `mu` from the vector part of the dual field.
    fn lower_bound(&mut self, dual: &[Vec<T>], upper: T) -> T {
        let n = self.g.len();
        stencil::divergence(&self.grid, &dual[1..], &mut self.div);
        let c = self.c;
        let d: Vec<T> = (0..n)
            .map(|i| {
                let mut xi2 = T::zero();
                for comp in &dual[1..] {
                    xi2 += comp[i] * comp[i];
                }
                let h = (T::one() - xi2).max(T::zero()).sqrt();
                c * h - self.div[i] - self.g[i]
            })
            .collect();
        let budget = (upper + T::one()) / c;
        dual_lp_bound(&d, &self.g, budget)
    }
}

/// `max_lambda lambda - B max(0, max_i(lambda g_i - d_i))`, a lower bound for
/// `min { <d, y> : y >= 0, <g, y> = 1, sum y <= B }`. Any `lambda` is valid,
/// so the search only has to be good, not exact.
fn dual_lp_bound<T: Real>(d: &[T], g: &[T], budget: T) -> T {
    let eval = |lambda: T| -> (T, T) {
        let mut worst = T::zero();
        let mut g_star = T::zero();
        for (&di, &gi) in d.iter().zip(g) {
            let v = lambda * gi - di;
            if v > worst {
                worst = v;
                g_star = gi;
            }
        }
        let value = lambda - budget * worst;
        let slope = if worst > T::zero() {
            T::one() - budget * g_star
        } else {
            T::one()
        };
        (value, slope)
    };
    let mut best = T::neg_infinity();
    let mut lo = T::zero();
    let mut hi = T::zero();
    let (v0, s0) = eval(T::zero());
    best = best.max(v0);
    let mut step = T::one();
    if s0 > T::zero() {
        loop {
            hi = lo + step;
            let (v, s) = eval(hi);
            best = best.max(v);
            if s <= T::zero() || step > T::lit(1e12) {
                break;
            }
            lo = hi;
            step = step + step;
        }
    } else {
        loop {
            lo = hi - step;
            let (v, s) = eval(lo);
            best = best.max(v);
            if s > T::zero() || step > T::lit(1e12) {
                break;
            }
            hi = lo;
            step = step + step;
        }
    }
    for _ in 0..80 {
        let mid = (lo + hi) * T::lit(0.5);
        let (v, s) = eval(mid);
        best = best.max(v);
        if s > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    best
}

/// Exact Euclidean projection onto `{y >= 0, <g, y> = 1}`, written into `out`.
/// Returns the multiplier `lambda` with `out = max(t - lambda g, 0)`.
pub(crate) fn project_normalized<T: Real>(t: &[T], g: &[T], out: &mut [T], lambda0: T) -> T {
    let eval = |lambda: T| -> (T, T) {
        let mut phi = T::zero();
        let mut slope = T::zero();
        for (&ti, &gi) in t.iter().zip(g) {
            let v = ti - lambda * gi;
            if v > T::zero() {
                phi += gi * v;
                slope -= gi * gi;
            }
        }
        (phi, slope)
    };
    let target = T::one();
    let tol = T::epsilon() * T::lit(16.0);
    let mut lo: Option<T> = None; // phi(lo) >= 1
    let mut hi: Option<T> = None; // phi(hi) <= 1
    let mut lambda = lambda0;
    let mut step = T::one();
    for _ in 0..500 {
        let (phi, slope) = eval(lambda);
        if (phi - target).abs() <= tol {
            break;
        }
        if phi > target {
            lo = Some(lambda);
        } else {
            hi = Some(lambda);
        }
        let newton = if slope < T::zero() {
            lambda - (phi - target) / slope
        } else {
            T::nan()
        };
        lambda = match (lo, hi) {
            (Some(a), Some(b)) => {
                if (b - a).abs() <= T::epsilon() * (T::one() + a.abs().max(b.abs())) {
                    break;
                }
                if newton.is_finite() && newton > a && newton < b {
                    newton
                } else {
                    (a + b) * T::lit(0.5)
                }
            }
            (Some(a), None) => {
                if newton.is_finite() && newton > a {
                    newton
                } else {
                    step = step + step;
                    a + step
                }
            }
            (None, Some(b)) => {
                if newton.is_finite() && newton < b {
                    newton
                } else {
                    step = step + step;
                    b - step
                }
            }
            (None, None) => unreachable!(),
        };
    }
    for ((o, &ti), &gi) in out.iter_mut().zip(t).zip(g) {
        *o = (ti - lambda * gi).max(T::zero());
    }
    lambda
}

/// Fixed initial guess: `Psi = max(g, 0) + 0.1`, projected onto the constraint.
pub(crate) fn default_start<T: Real>(grid: PeriodicGrid, g: &[T]) -> WarmStart<T> {
    let w = grid.cell_volume::<T>();
    let t: Vec<T> = g
        .iter()
        .map(|&gi| (gi.max(T::zero()) + T::lit(0.1)) * w)
        .collect();
    let den: T = t.iter().zip(g).map(|(&a, &b)| a * b).sum();
    let mass = if den > T::zero() {
        t.iter().map(|&v| v / den).collect()
    } else {
        let mut out = vec![T::zero(); t.len()];
        project_normalized(&t, g, &mut out, T::zero());
        out
    };
    WarmStart {
        grid,
        mass,
        dual: vec![vec![T::zero(); grid.node_count()]; grid.dimension() + 1],
    }
}

/// Runs the primal-dual iteration for speed `c` against node samples `g`.
pub fn solve<T: Real>(
    grid: PeriodicGrid,
    g: &[T],
    c: T,
    start: Option<&WarmStart<T>>,
    opts: &SolverOptions<T>,
) -> Result<SolveOutcome<T>> {
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "speed c = {c} must be positive"
        )));
    }
    if g.len() != grid.node_count() {
        return Err(Error::ShapeMismatch(
            "forcing samples do not match grid".into(),
        ));
    }
    if !g.iter().any(|&v| v > T::zero()) {
        return Err(Error::Infeasible("g <= 0 at every node".into()));
    }
    let n = grid.node_count();
    let dim = grid.dimension();
    let start = match start {
        Some(s) if s.grid == grid => s.clone(),
        _ => default_start(grid, g),
    };
    let mut ws = Workspace::new(grid, c, g.to_vec());

    // |K|^2 <= c^2 + 4 n / h^2 for forward differences on the torus.
    let inv_h = T::from_count(grid.resolution());
    let op_norm = (c * c + T::lit(4.0) * T::from_count(dim) * inv_h * inv_h).sqrt();
    let theta = opts.step_ratio * grid.cell_volume::<T>();
    let tau = T::lit(0.99) * theta / op_norm;
    let sigma = T::lit(0.99) / (theta * op_norm);

    let mut y = start.mass;
    let mut p = start.dual;
    let mut y_bar = y.clone();
    let mut t = vec![T::zero(); n];
    let mut kty = vec![T::zero(); n];
    let mut lambda = T::zero();

    let mut best_upper = T::infinity();
    let mut best_mass = y.clone();
    let mut best_lower = T::neg_infinity();
    let check_every = opts.check_every.max(1);

    let mut iter = 0;
    loop {
        if iter % check_every == 0 {
            if let Some(u) = ws.upper_bound(&y) {
                if u < best_upper {
                    best_upper = u;
                    best_mass.copy_from_slice(&y);
                }
            }
            if best_upper.is_finite() {
                let l = ws.lower_bound(&p, best_upper);
                best_lower = best_lower.max(l);
            }
            if best_upper - best_lower <= opts.tol_obj {
                break;
            }
            if opts.stop_on_sign && (best_lower > T::zero() || best_upper < T::zero()) {
                break;
            }
            if iter >= opts.max_iterations {
                return Err(Error::NotConverged {
                    iterations: iter,
                    gap: (best_upper - best_lower).to_f64_lossy(),
                });
            }
        }

        // dual ascent and projection onto the unit ball
        stencil::gradient(&grid, &y_bar, &mut ws.grad);
        for i in 0..n {
            let mut s = T::zero();
            p[0][i] += sigma * c * y_bar[i];
            s += p[0][i] * p[0][i];
            for k in 0..dim {
                p[k + 1][i] += sigma * ws.grad[k][i];
                s += p[k + 1][i] * p[k + 1][i];
            }
            if s > T::one() {
                let r = T::one() / s.sqrt();
                for comp in p.iter_mut() {
                    comp[i] *= r;
                }
            }
        }

        // primal descent: K^T p = c p0 - div(xi)
        stencil::divergence(&grid, &p[1..], &mut kty);
        for i in 0..n {
            let ktp = c * p[0][i] - kty[i];
            t[i] = y[i] - tau * (ktp - g[i]);
        }
        std::mem::swap(&mut y_bar, &mut y); // y_bar <- old y
        lambda = project_normalized(&t, g, &mut y, lambda);
        for i in 0..n {
            y_bar[i] = y[i] + y[i] - y_bar[i];
        }
        iter += 1;
    }

    // exact normalization through homogeneity
    let den: T = best_mass.iter().zip(g).map(|(&a, &b)| a * b).sum();
    for v in best_mass.iter_mut() {
        *v /= den;
    }
    Ok(SolveOutcome {
        mass: best_mass,
        upper: best_upper,
        lower: best_lower,
        iterations: iter,
        warm: WarmStart {
            grid,
            mass: y,
            dual: p,
        },
    })
}
