//! Explicit time stepping for forced mean curvature flow of graphs,
//!
//! ```text
//! w_t = tr[(I - Dw (x) Dw / (1 + |Dw|^2)) D^2 w] + g sqrt(1 + |Dw|^2) - c,
//! ```
//!
//! which for `c = 0` is the flow of `u` itself and for `c > 0` follows
//! `w = u - c t`. Derivatives are centered by default; the time step is
//! `dt = sigma h^2 / (2 n + h^2 max|g|)`.

use crate::error::{Error, Result};
use crate::forcing::{sample, Forcing};
use crate::grid::{PeriodicGrid, ScalarField};
use crate::real::Real;

/// Discretisation of the slope inside `g sqrt(1 + |Dw|^2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SlopeScheme {
    /// Centered differences, second order. Unstable once the slope outgrows
    /// roughly `1 / (|g| sqrt(dt))`, as happens next to pinned regions.
    #[default]
    Centered,
    /// Godunov upwinding per axis, first order and monotone for any slope.
    Upwind,
}

#[derive(Debug, Clone)]
pub struct EvolutionParams<T> {
    /// Subtracted speed `c`; 0 evolves `u` itself.
    pub c: T,
    pub final_time: T,
    pub cfl_safety: T,
    /// Record the trace every this many steps (the final time is always recorded).
    pub snapshot_stride: usize,
    pub scheme: SlopeScheme,
}

impl<T: Real> EvolutionParams<T> {
    pub fn new(c: T, final_time: T) -> Self {
        Self {
            c,
            final_time,
            cfl_safety: T::lit(0.2),
            snapshot_stride: 1000,
            scheme: SlopeScheme::Centered,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.final_time > T::zero()) || !self.final_time.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "final time {} must be positive",
                self.final_time
            )));
        }
        if !(self.cfl_safety > T::zero() && self.cfl_safety < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "cfl safety {} outside (0, 1)",
                self.cfl_safety
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidParameter(
                "snapshot stride must be at least 1".into(),
            ));
        }
        if !self.c.is_finite() {
            return Err(Error::InvalidParameter("speed shift must be finite".into()));
        }
        Ok(())
    }
}

/// Sampled history of one run.
#[derive(Debug, Clone)]
pub struct EvolutionTrace<T> {
    pub times: Vec<T>,
    /// `max_Q w(t)`.
    pub max_drift: Vec<T>,
    /// `F_c(w(t))`; NaN when `c <= 0`, where the functional is undefined.
    pub lyapunov: Vec<T>,
    /// `max |w_{k+1} - w_k| / dt` over the step starting at each sample
    /// (the step ending there, for the final sample).
    pub wt_sup: Vec<T>,
    pub snapshots: Vec<ScalarField<T>>,
    pub dt: T,
    pub steps: usize,
    pub c: T,
}

impl<T: Real> EvolutionTrace<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_field(&self) -> &ScalarField<T> {
        self.snapshots
            .last()
            .expect("trace holds the initial state")
    }
}

/// Time step used by [`evolve`].
pub fn stable_dt<T: Real>(grid: &PeriodicGrid, g_max_abs: T, sigma: T) -> T {
    let h = grid.spacing::<T>();
    sigma * h * h / (T::from_count(2 * grid.dimension()) + h * h * g_max_abs)
}

/// Squared upwind slope along one axis from the backward and forward
/// differences `a` and `b`.
fn godunov_sq<T: Real>(a: T, b: T, g: T) -> T {
    let z = T::zero();
    let (l, r) = if g > z {
        (a.min(z), b.max(z))
    } else {
        (a.max(z), b.min(z))
    };
    (l * l).max(r * r)
}

/// Writes the right-hand side into `out`.
fn rhs<T: Real>(grid: &PeriodicGrid, w: &[T], g: &[T], c: T, scheme: SlopeScheme, out: &mut [T]) {
    let n = grid.resolution();
    let inv_h = T::from_count(n);
    let inv_h2 = inv_h * inv_h;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let upwind = scheme == SlopeScheme::Upwind;
    if grid.dimension() == 1 {
        for i in 0..n {
            let l = w[if i == 0 { n - 1 } else { i - 1 }];
            let r = w[if i + 1 == n { 0 } else { i + 1 }];
            let p = (r - l) * half * inv_h;
            let wxx = (r - two * w[i] + l) * inv_h2;
            let s = T::one() + p * p;
            let slope = if upwind {
                T::one() + godunov_sq((w[i] - l) * inv_h, (r - w[i]) * inv_h, g[i])
            } else {
                s
            };
            out[i] = wxx / s + g[i] * slope.sqrt() - c;
        }
    } else {
        let quarter = T::lit(0.25);
        for j in 0..n {
            let jd = if j == 0 { n - 1 } else { j - 1 };
            let ju = if j + 1 == n { 0 } else { j + 1 };
            for i in 0..n {
                let il = if i == 0 { n - 1 } else { i - 1 };
                let ir = if i + 1 == n { 0 } else { i + 1 };
                let at = |a: usize, b: usize| w[a + n * b];
                let centre = at(i, j);
                let px = (at(ir, j) - at(il, j)) * half * inv_h;
                let py = (at(i, ju) - at(i, jd)) * half * inv_h;
                let wxx = (at(ir, j) - two * centre + at(il, j)) * inv_h2;
                let wyy = (at(i, ju) - two * centre + at(i, jd)) * inv_h2;
                let wxy = (at(ir, ju) - at(ir, jd) - at(il, ju) + at(il, jd)) * quarter * inv_h2;
                let s = T::one() + px * px + py * py;
                let trace = wxx + wyy - (px * px * wxx + two * px * py * wxy + py * py * wyy) / s;
                let gi = g[i + n * j];
                let slope = if upwind {
                    T::one()
                        + godunov_sq(
                            (centre - at(il, j)) * inv_h,
                            (at(ir, j) - centre) * inv_h,
                            gi,
                        )
                        + godunov_sq(
                            (centre - at(i, jd)) * inv_h,
                            (at(i, ju) - centre) * inv_h,
                            gi,
                        )
                } else {
                    s
                };
                out[i + n * j] = trace + gi * slope.sqrt() - c;
            }
        }
    }
}

/// One forward Euler step with centered differences.
pub fn step_explicit<T: Real>(
    w: &ScalarField<T>,
    g: &ScalarField<T>,
    c: T,
    dt: T,
) -> Result<ScalarField<T>> {
    step_explicit_with(w, g, c, dt, SlopeScheme::Centered)
}

/// One forward Euler step.
pub fn step_explicit_with<T: Real>(
    w: &ScalarField<T>,
    g: &ScalarField<T>,
    c: T,
    dt: T,
    scheme: SlopeScheme,
) -> Result<ScalarField<T>> {
    if w.grid() != g.grid() {
        return Err(Error::ShapeMismatch(
            "w and g live on different grids".into(),
        ));
    }
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} must be positive"
        )));
    }
    w.ensure_finite()?;
    g.ensure_finite()?;
    let grid = *w.grid();
    let mut out = vec![T::zero(); grid.node_count()];
    rhs(&grid, w.values(), g.values(), c, scheme, &mut out);
    for (o, &v) in out.iter_mut().zip(w.values()) {
        *o = v + dt * *o;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { step: 0, time: 0.0 });
    }
    ScalarField::new(grid, out)
}

/// Runs the explicit scheme from `u0` to `params.final_time`.
pub fn evolve<T: Real>(
    u0: &ScalarField<T>,
    g: &Forcing<T>,
    params: &EvolutionParams<T>,
) -> Result<EvolutionTrace<T>> {
    params.validate()?;
    u0.ensure_finite()?;
    let grid = *u0.grid();
    let gs = sample(g, &grid)?;
    let g_abs = gs.values().iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let dt_max = stable_dt(&grid, g_abs, params.cfl_safety);
    let total = params.final_time;
    let steps = (total / dt_max)
        .ceil()
        .to_usize()
        .unwrap_or(usize::MAX)
        .max(1);
    let dt = total / T::from_count(steps);
    let c = params.c;

    let mut w = u0.values().to_vec();
    let mut next = vec![T::zero(); w.len()];
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        max_drift: Vec::new(),
        lyapunov: Vec::new(),
        wt_sup: Vec::new(),
        snapshots: Vec::new(),
        dt,
        steps,
        c,
    };
    let record = |trace: &mut EvolutionTrace<T>, k: usize, w: &[T], wt: T| -> Result<()> {
        let field = ScalarField::new(grid, w.to_vec())?;
        trace.times.push(T::from_count(k) * dt);
        trace
            .max_drift
            .push(w.iter().copied().fold(T::neg_infinity(), T::max));
        let blow_up = || Error::BlowUp {
            step: k,
            time: (T::from_count(k) * dt).to_f64_lossy(),
        };
        trace.lyapunov.push(if c > T::zero() {
            // e^{c w} overflowing means w itself has run away
            match functional_fc(&field, &gs, c) {
                Ok(f) if f.is_finite() => f,
                Ok(_) | Err(Error::FieldNotFinite(_)) => return Err(blow_up()),
                Err(e) => return Err(e),
            }
        } else {
            T::nan()
        });
        trace.wt_sup.push(wt);
        trace.snapshots.push(field);
        Ok(())
    };

    record(&mut trace, 0, &w, T::zero())?;
    // wt_sup of a sample is filled in by the step that follows it
    let mut open_sample = true;
    for k in 0..steps {
        rhs(&grid, &w, gs.values(), c, params.scheme, &mut next);
        let mut wt = T::zero();
        for (v, r) in w.iter_mut().zip(next.iter()) {
            wt = wt.max(r.abs());
            *v += dt * *r;
        }
        if !wt.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                step: k + 1,
                time: (T::from_count(k + 1) * dt).to_f64_lossy(),
            });
        }
        if open_sample {
            *trace.wt_sup.last_mut().unwrap() = wt;
            open_sample = false;
        }
        let done = k + 1;
        if done % params.snapshot_stride == 0 || done == steps {
            record(&mut trace, done, &w, wt)?;
            open_sample = true;
        }
    }
    Ok(trace)
}

/// `F_c(w) = int e^{c w} (sqrt(1 + |Dw|^2) - g / c)`, discretised as
/// `G_c(e^{c w} / c)` so that sentinel nodes (`w = -inf`) contribute 0 and
/// the slope next to them stays finite. The slope is the exponential
/// difference quotient `(e^{c (w_{i+e} - w_i)} - 1) / (c h)`, a first-order
/// approximation of the forward difference of `w`.
pub fn functional_fc<T: Real>(w: &ScalarField<T>, g: &ScalarField<T>, c: T) -> Result<T> {
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "speed c = {c} must be positive"
        )));
    }
    if w.grid() != g.grid() {
        return Err(Error::ShapeMismatch(
            "w and g live on different grids".into(),
        ));
    }
    let grid = *w.grid();
    let big: Vec<T> = (0..grid.node_count())
        .map(|i| {
            if w.is_neg_inf(i) {
                T::zero()
            } else {
                (c * w.values()[i]).exp() / c
            }
        })
        .collect();
    let field = ScalarField::new(grid, big)?;
    crate::variational::eval_gc(&field, g, c)
}

/// Evolution of `m(t) = min (w - psi)` and `M(t) = max (w - psi)` over the
/// support of `psi`.
#[derive(Debug, Clone)]
pub struct ComparisonReport<T> {
    pub m: Vec<T>,
    pub big_m: Vec<T>,
    /// `min_t m(t) - m(0)`.
    pub min_increment: T,
    /// `max_{s < t} [m(s) - m(t) - slack (t - s)]`; at most 0 means nondecreasing.
    pub m_violation: T,
    /// `max_{s < t} [M(t) - M(s) - slack (t - s)]`; at most 0 means nonincreasing.
    pub big_m_violation: T,
    /// `min_t m(t) - min_Q (u0 - psi)`, nonnegative when the bound holds.
    pub lower_bound_margin: T,
    pub slack_per_time: T,
}

impl<T: Real> ComparisonReport<T> {
    pub fn m_nondecreasing(&self) -> bool {
        self.m_violation <= T::zero()
    }

    pub fn big_m_nonincreasing(&self) -> bool {
        self.big_m_violation <= T::zero()
    }
}

fn worst_drop<T: Real>(times: &[T], v: &[T], slack: T, sign: T) -> T {
    // max over s < t of sign (v(s) - v(t)) - slack (t - s)
    let mut best_prefix = T::neg_infinity(); // max_s sign v(s) + slack s
    let mut worst = T::neg_infinity();
    for (&t, &x) in times.iter().zip(v) {
        if best_prefix.is_finite() {
            worst = worst.max(best_prefix - sign * x - slack * t);
        }
        best_prefix = best_prefix.max(sign * x + slack * t);
    }
    if worst.is_finite() {
        worst
    } else {
        T::zero()
    }
}

/// Comparison bounds against a profile on the trace's grid.
pub fn check_lower_bound<T: Real>(
    trace: &EvolutionTrace<T>,
    psi: &ScalarField<T>,
    u0: &ScalarField<T>,
    slack_per_time: T,
) -> Result<ComparisonReport<T>> {
    let inside: Vec<usize> = (0..psi.len()).filter(|&i| !psi.is_neg_inf(i)).collect();
    if inside.is_empty() {
        return Err(Error::EmptySupport);
    }
    if trace.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    if trace.snapshots[0].grid() != psi.grid() || u0.grid() != psi.grid() {
        return Err(Error::ShapeMismatch(
            "profile and trace live on different grids".into(),
        ));
    }
    let extremes = |w: &[T]| {
        inside
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| {
                let d = w[i] - psi.values()[i];
                (lo.min(d), hi.max(d))
            })
    };
    let (m, big_m): (Vec<T>, Vec<T>) = trace.snapshots.iter().map(|s| extremes(s.values())).unzip();
    let (m0, _) = extremes(u0.values());
    let min_m = m.iter().copied().fold(T::infinity(), T::min);
    Ok(ComparisonReport {
        min_increment: min_m - m[0],
        m_violation: worst_drop(&trace.times, &m, slack_per_time, T::one()),
        big_m_violation: worst_drop(&trace.times, &big_m, slack_per_time, -T::one()),
        lower_bound_margin: min_m - m0,
        m,
        big_m,
        slack_per_time,
    })
}

#[derive(Debug, Clone)]
pub struct LogBoundReport<T> {
    /// `sup_{t in [1, T]} M(t) - log(1 + t) / c`.
    pub sup_excess: T,
    /// `min_t M(t) - min_Q u0`.
    pub lower_margin: T,
}

impl<T: Real> LogBoundReport<T> {
    pub fn bounded(&self) -> bool {
        self.sup_excess.is_finite()
    }
}

/// Growth of `M(t)` against `log(1 + t) / c`.
pub fn check_log_bound<T: Real>(trace: &EvolutionTrace<T>, c: T) -> Result<LogBoundReport<T>> {
    if !(c > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "speed c = {c} must be positive"
        )));
    }
    if trace.is_empty() {
        return Err(Error::InvalidParameter("empty trace".into()));
    }
    let min_u0 = trace.snapshots[0]
        .values()
        .iter()
        .copied()
        .fold(T::infinity(), T::min);
    let mut sup = T::neg_infinity();
    for (&t, &m) in trace.times.iter().zip(&trace.max_drift) {
        if t >= T::one() {
            sup = sup.max(m - (T::one() + t).ln() / c);
        }
    }
    let lower = trace.max_drift.iter().copied().fold(T::infinity(), T::min) - min_u0;
    Ok(LogBoundReport {
        sup_excess: sup,
        lower_margin: lower,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use std::f64::consts::PI;

    #[test]
    fn constants_are_stationary() {
        let grid = make_grid(2, 8).unwrap();
        let w = ScalarField::<f64>::constant(grid, 3.5);
        let g = ScalarField::constant(grid, 0.7);
        let out = step_explicit(&w, &g, 0.7, 1e-3).unwrap();
        assert!(out.values().iter().all(|&v| v == 3.5));
        let z = ScalarField::<f64>::zeros(grid);
        let out = step_explicit(&z, &z, 0.0, 1e-3).unwrap();
        assert!(out.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn small_sine_decays_like_heat() {
        let n = 256;
        let grid = make_grid(1, n).unwrap();
        let eps = 1e-4;
        let u0 = ScalarField::<f64>::from_fn(grid, |y| eps * (2.0 * PI * y[0]).sin()).unwrap();
        let g = Forcing::<f64>::constant(1, 0.0).unwrap();
        let mut p = EvolutionParams::new(0.0, 0.05);
        p.snapshot_stride = 100_000_000;
        let tr = evolve(&u0, &g, &p).unwrap();
        let amp = tr
            .final_field()
            .values()
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        // discrete symbol of the centered Laplacian on the first mode
        let expected = eps * (-4.0 * PI * PI * 0.05).exp();
        assert!((amp / expected - 1.0).abs() < 1e-2, "{amp} vs {expected}");
    }

    #[test]
    fn fc_examples() {
        let grid = make_grid(1, 16).unwrap();
        let z = ScalarField::<f64>::zeros(grid);
        let g = ScalarField::constant(grid, 1.3);
        assert!(functional_fc(&z, &g, 1.3).unwrap().abs() < 1e-15);
        let g = sample(&Forcing::cosine_1d(0.4, 1.0), &grid).unwrap();
        assert!((functional_fc(&z, &g, 1.0).unwrap() - 0.6).abs() < 1e-14);
        let all = ScalarField::with_sentinels(grid, vec![0.0; 16], vec![true; 16]).unwrap();
        assert_eq!(functional_fc(&all, &g, 1.0).unwrap(), 0.0);
        assert!(functional_fc(&z, &g, 0.0).is_err());
    }

    #[test]
    fn constant_forcing_is_transport() {
        let grid = make_grid(1, 32).unwrap();
        let g = Forcing::<f64>::constant(1, 1.0).unwrap();
        let u0 = ScalarField::zeros(grid);
        let tr = evolve(&u0, &g, &EvolutionParams::new(0.0, 1.0)).unwrap();
        assert!(tr
            .final_field()
            .values()
            .iter()
            .all(|&v| (v - 1.0).abs() < 1e-12));
        let tr = evolve(&u0, &g, &EvolutionParams::new(1.0, 2.0)).unwrap();
        assert!(tr.max_drift.iter().all(|&m| m.abs() < 1e-12));
        let lb = check_log_bound(&tr, 1.0).unwrap();
        assert!(lb.sup_excess <= 0.0);
        assert_eq!(lb.lower_margin, 0.0);
        let cmp = check_lower_bound(&tr, &u0, &u0, 1e-4).unwrap();
        assert!(cmp.m.iter().all(|&m| m.abs() < 1e-12));
        assert!(cmp.m_nondecreasing() && cmp.big_m_nonincreasing());
    }

    #[test]
    fn trace_lists_are_aligned() {
        let grid = make_grid(1, 16).unwrap();
        let g = Forcing::<f64>::cosine_1d(1.0, 0.5);
        let mut p = EvolutionParams::new(1.0, 0.1);
        p.snapshot_stride = 7;
        let tr = evolve(&ScalarField::zeros(grid), &g, &p).unwrap();
        assert_eq!(tr.times.len(), tr.max_drift.len());
        assert_eq!(tr.times.len(), tr.lyapunov.len());
        assert_eq!(tr.times.len(), tr.wt_sup.len());
        assert_eq!(tr.times.len(), tr.snapshots.len());
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
        assert!((tr.times.last().unwrap() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn worst_drop_detects_decrease() {
        let t = [0.0f64, 1.0, 2.0];
        assert!(worst_drop(&t, &[0.0, 1.0, 2.0], 0.0, 1.0) <= 0.0);
        assert!((worst_drop(&t, &[0.0, 1.0, 0.5], 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((worst_drop(&t, &[2.0, 1.0, 0.0], 0.0, -1.0) + 1.0).abs() < 1e-15);
    }
}
