//! Shooting solver for 1D classical traveling waves.
//!
//! In one dimension the profile equation becomes an ODE for the normalized
//! slope `q = psi' / sqrt(1 + psi'^2)`:
//!
//! ```text
//! q'(y) = c sqrt(1 - q^2) - g(y),
//! ```
//!
//! and a periodic profile needs `q(1) = q(0)` together with a zero mean slope
//! `int_0^1 q / sqrt(1 - q^2) dy = 0`. The two conditions fix `(c, q(0))`.
//! Slopes running off to `|q| -> 1` signal that no classical wave exists
//! along that trajectory.

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::grid::{PeriodicGrid, ScalarField};
use crate::real::Real;

/// Trajectories are abandoned once `|q| > 1 - SATURATION_GUARD`.
pub const SATURATION_GUARD: f64 = 1e-9;

/// End state of one integration over `[0, 1]`.
#[derive(Debug, Clone)]
pub struct QTrajectory<T> {
    pub q_end: T,
    /// `int_0^1 q / sqrt(1 - q^2) dy`.
    pub mean_slope: T,
    /// `q` at `y = i / steps`, `steps + 1` entries.
    pub q: Vec<T>,
    /// `psi(i / steps) - psi(0)`, `steps + 1` entries.
    pub psi: Vec<T>,
}

#[inline]
fn slope<T: Real>(q: T) -> T {
    q / (T::one() - q * q).max(T::zero()).sqrt()
}

/// Classic RK4 for `(q, psi)` with `steps` equal steps on `[0, 1]`.
pub fn integrate_q<T: Real>(c: T, q0: T, g: &Forcing<T>, steps: usize) -> Result<QTrajectory<T>> {
    if g.dimension() != 1 {
        return Err(Error::UnsupportedDimension(g.dimension()));
    }
    if steps < 1000 {
        return Err(Error::InvalidParameter(format!(
            "{steps} steps; at least 1000 required"
        )));
    }
    if !(q0.abs() < T::one()) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need |q0| < 1 and finite c, got q0 = {q0}, c = {c}"
        )));
    }
    let limit = T::one() - T::lit(SATURATION_GUARD);
    let h = T::one() / T::from_count(steps);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let gy = |y: T| g.eval([y, T::zero()]);
    let rhs = |y: T, q: T| c * (T::one() - q * q).max(T::zero()).sqrt() - gy(y);

    let mut q = q0;
    let mut psi = T::zero();
    let mut qs = Vec::with_capacity(steps + 1);
    let mut psis = Vec::with_capacity(steps + 1);
    qs.push(q);
    psis.push(psi);
    for i in 0..steps {
        let y = T::from_count(i) * h;
        let ym = y + half * h;
        let y1 = T::from_count(i + 1) * h;
        let k1 = rhs(y, q);
        let q2 = q + half * h * k1;
        let k2 = rhs(ym, q2);
        let q3 = q + half * h * k2;
        let k3 = rhs(ym, q3);
        let q4 = q + h * k3;
        let k4 = rhs(y1, q4);
        for &stage in &[q2, q3, q4] {
            if !(stage.abs() <= limit) {
                return Err(Error::SlopeSaturation {
                    y: y.to_f64_lossy(),
                    q: stage.to_f64_lossy(),
                });
            }
        }
        let q_next = q + h * sixth * (k1 + (k2 + k3) * T::lit(2.0) + k4);
        if !(q_next.abs() <= limit) {
            return Err(Error::SlopeSaturation {
                y: y1.to_f64_lossy(),
                q: q_next.to_f64_lossy(),
            });
        }
        psi += h * sixth * (slope(q) + (slope(q2) + slope(q3)) * T::lit(2.0) + slope(q4));
        q = q_next;
        qs.push(q);
        psis.push(psi);
    }
    Ok(QTrajectory {
        q_end: q,
        mean_slope: psi,
        q: qs,
        psi: psis,
    })
}

#[derive(Debug, Clone)]
pub struct OracleOptions<T> {
    /// Target for both residuals.
    pub tol: T,
    pub steps: usize,
    pub max_newton: usize,
    pub max_halvings: usize,
    /// Resolution of the returned profile; must divide `steps`.
    pub profile_resolution: usize,
}

impl<T: Real> Default for OracleOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            steps: 8192,
            max_newton: 100,
            max_halvings: 20,
            profile_resolution: 512,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult<T> {
    pub c: T,
    pub q0: T,
    /// `q(1) - q(0)`.
    pub residual_periodicity: T,
    /// `int_0^1 q / sqrt(1 - q^2)`.
    pub residual_mean_slope: T,
    /// Sampled on the `profile_resolution` grid, max 0.
    pub profile: ScalarField<T>,
    /// `q` on the same nodes.
    pub slope: Vec<T>,
    pub newton_iterations: usize,
}

fn residuals<T: Real>(c: T, q0: T, g: &Forcing<T>, steps: usize) -> Result<(T, T, QTrajectory<T>)> {
    let t = integrate_q(c, q0, g, steps)?;
    Ok((t.q_end - q0, t.mean_slope, t))
}

fn norm<T: Real>(r: (T, T)) -> T {
    r.0.abs().max(r.1.abs())
}

/// Damped Newton on `(c, q0)` from `(mean g, 0)`.
pub fn solve_classical_wave_1d<T: Real>(g: &Forcing<T>, tol: T) -> Result<OracleResult<T>> {
    let opts = OracleOptions {
        tol,
        ..OracleOptions::default()
    };
    solve_classical_wave_1d_with(g, &opts)
}

pub fn solve_classical_wave_1d_with<T: Real>(
    g: &Forcing<T>,
    opts: &OracleOptions<T>,
) -> Result<OracleResult<T>> {
    if g.dimension() != 1 {
        return Err(Error::UnsupportedDimension(g.dimension()));
    }
    let n = opts.profile_resolution;
    if n < 4 || !opts.steps.is_multiple_of(n) {
        return Err(Error::InvalidParameter(format!(
            "profile resolution {n} must be at least 4 and divide steps = {}",
            opts.steps
        )));
    }
    let steps = opts.steps;
    let mut c = g.mean();
    let mut q0 = T::zero();
    let (mut r0, mut r1, mut traj) = match residuals(c, q0, g, steps) {
        Ok(v) => v,
        Err(Error::SlopeSaturation { y, q }) => {
            return Err(Error::NoClassicalWave(format!(
                "slope saturates at y = {y:.6} (q = {q:.12}) from the initial guess"
            )))
        }
        Err(e) => return Err(e),
    };
    let mut iterations = 0;
    let mut saturations = 0usize;
    let rel = T::lit(1e-6);
    while norm((r0, r1)) > opts.tol {
        if iterations >= opts.max_newton {
            return Err(Error::NotConverged {
                iterations,
                gap: norm((r0, r1)).to_f64_lossy(),
            });
        }
        iterations += 1;
        // forward-difference Jacobian
        let dc = rel * c.abs().max(T::one());
        let dq = rel * q0.abs().max(T::one());
        // perturb q0 towards zero so the probe stays inside (-1, 1)
        let dq_signed = if q0 > T::zero() { -dq } else { dq };
        let probe = |cc: T, qq: T| residuals(cc, qq, g, steps).map(|(a, b, _)| (a, b));
        let (pc, pq) = match (probe(c + dc, q0), probe(c, q0 + dq_signed)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                return Err(Error::NoClassicalWave(
                    "slope saturates next to the current iterate".into(),
                ))
            }
        };
        let j = [
            [(pc.0 - r0) / dc, (pq.0 - r0) / dq_signed],
            [(pc.1 - r1) / dc, (pq.1 - r1) / dq_signed],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == T::zero() || !det.is_finite() {
            return Err(Error::NotConverged {
                iterations,
                gap: norm((r0, r1)).to_f64_lossy(),
            });
        }
        let step_c = (j[1][1] * r0 - j[0][1] * r1) / det;
        let step_q = (j[0][0] * r1 - j[1][0] * r0) / det;

        let current = norm((r0, r1));
        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cc = c - lambda * step_c;
            let qq = q0 - lambda * step_q;
            if qq.abs() < T::one() {
                match residuals(cc, qq, g, steps) {
                    Ok((a, b, t)) if norm((a, b)) < current => {
                        accepted = Some((cc, qq, a, b, t));
                        break;
                    }
                    Ok(_) => {}
                    Err(Error::SlopeSaturation { .. }) => saturations += 1,
                    Err(e) => return Err(e),
                }
            } else {
                saturations += 1;
            }
            lambda *= T::lit(0.5);
        }
        match accepted {
            Some((cc, qq, a, b, t)) => {
                c = cc;
                q0 = qq;
                r0 = a;
                r1 = b;
                traj = t;
            }
            None if saturations > 0 => {
                return Err(Error::NoClassicalWave(format!(
                    "every damped Newton trial saturated or failed to reduce the residual \
                     ({saturations} saturations) at c = {c}, q0 = {q0}"
                )))
            }
            None => {
                return Err(Error::NotConverged {
                    iterations,
                    gap: current.to_f64_lossy(),
                })
            }
        }
    }

    let grid = PeriodicGrid::new(1, n)?;
    let stride = steps / n;
    let mut psi: Vec<T> = (0..n).map(|i| traj.psi[i * stride]).collect();
    let top = psi.iter().copied().fold(T::neg_infinity(), T::max);
    psi.iter_mut().for_each(|v| *v -= top);
    let slope = (0..n).map(|i| traj.q[i * stride]).collect();
    Ok(OracleResult {
        c,
        q0,
        residual_periodicity: r0,
        residual_mean_slope: r1,
        profile: ScalarField::new(grid, psi)?,
        slope,
        newton_iterations: iterations,
    })
}
