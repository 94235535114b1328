//! Checkers for the hypotheses on the forcing that guarantee generalized or
//! classical traveling waves, or stationary solutions.
//!
//! Conditions quantified over all sets of finite perimeter are only searched
//! over a finite candidate family: the whole torus plus the discrete
//! superlevel sets of the sampled forcing (and of its negative). A negative
//! answer from these checkers means "no witness in the family", nothing more.

use crate::error::{Error, Result};
use crate::forcing::{sample, stats, Forcing, ForcingStats};
use crate::grid::{perimeter_indicator, PeriodicGrid, ScalarField, SupportMask};
use crate::real::Real;

/// Isoperimetric constant `C_n` of the flat torus, valid for sets of
/// measure at most one half.
///
/// `C_1 = 2`: a proper subset of the circle has at least two endpoints.
///
/// `C_2 = 2 sqrt 2`: the smaller of the two competitor families on the torus,
/// minimising `Per / |E|^(1/2)` over `|E| <= 1/2`:
/// * discs of area `a`: `Per = 2 sqrt(pi a)`, ratio `2 sqrt(pi) ~ 3.545`
///   independent of `a`;
/// * strips of area `a`: `Per = 2`, ratio `2 / sqrt(a)`, smallest at `a = 1/2`
///   where it equals `2 sqrt 2 ~ 2.828`.
///
/// Any admissible constant is at most this value, so checks built on it are
/// conservative with respect to smaller constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoperimetricConstant<T> {
    pub dimension: usize,
    pub value: T,
}

pub fn isoperimetric_constant<T: Real>(dimension: usize) -> Result<IsoperimetricConstant<T>> {
    let value = match dimension {
        1 => T::lit(2.0),
        2 => T::lit(2.0) * T::SQRT_2(),
        d => return Err(Error::UnsupportedDimension(d)),
    };
    Ok(IsoperimetricConstant { dimension, value })
}

/// A set `A` in the candidate family with `int_A g > Per(A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GconditionWitness<T> {
    pub set: SupportMask,
    pub integral: T,
    pub perimeter: T,
    /// `None` when the witness is the whole torus, otherwise the level `lambda`
    /// of the superlevel set `{g > lambda}`.
    pub level: Option<T>,
}

/// Result of scanning the family for the existence condition.
#[derive(Debug, Clone, PartialEq)]
pub struct GconditionReport<T> {
    pub witness: Option<GconditionWitness<T>>,
    /// Largest `int_A g - Per(A)` seen over the family, the torus included.
    pub best_margin: T,
    /// Same, over proper nonempty subsets only (`-inf` if none was scanned).
    pub best_subset_margin: T,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalReport<T> {
    /// The proposition assumes a positive mean.
    pub hypothesis_holds: bool,
    pub min: T,
    pub max: T,
    pub oscillation: T,
    pub c_n: T,
    /// `C_n 2^(1/n)`.
    pub threshold: T,
    /// `max g ((max g / C_n)^n - 1)^(-1)` when `max g >= C_n 2^(1/n)`.
    pub oscillation_threshold: Option<T>,
    pub branches: [bool; 4],
    pub verdict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsReport<T> {
    pub holds: bool,
    pub constant_sign: bool,
    /// Smallest `theta` in `{0.01, ..., 0.99}` that satisfies the condition.
    pub theta: Option<T>,
    /// `min_x (theta g^2 - (n-1)^2 |Dg|)` at `theta = 0.99`.
    pub margin_at_max_theta: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClsReport<T> {
    pub holds: bool,
    /// `int g - min g`.
    pub gap: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryReport<T> {
    /// Family-restricted: `sup_A int_A g / Per(A) < 1` over the candidates.
    pub plausible: bool,
    /// The supremum above, i.e. the best `delta` the family allows.
    pub best_ratio: T,
    pub best_set: Option<SupportMask>,
    pub candidates: usize,
}

/// Everything the checkers can say about a forcing at a given resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport<T> {
    pub stats: ForcingStats<T>,
    pub gcondition: GconditionReport<T>,
    pub classical: ClassicalReport<T>,
    pub ls: LsReport<T>,
    /// One-dimensional forcings only.
    pub cls: Option<ClsReport<T>>,
    /// Zero-mean forcings only.
    pub stationary: Option<StationaryReport<T>>,
    pub isoperimetric: IsoperimetricConstant<T>,
}

impl<T: Real> ConditionReport<T> {
    /// Existence hypothesis verified on the family.
    pub fn existence_verified(&self) -> bool {
        self.gcondition.witness.is_some()
    }
}

const MAX_LEVELS: usize = 1024;
const ROUNDOFF_GUARD: f64 = 1e-12;

/// Thresholds `lambda` so that `{g > lambda}` runs over the discrete superlevel
/// sets, sorted from the top down. Every distinct sample is used on small
/// grids; larger grids use evenly spaced order statistics.
fn levels<T: Real>(values: &[T]) -> Vec<T> {
    let mut sorted: Vec<T> = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite samples"));
    sorted.dedup();
    if sorted.len() <= MAX_LEVELS {
        return sorted;
    }
    let step = sorted.len() as f64 / MAX_LEVELS as f64;
    (0..MAX_LEVELS)
        .map(|j| sorted[((j as f64 * step) as usize).min(sorted.len() - 1)])
        .collect()
}

fn superlevel<T: Real>(field: &ScalarField<T>, level: T) -> SupportMask {
    SupportMask::from_fn(*field.grid(), |i| field.values()[i] > level)
}

fn set_integral<T: Real>(g: &ScalarField<T>, set: &SupportMask) -> T {
    let w = g.grid().cell_volume::<T>();
    w * g
        .values()
        .iter()
        .zip(set.as_slice())
        .filter(|(_, &inside)| inside)
        .map(|(&v, _)| v)
        .sum::<T>()
}

/// Searches the candidate family for `A` with `int_A g > Per(A, T^n)`.
/// The whole torus is tried first, then superlevel sets from the top down.
pub fn check_gcondition<T: Real>(
    g: &Forcing<T>,
    grid: &PeriodicGrid,
) -> Result<GconditionReport<T>> {
    let samples = sample(g, grid)?;
    let full = SupportMask::full(*grid);
    // The torus has zero periodic perimeter and its integral is the exact mean.
    let whole = g.mean();
    let mut best_margin = whole;
    let mut best_subset_margin = T::neg_infinity();
    let mut candidates = 1;
    if whole > T::zero() {
        return Ok(GconditionReport {
            witness: Some(GconditionWitness {
                set: full,
                integral: whole,
                perimeter: T::zero(),
                level: None,
            }),
            best_margin,
            best_subset_margin,
            candidates,
        });
    }
    for level in levels(samples.values()) {
        let set = superlevel(&samples, level);
        if set.is_empty() || set.is_full() {
            continue;
        }
        candidates += 1;
        let integral = set_integral(&samples, &set);
        let perimeter = perimeter_indicator::<T>(&set);
        let margin = integral - perimeter;
        best_margin = best_margin.max(margin);
        best_subset_margin = best_subset_margin.max(margin);
        // guard against quadrature roundoff deciding the sign
        if margin > T::lit(ROUNDOFF_GUARD) * (T::one() + perimeter) {
            return Ok(GconditionReport {
                witness: Some(GconditionWitness {
                    set,
                    integral,
                    perimeter,
                    level: Some(level),
                }),
                best_margin,
                best_subset_margin,
                candidates,
            });
        }
    }
    Ok(GconditionReport {
        witness: None,
        best_margin,
        best_subset_margin,
        candidates,
    })
}

/// Evaluates the four sufficient conditions for a classical (globally
/// defined) traveling wave, using refined extrema of `g`.
pub fn check_classical_conditions<T: Real>(
    g: &Forcing<T>,
    grid: &PeriodicGrid,
    c: &IsoperimetricConstant<T>,
) -> Result<ClassicalReport<T>> {
    if c.dimension != g.dimension() {
        return Err(Error::DimensionMismatch {
            expected: g.dimension(),
            got: c.dimension,
        });
    }
    let s = stats(g, grid)?;
    Ok(classical_from_stats(&s, g.dimension(), c))
}

fn classical_from_stats<T: Real>(
    s: &ForcingStats<T>,
    dimension: usize,
    c: &IsoperimetricConstant<T>,
) -> ClassicalReport<T> {
    let n = dimension as i32;
    let cn = c.value;
    let threshold = cn * T::lit(2.0).powf(T::one() / T::from_count(dimension));
    let positive = s.min > T::zero();
    let osc = s.max - s.min;

    let b1 = s.min <= T::zero() && osc < threshold;
    let b2 = positive && s.max < threshold;
    let oscillation_threshold = if s.max >= threshold {
        Some(s.max / ((s.max / cn).powi(n) - T::one()))
    } else {
        None
    };
    let b3 = positive && s.max >= threshold && oscillation_threshold.is_some_and(|t| osc < t);
    let b4 = dimension == 1 && positive;
    let branches = [b1, b2, b3, b4];
    let hypothesis_holds = s.mean > T::zero();
    ClassicalReport {
        hypothesis_holds,
        min: s.min,
        max: s.max,
        oscillation: osc,
        c_n: cn,
        threshold,
        oscillation_threshold,
        branches,
        verdict: hypothesis_holds && branches.iter().any(|&b| b),
    }
}

/// Sign condition together with `min (theta g^2 - (n-1)^2 |Dg|) > 0` for some
/// `theta` on the scan `{0.01, 0.02, ..., 0.99}`, evaluated at grid nodes.
pub fn check_ls_condition<T: Real>(g: &Forcing<T>, grid: &PeriodicGrid) -> Result<LsReport<T>> {
    let samples = sample(g, grid)?;
    let n1 = T::from_count(grid.dimension() - 1);
    let weight = n1 * n1;
    let grad: Vec<T> = (0..grid.node_count())
        .map(|i| g.gradient_norm(grid.coords(i)))
        .collect();
    let vals = samples.values();
    let constant_sign = vals.iter().all(|&v| v > T::zero()) || vals.iter().all(|&v| v < T::zero());
    let margin = |theta: T| -> T {
        vals.iter()
            .zip(&grad)
            .map(|(&v, &d)| theta * v * v - weight * d)
            .fold(T::infinity(), T::min)
    };
    let mut theta = None;
    if constant_sign {
        for j in 1..=99 {
            let t = T::from_count(j) / T::lit(100.0);
            if margin(t) > T::zero() {
                theta = Some(t);
                break;
            }
        }
    }
    Ok(LsReport {
        holds: constant_sign && theta.is_some(),
        constant_sign,
        theta,
        margin_at_max_theta: margin(T::lit(0.99)),
    })
}

/// One-dimensional condition `0 <= int g - min g < 2`.
pub fn check_cls_condition<T: Real>(g: &Forcing<T>) -> Result<ClsReport<T>> {
    if g.dimension() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: g.dimension(),
        });
    }
    let s = stats(g, &PeriodicGrid::new(1, 1024)?)?;
    Ok(cls_from_stats(&s))
}

fn cls_from_stats<T: Real>(s: &ForcingStats<T>) -> ClsReport<T> {
    let gap = s.mean - s.min;
    ClsReport {
        holds: gap >= T::zero() && gap < T::lit(2.0),
        gap,
    }
}

/// Family-restricted check of `int_A g < delta Per(A)` with `delta < 1` for
/// zero-mean forcings.
pub fn check_stationary_condition<T: Real>(
    g: &Forcing<T>,
    grid: &PeriodicGrid,
) -> Result<StationaryReport<T>> {
    if g.mean().abs() >= T::lit(1e-10) {
        return Err(Error::NonzeroMean(g.mean().to_f64_lossy()));
    }
    let samples = sample(g, grid)?;
    let negated = samples.map(|v| -v)?;
    let mut best_ratio = T::zero();
    let mut best_set = None;
    let mut candidates = 0;
    // superlevel sets of g, then of -g (sublevel sets of g)
    for field in [&samples, &negated] {
        for level in levels(field.values()) {
            let set = superlevel(field, level);
            if set.is_empty() || set.is_full() {
                continue;
            }
            candidates += 1;
            let per = perimeter_indicator::<T>(&set);
            let integral = set_integral(&samples, &set);
            let ratio = integral / per;
            if ratio > best_ratio {
                best_ratio = ratio;
                best_set = Some(set);
            }
        }
    }
    Ok(StationaryReport {
        plausible: best_ratio < T::one(),
        best_ratio,
        best_set,
        candidates,
    })
}

/// Runs every checker that applies to `g`.
pub fn check_all<T: Real>(g: &Forcing<T>, grid: &PeriodicGrid) -> Result<ConditionReport<T>> {
    let iso = isoperimetric_constant::<T>(g.dimension())?;
    let s = stats(g, grid)?;
    let stationary = if g.mean().abs() < T::lit(1e-10) {
        Some(check_stationary_condition(g, grid)?)
    } else {
        None
    };
    Ok(ConditionReport {
        stats: s,
        gcondition: check_gcondition(g, grid)?,
        classical: classical_from_stats(&s, g.dimension(), &iso),
        ls: check_ls_condition(g, grid)?,
        cls: if g.dimension() == 1 {
            Some(cls_from_stats(&s))
        } else {
            None
        },
        stationary,
        isoperimetric: iso,
    })
}
