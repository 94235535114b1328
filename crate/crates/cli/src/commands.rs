//! The five subcommands. Each writes its artifacts into the output directory
//! and returns a status that maps onto the process exit code.

use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use wavelab_core::conditions::{check_all, ConditionReport};
use wavelab_core::flow::{
    check_log_bound, check_lower_bound, evolve, EvolutionParams, EvolutionTrace,
};
use wavelab_core::forcing::Forcing;
use wavelab_core::grid::{PeriodicGrid, ScalarField};
use wavelab_core::shooting::{solve_classical_wave_1d_with, OracleOptions, OracleResult};
use wavelab_core::variational::{
    extract_profile, support_boundary_zeros, wave_from_profile, wave_speed_with, BoundaryReport,
    SpeedResult, WaveSolution,
};
use wavelab_core::Error;

use crate::artifacts::{self, write_field, write_json, write_table};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const CHECK_JSON: &str = "check.json";
pub const SPEED_JSON: &str = "speed.json";
pub const MINIMIZER_CSV: &str = "minimizer.csv";
pub const TRACE_CSV: &str = "trace.csv";
pub const EVOLVE_JSON: &str = "evolve.json";
pub const ORACLE_JSON: &str = "oracle.json";
pub const ORACLE_PROFILE_CSV: &str = "oracle_profile.csv";
pub const CROSSCHECK_JSON: &str = "crosscheck.json";

/// Maps to exit codes 0 and 2; errors map to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    pub summary: String,
    pub report: Value,
}

impl Outcome {
    fn new(status: Status, summary: String, report: Value) -> Self {
        Self {
            status,
            summary,
            report,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Flags {
    pub skip_oracle: bool,
}

struct Setup {
    grid: PeriodicGrid,
    forcing: Forcing<f64>,
}

fn setup(cfg: &RunConfig) -> CliResult<Setup> {
    Ok(Setup {
        grid: cfg.grid()?,
        forcing: cfg.forcing()?,
    })
}

fn condition_json(r: &ConditionReport<f64>) -> Value {
    let witness = r.gcondition.witness.as_ref().map(|w| {
        json!({
            "nodes": w.set.count(),
            "measure": w.set.measure::<f64>(),
            "integral": w.integral,
            "perimeter": w.perimeter,
            "level": w.level,
        })
    });
    let c = &r.classical;
    json!({
        "stats": {
            "mean": r.stats.mean,
            "min": r.stats.min,
            "max": r.stats.max,
            "oscillation": r.stats.oscillation,
            "sup_grad": r.stats.sup_grad,
            "resolution": r.stats.resolution,
        },
        "gcondition": {
            "witness": witness,
            "best_margin": r.gcondition.best_margin,
            "best_subset_margin": r.gcondition.best_subset_margin,
            "candidates": r.gcondition.candidates,
        },
        "classical": {
            "hypothesis_holds": c.hypothesis_holds,
            "min": c.min,
            "max": c.max,
            "oscillation": c.oscillation,
            "c_n": c.c_n,
            "threshold": c.threshold,
            "oscillation_threshold": c.oscillation_threshold,
            "branches": c.branches,
            "verdict": c.verdict,
        },
        "ls": {
            "holds": r.ls.holds,
            "constant_sign": r.ls.constant_sign,
            "theta": r.ls.theta,
            "margin_at_max_theta": r.ls.margin_at_max_theta,
        },
        "cls": r.cls.as_ref().map(|x| json!({ "holds": x.holds, "gap": x.gap })),
        "stationary": r.stationary.as_ref().map(|x| json!({
            "plausible": x.plausible,
            "best_ratio": x.best_ratio,
            "candidates": x.candidates,
        })),
        "isoperimetric_constant": r.isoperimetric.value,
        "existence_verified": r.existence_verified(),
    })
}

pub fn cmd_check(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let report = check_all(&s.forcing, &s.grid)?;
    let mut value = condition_json(&report);
    value["command"] = json!("check");
    write_json(&out.join(CHECK_JSON), &value)?;
    let verified = report.existence_verified();
    let summary = format!(
        "existence hypothesis {}; classical branches {:?}",
        if verified { "verified" } else { "inconclusive" },
        report.classical.branches
    );
    let status = if verified {
        Status::Pass
    } else {
        Status::Inconclusive
    };
    Ok(Outcome::new(status, summary, value))
}

fn refusal(command: &str, out: &Path, file: &str) -> CliResult<Outcome> {
    let value = json!({
        "command": command,
        "refused": true,
        "reason": Error::HypothesisNotVerified.to_string(),
    });
    write_json(&out.join(file), &value)?;
    Ok(Outcome::new(
        Status::Inconclusive,
        "refused: no witness for the existence hypothesis".into(),
        value,
    ))
}

fn speed_json(r: &SpeedResult<f64>) -> Value {
    json!({
        "speed": r.speed,
        "bracket": [r.bracket.0, r.bracket.1],
        "solves": r.solves,
        "iterations": r.iterations,
        "sample": {
            "c": r.sample.c,
            "mu": r.sample.mu,
            "mu_lower": r.sample.mu_lower,
            "solver_gap": r.sample.solver_gap,
            "iterations": r.sample.iterations,
            "minimizer": MINIMIZER_CSV,
        },
    })
}

/// `Ok(None)` when the speed computation is refused.
fn compute_speed(cfg: &RunConfig, s: &Setup) -> CliResult<Option<SpeedResult<f64>>> {
    match wave_speed_with(&s.forcing, &s.grid, &cfg.speed_options()) {
        Ok(r) => Ok(Some(r)),
        Err(Error::HypothesisNotVerified) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_speed(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let Some(r) = compute_speed(cfg, &s)? else {
        return refusal("speed", out, SPEED_JSON);
    };
    write_field(&out.join(MINIMIZER_CSV), &r.sample.minimizer, "Psi")?;
    let mut value = speed_json(&r);
    value["command"] = json!("speed");
    write_json(&out.join(SPEED_JSON), &value)?;
    Ok(Outcome::new(
        Status::Pass,
        format!("wave speed {:.10}", r.speed),
        value,
    ))
}

fn boundary(sol: &WaveSolution<f64>, g: &Forcing<f64>) -> CliResult<Option<BoundaryReport<f64>>> {
    if sol.profile.grid().dimension() == 1 {
        Ok(Some(support_boundary_zeros(sol, g)?))
    } else {
        Ok(None)
    }
}

/// Speed result, wave and the saved `wave.json` header.
type SolvedWave = (SpeedResult<f64>, WaveSolution<f64>, Value);

fn solve_wave(cfg: &RunConfig, s: &Setup, out: &Path) -> CliResult<Option<SolvedWave>> {
    let Some(r) = compute_speed(cfg, s)? else {
        return Ok(None);
    };
    let sol = extract_profile(&r.sample, &s.forcing, r.speed, cfg.threshold())?;
    let b = boundary(&sol, &s.forcing)?;
    let header = artifacts::save_wave(out, &sol, b.as_ref())?;
    Ok(Some((r, sol, header)))
}

pub fn cmd_wave(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    if let Some(path) = &cfg.command.verify {
        return verify_wave(cfg, &s, path, out);
    }
    let Some((_, sol, header)) = solve_wave(cfg, &s, out)? else {
        return refusal("wave", out, artifacts::WAVE_JSON);
    };
    let summary = format!(
        "speed {:.10}, support {}/{} nodes, residual {:.2e}, perimeter gap {:.2e}",
        sol.speed,
        sol.support.count(),
        s.grid.node_count(),
        sol.profile_residual,
        sol.perimeter_gap
    );
    Ok(Outcome::new(Status::Pass, summary, header))
}

/// Reloads a stored wave, recomputes its diagnostics and compares them with
/// the stored header bit for bit.
fn verify_wave(cfg: &RunConfig, s: &Setup, path: &Path, out: &Path) -> CliResult<Outcome> {
    let stored = artifacts::load_wave(path)?;
    let stored_grid = *stored.profile.grid();
    if stored_grid.dimension() != s.grid.dimension() {
        return Err(CliError::DimensionMismatch {
            what: path.display().to_string(),
            expected: s.grid.dimension(),
            got: stored_grid.dimension(),
        });
    }
    if stored_grid != s.grid {
        return Err(CliError::Config(format!(
            "{} has resolution {}, config has {}",
            path.display(),
            stored_grid.resolution(),
            cfg.resolution
        )));
    }
    let sol = wave_from_profile(stored.profile, &s.forcing, stored.speed, stored.threshold)?;
    let residual = stored.header["profile_residual"].as_f64();
    let gap = stored.header["perimeter_gap"].as_f64();
    let same = |a: Option<f64>, b: f64| a.is_some_and(|a| a.to_bits() == b.to_bits());
    let stable = same(residual, sol.profile_residual) && same(gap, sol.perimeter_gap);
    let value = json!({
        "command": "wave",
        "verified": path.display().to_string(),
        "profile_residual": sol.profile_residual,
        "perimeter_gap": sol.perimeter_gap,
        "stored_profile_residual": residual,
        "stored_perimeter_gap": gap,
        "bit_stable": stable,
    });
    write_json(&out.join("verify.json"), &value)?;
    let summary = format!(
        "reloaded wave: residual {:.2e}, perimeter gap {:.2e}, {}",
        sol.profile_residual,
        sol.perimeter_gap,
        if stable {
            "bit-stable"
        } else {
            "diagnostics changed"
        }
    );
    let status = if stable {
        Status::Pass
    } else {
        Status::Inconclusive
    };
    Ok(Outcome::new(status, summary, value))
}

fn initial_datum(cfg: &RunConfig, grid: PeriodicGrid) -> ScalarField<f64> {
    let amplitude = cfg.command.initial_amplitude.unwrap_or(0.0);
    if amplitude == 0.0 {
        return ScalarField::zeros(grid);
    }
    let mut rng = StdRng::seed_from_u64(cfg.command.seed.unwrap_or(0));
    let values = (0..grid.node_count())
        .map(|_| amplitude * rng.random_range(-1.0..=1.0))
        .collect();
    ScalarField::new(grid, values).expect("finite random values")
}

fn run_evolution(
    cfg: &RunConfig,
    s: &Setup,
    c: f64,
    u0: &ScalarField<f64>,
    out: &Path,
) -> CliResult<EvolutionTrace<f64>> {
    let mut params = EvolutionParams::new(c, cfg.final_time());
    params.cfl_safety = cfg.cfl_safety();
    params.snapshot_stride = cfg.snapshot_stride();
    params.scheme = cfg.scheme();
    let trace = evolve(u0, &s.forcing, &params)?;
    let rows = (0..trace.len()).map(|k| {
        vec![
            trace.times[k],
            trace.max_drift[k],
            trace.lyapunov[k],
            trace.wt_sup[k],
        ]
    });
    write_table(&out.join(TRACE_CSV), &["t", "M", "F_c", "wt_sup"], rows)?;
    Ok(trace)
}

/// Worst relative increase of the Lyapunov functional between samples and
/// its minimum; `None` when it is not defined (`c <= 0`).
fn lyapunov_summary(trace: &EvolutionTrace<f64>) -> Option<(f64, f64)> {
    if trace.lyapunov.iter().any(|f| f.is_nan()) {
        return None;
    }
    let rise = trace
        .lyapunov
        .windows(2)
        .map(|w| (w[1] - w[0]) / (1.0 + w[1].abs()))
        .fold(f64::NEG_INFINITY, f64::max);
    let min = trace.lyapunov.iter().copied().fold(f64::INFINITY, f64::min);
    Some((rise, min))
}

pub fn cmd_evolve(cfg: &RunConfig, out: &Path) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let c = match cfg.command.speed {
        Some(c) => c,
        None => match compute_speed(cfg, &s)? {
            Some(r) => r.speed,
            None => return refusal("evolve", out, EVOLVE_JSON),
        },
    };
    let u0 = initial_datum(cfg, s.grid);
    let trace = run_evolution(cfg, &s, c, &u0, out)?;
    let log = check_log_bound(&trace, c).ok();
    let lyap = lyapunov_summary(&trace);
    let value = json!({
        "command": "evolve",
        "speed": c,
        "final_time": cfg.final_time(),
        "scheme": format!("{:?}", cfg.scheme()).to_lowercase(),
        "dt": trace.dt,
        "steps": trace.steps,
        "samples": trace.len(),
        "final_max_drift": trace.max_drift.last(),
        "lyapunov": lyap.map(|(rise, min)| json!({ "worst_relative_rise": rise, "min": min })),
        "log_bound": log.as_ref().map(|l| json!({ "sup_excess": l.sup_excess, "lower_margin": l.lower_margin })),
        "trace": TRACE_CSV,
    });
    write_json(&out.join(EVOLVE_JSON), &value)?;
    let summary = format!(
        "evolved to t = {} in {} steps, M(T) = {:.6}",
        cfg.final_time(),
        trace.steps,
        trace.max_drift.last().copied().unwrap_or(f64::NAN)
    );
    Ok(Outcome::new(Status::Pass, summary, value))
}

/// Half the oscillation of `a - b`, i.e. the sup distance after the best
/// constant shift.
pub fn distance_mod_constants(a: &ScalarField<f64>, b: &ScalarField<f64>) -> f64 {
    let (lo, hi) = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| x - y)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        });
    (hi - lo) / 2.0
}

/// Tolerances of the cross-check suites.
pub mod tolerance {
    pub const SPEED: f64 = 1e-2;
    pub const PROFILE: f64 = 2e-2;
    pub const LYAPUNOV_RISE: f64 = 1e-8;
    pub const LYAPUNOV_FLOOR: f64 = -1e-6;
    pub const COMPARISON_SLACK: f64 = 1e-4;
    pub const CONVERGENCE: f64 = 5e-2;
    pub const PERIMETER: f64 = 5e-2;
    /// Support endpoints within this many grid spacings of a zero of `g`.
    pub const ENDPOINT_SPACINGS: f64 = 2.0;
}

#[derive(Debug, Clone)]
struct Suite {
    name: &'static str,
    pass: bool,
    measured: f64,
    tolerance: f64,
}

impl Suite {
    fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Self {
        Self {
            name,
            pass: measured <= tolerance,
            measured,
            tolerance,
        }
    }

    fn json(&self) -> Value {
        json!({
            "name": self.name,
            "pass": self.pass,
            "measured": self.measured,
            "tolerance": self.tolerance,
        })
    }
}

fn run_oracle(s: &Setup, out: &Path) -> CliResult<Result<OracleResult<f64>, String>> {
    let n = s.grid.resolution();
    let steps = n * 8192usize.div_ceil(n);
    let opts = OracleOptions {
        steps,
        profile_resolution: n,
        ..OracleOptions::default()
    };
    match solve_classical_wave_1d_with(&s.forcing, &opts) {
        Ok(o) => {
            write_field(&out.join(ORACLE_PROFILE_CSV), &o.profile, "psi")?;
            write_json(
                &out.join(ORACLE_JSON),
                &json!({
                    "classical": true,
                    "speed": o.c,
                    "q0": o.q0,
                    "residual_periodicity": o.residual_periodicity,
                    "residual_mean_slope": o.residual_mean_slope,
                    "newton_iterations": o.newton_iterations,
                    "profile": ORACLE_PROFILE_CSV,
                }),
            )?;
            Ok(Ok(o))
        }
        Err(e @ Error::NoClassicalWave(_)) => {
            let reason = e.to_string();
            write_json(
                &out.join(ORACLE_JSON),
                &json!({ "classical": false, "reason": reason }),
            )?;
            Ok(Err(reason))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn cmd_crosscheck(cfg: &RunConfig, out: &Path, flags: Flags) -> CliResult<Outcome> {
    let s = setup(cfg)?;
    let conditions = check_all(&s.forcing, &s.grid)?;
    write_json(&out.join(CHECK_JSON), &condition_json(&conditions))?;
    let Some((speed, sol, _)) = solve_wave(cfg, &s, out)? else {
        return refusal("crosscheck", out, CROSSCHECK_JSON);
    };
    let c_bar = speed.speed;
    let classical_support = sol.support.is_full();
    let mut suites = Vec::new();

    let mut c_oracle = None;
    let mut oracle_note = Value::Null;
    let mut profile_distance = None;
    if s.grid.dimension() == 1 && !flags.skip_oracle {
        match run_oracle(&s, out)? {
            Ok(o) => {
                c_oracle = Some(o.c);
                suites.push(Suite::at_most(
                    "oracle_speed",
                    (c_bar - o.c).abs(),
                    tolerance::SPEED,
                ));
                let d = if classical_support {
                    distance_mod_constants(&sol.profile, &o.profile)
                } else {
                    f64::INFINITY
                };
                profile_distance = Some(d);
                suites.push(Suite::at_most("oracle_profile", d, tolerance::PROFILE));
            }
            Err(reason) => {
                oracle_note = json!(reason);
                // a classical profile contradicts the oracle's saturation
                suites.push(Suite {
                    name: "regime_consistency",
                    pass: !classical_support,
                    measured: sol.support.measure::<f64>(),
                    tolerance: 1.0,
                });
            }
        }
    }

    if !classical_support {
        suites.push(Suite::at_most(
            "perimeter_identity",
            sol.perimeter_gap,
            tolerance::PERIMETER,
        ));
        if let Some(BoundaryReport::Checked { max_distance, .. }) = boundary(&sol, &s.forcing)? {
            let h = 1.0 / s.grid.resolution() as f64;
            suites.push(Suite::at_most(
                "support_endpoints",
                max_distance,
                tolerance::ENDPOINT_SPACINGS * h,
            ));
        }
    }

    let u0 = initial_datum(cfg, s.grid);
    let trace = run_evolution(cfg, &s, c_bar, &u0, out)?;
    if let Some((rise, min)) = lyapunov_summary(&trace) {
        suites.push(Suite::at_most(
            "lyapunov_decrease",
            rise,
            tolerance::LYAPUNOV_RISE,
        ));
        suites.push(Suite::at_most(
            "lyapunov_floor",
            -min,
            -tolerance::LYAPUNOV_FLOOR,
        ));
    }
    let cmp = check_lower_bound(&trace, &sol.profile, &u0, tolerance::COMPARISON_SLACK)?;
    suites.push(Suite::at_most("comparison_min", cmp.m_violation, 0.0));
    suites.push(Suite::at_most("comparison_max", cmp.big_m_violation, 0.0));
    let terminal = distance_mod_constants(trace.final_field(), &sol.profile);
    if classical_support {
        suites.push(Suite::at_most(
            "convergence",
            terminal,
            tolerance::CONVERGENCE,
        ));
    } else {
        let log = check_log_bound(&trace, c_bar)?;
        suites.push(Suite {
            name: "log_bound",
            pass: log.bounded(),
            measured: log.sup_excess,
            tolerance: f64::INFINITY,
        });
    }

    let all_pass = suites.iter().all(|x| x.pass);
    let value = json!({
        "command": "crosscheck",
        "c_variational": c_bar,
        "c_oracle": c_oracle,
        "delta_c": c_oracle.map(|c| (c - c_bar).abs()),
        "oracle_skipped": flags.skip_oracle || s.grid.dimension() != 1,
        "oracle_note": oracle_note,
        "profile_distance": profile_distance,
        "terminal_distance": if classical_support { json!(terminal) } else { Value::Null },
        "support_full": classical_support,
        "suites": suites.iter().map(Suite::json).collect::<Vec<_>>(),
        "pass": all_pass,
        "artifacts": {
            "conditions": CHECK_JSON,
            "wave": artifacts::WAVE_JSON,
            "profile": artifacts::PROFILE_CSV,
            "trace": TRACE_CSV,
            "oracle": if c_oracle.is_some() || !oracle_note.is_null() { json!(ORACLE_JSON) } else { Value::Null },
        },
    });
    write_json(&out.join(CROSSCHECK_JSON), &value)?;
    let failed: Vec<&str> = suites.iter().filter(|x| !x.pass).map(|x| x.name).collect();
    let summary = if all_pass {
        format!("all {} suites pass, c = {c_bar:.10}", suites.len())
    } else {
        format!("failed suites: {}", failed.join(", "))
    };
    let status = if all_pass {
        Status::Pass
    } else {
        Status::Inconclusive
    };
    Ok(Outcome::new(status, summary, value))
}
