//! Subcommand bodies. Each returns whether its assertions held.

use std::sync::Arc;

use kpp_core::diagnostics::{speed_estimate, CrossingSeries};
use kpp_core::experiments::{
    steepness_suite, theorem1_periodic, theorem2_ctp_spreading, theorem3_ctp_profile,
    ExperimentReport, SimulationConfig, Theorem1Config, Theorem2Config, Theorem3Config,
};
use kpp_core::floquet::{default_offsets, degeneracy_exponent};
use kpp_core::fronts::{compute_front, periodicity_residual, tail_fit};
use kpp_core::solver::{
    run, stationary_upper, Observer, SolutionState, Stepper, DEFAULT_STATIONARY_TOL,
};
use kpp_core::KppError;
use serde_json::json;

use crate::config::RunConfig;
use crate::output::Emitter;

/// Central-difference step for the tangency check.
const TANGENCY_STEP: f64 = 1e-4;

#[derive(Debug)]
pub enum Failure {
    /// input rejected before or during the run; exit code 2
    Config(String),
    /// numerical or I/O failure; exit code 1
    Runtime(String),
}

impl From<KppError> for Failure {
    fn from(e: KppError) -> Self {
        match e {
            KppError::InvalidInput(_) => Self::Config(e.to_string()),
            other => Self::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(format!("output: {e}"))
    }
}

type Outcome = Result<bool, Failure>;

fn sim_config(cfg: &RunConfig) -> SimulationConfig {
    SimulationConfig {
        grid: cfg.grid,
        scheme: cfg.scheme,
        t_end: cfg.run.t_end,
        checkpoint_every: cfg.run.checkpoint_dt,
        trace_every: cfg.run.trace_dt,
        datum: cfg.init.datum.clone(),
    }
}

pub fn dispersion(cfg: &RunConfig, out: &mut Emitter) -> Outcome {
    let d = &cfg.resolved.dispersion;
    out.csv(
        "dispersion.csv",
        &["lambda", "mu", "c_of_lambda"],
        d.lambdas
            .iter()
            .zip(&d.mus)
            .zip(&d.speeds)
            .map(|((l, m), c)| vec![*l, *m, *c]),
    )?;
    let fit = degeneracy_exponent(d, &default_offsets());
    let tangency = d.tangency_residual(TANGENCY_STEP)?;
    let mut body = json!({
        "c_star": d.c_star,
        "lambda_star": d.lambda_star,
        "mu_zero": d.mu_zero,
        "tangency_residual": tangency,
    });
    match fit {
        Ok(f) => {
            body["N_fit"] = json!(f.n_fit);
            body["K_fit"] = json!(f.k_fit);
        }
        Err(e) => body["degeneracy_error"] = json!(e.to_string()),
    }
    out.json("dispersion.json", body)?;
    Ok(true)
}

pub fn front(cfg: &RunConfig, out: &mut Emitter) -> Outcome {
    let model = cfg.resolved.model.limiting();
    let d = &cfg.resolved.dispersion;
    let c = cfg.front.c.unwrap_or(d.c_star);
    let f = compute_front(model, c, d, &cfg.front.options, cfg.front.horizon)?;
    let residual = periodicity_residual(&f, model, cfg.front.options.dt_factor)?;
    let z = f.nodes();
    for (j, phase) in f.phases.iter().enumerate() {
        out.csv(
            &format!("front_phase_{j:02}.csv"),
            &["z", "U"],
            z.iter().zip(phase).map(|(z, u)| vec![*z, *u]),
        )?;
    }
    let pass = residual <= cfg.front.options.tol_front * f.sup_p();
    let mut body = json!({
        "c": f.c,
        "c_star": d.c_star,
        "is_minimal": f.is_minimal,
        "T": f.period_time,
        "n_phase": f.n_phase(),
        "lambda": f.lambda,
        "periodicity_residual": residual,
        "convergence_residual": f.convergence_residual,
        "measured_speed": f.measured_speed,
        "sup_p": f.sup_p(),
        "passed": pass,
    });
    match f.default_tail_window().and_then(|w| tail_fit(&f, w)) {
        Ok(t) => {
            body["lambda_fit"] = json!(t.lambda_fit);
            body["B_c"] = json!(t.b_c);
            body["tail_rms_log_residual"] = json!(t.rms_log_residual);
            body["tail_window"] = json!([t.window.0, t.window.1]);
        }
        Err(e) => body["tail_error"] = json!(e.to_string()),
    }
    out.json("front.json", body)?;
    Ok(pass)
}

pub fn simulate(cfg: &RunConfig, out: &mut Emitter) -> Outcome {
    let model = &cfg.resolved.model;
    let grid = cfg.grid.build(cfg.model.period)?;
    let stationary = Arc::new(stationary_upper(model, &grid, DEFAULT_STATIONARY_TOL)?);
    let level = 0.5 * stationary.eval(&grid, 0.0);
    let stepper = Stepper::new(
        grid,
        model,
        cfg.scheme.for_grid(&grid),
        Some(stationary.clone()),
    )?;
    let u0 = cfg.init.datum.build(&grid, &stationary.values)?;
    let mut obs = vec![
        Observer::Snapshots {
            every: cfg.run.snapshot_dt,
        },
        Observer::Trace {
            every: cfg.run.trace_dt,
            level,
        },
    ];
    if !cfg.run.stations.is_empty() {
        obs.push(Observer::Stations {
            positions: cfg.run.stations.clone(),
            level,
        });
    }
    let (last, log) = run(
        SolutionState::new(grid, 0.0, u0)?,
        model,
        &stepper,
        cfg.run.t_end,
        &obs,
    )?;
    let xs = grid.nodes();
    for s in &log.snapshots {
        out.csv(
            &format!("snapshot_t{:012.6}.csv", s.t),
            &["x", "u"],
            xs.iter().zip(&s.u).map(|(x, u)| vec![*x, *u]),
        )?;
    }
    out.csv(
        "observations.csv",
        &["t", "front_pos", "mass"],
        log.trace
            .iter()
            .map(|r| vec![r.t, r.front_pos.unwrap_or(f64::NAN), r.mass]),
    )?;
    if !log.hits.is_empty() {
        out.csv(
            "hits.csv",
            &["position", "time"],
            log.hits
                .iter()
                .map(|h| vec![h.position, h.time.unwrap_or(f64::NAN)]),
        )?;
    }
    let series = CrossingSeries::from_trace(level, &log.trace)?;
    let t_end = cfg.run.t_end;
    let mut body = json!({
        "t_end": last.t,
        "level": level,
        "c_star": cfg.resolved.dispersion.c_star,
        "lambda_star": cfg.resolved.dispersion.lambda_star,
        "final_mass": last.mass(),
        "final_front_pos": series.positions.last().copied(),
        "stationary_residual": stationary.residual,
    });
    match speed_estimate(&series, (0.5 * t_end, t_end)) {
        Ok((c, se)) => {
            body["measured_speed"] = json!(c);
            body["measured_speed_stderr"] = json!(se);
        }
        Err(e) => body["speed_error"] = json!(e.to_string()),
    }
    out.json("simulate.json", body)?;
    Ok(true)
}

fn write_report(name: &str, rep: &ExperimentReport, out: &mut Emitter) -> Outcome {
    for tr in &rep.traces {
        let cols: Vec<&str> = tr.columns.iter().map(String::as_str).collect();
        out.csv(
            &format!("{name}_{}.csv", tr.name),
            &cols,
            tr.rows.iter().cloned(),
        )?;
    }
    let body = json!({
        "scenario": rep.scenario,
        "passed": rep.passed(),
        "asserted": rep.asserted,
        "flags": rep.flags,
        "metrics": rep.metrics,
        "notes": rep.notes,
    });
    out.json(&format!("{name}.json"), body)?;
    Ok(rep.passed())
}

pub fn theorem1(cfg: &RunConfig, out: &mut Emitter) -> Outcome {
    if !cfg.resolved.model.is_periodic() {
        return Err(Failure::Config(
            "theorem1 needs a periodic medium; drop model.perturbation".into(),
        ));
    }
    let tc = Theorem1Config {
        floquet: cfg.floquet.settings(),
        front: cfg.front.options,
        front_horizon: cfg.front.horizon,
        start_from_front: cfg.theorem.start_from_front,
        distance_tol: cfg.theorem.distance_tol.unwrap_or(0.02),
        shift_ratio_tol: cfg.theorem.shift_ratio_tol,
        ..Theorem1Config::new(sim_config(cfg))
    };
    write_report(
        "theorem1",
        &theorem1_periodic(&cfg.resolved.model, &tc)?,
        out,
    )
}

pub fn theorem2(cfg: &RunConfig, out: &mut Emitter) -> Outcome {
    let tc = Theorem2Config {
        sim: sim_config(cfg),
        floquet: cfg.floquet.settings(),
        inner: cfg.theorem.inner,
        outer: cfg.theorem.outer,
        tol: cfg.theorem.spreading_tol,
    };
    write_report(
        "theorem2",
        &theorem2_ctp_spreading(&cfg.resolved.model, &tc)?,
        out,
    )
}

pub fn theorem3(cfg: &RunConfig, out: &mut Emitter) -> Outcome {
    let tc = Theorem3Config {
        floquet: cfg.floquet.settings(),
        front: cfg.front.options,
        front_horizon: cfg.front.horizon,
        alpha: cfg.theorem.alpha,
        distance_tol: cfg.theorem.distance_tol.unwrap_or(0.03),
        speed_tol: cfg.theorem.speed_tol,
        ..Theorem3Config::new(sim_config(cfg))
    };
    write_report(
        "theorem3",
        &theorem3_ctp_profile(&cfg.resolved.model, &tc)?,
        out,
    )
}

pub fn steepness(cfg: &RunConfig, out: &mut Emitter) -> Outcome {
    if !cfg.resolved.model.is_periodic() {
        return Err(Failure::Config(
            "steepness needs a periodic medium; drop model.perturbation".into(),
        ));
    }
    let sc = cfg.steepness.to_config(cfg.scheme);
    write_report(
        "steepness",
        &steepness_suite(&cfg.resolved.model, &sc)?,
        out,
    )
}
