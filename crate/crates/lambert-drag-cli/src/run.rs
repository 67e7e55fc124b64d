//! Command implementations: solve, sweep, diagnose.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use lambert_drag::integrator::{IntegratorConfig, PhasePoint, Trajectory};
use lambert_drag::lambert::{
    continue_to_target, seed_from_rectilinear, solve, solve_direct, ArcDirection, ArcSolution,
    ContinuationTrace, LambertProblem,
};
use lambert_drag::{Error64, FrictionField64, Vec2_64};

use crate::config::{Config, SweepParameter};

/// Command failure carrying the process exit code (2 config, 3 numerical).
pub struct CmdError {
    pub code: u8,
    pub message: String,
}

impl CmdError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: msg.into(),
        }
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: msg.into(),
        }
    }
}

/// 17 significant digits, locale-independent.
fn fmt(x: f64) -> String {
    format!("{:.16e}", x)
}

#[derive(Serialize)]
struct TraceNodeJson {
    lambda: f64,
    v0: [f64; 2],
    residual: f64,
    step: f64,
    newton_iters: usize,
    swept: f64,
}

fn trace_json(trace: &ContinuationTrace<f64>) -> Vec<TraceNodeJson> {
    trace
        .nodes
        .iter()
        .map(|n| TraceNodeJson {
            lambda: n.lambda,
            v0: [n.v0.x, n.v0.y],
            residual: n.residual,
            step: n.step,
            newton_iters: n.newton_iters,
            swept: n.swept,
        })
        .collect()
}

#[derive(Serialize)]
struct ArcJson {
    direction: &'static str,
    rectilinear: bool,
    converged: bool,
    v0: [f64; 2],
    residual: f64,
    swept_angle: f64,
    sign_c: i8,
    energy_start: f64,
    energy_end: f64,
    newton_total: usize,
    near_ray: bool,
    rectilinear_projected: bool,
    trace: Vec<TraceNodeJson>,
}

#[derive(Serialize)]
struct FailureJson {
    direction: &'static str,
    converged: bool,
    error: String,
    trace: Vec<TraceNodeJson>,
}

#[derive(Serialize)]
struct SummaryJson {
    mode: &'static str,
    arcs: Vec<ArcJson>,
    failures: Vec<FailureJson>,
    near_ray: bool,
}

fn arc_json(arc: &ArcSolution<f64>) -> ArcJson {
    let (h_start, h_end) = arc.energy_start_end();
    let c0 = arc.c0();
    ArcJson {
        direction: arc.direction.label(),
        rectilinear: arc.direction == ArcDirection::Rectilinear,
        converged: true,
        v0: [arc.v0.x, arc.v0.y],
        residual: arc.residual_position,
        swept_angle: arc.swept,
        sign_c: if arc.direction == ArcDirection::Rectilinear {
            0
        } else if c0 > 0.0 {
            1
        } else {
            -1
        },
        energy_start: h_start,
        energy_end: h_end,
        newton_total: arc.trace.newton_total(),
        near_ray: arc.near_ray,
        rectilinear_projected: arc.rectilinear_projected,
        trace: trace_json(&arc.trace),
    }
}

fn failure_json(direction: ArcDirection, error: &Error64) -> FailureJson {
    let trace = match error {
        Error64::ContinuationStalled { trace, .. } => trace_json(trace),
        _ => Vec::new(),
    };
    FailureJson {
        direction: direction.label(),
        converged: false,
        error: error.to_string(),
        trace,
    }
}

const TRAJECTORY_HEADER: &str = "t,x1,x2,xdot1,xdot2,r,theta_lift,c,h,p";

fn csv_row(p: &PhasePoint<f64>) -> String {
    let cols = [
        p.state.t,
        p.state.x.x,
        p.state.x.y,
        p.state.v.x,
        p.state.v.y,
        p.state.r(),
        p.theta,
        p.c,
        p.h,
        p.p(),
    ];
    cols.iter().map(|&x| fmt(x)).collect::<Vec<_>>().join(",")
}

fn write_trajectory_csv(
    path: &Path,
    traj: &Trajectory<f64>,
    samples: usize,
) -> Result<(), CmdError> {
    let mut out = String::with_capacity(samples * 200);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for p in traj.sample_uniform(samples) {
        let _ = writeln!(out, "{}", csv_row(&p));
    }
    std::fs::write(path, out)
        .map_err(|e| CmdError::solver(format!("cannot write {}: {}", path.display(), e)))
}

fn arc_file_stem(arc: &ArcSolution<f64>) -> String {
    if arc.rectilinear_projected {
        "rectilinear_projected".to_string()
    } else {
        arc.direction.label().to_string()
    }
}

fn trace_tail(trace: &[TraceNodeJson]) -> String {
    let tail = trace.iter().rev().take(5).collect::<Vec<_>>();
    let mut s = String::new();
    for n in tail.iter().rev() {
        let _ = writeln!(
            s,
            "  lambda={:.6} v0=({:.6}, {:.6}) residual={:.3e} step={:.3e} newton={} swept={:.6}",
            n.lambda, n.v0[0], n.v0[1], n.residual, n.step, n.newton_iters, n.swept
        );
    }
    s
}

pub fn run_solve(config: &Config, out_dir: &Path) -> Result<u8, CmdError> {
    config.validate().map_err(CmdError::config)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CmdError::config(format!("cannot create {}: {}", out_dir.display(), e)))?;
    let field: FrictionField64 = config
        .problem
        .field
        .build()
        .map_err(|e| CmdError::config(e.to_string()))?;
    let icfg: IntegratorConfig<f64> = config.integrator.build();
    let problem = LambertProblem::new(
        Vec2_64::new(config.problem.a[0], config.problem.a[1]),
        Vec2_64::new(config.problem.b[0], config.problem.b[1]),
        config.problem.t,
        &field,
        config.problem.direction.into(),
    )
    .map_err(|e| CmdError::config(e.to_string()))?;

    if config.seed_only {
        let seed = seed_from_rectilinear(&problem, &icfg)
            .map_err(|e| CmdError::solver(format!("seed solve failed: {}", e)))?;
        let summary = serde_json::json!({
            "mode": "seed_only",
            "v0": [seed.x, seed.y],
        });
        let path = out_dir.join("summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(&summary).unwrap())
            .map_err(|e| CmdError::solver(format!("cannot write {}: {}", path.display(), e)))?;
        println!("seed v0 = ({}, {})", fmt(seed.x), fmt(seed.y));
        return Ok(0);
    }

    let outcome = solve(&problem, &icfg).map_err(|e| CmdError::config(e.to_string()))?;

    let mut summary = SummaryJson {
        mode: "solve",
        arcs: outcome.arcs.iter().map(arc_json).collect(),
        failures: outcome
            .failures
            .iter()
            .map(|f| failure_json(f.direction, &f.error))
            .collect(),
        near_ray: outcome.near_ray,
    };
    summary.arcs.sort_by_key(|a| a.direction);

    let path = out_dir.join("summary.json");
    std::fs::write(&path, serde_json::to_string_pretty(&summary).unwrap())
        .map_err(|e| CmdError::solver(format!("cannot write {}: {}", path.display(), e)))?;

    if config.output.trajectory_csv {
        for arc in &outcome.arcs {
            let name = format!("trajectory_{}.csv", arc_file_stem(arc));
            write_trajectory_csv(&out_dir.join(name), &arc.trajectory, config.output.samples)?;
        }
    }

    for arc in &summary.arcs {
        println!(
            "arc {}: v0=({}, {}) residual={:.3e} swept={:.9} sign_c={}",
            arc.direction,
            fmt(arc.v0[0]),
            fmt(arc.v0[1]),
            arc.residual,
            arc.swept_angle,
            arc.sign_c
        );
    }
    for f in &summary.failures {
        eprintln!("direction {} failed: {}", f.direction, f.error);
        if !f.trace.is_empty() {
            eprintln!("continuation trace tail:\n{}", trace_tail(&f.trace));
        }
    }

    if summary.failures.is_empty() && !summary.arcs.is_empty() {
        Ok(0)
    } else {
        Err(CmdError::solver("one or more requested arcs failed"))
    }
}

const SWEEP_HEADER: &str =
    "sweep_param,direction,converged,v0x,v0y,residual,swept_angle,newton_total,near_ray";

pub fn run_sweep(config: &Config, out_dir: &Path) -> Result<u8, CmdError> {
    config.validate().map_err(CmdError::config)?;
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CmdError::config("sweep command needs a sweep section"))?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CmdError::config(format!("cannot create {}: {}", out_dir.display(), e)))?;
    let field: FrictionField64 = config
        .problem
        .field
        .build()
        .map_err(|e| CmdError::config(e.to_string()))?;
    let icfg = config.integrator.build();

    let b = Vec2_64::new(config.problem.b[0], config.problem.b[1]);
    let a0 = Vec2_64::new(config.problem.a[0], config.problem.a[1]);
    let directions: Vec<ArcDirection> = match config.problem.direction.into() {
        lambert_drag::lambert::Direction::Ccw => vec![ArcDirection::Ccw],
        lambert_drag::lambert::Direction::Cw => vec![ArcDirection::Cw],
        lambert_drag::lambert::Direction::Auto => vec![ArcDirection::Ccw, ArcDirection::Cw],
    };

    let grid: Vec<f64> = if sweep.count == 1 {
        vec![sweep.start]
    } else {
        (0..sweep.count)
            .map(|i| {
                sweep.start + (sweep.stop - sweep.start) * i as f64 / (sweep.count as f64 - 1.0)
            })
            .collect()
    };

    let mut rows = String::from(SWEEP_HEADER);
    rows.push('\n');
    let mut warm: Vec<Option<Vec2_64>> = vec![None; directions.len()];
    let mut n_converged = 0usize;

    for &param in &grid {
        let (a, t) = match sweep.parameter {
            SweepParameter::FlightTime => (a0, param),
            SweepParameter::EndpointAngle => {
                let theta_b = b.angle();
                (
                    Vec2_64::from_angle(theta_b + param) * a0.norm(),
                    config.problem.t,
                )
            }
        };
        let problem = match LambertProblem::new(a, b, t, &field, config.problem.direction.into()) {
            Ok(p) => p,
            Err(e) => return Err(CmdError::config(e.to_string())),
        };
        let angle = lambert_drag::vec2::wrap_angle(b.angle() - a.angle()).abs();
        let near_ray = a.dot(b) > 0.0 && angle < 1e-6;

        for (k, &dir) in directions.iter().enumerate() {
            let warm_attempt = warm[k]
                .ok_or(Error64::NonConvergence(0))
                .and_then(|v| solve_direct(&problem, dir, v, &icfg));
            let result = warm_attempt.or_else(|_| {
                seed_from_rectilinear(&problem, &icfg)
                    .and_then(|seed| continue_to_target(&problem, seed, dir, &icfg))
            });
            match result {
                Ok(arc) => {
                    n_converged += 1;
                    warm[k] = Some(arc.v0);
                    let _ = writeln!(
                        rows,
                        "{},{},true,{},{},{},{},{},{}",
                        fmt(param),
                        dir.label(),
                        fmt(arc.v0.x),
                        fmt(arc.v0.y),
                        fmt(arc.residual_position),
                        fmt(arc.swept),
                        arc.trace.newton_total(),
                        near_ray
                    );
                }
                Err(err) => {
                    warm[k] = None;
                    let _ = writeln!(
                        rows,
                        "{},{},false,nan,nan,nan,nan,0,{} # {}",
                        fmt(param),
                        dir.label(),
                        near_ray,
                        err
                    );
                }
            }
        }
    }

    let path = out_dir.join("sweep.csv");
    std::fs::write(&path, rows)
        .map_err(|e| CmdError::solver(format!("cannot write {}: {}", path.display(), e)))?;
    println!(
        "sweep: {}/{} rows converged -> {}",
        n_converged,
        grid.len() * directions.len(),
        path.display()
    );
    if n_converged > 0 {
        Ok(0)
    } else {
        Err(CmdError::solver("no sweep row converged"))
    }
}

pub fn run_diagnose(config: &Config, trajectory: Option<&Path>) -> Result<u8, CmdError> {
    config.validate().map_err(CmdError::config)?;
    let field: FrictionField64 = config
        .problem
        .field
        .build()
        .map_err(|e| CmdError::config(e.to_string()))?;
    println!("d_star = {}", fmt(field.d_star()));
    let rep = field.check_gradient_decay(1e-6);
    println!(
        "sqrt(r)|grad D| over [1e-6, 1]: max = {}, value at r_min = {}",
        fmt(rep.max_over_grid),
        fmt(rep.limit_estimate)
    );
    if rep.vanishing {
        println!("gradient-decay check: pass (sqrt(r)|grad D| vanishes toward r = 0)");
    } else {
        println!("gradient-decay check: FLAGGED (sqrt(r)|grad D| does not vanish toward r = 0)");
        println!("(regularized integration through collisions is refused for this field)");
    }

    if let Some(path) = trajectory {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CmdError::config(format!("cannot read {}: {}", path.display(), e)))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header.trim() != TRAJECTORY_HEADER {
            return Err(CmdError::config(format!(
                "unexpected trajectory header: {}",
                header
            )));
        }
        let mut rows: Vec<(f64, f64, f64)> = Vec::new(); // (t, h, p)
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 10 {
                return Err(CmdError::config("malformed trajectory row"));
            }
            let parse = |s: &str| -> Result<f64, CmdError> {
                s.trim()
                    .parse()
                    .map_err(|_| CmdError::config(format!("bad number '{}'", s)))
            };
            rows.push((parse(cols[0])?, parse(cols[8])?, parse(cols[9])?));
        }
        if rows.len() < 2 {
            return Err(CmdError::config("trajectory has fewer than two rows"));
        }
        let d_star = field.d_star();
        let p_ok = rows
            .iter()
            .all(|&(t, _, p)| p <= 1.0 + 1e-9 && p >= (d_star * t).exp() - 1e-9);
        let h_ok = rows
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 + 1e-9 * (1.0 + w[0].1.abs()));
        println!(
            "p-bounds (e^(D* t) <= p <= 1): {}",
            if p_ok { "pass" } else { "FAIL" }
        );
        println!(
            "energy-monotonicity (h nonincreasing): {}",
            if h_ok { "pass" } else { "FAIL" }
        );
    }
    Ok(0)
}
