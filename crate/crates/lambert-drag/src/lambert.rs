//! Planar boundary-value solver: backward shooting from B plus
//! predictor-corrector continuation in the arrival angle.
//!
//! The shooting map sends a final velocity v0 to the polar endpoint
//! (r(-T), theta(-T)) of the backward solution through (B, v0), with the
//! angle lift anchored at theta(0). The target angle is homotoped from
//! theta_B (where the rectilinear solution solves the problem and is
//! nondegenerate) to the requested lift of theta_A; one continuation per
//! rotation direction.

use crate::dynamics::{mat_from_slice, state_from_slice, State, IDX_LNP, IDX_THETA, IDX_W};
use crate::error::Error;
use crate::friction::FrictionField;
use crate::integrator::{
    integrate_backward, integrate_variational_raw, project_to_base, EventKind, IntegratorConfig,
    LcPiece, RawTerminal, Terminal, Trajectory,
};
use crate::levi_civita::{goursat_planar, integrate_lc_planar_with, SqrtBranch};
use crate::real::Real;
use crate::rectilinear::{solve_rectilinear, RadialProblem};
use crate::vec2::{wrap_angle, Mat2, Vec2};

/// Requested rotation direction(s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    Cw,
    Ccw,
    #[default]
    Auto,
}

/// Rotation class of a returned arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcDirection {
    Rectilinear,
    Cw,
    Ccw,
}

impl ArcDirection {
    pub fn label(&self) -> &'static str {
        match self {
            ArcDirection::Rectilinear => "rectilinear",
            ArcDirection::Cw => "cw",
            ArcDirection::Ccw => "ccw",
        }
    }
}

/// Two endpoints, a flight time, a friction field and a direction request.
#[derive(Clone, Copy)]
pub struct LambertProblem<'a, F: Real> {
    pub a: Vec2<F>,
    pub b: Vec2<F>,
    pub t_flight: F,
    pub field: &'a FrictionField<F>,
    pub direction: Direction,
}

impl<'a, F: Real> LambertProblem<'a, F> {
    pub fn new(
        a: Vec2<F>,
        b: Vec2<F>,
        t_flight: F,
        field: &'a FrictionField<F>,
        direction: Direction,
    ) -> Result<Self, Error<F>> {
        if a.norm() == F::zero() || b.norm() == F::zero() {
            return Err(Error::invalid("endpoints must be away from the origin"));
        }
        if !(t_flight > F::zero()) {
            return Err(Error::invalid("T must be positive"));
        }
        Ok(Self {
            a,
            b,
            t_flight,
            field,
            direction,
        })
    }

    /// Angle from A to B, counterclockwise representative in [0, 2 pi).
    fn ccw_sweep(&self) -> F {
        let raw = wrap_angle(self.b.angle() - self.a.angle());
        if raw >= F::zero() {
            raw
        } else {
            raw + F::two() * F::PI()
        }
    }
}

/// Polar endpoint of one backward shot.
pub struct ShootResult<F: Real> {
    /// r(-T).
    pub r_end: F,
    /// Angle lift at -T (anchored at theta(0) = theta_B).
    pub theta_end: F,
    /// Swept angle theta(0) - theta(-T).
    pub swept: F,
    /// d(r, theta)(-T)/d v0; absent when the shot was completed in the
    /// regularized chart.
    pub jacobian: Option<Mat2<F>>,
    pub trajectory: Trajectory<F>,
    pub min_radius: F,
    pub through_regularized: bool,
}

fn polar_jacobian<F: Real>(x_end: Vec2<F>, w: Mat2<F>) -> Mat2<F> {
    let r = x_end.norm();
    let grad_r = x_end * (F::one() / r);
    let grad_theta = Vec2::new(-x_end.y, x_end.x) * (F::one() / (r * r));
    Mat2::new(
        grad_r.dot(w.col(0)),
        grad_r.dot(w.col(1)),
        grad_theta.dot(w.col(0)),
        grad_theta.dot(w.col(1)),
    )
}

/// Backward shot from (B, v0) over the flight time, returning the polar
/// endpoint, its Jacobian and the dense trajectory.
///
/// Shots that sink below the collision radius are finished in the
/// regularized planar chart (so the map stays evaluable near bouncing
/// data); shots sweeping a full turn terminate with [`Error::SweptFullTurn`].
pub fn shoot<F: Real>(
    problem: &LambertProblem<'_, F>,
    v0: Vec2<F>,
    cfg: &IntegratorConfig<F>,
) -> Result<ShootResult<F>, Error<F>> {
    let state0 = State::new(problem.b, v0, F::zero());
    let theta_b = problem.b.angle();
    let two_pi = F::two() * F::PI();
    let raw =
        integrate_variational_raw(problem.field, &state0, problem.t_flight, cfg, Some(two_pi))?;
    match raw.terminal {
        RawTerminal::Completed => {
            let y = raw.y_end;
            let x_end = Vec2::new(y[0], y[1]);
            let w = mat_from_slice(&y, IDX_W);
            let theta_end = y[IDX_THETA];
            let trajectory = Trajectory::from_cartesian_raw(
                project_to_base(&raw),
                F::zero(),
                cfg.r_collision,
                cfg.rtol,
            );
            let min_radius = trajectory.min_radius();
            Ok(ShootResult {
                r_end: x_end.norm(),
                theta_end,
                swept: theta_b - theta_end,
                jacobian: Some(polar_jacobian(x_end, w)),
                trajectory,
                min_radius,
                through_regularized: false,
            })
        }
        RawTerminal::Event(EventKind::AngleSweepExceeds(_)) => Err(Error::SweptFullTurn),
        RawTerminal::Event(EventKind::RadiusBelow(_)) => {
            if problem.field.gradient_decay_flagged() {
                return Err(Error::CollisionBeforeT { t_col: -raw.s_end });
            }
            let t_h = -raw.s_end;
            let y = raw.y_end;
            let state_h = state_from_slice(&y, t_h);
            let theta_h = y[IDX_THETA];
            let lnp_h = y[IDX_LNP];
            let mut lc0 = goursat_planar(state_h.x, state_h.v, SqrtBranch::Plus)?;
            lc0.t_accum = t_h;
            let run =
                integrate_lc_planar_with(problem.field, &lc0, lnp_h, -problem.t_flight, cfg, None)?;
            let mut trajectory = Trajectory::from_cartesian_raw(
                project_to_base(&raw),
                F::zero(),
                cfg.r_collision,
                cfg.rtol,
            );
            trajectory.append_regularized(
                LcPiece::new(run.into_raw(), theta_h),
                Terminal::ReachedTarget,
            );
            let end = trajectory.end_point();
            let swept = theta_b - end.theta;
            if swept.abs() >= two_pi {
                return Err(Error::SweptFullTurn);
            }
            let min_radius = trajectory.min_radius();
            Ok(ShootResult {
                r_end: end.r(),
                theta_end: end.theta,
                swept,
                jacobian: None,
                trajectory,
                min_radius,
                through_regularized: true,
            })
        }
        RawTerminal::Event(_) => unreachable!("no other terminal events armed"),
        RawTerminal::StepFailure { s } => Err(Error::StepFailure { t: -s }),
        RawTerminal::MaxSteps { s } => Err(Error::MaxSteps {
            t: -s,
            max_steps: cfg.max_steps,
        }),
    }
}

/// Final velocity of the rectilinear solution along the ray of B with
/// heights (|A|, |B|): the continuation seed.
pub fn seed_from_rectilinear<F: Real>(
    problem: &LambertProblem<'_, F>,
    cfg: &IntegratorConfig<F>,
) -> Result<Vec2<F>, Error<F>> {
    let dir = problem.b.unit();
    let radial = RadialProblem::new(
        problem.field,
        dir,
        problem.a.norm(),
        problem.b.norm(),
        problem.t_flight,
    )?;
    let tol = F::lit(1e-12) * (F::one() + problem.a.norm());
    let sol = solve_rectilinear(&radial, tol, cfg)?;
    Ok(dir * sol.v_final)
}

/// Runtime guard for corrector iterates: a large multiple of the
/// frictionless vis-viva scale of the geometry.
pub fn speed_ceiling<F: Real>(problem: &LambertProblem<'_, F>) -> F {
    speed_ceiling_with(problem, F::lit(1e3))
}

pub fn speed_ceiling_with<F: Real>(problem: &LambertProblem<'_, F>, multiple: F) -> F {
    let ra = problem.a.norm();
    let rb = problem.b.norm();
    let rmin = ra.min(rb);
    let span = (ra + rb) / problem.t_flight;
    multiple * (F::two() / rmin + span * span).sqrt()
}

/// One accepted continuation node.
#[derive(Debug, Clone)]
pub struct TraceNode<F> {
    pub lambda: F,
    pub v0: Vec2<F>,
    pub residual: F,
    pub step: F,
    pub newton_iters: usize,
    /// Swept angle of the accepted trajectory (logged for stall reports).
    pub swept: F,
}

/// Monotone continuation record from lambda = 0 to 1.
#[derive(Debug, Clone, Default)]
pub struct ContinuationTrace<F> {
    pub nodes: Vec<TraceNode<F>>,
}

impl<F: Real> ContinuationTrace<F> {
    pub fn newton_total(&self) -> usize {
        self.nodes.iter().map(|n| n.newton_iters).sum()
    }
}

/// A solved arc.
pub struct ArcSolution<F: Real> {
    /// Final velocity at B.
    pub v0: Vec2<F>,
    /// Verification trajectory, re-integrated at rtol/100.
    pub trajectory: Trajectory<F>,
    pub direction: ArcDirection,
    /// |x(-T) - A| of the verification trajectory.
    pub residual_position: F,
    /// Swept angle theta(0) - theta(-T).
    pub swept: F,
    pub trace: ContinuationTrace<F>,
    /// Set when the geometry was in the ambiguous near-ray band.
    pub near_ray: bool,
    /// Set when the arc solves the ray-projected problem (|A| along the
    /// ray of B) instead of the exact endpoints.
    pub rectilinear_projected: bool,
}

impl<F: Real> ArcSolution<F> {
    /// Angular momentum at t = 0.
    pub fn c0(&self) -> F {
        self.trajectory.start_point().c
    }

    pub fn energy_start_end(&self) -> (F, F) {
        (
            self.trajectory.end_point().h,
            self.trajectory.start_point().h,
        )
    }
}

const MAX_NEWTON: usize = 14;
const LAMBDA_MIN: f64 = 1e-6;
const LAMBDA_MAX_STEP: f64 = 0.25;

struct Corrector<'a, 'p, F: Real> {
    problem: &'p LambertProblem<'a, F>,
    cfg: IntegratorConfig<F>,
    r_a: F,
    theta_b: F,
    theta_a_lift: F,
    guard: F,
    ctol: F,
}

impl<F: Real> Corrector<'_, '_, F> {
    fn target_theta(&self, lambda: F) -> F {
        (F::one() - lambda) * self.theta_b + lambda * self.theta_a_lift
    }

    fn residual(&self, shot: &ShootResult<F>, lambda: F) -> Vec2<F> {
        Vec2::new(
            shot.r_end - self.r_a,
            self.r_a * (shot.theta_end - self.target_theta(lambda)),
        )
    }

    fn weighted_jacobian(&self, j: Mat2<F>) -> Mat2<F> {
        Mat2::new(j.a, j.b, self.r_a * j.c, self.r_a * j.d)
    }

    /// Finite-difference polar Jacobian (used after regularized shots).
    fn fd_jacobian(&self, v: Vec2<F>, base: &ShootResult<F>) -> Result<Mat2<F>, Error<F>> {
        let h = F::lit(1e-7) * (F::one() + v.norm());
        let px = shoot(self.problem, v + Vec2::new(h, F::zero()), &self.cfg)?;
        let py = shoot(self.problem, v + Vec2::new(F::zero(), h), &self.cfg)?;
        Ok(Mat2::new(
            (px.r_end - base.r_end) / h,
            (py.r_end - base.r_end) / h,
            (px.theta_end - base.theta_end) / h,
            (py.theta_end - base.theta_end) / h,
        ))
    }

    /// Damped Newton on the homotopy residual at fixed lambda.
    fn correct(
        &self,
        lambda: F,
        v_start: Vec2<F>,
    ) -> Result<(Vec2<F>, ShootResult<F>, usize), Error<F>> {
        let mut v = v_start;
        if v.norm() > self.guard {
            return Err(Error::invalid("iterate beyond the speed ceiling"));
        }
        let mut shot = shoot(self.problem, v, &self.cfg)?;
        let mut jac_cache: Option<Mat2<F>> = shot.jacobian;
        for iter in 0..MAX_NEWTON {
            let e = self.residual(&shot, lambda);
            if e.norm() <= self.ctol {
                return Ok((v, shot, iter));
            }
            let j = match shot.jacobian.or(jac_cache) {
                Some(j) => j,
                None => self.fd_jacobian(v, &shot)?,
            };
            let delta = self
                .weighted_jacobian(j)
                .solve(-e)
                .ok_or(Error::NonConvergence(iter))?;
            let mut t = F::one();
            let mut advanced = false;
            for _ in 0..8 {
                let v_try = v + delta * t;
                if v_try.norm() > self.guard {
                    t = t * F::half();
                    continue;
                }
                match shoot(self.problem, v_try, &self.cfg) {
                    Ok(s_try) => {
                        let e_try = self.residual(&s_try, lambda);
                        if e_try.norm() <= self.ctol
                            || e_try.norm() <= (F::one() - F::lit(0.25) * t) * e.norm()
                        {
                            v = v_try;
                            shot = s_try;
                            if shot.jacobian.is_some() {
                                jac_cache = shot.jacobian;
                            }
                            advanced = true;
                            break;
                        }
                        t = t * F::half();
                    }
                    Err(_) => {
                        t = t * F::half();
                    }
                }
            }
            if !advanced {
                return Err(Error::NonConvergence(iter + 1));
            }
        }
        let e = self.residual(&shot, lambda);
        if e.norm() <= self.ctol {
            Ok((v, shot, MAX_NEWTON))
        } else {
            Err(Error::NonConvergence(MAX_NEWTON))
        }
    }
}

fn arc_direction_sweep<F: Real>(problem: &LambertProblem<'_, F>, dir: ArcDirection) -> F {
    let ccw = problem.ccw_sweep();
    match dir {
        ArcDirection::Ccw => ccw,
        ArcDirection::Cw => ccw - F::two() * F::PI(),
        ArcDirection::Rectilinear => F::zero(),
    }
}

/// Predictor-corrector continuation in the arrival angle from the
/// rectilinear seed (lambda = 0) to the requested endpoint (lambda = 1).
pub fn continue_to_target<F: Real>(
    problem: &LambertProblem<'_, F>,
    v0_seed: Vec2<F>,
    dir: ArcDirection,
    cfg: &IntegratorConfig<F>,
) -> Result<ArcSolution<F>, Error<F>> {
    if dir == ArcDirection::Rectilinear {
        return Err(Error::invalid("continuation needs a rotation direction"));
    }
    let r_a = problem.a.norm();
    let theta_b = problem.b.angle();
    let sweep = arc_direction_sweep(problem, dir);
    let corrector = Corrector {
        problem,
        cfg: *cfg,
        r_a,
        theta_b,
        theta_a_lift: theta_b - sweep,
        guard: speed_ceiling(problem),
        ctol: F::lit(1e-10) * (F::one() + r_a),
    };

    let mut trace = ContinuationTrace::default();
    let (v_first, shot_first, iters0) = corrector.correct(F::zero(), v0_seed)?;
    trace.nodes.push(TraceNode {
        lambda: F::zero(),
        v0: v_first,
        residual: corrector.residual(&shot_first, F::zero()).norm(),
        step: F::zero(),
        newton_iters: iters0,
        swept: shot_first.swept,
    });

    let mut lambda = F::zero();
    let mut v_cur = v_first;
    let mut prev: Option<(F, Vec2<F>)> = None;
    let mut dlambda = F::lit(0.125);

    while lambda < F::one() {
        let lambda_try = (lambda + dlambda).min(F::one());
        let v_pred = match prev {
            Some((lp, vp)) if lambda > lp => {
                v_cur + (v_cur - vp) * ((lambda_try - lambda) / (lambda - lp))
            }
            _ => v_cur,
        };
        match corrector.correct(lambda_try, v_pred) {
            Ok((v_new, shot_new, iters)) => {
                trace.nodes.push(TraceNode {
                    lambda: lambda_try,
                    v0: v_new,
                    residual: corrector.residual(&shot_new, lambda_try).norm(),
                    step: lambda_try - lambda,
                    newton_iters: iters,
                    swept: shot_new.swept,
                });
                prev = Some((lambda, v_cur));
                lambda = lambda_try;
                v_cur = v_new;
                if iters <= 3 {
                    dlambda = (dlambda * F::two()).min(F::lit(LAMBDA_MAX_STEP));
                }
            }
            Err(_) => {
                dlambda = dlambda * F::half();
                if dlambda < F::lit(LAMBDA_MIN) {
                    return Err(Error::ContinuationStalled {
                        lambda,
                        trace: Box::new(trace),
                    });
                }
            }
        }
    }

    finalize_arc(problem, v_cur, dir, cfg, trace)
}

/// Direct Newton solve at lambda = 1 from a warm start (used by sweeps);
/// falls back to an error when the start is not in the attraction basin.
pub fn solve_direct<F: Real>(
    problem: &LambertProblem<'_, F>,
    dir: ArcDirection,
    v_start: Vec2<F>,
    cfg: &IntegratorConfig<F>,
) -> Result<ArcSolution<F>, Error<F>> {
    let r_a = problem.a.norm();
    let theta_b = problem.b.angle();
    let sweep = arc_direction_sweep(problem, dir);
    let corrector = Corrector {
        problem,
        cfg: *cfg,
        r_a,
        theta_b,
        theta_a_lift: theta_b - sweep,
        guard: speed_ceiling(problem),
        ctol: F::lit(1e-10) * (F::one() + r_a),
    };
    let (v, shot, iters) = corrector.correct(F::one(), v_start)?;
    let mut trace = ContinuationTrace::default();
    trace.nodes.push(TraceNode {
        lambda: F::one(),
        v0: v,
        residual: corrector.residual(&shot, F::one()).norm(),
        step: F::one(),
        newton_iters: iters,
        swept: shot.swept,
    });
    finalize_arc(problem, v, dir, cfg, trace)
}

/// Re-integrates the converged velocity at tightened tolerance, checks the
/// arc conditions and packages the solution.
fn finalize_arc<F: Real>(
    problem: &LambertProblem<'_, F>,
    v0: Vec2<F>,
    dir: ArcDirection,
    cfg: &IntegratorConfig<F>,
    trace: ContinuationTrace<F>,
) -> Result<ArcSolution<F>, Error<F>> {
    let tight = cfg.tightened(F::lit(100.0));
    let shot = shoot(problem, v0, &tight)?;
    let end = shot.trajectory.end_point();
    let residual_position = (end.state.x - problem.a).norm();
    let tol_pos = F::lit(1e-8) * (F::one() + problem.a.norm());
    if residual_position > tol_pos {
        return Err(Error::NonConvergence(MAX_NEWTON));
    }
    let c0 = shot.trajectory.start_point().c;
    let dir_ok = match dir {
        ArcDirection::Ccw => c0 > F::zero(),
        ArcDirection::Cw => c0 < F::zero(),
        ArcDirection::Rectilinear => true,
    };
    if !dir_ok {
        return Err(Error::invalid("converged arc rotates the wrong way"));
    }
    if shot.swept.abs() >= F::two() * F::PI() {
        return Err(Error::SweptFullTurn);
    }
    Ok(ArcSolution {
        v0,
        swept: shot.swept,
        trajectory: shot.trajectory,
        direction: dir,
        residual_position,
        trace,
        near_ray: false,
        rectilinear_projected: false,
    })
}

/// Solves the ray-aligned problem: the unique rectilinear arc, verified by
/// a planar re-integration.
fn solve_same_ray<F: Real>(
    problem: &LambertProblem<'_, F>,
    cfg: &IntegratorConfig<F>,
    near_ray: bool,
    projected: bool,
) -> Result<ArcSolution<F>, Error<F>> {
    let dir = problem.b.unit();
    let radial = RadialProblem::new(
        problem.field,
        dir,
        problem.a.norm(),
        problem.b.norm(),
        problem.t_flight,
    )?;
    let tol = F::lit(1e-12) * (F::one() + problem.a.norm());
    let sol = solve_rectilinear(&radial, tol, cfg)?;
    let v0 = dir * sol.v_final;
    let tight = cfg.tightened(F::lit(100.0));
    let traj = integrate_backward(
        problem.field,
        &State::new(problem.b, v0, F::zero()),
        problem.t_flight,
        &tight,
        &[],
    )?;
    traj.ensure_reached()?;
    let end = traj.end_point();
    let target = dir * problem.a.norm();
    let residual_position = (end.state.x - target).norm();
    Ok(ArcSolution {
        v0,
        swept: traj.swept_angle(),
        trajectory: traj,
        direction: ArcDirection::Rectilinear,
        residual_position,
        trace: ContinuationTrace::default(),
        near_ray,
        rectilinear_projected: projected,
    })
}

/// A direction that failed, with its error and (for stalls) the trace.
pub struct DirectionFailure<F: Real> {
    pub direction: ArcDirection,
    pub error: Error<F>,
}

/// Result of [`solve`]: converged arcs plus per-direction failures.
pub struct SolveOutcome<F: Real> {
    pub arcs: Vec<ArcSolution<F>>,
    pub failures: Vec<DirectionFailure<F>>,
    /// The endpoints were within the near-ray ambiguity band.
    pub near_ray: bool,
}

impl<F: Real> SolveOutcome<F> {
    pub fn all_converged(&self) -> bool {
        self.failures.is_empty() && !self.arcs.is_empty()
    }
}

/// Angle below which endpoints count as exactly ray-aligned.
const SAME_RAY_ANGLE: f64 = 1e-12;
/// Angle below which both the projected rectilinear and the rotating
/// problems are solved and flagged.
const NEAR_RAY_ANGLE: f64 = 1e-6;

/// Top-level solve: the rectilinear arc for ray-aligned endpoints,
/// otherwise one arc per requested rotation direction.
pub fn solve<F: Real>(
    problem: &LambertProblem<'_, F>,
    cfg: &IntegratorConfig<F>,
) -> Result<SolveOutcome<F>, Error<F>> {
    cfg.validate()?;
    let angle = wrap_angle(problem.b.angle() - problem.a.angle()).abs();
    let same_orientation = problem.a.dot(problem.b) > F::zero();

    if same_orientation && angle < F::lit(SAME_RAY_ANGLE) {
        let arc = solve_same_ray(problem, cfg, false, false)?;
        return Ok(SolveOutcome {
            arcs: vec![arc],
            failures: Vec::new(),
            near_ray: false,
        });
    }

    let near_ray = same_orientation && angle < F::lit(NEAR_RAY_ANGLE);
    let mut arcs = Vec::new();
    let mut failures = Vec::new();

    if near_ray {
        match solve_same_ray(problem, cfg, true, true) {
            Ok(arc) => arcs.push(arc),
            Err(error) => failures.push(DirectionFailure {
                direction: ArcDirection::Rectilinear,
                error,
            }),
        }
    }

    let directions: &[ArcDirection] = match problem.direction {
        Direction::Ccw => &[ArcDirection::Ccw],
        Direction::Cw => &[ArcDirection::Cw],
        Direction::Auto => &[ArcDirection::Ccw, ArcDirection::Cw],
    };

    let seed = seed_from_rectilinear(problem, cfg);
    for &dir in directions {
        let result = seed
            .clone()
            .and_then(|s| continue_to_target(problem, s, dir, cfg));
        match result {
            Ok(mut arc) => {
                arc.near_ray = near_ray;
                arcs.push(arc);
            }
            Err(error) => failures.push(DirectionFailure {
                direction: dir,
                error,
            }),
        }
    }

    Ok(SolveOutcome {
        arcs,
        failures,
        near_ray,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::integrate_variational_backward;

    fn cfg() -> IntegratorConfig<f64> {
        IntegratorConfig::default()
    }

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn shoot_circular_ccw() {
        let field = FrictionField::zero();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            PI / 2.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let s = shoot(&p, Vec2::new(-1.0, 0.0), &cfg()).unwrap();
        assert!((s.r_end - 1.0).abs() < 1e-8);
        assert!(s.theta_end.abs() < 1e-8);
        assert!((s.swept - PI / 2.0).abs() < 1e-8);
        assert!(s.jacobian.is_some());
        assert!(!s.through_regularized);
    }

    #[test]
    fn shoot_circular_cw_twin_by_mirror() {
        let field = FrictionField::zero();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            PI / 2.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let s = shoot(&p, Vec2::new(1.0, 0.0), &cfg()).unwrap();
        assert!((s.r_end - 1.0).abs() < 1e-8);
        assert!((s.theta_end - PI).abs() < 1e-8);
        assert!((s.swept + PI / 2.0).abs() < 1e-8);
    }

    #[test]
    fn shoot_with_drag_keeps_sign() {
        let field = FrictionField::constant(0.1).unwrap();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            PI / 2.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let s = shoot(&p, Vec2::new(-1.0, 0.0), &cfg()).unwrap();
        assert!(s.swept > 0.0 && s.swept < 2.0 * PI);
        for pt in s.trajectory.node_points() {
            assert!(pt.c > 0.0, "angular momentum changed sign");
        }
    }

    #[test]
    fn shoot_jacobian_matches_variational_op() {
        let field = FrictionField::constant(0.05).unwrap();
        let p = LambertProblem::new(
            Vec2::new(1.2, 0.3),
            Vec2::new(0.1, 1.1),
            1.3,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let v0 = Vec2::new(-0.9, 0.2);
        let s = shoot(&p, v0, &cfg()).unwrap();
        let (traj, w) = integrate_variational_backward(
            &field,
            &State::new(p.b, v0, 0.0),
            Mat2::identity(),
            1.3,
            &cfg(),
        )
        .unwrap();
        let x_end = traj.end_point().state.x;
        let jp = polar_jacobian(x_end, w);
        let js = s.jacobian.unwrap();
        for (a, b) in [(jp.a, js.a), (jp.b, js.b), (jp.c, js.c), (jp.d, js.d)] {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn seed_examples() {
        let field = FrictionField::zero();
        const K: f64 = 1.6509636244473134;
        let p = LambertProblem::new(
            Vec2::new(1.0400419115259519, 0.0),
            Vec2::new(K, 0.0),
            0.5,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let v0 = seed_from_rectilinear(&p, &cfg()).unwrap();
        assert!((v0 - Vec2::new(2.0 / 3.0 * K, 0.0)).norm() < 1e-8);
        assert!((v0.x - 1.100643).abs() < 1e-6);

        // rotation equivariance: same heights along (0, 1)
        let p_rot = LambertProblem::new(
            Vec2::new(0.0, 1.0400419115259519),
            Vec2::new(0.0, K),
            0.5,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let v0_rot = seed_from_rectilinear(&p_rot, &cfg()).unwrap();
        assert!((v0_rot - Vec2::new(0.0, 2.0 / 3.0 * K)).norm() < 1e-8);
    }

    #[test]
    fn seed_small_flight_time_leading_order() {
        // equal heights: the arc is a symmetric up-down fall, arriving
        // with rdot(0) = -T/(2 r_B^2) + o(T).
        let field = FrictionField::constant(0.2).unwrap();
        let t = 1e-3;
        let p = LambertProblem::new(
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 0.0) * 1.0,
            t,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let v0 = seed_from_rectilinear(&p, &cfg()).unwrap();
        let expect = -t / (2.0 * 4.0);
        assert!(
            (v0.x - expect).abs() < 1e-3 * expect.abs(),
            "v0 = {:?} expect {}",
            v0,
            expect
        );
    }

    #[test]
    fn speed_ceiling_formula() {
        let field = FrictionField::zero();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            1.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        assert!((speed_ceiling(&p) - 1e3 * 6.0_f64.sqrt()).abs() < 1e-9);
        assert!((speed_ceiling(&p) - 2449.49).abs() < 1.0);

        let p2 = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 2.0),
            0.1,
            &field,
            Direction::Auto,
        )
        .unwrap();
        assert!((speed_ceiling_with(&p2, 1e3) - 1e3 * 902.0_f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn circular_golden_case_both_directions() {
        let field = FrictionField::zero();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            PI / 2.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.all_converged(), "failures: {}", out.failures.len());
        assert_eq!(out.arcs.len(), 2);
        let ccw = out
            .arcs
            .iter()
            .find(|a| a.direction == ArcDirection::Ccw)
            .unwrap();
        assert!(
            (ccw.v0 - Vec2::new(-1.0, 0.0)).norm() < 1e-8,
            "ccw v0 = {:?}",
            ccw.v0
        );
        assert!(ccw.residual_position < 1e-8);
        assert!((ccw.swept - PI / 2.0).abs() < 1e-6);

        let cw = out
            .arcs
            .iter()
            .find(|a| a.direction == ArcDirection::Cw)
            .unwrap();
        assert!(cw.residual_position < 1e-8);
        assert!((cw.swept + 1.5 * PI).abs() < 1e-6, "cw swept {}", cw.swept);
        assert!(cw.c0() < 0.0);

        // lift bookkeeping: the two sweeps differ by one full turn
        assert!((ccw.swept - cw.swept - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn circular_cw_arc_matches_brute_force() {
        // independent of the continuation: dense direction grid plus a
        // plain position-space Newton on the variational flow.
        let field = FrictionField::zero();
        let a = Vec2::new(1.0, 0.0);
        let b = Vec2::new(0.0, 1.0);
        let t = PI / 2.0;
        let coarse = IntegratorConfig::<f64> {
            rtol: 1e-8,
            atol: 1e-10,
            ..Default::default()
        };
        let mut best = (f64::INFINITY, Vec2::zero());
        for i in 0..48 {
            for j in 1..40 {
                let psi = 2.0 * PI * i as f64 / 48.0;
                let speed = 0.15 * j as f64;
                let v0 = Vec2::from_angle(psi) * speed;
                if b.det(v0) >= 0.0 {
                    continue; // clockwise means c(0) = det(B, v0) < 0
                }
                let Ok(traj) = integrate_backward(&field, &State::new(b, v0, 0.0), t, &coarse, &[])
                else {
                    continue;
                };
                if !traj.reached_target() {
                    continue;
                }
                let miss = (traj.end_point().state.x - a).norm();
                if miss < best.0 {
                    best = (miss, v0);
                }
            }
        }
        // Newton polish in position space
        let mut v = best.1;
        for _ in 0..40 {
            let (traj, w) = integrate_variational_backward(
                &field,
                &State::new(b, v, 0.0),
                Mat2::identity(),
                t,
                &cfg(),
            )
            .unwrap();
            let miss = traj.end_point().state.x - a;
            if miss.norm() < 1e-11 {
                break;
            }
            let delta = w.solve(-miss).unwrap();
            v += delta;
        }

        let p = LambertProblem::new(a, b, t, &field, Direction::Cw).unwrap();
        let out = solve(&p, &cfg()).unwrap();
        let arc = &out.arcs[0];
        assert!(
            (arc.v0 - v).norm() < 1e-7,
            "continuation {:?} vs brute force {:?}",
            arc.v0,
            v
        );
    }

    #[test]
    fn damped_both_directions() {
        let field = FrictionField::constant(0.1).unwrap();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            PI / 2.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.all_converged());
        assert_eq!(out.arcs.len(), 2);
        let (ccw, cw) = (
            out.arcs
                .iter()
                .find(|a| a.direction == ArcDirection::Ccw)
                .unwrap(),
            out.arcs
                .iter()
                .find(|a| a.direction == ArcDirection::Cw)
                .unwrap(),
        );
        assert!(ccw.c0() > 0.0 && cw.c0() < 0.0);
        assert!(ccw.residual_position < 1e-8 && cw.residual_position < 1e-8);
        // energy decreases along each arc
        for arc in &out.arcs {
            let (h_start, h_end) = arc.energy_start_end();
            assert!(h_end <= h_start + 1e-9 * (1.0 + h_start.abs()));
        }
    }

    #[test]
    fn antipodal_half_revolution() {
        let field = FrictionField::zero();
        let p = LambertProblem::new(
            Vec2::new(-1.0, 0.0),
            Vec2::new(1.0, 0.0),
            PI,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.all_converged());
        assert_eq!(out.arcs.len(), 2);
        for arc in &out.arcs {
            assert!((arc.swept.abs() - PI).abs() < 1e-6, "swept {}", arc.swept);
            assert!(arc.residual_position < 1e-8);
            // semicircular unit orbit: |v0| = 1, tangential
            assert!((arc.v0.norm() - 1.0).abs() < 1e-6, "v0 {:?}", arc.v0);
            assert!(arc.v0.dot(p.b).abs() < 1e-6);
        }
    }

    #[test]
    fn same_ray_gives_single_rectilinear_arc() {
        let field = FrictionField::constant(0.1).unwrap();
        let p = LambertProblem::new(
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.0),
            1.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.all_converged());
        assert_eq!(out.arcs.len(), 1);
        let arc = &out.arcs[0];
        assert_eq!(arc.direction, ArcDirection::Rectilinear);
        assert!(arc.residual_position < 1e-8);
        assert!(arc.c0().abs() < 1e-12);
        assert!(arc.v0.y.abs() < 1e-12);
    }

    #[test]
    fn near_ray_reports_both_regimes() {
        let field = FrictionField::zero();
        let angle = 1e-9;
        let p = LambertProblem::new(
            Vec2::from_angle(angle) * 2.0,
            Vec2::new(1.0, 0.0),
            1.0,
            &field,
            Direction::Ccw,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.near_ray);
        // the projected rectilinear arc is always attempted and flagged
        let projected = out
            .arcs
            .iter()
            .find(|a| a.rectilinear_projected)
            .expect("projected arc expected");
        assert!(projected.near_ray);
        // the rotating problem is attempted too (it may stall near the
        // bouncing limit, which is reported rather than hidden)
        assert_eq!(out.arcs.len() + out.failures.len(), 2);
    }

    #[test]
    fn homotopy_seed_consistency() {
        // the seed solves the lambda = 0 problem within the corrector
        // tolerance before any continuation step
        let field = FrictionField::constant(0.15).unwrap();
        let p = LambertProblem::new(
            Vec2::new(1.3, 0.4),
            Vec2::new(-0.2, 1.1),
            1.7,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let seed = seed_from_rectilinear(&p, &cfg()).unwrap();
        let s = shoot(&p, seed, &cfg()).unwrap();
        let r_a = p.a.norm();
        let theta_b = p.b.angle();
        let resid = Vec2::new(s.r_end - r_a, r_a * (s.theta_end - theta_b));
        assert!(
            resid.norm() <= 1e-10 * (1.0 + r_a),
            "seed residual {}",
            resid.norm()
        );
    }

    #[test]
    fn trace_is_monotone_in_lambda() {
        let field = FrictionField::constant(0.3).unwrap();
        let p = LambertProblem::new(
            Vec2::new(1.1, -0.4),
            Vec2::new(0.3, 0.9),
            2.0,
            &field,
            Direction::Ccw,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.all_converged());
        let trace = &out.arcs[0].trace;
        assert!((trace.nodes.last().unwrap().lambda - 1.0).abs() < 1e-15);
        for pair in trace.nodes.windows(2) {
            assert!(pair[1].lambda > pair[0].lambda);
        }
        let ctol = 1e-10 * (1.0 + p.a.norm());
        for node in &trace.nodes {
            assert!(node.residual <= ctol);
        }
    }

    #[test]
    fn shoot_completes_through_regularized_chart() {
        // Nearly collinear outgoing data: the backward solution dives far
        // below the handoff radius (r_min ~ c^2/2 ~ 5e-9), swings around
        // the origin and recedes; the regularized continuation keeps the
        // shooting map evaluable.
        let field = FrictionField::zero();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 0.0),
            1.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let v0 = Vec2::new(1.2, 1e-4);
        let s = shoot(&p, v0, &cfg()).unwrap();
        assert!(s.through_regularized);
        assert!(s.jacobian.is_none());
        assert!(s.min_radius < 1e-3);
        // the near-bounce winds almost a full counterclockwise turn (the
        // indirect-arc limit: |sweep| -> 2 pi as the data turn collinear)
        assert!(
            s.swept > 2.0 * PI - 0.01 && s.swept < 2.0 * PI,
            "swept = {}",
            s.swept
        );
        // position agrees with the pure regularized map
        let x_ext =
            crate::levi_civita::extended_position_map(&field, p.b, v0, 1.0, &cfg()).unwrap();
        let x_shoot = s.trajectory.end_point().state.x;
        assert!(
            (x_ext - x_shoot).norm() < 1e-6,
            "extended map {:?} vs stitched shoot {:?}",
            x_ext,
            x_shoot
        );
        // angular momentum sign is preserved through the deep pass
        for pt in s.trajectory.node_points() {
            assert!(pt.c >= 0.0, "c flipped sign near the bounce");
        }
        // the angle lift is continuous across the chart handoff
        let t_h = match s.trajectory.terminal {
            Terminal::ReachedTarget => {
                // handoff time is recorded in the event log
                s.trajectory
                    .events
                    .iter()
                    .find(|(_, k)| matches!(k, EventKind::RadiusBelow(_)))
                    .map(|&(t, _)| t)
                    .expect("handoff event")
            }
            _ => panic!("shot must reach the target"),
        };
        let before = s.trajectory.sample(t_h + 1e-9).theta;
        let after = s.trajectory.sample(t_h - 1e-9).theta;
        assert!((before - after).abs() < 1e-5, "lift jumped at the handoff");
        // event relocation works across the chart boundary: the earliest
        // crossing of r = 1e-3 lies inside the regularized piece (the
        // trajectory comes back up through it after the bounce)
        let (t_ev, state) = s
            .trajectory
            .locate_event(EventKind::RadiusBelow(1e-3))
            .expect("radius crossing");
        assert!(t_ev < t_h, "t_ev = {} handoff = {}", t_ev, t_h);
        assert!((state.r() - 1e-3).abs() < 1e-9);
    }

    #[test]
    fn flagged_field_still_solves_away_from_collisions() {
        // the gradient-decay check is advisory: solving works as long as
        // no trajectory needs the regularized chart
        let mut samples = Vec::new();
        let mut r = 1e-8_f64;
        while r <= 6.0 {
            samples.push((r, 0.05 * r.sqrt()));
            r *= 1.3;
        }
        let field = FrictionField::radial_table(&samples).unwrap();
        assert!(field.gradient_decay_flagged());

        // ray-aligned problem: the unique rectilinear arc
        let p = LambertProblem::new(
            Vec2::new(2.0, 0.0),
            Vec2::new(1.0, 0.0),
            1.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.all_converged());
        assert_eq!(out.arcs[0].direction, ArcDirection::Rectilinear);

        // rotating problem staying far from the origin
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            PI / 2.0,
            &field,
            Direction::Auto,
        )
        .unwrap();
        let out = solve(&p, &cfg()).unwrap();
        assert!(out.all_converged());
        assert_eq!(out.arcs.len(), 2);
    }

    #[test]
    fn warm_start_direct_solve() {
        let field = FrictionField::zero();
        let p = LambertProblem::new(
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
            PI / 2.0,
            &field,
            Direction::Ccw,
        )
        .unwrap();
        let arc = solve_direct(&p, ArcDirection::Ccw, Vec2::new(-0.98, 0.03), &cfg()).unwrap();
        assert!((arc.v0 - Vec2::new(-1.0, 0.0)).norm() < 1e-8);
    }
}
