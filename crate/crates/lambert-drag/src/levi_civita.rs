//! Levi-Civita regularized flows through collisions.
//!
//! The square-root substitution w^2 = x with fictitious time ds = dt/|x|
//! turns the damped Kepler equation into
//!
//! ```text
//! w'' + D(w^2)|w|^2 w' = E w / 2,      E' = -4 D(w^2) |w'|^2,
//! ```
//!
//! which is smooth through w = 0 and preserves the manifold
//! 2|w'|^2 - E|w|^2 = 1. The scalar (one-dimensional) version in u = sqrt(r)
//! governs rectilinear motion. Both flows run backward in physical time by
//! integrating forward in sigma = -s; the physical time and the damping
//! exponent ride along as quadrature states.

use std::cell::Cell;

use num_complex::Complex;

use crate::dynamics::State;
use crate::error::Error;
use crate::friction::FrictionField;
use crate::integrator::{
    integrate_raw, Crossing, EventFn, EventKind, IntegratorConfig, Ode, RawTerminal, RawTrajectory,
};
use crate::real::Real;
use crate::vec2::Vec2;

/// Layout of the planar regularized state vector.
pub(crate) const LC_W: usize = 0;
pub(crate) const LC_WP: usize = 2;
pub(crate) const LC_E: usize = 4;
pub(crate) const LC_TACC: usize = 5;
pub(crate) const LC_LNP: usize = 6;
pub(crate) const LC_DIM: usize = 7;

/// Layout of the one-dimensional regularized state vector.
pub(crate) const LC1_U: usize = 0;
pub(crate) const LC1_UP: usize = 1;
pub(crate) const LC1_E: usize = 2;
pub(crate) const LC1_TACC: usize = 3;
pub(crate) const LC1_DIM: usize = 4;

/// Which square root of x(0) seeds the planar chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqrtBranch {
    Plus,
    Minus,
}

/// Regularized state of the one-dimensional (radial) flow.
#[derive(Debug, Clone, Copy)]
pub struct LcState1D<F> {
    /// Sign-carrying regularized radius u (u^2 = r on u > 0).
    pub u: F,
    pub u_prime: F,
    pub energy: F,
    /// Fictitious time.
    pub s: F,
    /// Accumulated physical time.
    pub t_accum: F,
}

impl<F: Real> LcState1D<F> {
    /// Residual of the invariant manifold 2 u'^2 - E u^2 = 1.
    pub fn manifold_residual(&self) -> F {
        F::two() * self.u_prime * self.u_prime - self.energy * self.u * self.u - F::one()
    }
}

/// Regularized state of the planar flow.
#[derive(Debug, Clone, Copy)]
pub struct LcStatePlanar<F> {
    /// Complex square root of the position.
    pub w: Vec2<F>,
    pub w_prime: Vec2<F>,
    pub energy: F,
    pub s: F,
    pub t_accum: F,
    pub branch: SqrtBranch,
}

impl<F: Real> LcStatePlanar<F> {
    /// Residual of the invariant manifold 2|w'|^2 - E|w|^2 = 1.
    pub fn manifold_residual(&self) -> F {
        F::two() * self.w_prime.norm_sq() - self.energy * self.w.norm_sq() - F::one()
    }
}

/// Goursat transform of a radial data point (r, rdot, h) at t = 0:
/// u = sqrt(r), u' = sqrt(r)·rdot/2, E = h.
pub fn goursat_1d<F: Real>(r: F, rdot: F, h: F) -> Result<LcState1D<F>, Error<F>> {
    if !(r > F::zero()) {
        return Err(Error::OriginSingularity);
    }
    let u = r.sqrt();
    Ok(LcState1D {
        u,
        u_prime: u * rdot * F::half(),
        energy: h,
        s: F::zero(),
        t_accum: F::zero(),
    })
}

/// Goursat transform of a planar data point: w is a square root of x,
/// w' = |x|·xdot/(2w), E = |xdot|^2/2 - 1/|x|.
pub fn goursat_planar<F: Real>(
    x: Vec2<F>,
    xdot: Vec2<F>,
    branch: SqrtBranch,
) -> Result<LcStatePlanar<F>, Error<F>> {
    let r = x.norm();
    if r == F::zero() {
        return Err(Error::OriginSingularity);
    }
    let mut w = x.to_complex().sqrt();
    if branch == SqrtBranch::Minus {
        w = -w;
    }
    let w_prime = xdot.to_complex() * r / (w * F::two());
    Ok(LcStatePlanar {
        w: Vec2::from_complex(w),
        w_prime: Vec2::from_complex(w_prime),
        energy: xdot.norm_sq() * F::half() - F::one() / r,
        s: F::zero(),
        t_accum: F::zero(),
        branch,
    })
}

/// Physical position x = w^2 (defined even at the collision).
pub fn lc_position<F: Real>(lc: &LcStatePlanar<F>) -> Vec2<F> {
    let w = lc.w.to_complex();
    Vec2::from_complex(w * w)
}

/// Physical state (x, xdot) = (w^2, 2 w w'/|w|^2); the velocity is
/// undefined at w = 0.
pub fn lc_to_physical<F: Real>(lc: &LcStatePlanar<F>) -> Result<State<F>, Error<F>> {
    let r = lc.w.norm_sq();
    if r == F::zero() {
        return Err(Error::VelocityAtCollision);
    }
    let w = lc.w.to_complex();
    let wp = lc.w_prime.to_complex();
    let v = w * wp * F::two() / r;
    Ok(State::new(
        lc_position(lc),
        Vec2::from_complex(v),
        lc.t_accum,
    ))
}

// ---------------------------------------------------------------------------
// Planar flow
// ---------------------------------------------------------------------------

pub(crate) struct LcPlanarBackward<'a, F: Real> {
    pub field: &'a FrictionField<F>,
    pub drift_warning: Cell<bool>,
}

impl<F: Real> LcPlanarBackward<'_, F> {
    fn friction_at(&self, r: F) -> F {
        // w -> D(w^2) extends continuously to w = 0 for admissible fields;
        // all built-in kinds are radial, so evaluate the radial profile.
        self.field.eval_radial(r)
    }
}

impl<F: Real> Ode<F, LC_DIM> for LcPlanarBackward<'_, F> {
    fn rhs(&self, _sigma: F, y: &[F; LC_DIM]) -> [F; LC_DIM] {
        let w = Complex::new(y[LC_W], y[LC_W + 1]);
        let wp = Complex::new(y[LC_WP], y[LC_WP + 1]);
        let e = y[LC_E];
        let r = w.norm_sqr();
        let d = self.friction_at(r);
        // w'' = E w/2 - D |w|^2 w'
        let wpp = w * (e * F::half()) - wp * (d * r);
        let mut out = [F::zero(); LC_DIM];
        out[LC_W] = -wp.re;
        out[LC_W + 1] = -wp.im;
        out[LC_WP] = -wpp.re;
        out[LC_WP + 1] = -wpp.im;
        out[LC_E] = F::lit(4.0) * d * wp.norm_sqr();
        out[LC_TACC] = -r;
        out[LC_LNP] = -d * r;
        out
    }

    fn accept_step(&self, _s0: F, y0: &[F; LC_DIM], _s1: F, y1: &[F; LC_DIM]) -> bool {
        // Keep the angle lift of x = w^2 decidable: reject steps sweeping
        // more than pi/2.
        let w0 = Complex::new(y0[LC_W], y0[LC_W + 1]);
        let w1 = Complex::new(y1[LC_W], y1[LC_W + 1]);
        let x0 = w0 * w0;
        let x1 = w1 * w1;
        if x0.norm_sqr() == F::zero() || x1.norm_sqr() == F::zero() {
            return true;
        }
        let dtheta = crate::vec2::wrap_angle(x1.arg() - x0.arg());
        dtheta.abs() <= F::PI() * F::half()
    }

    fn project(&self, y: &mut [F; LC_DIM]) -> bool {
        let wp2 = y[LC_WP] * y[LC_WP] + y[LC_WP + 1] * y[LC_WP + 1];
        let w2 = y[LC_W] * y[LC_W] + y[LC_W + 1] * y[LC_W + 1];
        let residual = F::two() * wp2 - y[LC_E] * w2 - F::one();
        if residual.abs() <= F::lit(1e-10) {
            return false;
        }
        if residual.abs() > F::lit(1e-6) {
            self.drift_warning.set(true);
        }
        let target = F::one() + y[LC_E] * w2;
        if target <= F::zero() || wp2 <= F::lit(1e-300) {
            return false;
        }
        let gamma = (target / (F::two() * wp2)).sqrt();
        y[LC_WP] = y[LC_WP] * gamma;
        y[LC_WP + 1] = y[LC_WP + 1] * gamma;
        true
    }
}

fn planar_y0<F: Real>(lc0: &LcStatePlanar<F>, ln_p0: F) -> [F; LC_DIM] {
    let mut y = [F::zero(); LC_DIM];
    y[LC_W] = lc0.w.x;
    y[LC_W + 1] = lc0.w.y;
    y[LC_WP] = lc0.w_prime.x;
    y[LC_WP + 1] = lc0.w_prime.y;
    y[LC_E] = lc0.energy;
    y[LC_TACC] = lc0.t_accum;
    y[LC_LNP] = ln_p0;
    y
}

pub(crate) fn planar_state_from<F: Real>(
    y: &[F; LC_DIM],
    sigma: F,
    branch: SqrtBranch,
) -> LcStatePlanar<F> {
    LcStatePlanar {
        w: Vec2::new(y[LC_W], y[LC_W + 1]),
        w_prime: Vec2::new(y[LC_WP], y[LC_WP + 1]),
        energy: y[LC_E],
        s: -sigma,
        t_accum: y[LC_TACC],
        branch,
    }
}

/// Completed planar run down to the requested physical time.
pub struct LcPlanarRun<F: Real> {
    pub final_state: LcStatePlanar<F>,
    /// Fictitious time spent (sigma = -s >= 0).
    pub sigma_end: F,
    /// True when the manifold residual ever exceeded 1e-6 (it is then
    /// re-projected and integration continues).
    pub manifold_warning: bool,
    pub(crate) raw: RawTrajectory<F, LC_DIM>,
    branch: SqrtBranch,
}

impl<F: Real> LcPlanarRun<F> {
    pub fn state_at_sigma(&self, sigma: F) -> LcStatePlanar<F> {
        planar_state_from(&self.raw.eval(sigma), sigma, self.branch)
    }

    /// Largest manifold residual over `n` uniform fictitious-time samples.
    pub fn max_manifold_residual(&self, n: usize) -> F {
        let mut worst = F::zero();
        for i in 0..=n {
            let sigma = self.sigma_end * F::from_usize(i).unwrap() / F::from_usize(n).unwrap();
            let res = self.state_at_sigma(sigma).manifold_residual().abs();
            worst = worst.max(res);
        }
        worst
    }

    pub(crate) fn into_raw(self) -> RawTrajectory<F, LC_DIM> {
        self.raw
    }
}

/// Fictitious-time budget; the physical-time event always fires well
/// before this for maximal solutions.
const SIGMA_CAP: f64 = 1e5;

/// Integrates the planar regularized system backward until the accumulated
/// physical time reaches `t_target` (absolute, < lc0.t_accum).
///
/// Collisions (w = 0) are crossed transversally; the flow is smooth there.
pub fn integrate_lc_planar_backward<F: Real>(
    field: &FrictionField<F>,
    lc0: &LcStatePlanar<F>,
    t_target: F,
    cfg: &IntegratorConfig<F>,
) -> Result<LcPlanarRun<F>, Error<F>> {
    integrate_lc_planar_with(field, lc0, F::zero(), t_target, cfg, None)
}

/// As [`integrate_lc_planar_backward`], threading the damping exponent and
/// optionally recording collinear collision crossings (signed component of
/// w along `collinear_dir`).
pub(crate) fn integrate_lc_planar_with<F: Real>(
    field: &FrictionField<F>,
    lc0: &LcStatePlanar<F>,
    ln_p0: F,
    t_target: F,
    cfg: &IntegratorConfig<F>,
    collinear_dir: Option<Vec2<F>>,
) -> Result<LcPlanarRun<F>, Error<F>> {
    cfg.validate()?;
    if field.gradient_decay_flagged() {
        return Err(Error::GradientLimitRefusal);
    }
    if lc0.manifold_residual().abs() > F::lit(1e-8) {
        return Err(Error::invalid(
            "initial regularized state is off the invariant manifold",
        ));
    }
    if !(t_target < lc0.t_accum) {
        return Err(Error::invalid("target time must precede the initial time"));
    }
    let sys = LcPlanarBackward {
        field,
        drift_warning: Cell::new(false),
    };
    let y0 = planar_y0(lc0, ln_p0);
    let mut events: Vec<EventFn<'_, F, LC_DIM>> = vec![EventFn {
        kind: EventKind::PhysicalTimeReached(t_target),
        crossing: Crossing::Falling,
        terminal: true,
        g: Box::new(move |_s, y: &[F; LC_DIM]| y[LC_TACC] - t_target),
    }];
    if let Some(dir) = collinear_dir {
        // Signed coordinate of w along the (complex square root of the)
        // ray: crosses zero exactly at a collision of collinear motion.
        let wdir = dir.to_complex().sqrt();
        let wdir = Vec2::from_complex(wdir / wdir.norm());
        events.push(EventFn {
            kind: EventKind::RegularizedRadiusZero,
            crossing: Crossing::Any,
            terminal: false,
            g: Box::new(move |_s, y: &[F; LC_DIM]| Vec2::new(y[LC_W], y[LC_W + 1]).dot(wdir)),
        });
    }
    let raw = integrate_raw(&sys, y0, F::lit(SIGMA_CAP), cfg, &mut events);
    match raw.terminal {
        RawTerminal::Event(EventKind::PhysicalTimeReached(_)) => {
            let sigma_end = raw.s_end;
            let final_state = planar_state_from(&raw.y_end, sigma_end, lc0.branch);
            Ok(LcPlanarRun {
                final_state,
                sigma_end,
                manifold_warning: sys.drift_warning.get(),
                raw,
                branch: lc0.branch,
            })
        }
        RawTerminal::StepFailure { s } => Err(Error::StepFailure {
            t: raw.eval(s)[LC_TACC],
        }),
        RawTerminal::MaxSteps { s } => Err(Error::MaxSteps {
            t: raw.eval(s)[LC_TACC],
            max_steps: cfg.max_steps,
        }),
        _ => Err(Error::FictitiousTimeCap { sigma: raw.s_end }),
    }
}

/// The extended backward position map through collisions.
///
/// Always integrates in the planar regularized chart (regardless of the
/// geometry) until the physical time reaches -T and returns x = w(S)^2.
/// For collinear data the result lies on the ray spanned by x0, and it is
/// invariant under the branch choice of the square root.
pub fn extended_position_map<F: Real>(
    field: &FrictionField<F>,
    x0: Vec2<F>,
    v0: Vec2<F>,
    t_flight: F,
    cfg: &IntegratorConfig<F>,
) -> Result<Vec2<F>, Error<F>> {
    extended_position_map_branch(field, x0, v0, t_flight, cfg, SqrtBranch::Plus)
}

/// As [`extended_position_map`] with an explicit square-root branch.
pub fn extended_position_map_branch<F: Real>(
    field: &FrictionField<F>,
    x0: Vec2<F>,
    v0: Vec2<F>,
    t_flight: F,
    cfg: &IntegratorConfig<F>,
    branch: SqrtBranch,
) -> Result<Vec2<F>, Error<F>> {
    if !(t_flight > F::zero()) {
        return Err(Error::invalid("flight time must be positive"));
    }
    let lc0 = goursat_planar(x0, v0, branch)?;
    let run = integrate_lc_planar_with(field, &lc0, F::zero(), -t_flight, cfg, None)?;
    Ok(lc_position(&run.final_state))
}

// ---------------------------------------------------------------------------
// One-dimensional flow
// ---------------------------------------------------------------------------

pub(crate) struct Lc1dBackward<'a, F: Real> {
    pub field: &'a FrictionField<F>,
}

impl<F: Real> Ode<F, LC1_DIM> for Lc1dBackward<'_, F> {
    fn rhs(&self, _sigma: F, y: &[F; LC1_DIM]) -> [F; LC1_DIM] {
        let u = y[LC1_U];
        let up = y[LC1_UP];
        let e = y[LC1_E];
        let r = u * u;
        let d = self.field.eval_radial(r);
        let upp = e * u * F::half() - d * r * up;
        let mut out = [F::zero(); LC1_DIM];
        out[LC1_U] = -up;
        out[LC1_UP] = -upp;
        out[LC1_E] = F::lit(4.0) * d * up * up;
        out[LC1_TACC] = -r;
        out
    }

    fn project(&self, y: &mut [F; LC1_DIM]) -> bool {
        let up2 = y[LC1_UP] * y[LC1_UP];
        let u2 = y[LC1_U] * y[LC1_U];
        let residual = F::two() * up2 - y[LC1_E] * u2 - F::one();
        if residual.abs() <= F::lit(1e-10) {
            return false;
        }
        let target = F::one() + y[LC1_E] * u2;
        if target <= F::zero() || up2 <= F::lit(1e-300) {
            return false;
        }
        let gamma = (target / (F::two() * up2)).sqrt();
        y[LC1_UP] = y[LC1_UP] * gamma;
        true
    }
}

pub(crate) enum Lc1dOutcome<F: Real> {
    /// Physical target time reached with the final state.
    Reached(LcState1D<F>),
    /// u crossed zero first: collision at the given physical time.
    Collided { t_col: F },
}

/// Integrates the 1-D regularized system backward from `lc0` until the
/// physical time reaches `t_target`, or (when `stop_at_collision`) until u
/// crosses zero.
pub(crate) fn integrate_lc_1d_backward<F: Real>(
    field: &FrictionField<F>,
    lc0: &LcState1D<F>,
    t_target: F,
    cfg: &IntegratorConfig<F>,
    stop_at_collision: bool,
) -> Result<(Lc1dOutcome<F>, RawTrajectory<F, LC1_DIM>), Error<F>> {
    cfg.validate()?;
    if !(t_target < lc0.t_accum) {
        return Err(Error::invalid("target time must precede the initial time"));
    }
    let sys = Lc1dBackward { field };
    let mut y0 = [F::zero(); LC1_DIM];
    y0[LC1_U] = lc0.u;
    y0[LC1_UP] = lc0.u_prime;
    y0[LC1_E] = lc0.energy;
    y0[LC1_TACC] = lc0.t_accum;
    let mut events: Vec<EventFn<'_, F, LC1_DIM>> = vec![
        EventFn {
            kind: EventKind::PhysicalTimeReached(t_target),
            crossing: Crossing::Falling,
            terminal: true,
            g: Box::new(move |_s, y: &[F; LC1_DIM]| y[LC1_TACC] - t_target),
        },
        EventFn {
            kind: EventKind::RegularizedRadiusZero,
            crossing: Crossing::Any,
            terminal: stop_at_collision,
            g: Box::new(|_s, y: &[F; LC1_DIM]| y[LC1_U]),
        },
    ];
    let raw = integrate_raw(&sys, y0, F::lit(SIGMA_CAP), cfg, &mut events);
    match raw.terminal {
        RawTerminal::Event(EventKind::PhysicalTimeReached(_)) => {
            let y = raw.y_end;
            Ok((
                Lc1dOutcome::Reached(LcState1D {
                    u: y[LC1_U],
                    u_prime: y[LC1_UP],
                    energy: y[LC1_E],
                    s: -raw.s_end,
                    t_accum: y[LC1_TACC],
                }),
                raw,
            ))
        }
        RawTerminal::Event(EventKind::RegularizedRadiusZero) => {
            let t_col = raw.y_end[LC1_TACC];
            Ok((Lc1dOutcome::Collided { t_col }, raw))
        }
        RawTerminal::StepFailure { s } => Err(Error::StepFailure {
            t: raw.eval(s)[LC1_TACC],
        }),
        RawTerminal::MaxSteps { s } => Err(Error::MaxSteps {
            t: raw.eval(s)[LC1_TACC],
            max_steps: cfg.max_steps,
        }),
        _ => Err(Error::FictitiousTimeCap { sigma: raw.s_end }),
    }
}

/// A backward radial run that ended in a collision, exposing the collision
/// time and the radius near it (for asymptotics studies).
pub struct RadialCollision<F: Real> {
    /// Collision time (the left endpoint of the maximal interval).
    pub alpha: F,
    raw: RawTrajectory<F, LC1_DIM>,
}

impl<F: Real> RadialCollision<F> {
    /// r(t) for t in (alpha, 0], by inverting the physical-time state.
    pub fn radius_at(&self, t: F) -> F {
        let mut lo = F::zero();
        let mut hi = self.raw.s_end;
        for _ in 0..90 {
            if hi - lo <= F::lit(1e-15) * (F::one() + hi) {
                break;
            }
            let mid = (lo + hi) * F::half();
            if self.raw.eval(mid)[LC1_TACC] > t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let u = self.raw.eval((lo + hi) * F::half())[LC1_U];
        u * u
    }
}

/// Integrates radial data (r0, rdot0) at t = 0 backward in the regularized
/// chart until the collision; errors when the solution survives past
/// `t_floor` instead.
pub fn collide_radial_backward<F: Real>(
    field: &FrictionField<F>,
    r0: F,
    rdot0: F,
    t_floor: F,
    cfg: &IntegratorConfig<F>,
) -> Result<RadialCollision<F>, Error<F>> {
    let h = rdot0 * rdot0 * F::half() - F::one() / r0;
    let lc0 = goursat_1d(r0, rdot0, h)?;
    let (outcome, raw) = integrate_lc_1d_backward(field, &lc0, t_floor, cfg, true)?;
    match outcome {
        Lc1dOutcome::Collided { t_col } => Ok(RadialCollision { alpha: t_col, raw }),
        Lc1dOutcome::Reached(_) => Err(Error::invalid(
            "backward radial solution survives past the floor time; no collision",
        )),
    }
}
