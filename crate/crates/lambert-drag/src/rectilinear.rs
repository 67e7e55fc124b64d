//! The one-dimensional Lambert problem on a ray:
//! rddot + delta(r)·rdot = -1/r^2 with r(-T) = r_A, r(0) = r_B.
//!
//! The backward shooting map v -> r(-T) is a decreasing C1 diffeomorphism
//! from (-inf, beta) onto (0, inf): solutions exist past -T exactly for
//! final speeds below beta, and two distinct radial solutions intersect at
//! most once. Root finding is therefore globally safe: bracket, bisect,
//! then Newton with the variational derivative.

use crate::error::Error;
use crate::friction::FrictionField;
use crate::integrator::{
    integrate_raw, Crossing, EventFn, EventKind, IntegratorConfig, Ode, RawTerminal, RawTrajectory,
};
use crate::levi_civita::{
    goursat_1d, integrate_lc_1d_backward, Lc1dOutcome, LC1_DIM, LC1_TACC, LC1_U, LC1_UP,
};
use crate::real::Real;
use crate::vec2::Vec2;

/// Radial boundary-value problem along a fixed unit ray.
///
/// The 1-D friction profile is the planar field sampled along the ray:
/// delta(r) = D(r·direction).
#[derive(Clone, Copy)]
pub struct RadialProblem<'a, F: Real> {
    pub field: &'a FrictionField<F>,
    pub direction: Vec2<F>,
    pub r_a: F,
    pub r_b: F,
    pub t_flight: F,
}

impl<'a, F: Real> RadialProblem<'a, F> {
    pub fn new(
        field: &'a FrictionField<F>,
        direction: Vec2<F>,
        r_a: F,
        r_b: F,
        t_flight: F,
    ) -> Result<Self, Error<F>> {
        if !(r_a > F::zero()) || !(r_b > F::zero()) || !(t_flight > F::zero()) {
            return Err(Error::invalid("r_A, r_B and T must be positive"));
        }
        if direction.norm() == F::zero() {
            return Err(Error::invalid("ray direction must be nonzero"));
        }
        Ok(Self {
            field,
            direction: direction.unit(),
            r_a,
            r_b,
            t_flight,
        })
    }

    fn delta(&self, r: F) -> F {
        self.field.eval_radial(r)
    }

    fn delta_deriv(&self, r: F) -> F {
        self.field.deriv_radial(r)
    }
}

/// Backward evolution of [r, rdot, rho, zeta] where (rho, zeta) is the
/// variation of (r, rdot) with respect to the final speed.
struct RadialBackward<'a, 'b, F: Real> {
    problem: &'b RadialProblem<'a, F>,
}

impl<F: Real> Ode<F, 4> for RadialBackward<'_, '_, F> {
    fn rhs(&self, _tau: F, y: &[F; 4]) -> [F; 4] {
        let r = y[0];
        if !(r > F::zero()) {
            return [F::nan(); 4];
        }
        let v = y[1];
        let rho = y[2];
        let zeta = y[3];
        let d = self.problem.delta(r);
        let dp = self.problem.delta_deriv(r);
        let inv_r2 = F::one() / (r * r);
        [
            -v,
            d * v + inv_r2,
            -zeta,
            dp * v * rho + d * zeta - F::two() * rho * inv_r2 / r,
        ]
    }
}

/// Outcome of one backward radial shot.
#[derive(Debug, Clone, Copy)]
pub enum RadialOutcome<F> {
    /// r(-T) together with the variational derivative d r(-T)/d v
    /// (unavailable when the shot was completed in the regularized chart).
    Reached { r_end: F, dr_dv: Option<F> },
    /// The solution hit the origin at t_col before reaching -T.
    Collided { t_col: F },
}

/// Dense record of one radial shot: a Cartesian-chart piece and an
/// optional regularized continuation below the handoff radius.
pub struct RadialTrajectory<F: Real> {
    cart: RawTrajectory<F, 4>,
    lc: Option<RawTrajectory<F, LC1_DIM>>,
    t_handoff: Option<F>,
}

impl<F: Real> RadialTrajectory<F> {
    /// r at physical time t in [-T, 0].
    pub fn r_at(&self, t: F) -> F {
        match (&self.lc, self.t_handoff) {
            (Some(lc), Some(th)) if t < th => {
                // invert the physical-time accumulator
                let mut lo = F::zero();
                let mut hi = lc.s_end;
                for _ in 0..80 {
                    let mid = (lo + hi) * F::half();
                    if lc.eval(mid)[LC1_TACC] > t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let u = lc.eval((lo + hi) * F::half())[LC1_U];
                u * u
            }
            _ => self.cart.eval(-t)[0],
        }
    }

    pub fn rdot_at(&self, t: F) -> F {
        match (&self.lc, self.t_handoff) {
            (Some(lc), Some(th)) if t < th => {
                let mut lo = F::zero();
                let mut hi = lc.s_end;
                for _ in 0..80 {
                    let mid = (lo + hi) * F::half();
                    if lc.eval(mid)[LC1_TACC] > t {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let y = lc.eval((lo + hi) * F::half());
                F::two() * y[LC1_UP] / y[LC1_U]
            }
            _ => self.cart.eval(-t)[1],
        }
    }

    pub fn t_start(&self) -> F {
        match (&self.lc, self.t_handoff) {
            (Some(lc), Some(_)) => lc.y_end[LC1_TACC],
            _ => -self.cart.s_end,
        }
    }
}

/// One backward radial shot with its dense record.
pub struct RadialFlow<F: Real> {
    pub outcome: RadialOutcome<F>,
    pub trajectory: RadialTrajectory<F>,
}

/// Integrates the radial equation backward from (r_B, v) at t = 0.
///
/// Below the collision handoff radius the shot continues in the
/// regularized chart; a collision is declared exactly when u crosses zero.
pub fn radial_flow<F: Real>(
    problem: &RadialProblem<'_, F>,
    v: F,
    cfg: &IntegratorConfig<F>,
) -> Result<RadialFlow<F>, Error<F>> {
    cfg.validate()?;
    if !v.is_finite() {
        return Err(Error::invalid("final speed must be finite"));
    }
    let sys = RadialBackward { problem };
    let y0 = [problem.r_b, v, F::zero(), F::one()];
    let mut events: Vec<EventFn<'_, F, 4>> = vec![EventFn {
        kind: EventKind::RadiusBelow(cfg.r_collision),
        crossing: Crossing::Falling,
        terminal: true,
        g: Box::new(move |_s, y: &[F; 4]| y[0] - cfg.r_collision),
    }];
    let raw = integrate_raw(&sys, y0, problem.t_flight, cfg, &mut events);
    match raw.terminal {
        RawTerminal::Completed => {
            let outcome = RadialOutcome::Reached {
                r_end: raw.y_end[0],
                dr_dv: Some(raw.y_end[2]),
            };
            Ok(RadialFlow {
                outcome,
                trajectory: RadialTrajectory {
                    cart: raw,
                    lc: None,
                    t_handoff: None,
                },
            })
        }
        RawTerminal::Event(EventKind::RadiusBelow(_)) => {
            let t_handoff = -raw.s_end;
            let r_h = raw.y_end[0];
            let rdot_h = raw.y_end[1];
            let h = rdot_h * rdot_h * F::half() - F::one() / r_h;
            let mut lc0 = goursat_1d(r_h, rdot_h, h)?;
            lc0.t_accum = t_handoff;
            let (outcome, lc_raw) =
                integrate_lc_1d_backward(problem.field, &lc0, -problem.t_flight, cfg, true)?;
            let trajectory = RadialTrajectory {
                cart: raw,
                lc: Some(lc_raw),
                t_handoff: Some(t_handoff),
            };
            match outcome {
                Lc1dOutcome::Reached(end) => Ok(RadialFlow {
                    outcome: RadialOutcome::Reached {
                        r_end: end.u * end.u,
                        dr_dv: None,
                    },
                    trajectory,
                }),
                Lc1dOutcome::Collided { t_col } => Ok(RadialFlow {
                    outcome: RadialOutcome::Collided { t_col },
                    trajectory,
                }),
            }
        }
        RawTerminal::StepFailure { s } => Err(Error::StepFailure { t: -s }),
        RawTerminal::MaxSteps { s } => Err(Error::MaxSteps {
            t: -s,
            max_steps: cfg.max_steps,
        }),
        RawTerminal::Event(_) => unreachable!("no other terminal events are armed"),
    }
}

fn reaches<F: Real>(
    problem: &RadialProblem<'_, F>,
    v: F,
    cfg: &IntegratorConfig<F>,
) -> Result<bool, Error<F>> {
    Ok(matches!(
        radial_flow(problem, v, cfg)?.outcome,
        RadialOutcome::Reached { .. }
    ))
}

const MAX_DOUBLINGS: usize = 200;

/// Brackets the survival threshold beta: returns (v_lo, v_hi) with
/// v_hi - v_lo <= tol, where the shot from v_lo reaches -T and the shot
/// from v_hi collides. The bracket is grown exponentially from v = 0.
pub fn find_beta<F: Real>(
    problem: &RadialProblem<'_, F>,
    tol: F,
    cfg: &IntegratorConfig<F>,
) -> Result<(F, F), Error<F>> {
    if !(tol > F::zero()) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let zero_reaches = reaches(problem, F::zero(), cfg)?;
    let (mut v_lo, mut v_hi);
    if zero_reaches {
        v_lo = F::zero();
        let mut step = F::one();
        let mut n = 0;
        loop {
            let v = v_lo + step;
            if !reaches(problem, v, cfg)? {
                v_hi = v;
                break;
            }
            v_lo = v;
            step = step * F::two();
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::BracketExpansion(n));
            }
        }
    } else {
        v_hi = F::zero();
        let mut step = F::one();
        let mut n = 0;
        loop {
            let v = v_hi - step;
            if reaches(problem, v, cfg)? {
                v_lo = v;
                break;
            }
            v_hi = v;
            step = step * F::two();
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::BracketExpansion(n));
            }
        }
    }
    while v_hi - v_lo > tol {
        let mid = (v_lo + v_hi) * F::half();
        if reaches(problem, mid, cfg)? {
            v_lo = mid;
        } else {
            v_hi = mid;
        }
    }
    Ok((v_lo, v_hi))
}

/// Solved radial boundary-value problem.
pub struct RadialSolution<F: Real> {
    /// Final radial speed rdot(0) of the unique connecting solution.
    pub v_final: F,
    pub trajectory: RadialTrajectory<F>,
    /// Interval known to contain the survival threshold beta.
    pub beta_bracket: (F, F),
    /// Variational multiplier d r(-T)/d v at the solution.
    pub r_prime: F,
    /// Strict negativity of the multiplier.
    pub nondegenerate: bool,
    /// |r(-T) - r_A| of the returned solution.
    pub residual: F,
}

/// Solves r(-T) = r_A by bracketed bisection plus a Newton polish with the
/// variational derivative. The shooting map is strictly decreasing, so a
/// sign-changing bracket always exists.
pub fn solve_rectilinear<F: Real>(
    problem: &RadialProblem<'_, F>,
    tol: F,
    cfg: &IntegratorConfig<F>,
) -> Result<RadialSolution<F>, Error<F>> {
    if !(tol > F::zero()) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    // g(v) = r(-T) - r_A, extended by -r_A past beta (collisions).
    let eval = |v: F| -> Result<(F, Option<F>), Error<F>> {
        Ok(match radial_flow(problem, v, cfg)?.outcome {
            RadialOutcome::Reached { r_end, dr_dv } => (r_end - problem.r_a, dr_dv),
            RadialOutcome::Collided { .. } => (-problem.r_a, None),
        })
    };

    // Bracket a sign change by exponential expansion from v = 0
    // (g decreases in v, so expand upward while positive and downward
    // while nonpositive).
    let (g0, _) = eval(F::zero())?;
    let (mut va, mut vb);
    if g0 > F::zero() {
        va = F::zero();
        let mut step = F::one();
        let mut n = 0;
        loop {
            let v = va + step;
            let (g, _) = eval(v)?;
            if g <= F::zero() {
                vb = v;
                break;
            }
            va = v;
            step = step * F::two();
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::BracketExpansion(n));
            }
        }
    } else {
        vb = F::zero();
        let mut step = F::one();
        let mut n = 0;
        loop {
            let v = vb - step;
            let (g, _) = eval(v)?;
            if g > F::zero() {
                va = v;
                break;
            }
            vb = v;
            step = step * F::two();
            n += 1;
            if n > MAX_DOUBLINGS {
                return Err(Error::BracketExpansion(n));
            }
        }
    }

    // Bisection down to a short bracket, then guarded Newton.
    let mut v = (va + vb) * F::half();
    let mut g;
    let mut dg;
    loop {
        let width_goal = F::lit(1e-3) * (F::one() + va.abs().max(vb.abs()));
        if vb - va <= width_goal {
            break;
        }
        let (gm, _) = eval(v)?;
        if gm > F::zero() {
            va = v;
        } else {
            vb = v;
        }
        v = (va + vb) * F::half();
    }
    let mut prev: Option<(F, F)> = None;
    let out = eval(v)?;
    g = out.0;
    dg = out.1;
    let mut best = (v, g, dg);
    for _ in 0..80 {
        if g.abs() <= tol {
            break;
        }
        // maintain the bracket
        if g > F::zero() {
            va = v;
        } else {
            vb = v;
        }
        let newton = match (dg, prev) {
            (Some(d), _) if d != F::zero() => Some(v - g / d),
            (None, Some((vp, gp))) if gp != g => Some(v - g * (v - vp) / (g - gp)),
            _ => None,
        };
        let v_next = match newton {
            Some(cand) if cand > va && cand < vb => cand,
            _ => (va + vb) * F::half(),
        };
        prev = Some((v, g));
        v = v_next;
        let out = eval(v)?;
        g = out.0;
        dg = out.1;
        if g.abs() < best.1.abs() {
            best = (v, g, dg);
        }
    }
    if g.abs() > best.1.abs() {
        v = best.0;
        g = best.1;
        dg = best.2;
    }
    if g.abs() > tol {
        return Err(Error::NonConvergence(80));
    }

    let flow = radial_flow(problem, v, cfg)?;
    let r_prime = dg.unwrap_or(F::zero());
    let beta_bracket = find_beta(problem, F::half() * (F::one() + v.abs()), cfg)?;
    Ok(RadialSolution {
        v_final: v,
        trajectory: flow.trajectory,
        beta_bracket,
        r_prime,
        nondegenerate: r_prime < F::zero(),
        residual: g.abs(),
    })
}
