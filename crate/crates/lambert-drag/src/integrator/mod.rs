//! Adaptive Runge-Kutta integration with dense output and event location.
//!
//! The kernel integrates forward in a nonnegative variable; backward-time
//! physics is expressed by the callers as forward integration of the
//! time-reversed field (see [`integrate_backward`]). Events are located on
//! the dense output by bisection to 1e-12 followed by a secant polish.

mod backward;
mod dopri5;

pub use backward::{
    integrate_backward, integrate_variational_backward, locate_event, PhasePoint, Terminal,
    Trajectory,
};
pub(crate) use backward::{integrate_variational_raw, project_to_base, LcPiece};

use crate::error::Error;
use crate::real::Real;

/// Tolerances and limits for one integration.
#[derive(Debug, Clone, Copy)]
pub struct IntegratorConfig<F> {
    pub rtol: F,
    pub atol: F,
    /// Initial step; `None` selects it automatically.
    pub h_init: Option<F>,
    pub h_min: F,
    pub max_steps: usize,
    /// Radius below which Cartesian integration hands off to the
    /// regularized chart.
    pub r_collision: F,
}

impl<F: Real> Default for IntegratorConfig<F> {
    fn default() -> Self {
        Self {
            rtol: F::lit(1e-10),
            atol: F::lit(1e-12),
            h_init: None,
            h_min: F::lit(1e-14),
            max_steps: 1_000_000,
            r_collision: F::lit(1e-3),
        }
    }
}

impl<F: Real> IntegratorConfig<F> {
    pub fn validate(&self) -> Result<(), Error<F>> {
        if !(self.rtol > F::zero()) || !(self.atol > F::zero()) {
            return Err(Error::invalid("rtol and atol must be positive"));
        }
        if let Some(h0) = self.h_init {
            if !(self.h_min < h0) {
                return Err(Error::invalid("h_min must be smaller than h_init"));
            }
        }
        Ok(())
    }

    /// Same configuration with tolerances divided by `factor`.
    pub fn tightened(&self, factor: F) -> Self {
        Self {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
            ..*self
        }
    }
}

/// Events recognized along trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind<F> {
    /// Radius dropping below the collision handoff threshold.
    RadiusBelow(F),
    /// Radial velocity crossing zero.
    RdotZero,
    /// Radius crossing a target value.
    RadiusEquals(F),
    /// Accumulated |theta - theta(0)| exceeding a limit.
    AngleSweepExceeds(F),
    /// Accumulated physical time reaching a target (regularized chart).
    PhysicalTimeReached(F),
    /// The regularized radius u (or w) crossing zero: a collision.
    RegularizedRadiusZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Any,
    Rising,
    Falling,
}

/// Boxed scalar function of (s, y) used for event detection.
pub(crate) type EventValueFn<'a, F, const N: usize> = Box<dyn Fn(F, &[F; N]) -> F + 'a>;

/// Scalar event function over the raw state.
pub(crate) struct EventFn<'a, F, const N: usize> {
    pub kind: EventKind<F>,
    pub crossing: Crossing,
    pub terminal: bool,
    pub g: EventValueFn<'a, F, N>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RawTerminal<F> {
    Completed,
    Event(EventKind<F>),
    StepFailure { s: F },
    MaxSteps { s: F },
}

/// One accepted step: dense coefficients over [s0, s0 + h].
#[derive(Debug, Clone)]
pub(crate) struct Segment<F, const N: usize> {
    pub s0: F,
    pub h: F,
    pub cont: [[F; N]; 5],
}

impl<F: Real, const N: usize> Segment<F, N> {
    pub fn eval(&self, s: F) -> [F; N] {
        let theta = ((s - self.s0) / self.h).max(F::zero()).min(F::one());
        dopri5::dense_eval(&self.cont, theta)
    }

    pub fn start_state(&self) -> [F; N] {
        self.cont[0]
    }
}

/// Dense solution of one integration in its own independent variable.
#[derive(Debug, Clone)]
pub(crate) struct RawTrajectory<F, const N: usize> {
    pub y_first: [F; N],
    pub segments: Vec<Segment<F, N>>,
    pub s_end: F,
    pub y_end: [F; N],
    pub events: Vec<(F, EventKind<F>)>,
    pub terminal: RawTerminal<F>,
    pub n_accepted: usize,
    pub n_rejected: usize,
}

impl<F: Real, const N: usize> RawTrajectory<F, N> {
    pub fn eval(&self, s: F) -> [F; N] {
        let s = s.max(F::zero()).min(self.s_end);
        if self.segments.is_empty() {
            return self.y_first;
        }
        // binary search for the segment containing s
        let mut lo = 0usize;
        let mut hi = self.segments.len() - 1;
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.segments[mid].s0 <= s {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        self.segments[lo].eval(s)
    }

    /// Accepted nodes (s, y) in increasing s, including both ends.
    pub fn nodes(&self) -> Vec<(F, [F; N])> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        for seg in &self.segments {
            if seg.s0 < self.s_end {
                out.push((seg.s0, seg.start_state()));
            }
        }
        out.push((self.s_end, self.y_end));
        out
    }

    #[cfg(test)]
    pub fn reached_end(&self) -> bool {
        matches!(self.terminal, RawTerminal::Completed)
    }
}

/// Right-hand side plus step hooks.
///
/// `rhs` must return non-finite values (rather than panic) outside the
/// domain; the step-size controller then rejects the step.
pub(crate) trait Ode<F: Real, const N: usize> {
    fn rhs(&self, s: F, y: &[F; N]) -> [F; N];

    /// Veto hook evaluated on every error-accepted step; returning false
    /// rejects the step and halves it.
    fn accept_step(&self, _s0: F, _y0: &[F; N], _s1: F, _y1: &[F; N]) -> bool {
        true
    }

    /// Post-acceptance projection (e.g. invariant-manifold rescaling).
    /// Returns true when the state was modified.
    fn project(&self, _y: &mut [F; N]) -> bool {
        false
    }
}

fn rms_scaled<F: Real, const N: usize>(v: &[F; N], sc: &[F; N]) -> F {
    let mut acc = F::zero();
    for i in 0..N {
        let q = v[i] / sc[i];
        acc = acc + q * q;
    }
    (acc / F::from_usize(N).unwrap()).sqrt()
}

/// Step-size guess following the usual two-evaluation heuristic.
fn initial_step<F: Real, const N: usize, S: Ode<F, N>>(
    sys: &S,
    y0: &[F; N],
    f0: &[F; N],
    span: F,
    rtol: F,
    atol: F,
) -> F {
    let mut sc = [F::zero(); N];
    for i in 0..N {
        sc[i] = atol + rtol * y0[i].abs();
    }
    let d0 = rms_scaled(y0, &sc);
    let d1 = rms_scaled(f0, &sc);
    let mut h0 = if d0 < F::lit(1e-5) || d1 < F::lit(1e-5) {
        F::lit(1e-6)
    } else {
        F::lit(1e-2) * d0 / d1
    };
    h0 = h0.min(span);
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] = y1[i] + f0[i] * h0;
    }
    let f1 = sys.rhs(h0, &y1);
    let mut df = [F::zero(); N];
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = rms_scaled(&df, &sc) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= F::lit(1e-15) {
        (h0 * F::lit(1e-3)).max(F::lit(1e-6))
    } else {
        (F::lit(1e-2) / dm).powf(F::lit(0.2))
    };
    (h0 * F::lit(100.0)).min(h1).min(span)
}

fn qualifies<F: Real>(ga: F, gb: F, crossing: Crossing, deadband: F) -> bool {
    if ga == F::zero() || !ga.is_finite() || !gb.is_finite() {
        return false;
    }
    // deadband: an event function hovering at the integration noise floor
    // (e.g. the radial velocity on an exactly circular orbit) is not a
    // crossing
    if ga.abs() <= deadband && gb.abs() <= deadband {
        return false;
    }
    match crossing {
        Crossing::Any => (ga > F::zero()) != (gb > F::zero()) || gb == F::zero(),
        Crossing::Rising => ga < F::zero() && gb >= F::zero(),
        Crossing::Falling => ga > F::zero() && gb <= F::zero(),
    }
}

/// Bisection to 1e-12 in s, then a short secant polish.
fn locate_in_segment<F: Real, const N: usize>(
    seg: &Segment<F, N>,
    g: &dyn Fn(F, &[F; N]) -> F,
    mut sa: F,
    mut ga: F,
    mut sb: F,
    mut gb: F,
) -> F {
    if gb == F::zero() {
        return sb;
    }
    for _ in 0..90 {
        if sb - sa <= F::lit(1e-12) {
            break;
        }
        let sm = (sa + sb) * F::half();
        let gm = g(sm, &seg.eval(sm));
        if (ga > F::zero()) != (gm > F::zero()) || gm == F::zero() {
            sb = sm;
            gb = gm;
        } else {
            sa = sm;
            ga = gm;
        }
    }
    // secant polish within the bracket
    let (lo, hi) = (sa, sb);
    let mut s_prev = sa;
    let mut g_prev = ga;
    let mut s_cur = sb;
    let mut g_cur = gb;
    for _ in 0..4 {
        let denom = g_cur - g_prev;
        if denom == F::zero() {
            break;
        }
        let s_new = (s_cur - g_cur * (s_cur - s_prev) / denom).max(lo).min(hi);
        let g_new = g(s_new, &seg.eval(s_new));
        s_prev = s_cur;
        g_prev = g_cur;
        s_cur = s_new;
        g_cur = g_new;
        if g_cur == F::zero() {
            break;
        }
    }
    if g_cur.abs() <= g_prev.abs() {
        s_cur
    } else {
        s_prev
    }
}

/// Adaptive driver: integrates from s = 0 to s = span or a terminal event.
pub(crate) fn integrate_raw<F: Real, const N: usize, S: Ode<F, N>>(
    sys: &S,
    y0: [F; N],
    span: F,
    cfg: &IntegratorConfig<F>,
    events: &mut [EventFn<'_, F, N>],
) -> RawTrajectory<F, N> {
    let safe = F::lit(0.9);
    let fac_min = F::lit(0.2);
    let fac_max = F::lit(5.0);
    let fifth = F::lit(-0.2);

    let mut traj = RawTrajectory {
        y_first: y0,
        segments: Vec::new(),
        s_end: F::zero(),
        y_end: y0,
        events: Vec::new(),
        terminal: RawTerminal::Completed,
        n_accepted: 0,
        n_rejected: 0,
    };

    let mut y = y0;
    let mut s = F::zero();
    let mut f0 = sys.rhs(s, &y);
    let mut h = cfg
        .h_init
        .unwrap_or_else(|| initial_step(sys, &y, &f0, span, cfg.rtol, cfg.atol))
        .min(span)
        .max(cfg.h_min);
    let deadband = F::lit(50.0) * cfg.rtol;
    let mut g_prev: Vec<F> = events.iter().map(|e| (e.g)(s, &y)).collect();
    let mut last_rejected = false;
    let mut rhs = |t: F, yy: &[F; N]| sys.rhs(t, yy);

    loop {
        if traj.n_accepted + traj.n_rejected >= cfg.max_steps {
            traj.terminal = RawTerminal::MaxSteps { s };
            break;
        }
        if h < cfg.h_min {
            traj.terminal = RawTerminal::StepFailure { s };
            break;
        }
        let last_step = s + h >= span;
        let h_eff = if last_step { span - s } else { h };

        let step = dopri5::rk_step(&mut rhs, s, &y, h_eff, &f0, cfg.rtol, cfg.atol);

        if !(step.err <= F::one()) {
            traj.n_rejected += 1;
            last_rejected = true;
            let fac = if step.err.is_finite() {
                (safe * step.err.powf(fifth)).max(fac_min)
            } else {
                F::lit(0.1)
            };
            h = h_eff * fac;
            continue;
        }

        let s1 = s + h_eff;
        if !sys.accept_step(s, &y, s1, &step.y1) {
            traj.n_rejected += 1;
            last_rejected = true;
            h = h_eff * F::half();
            continue;
        }

        let cont = dopri5::dense_coefficients(&y, &step.y1, h_eff, &step.k);
        let seg = Segment {
            s0: s,
            h: h_eff,
            cont,
        };

        let mut y1 = step.y1;
        let f1 = if sys.project(&mut y1) {
            sys.rhs(s1, &y1)
        } else {
            step.k[6]
        };

        traj.n_accepted += 1;

        // Event detection on [s, s1] with a midpoint refinement.
        let s_mid = s + h_eff * F::half();
        let y_mid = seg.eval(s_mid);
        let mut crossings: Vec<(F, usize)> = Vec::new();
        for (idx, ev) in events.iter().enumerate() {
            let ga = g_prev[idx];
            let gm = (ev.g)(s_mid, &y_mid);
            let gb = (ev.g)(s1, &y1);
            let hit = if qualifies(ga, gm, ev.crossing, deadband) {
                Some(locate_in_segment(&seg, ev.g.as_ref(), s, ga, s_mid, gm))
            } else if qualifies(gm, gb, ev.crossing, deadband) {
                Some(locate_in_segment(&seg, ev.g.as_ref(), s_mid, gm, s1, gb))
            } else {
                None
            };
            if let Some(s_ev) = hit {
                crossings.push((s_ev, idx));
            }
            g_prev[idx] = gb;
        }
        crossings.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        let mut terminated: Option<(F, EventKind<F>)> = None;
        for (s_ev, idx) in crossings {
            let ev = &events[idx];
            traj.events.push((s_ev, ev.kind));
            if ev.terminal {
                terminated = Some((s_ev, ev.kind));
                break;
            }
        }

        traj.segments.push(seg);

        if let Some((s_ev, kind)) = terminated {
            traj.s_end = s_ev;
            traj.y_end = traj.segments.last().unwrap().eval(s_ev);
            traj.terminal = RawTerminal::Event(kind);
            break;
        }

        y = y1;
        f0 = f1;
        s = s1;

        if last_step {
            traj.s_end = span;
            traj.y_end = y;
            traj.terminal = RawTerminal::Completed;
            break;
        }

        let fac = (safe * step.err.powf(fifth))
            .max(fac_min)
            .min(if last_rejected { F::one() } else { fac_max });
        last_rejected = false;
        h = h_eff * fac;
    }

    if matches!(
        traj.terminal,
        RawTerminal::StepFailure { .. } | RawTerminal::MaxSteps { .. }
    ) {
        traj.s_end = s;
        traj.y_end = y;
    }
    traj
}
