//! Backward-time integration of the damped Kepler system.
//!
//! Physical solutions live on [-T, 0] with data given at t = 0; the kernel
//! integrates the time-reversed field forward in tau = -t. The state vector
//! carries the angle lift and the damping exponent ln p as quadrature
//! states, so dense output covers every diagnostic.
//!
//! Trajectories may be stitched from a Cartesian piece and a regularized
//! (Levi-Civita) piece produced after a collision handoff; sampling,
//! diagnostics and event relocation work uniformly across both charts.

use num_complex::Complex;

use super::{
    integrate_raw, Crossing, EventFn, EventKind, IntegratorConfig, Ode, RawTerminal, RawTrajectory,
    Segment,
};
use crate::dynamics::{
    mat_from_slice, rhs_cartesian, rhs_with_variational, state_from_slice, Diagnostics, State,
    BASE_DIM, IDX_LNP, IDX_THETA, IDX_V, IDX_W, IDX_X, IDX_Z, VAR_DIM,
};
use crate::error::Error;
use crate::friction::FrictionField;
use crate::levi_civita::{LC_DIM, LC_E, LC_LNP, LC_TACC, LC_W, LC_WP};
use crate::real::Real;
use crate::vec2::{wrap_angle, Mat2, Vec2};

/// How a backward integration ended.
#[derive(Debug, Clone, Copy)]
pub enum Terminal<F: Real> {
    /// Reached t = -T.
    ReachedTarget,
    /// Radius fell below the collision threshold; state at the handoff.
    CollisionHandoff { t: F, state: State<F> },
    /// Step size underflow.
    StepFailure { t: F },
    /// A caller-requested terminal event fired.
    Event { t: F, kind: EventKind<F> },
}

/// Fully resolved point along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct PhasePoint<F: Real> {
    pub state: State<F>,
    /// Continuous angle lift anchored at theta(0) in (-pi, pi].
    pub theta: F,
    /// Accumulated damping exponent; p = exp(ln_p).
    pub ln_p: F,
    pub c: F,
    pub h: F,
}

impl<F: Real> PhasePoint<F> {
    pub fn p(&self) -> F {
        self.ln_p.exp()
    }

    pub fn r(&self) -> F {
        self.state.r()
    }

    pub fn diagnostics(&self) -> Diagnostics<F> {
        Diagnostics {
            r: self.state.r(),
            theta: self.theta,
            c: self.c,
            v_pot: -F::one() / self.state.r()
                + self.c * self.c / (F::two() * self.state.r() * self.state.r()),
            h: self.h,
            p: self.p(),
        }
    }
}

fn phase_from_cart<F: Real>(y: &[F; BASE_DIM], t: F) -> PhasePoint<F> {
    let state = state_from_slice(y, t);
    PhasePoint {
        state,
        theta: y[IDX_THETA],
        ln_p: y[IDX_LNP],
        c: state.c(),
        h: state.energy(),
    }
}

pub(crate) struct CartPiece<F: Real> {
    pub raw: RawTrajectory<F, BASE_DIM>,
    /// Physical time at tau = 0.
    pub t0: F,
}

impl<F: Real> CartPiece<F> {
    fn t_end(&self) -> F {
        self.t0 - self.raw.s_end
    }

    fn sample(&self, t: F) -> PhasePoint<F> {
        let tau = (self.t0 - t).max(F::zero()).min(self.raw.s_end);
        phase_from_cart(&self.raw.eval(tau), self.t0 - tau)
    }
}

/// Lifted increment of arg(w) over [sa, sb] of one dense segment.
///
/// Near a close passage of the origin w swings through almost pi inside a
/// tiny fictitious-time window (so x = w^2 winds by almost 2 pi, invisible
/// to endpoint comparison). arg(w) itself is wrap-detectable: whenever the
/// endpoint increment is ambiguous the interval is bisected on the dense
/// output. An interval that stays ambiguous below the refinement floor is
/// an exact sign flip of w — the collinear bounce, where x stays on its
/// ray — and contributes nothing. Data within ~1e-15 of collinear is
/// therefore lifted by the bouncing convention, matching the extended
/// position map.
fn warg_increment<F: Real>(
    seg: &Segment<F, LC_DIM>,
    sa: F,
    wa: Vec2<F>,
    sb: F,
    wb: Vec2<F>,
    depth: usize,
) -> F {
    let inc = wrap_angle(wb.angle() - wa.angle());
    if inc.abs() <= F::PI() * F::half() {
        return inc;
    }
    if depth == 0 {
        return F::zero();
    }
    let sm = (sa + sb) * F::half();
    let ym = seg.eval(sm);
    let wm = Vec2::new(ym[LC_W], ym[LC_W + 1]);
    warg_increment(seg, sa, wa, sm, wm, depth - 1) + warg_increment(seg, sm, wm, sb, wb, depth - 1)
}

/// theta increment of x = w^2 over [sa, sb] within one segment.
fn lc_theta_increment<F: Real>(seg: &Segment<F, LC_DIM>, sa: F, sb: F) -> F {
    let ya = seg.eval(sa);
    let yb = seg.eval(sb);
    let wa = Vec2::new(ya[LC_W], ya[LC_W + 1]);
    let wb = Vec2::new(yb[LC_W], yb[LC_W + 1]);
    F::two() * warg_increment(seg, sa, wa, sb, wb, 64)
}

/// Regularized continuation piece in fictitious time sigma.
pub(crate) struct LcPiece<F: Real> {
    pub raw: RawTrajectory<F, LC_DIM>,
    /// theta lift at the start of each segment, plus the final value.
    theta_nodes: Vec<(F, F)>,
}

impl<F: Real> LcPiece<F> {
    pub(crate) fn new(raw: RawTrajectory<F, LC_DIM>, theta0: F) -> Self {
        let mut theta_nodes = Vec::with_capacity(raw.segments.len() + 1);
        let mut theta = theta0;
        for seg in &raw.segments {
            theta_nodes.push((seg.s0, theta));
            let s_hi = (seg.s0 + seg.h).min(raw.s_end);
            theta = theta + lc_theta_increment(seg, seg.s0, s_hi);
        }
        theta_nodes.push((raw.s_end, theta));
        Self { raw, theta_nodes }
    }

    fn t0(&self) -> F {
        self.raw.y_first[LC_TACC]
    }

    fn t_end(&self) -> F {
        self.raw.y_end[LC_TACC]
    }

    /// Physical time is a strictly decreasing state component; invert it.
    fn sigma_of_t(&self, t: F) -> F {
        let mut lo = F::zero();
        let mut hi = self.raw.s_end;
        if t >= self.t0() {
            return lo;
        }
        if t <= self.t_end() {
            return hi;
        }
        for _ in 0..90 {
            if hi - lo <= F::lit(1e-13) * (F::one() + hi) {
                break;
            }
            let mid = (lo + hi) * F::half();
            if self.raw.eval(mid)[LC_TACC] > t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * F::half()
    }

    pub(crate) fn point_at_sigma(&self, sigma: F) -> PhasePoint<F> {
        let sigma = sigma.max(F::zero()).min(self.raw.s_end);
        let y = self.raw.eval(sigma);
        if self.raw.segments.is_empty() {
            return lc_phase(
                &y,
                self.theta_nodes.last().map(|n| n.1).unwrap_or(F::zero()),
            );
        }
        // segment index and theta at its start
        let mut idx = match self
            .theta_nodes
            .binary_search_by(|(s, _)| s.partial_cmp(&sigma).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        idx = idx.min(self.raw.segments.len() - 1);
        let seg = &self.raw.segments[idx];
        let theta = self.theta_nodes[idx].1 + lc_theta_increment(seg, seg.s0, sigma);
        lc_phase(&y, theta)
    }

    fn sample(&self, t: F) -> PhasePoint<F> {
        self.point_at_sigma(self.sigma_of_t(t))
    }
}

fn lc_phase<F: Real>(y: &[F; LC_DIM], theta: F) -> PhasePoint<F> {
    let w = Complex::new(y[LC_W], y[LC_W + 1]);
    let wp = Complex::new(y[LC_WP], y[LC_WP + 1]);
    let r = w.norm_sqr();
    let x = w * w;
    let v = w * wp * F::two() / r;
    let c = F::two() * (w.re * wp.im - w.im * wp.re);
    PhasePoint {
        state: State::new(Vec2::from_complex(x), Vec2::from_complex(v), y[LC_TACC]),
        theta,
        ln_p: y[LC_LNP],
        c,
        h: y[LC_E],
    }
}

pub(crate) enum Piece<F: Real> {
    Cartesian(CartPiece<F>),
    Regularized(LcPiece<F>),
}

impl<F: Real> Piece<F> {
    fn t0(&self) -> F {
        match self {
            Piece::Cartesian(p) => p.t0,
            Piece::Regularized(p) => p.t0(),
        }
    }

    fn t_end(&self) -> F {
        match self {
            Piece::Cartesian(p) => p.t_end(),
            Piece::Regularized(p) => p.t_end(),
        }
    }

    fn sample(&self, t: F) -> PhasePoint<F> {
        match self {
            Piece::Cartesian(p) => p.sample(t),
            Piece::Regularized(p) => p.sample(t),
        }
    }

    fn node_points(&self) -> Vec<PhasePoint<F>> {
        match self {
            Piece::Cartesian(p) => p
                .raw
                .nodes()
                .into_iter()
                .map(|(s, y)| phase_from_cart(&y, p.t0 - s))
                .collect(),
            Piece::Regularized(p) => p
                .raw
                .nodes()
                .into_iter()
                .map(|(s, _)| p.point_at_sigma(s))
                .collect(),
        }
    }
}

/// Dense backward solution over [t_start, 0] with events and diagnostics.
pub struct Trajectory<F: Real> {
    pub(crate) pieces: Vec<Piece<F>>,
    /// (physical time, kind), ordered by decreasing time of detection.
    pub events: Vec<(F, EventKind<F>)>,
    pub terminal: Terminal<F>,
    /// Tolerance the trajectory was produced at; sets the event noise floor.
    rtol: F,
}

impl<F: Real> Trajectory<F> {
    pub(crate) fn from_cartesian_raw(
        raw: RawTrajectory<F, BASE_DIM>,
        t0: F,
        r_collision: F,
        rtol: F,
    ) -> Self {
        let events = raw.events.iter().map(|&(s, k)| (t0 - s, k)).collect();
        let terminal = match raw.terminal {
            RawTerminal::Completed => Terminal::ReachedTarget,
            RawTerminal::StepFailure { s } => Terminal::StepFailure { t: t0 - s },
            RawTerminal::MaxSteps { s } => Terminal::StepFailure { t: t0 - s },
            RawTerminal::Event(kind) => {
                let t = t0 - raw.s_end;
                if kind == EventKind::RadiusBelow(r_collision) {
                    Terminal::CollisionHandoff {
                        t,
                        state: state_from_slice(&raw.y_end, t),
                    }
                } else {
                    Terminal::Event { t, kind }
                }
            }
        };
        Self {
            pieces: vec![Piece::Cartesian(CartPiece { raw, t0 })],
            events,
            terminal,
            rtol,
        }
    }

    /// Appends a regularized continuation after a collision handoff.
    pub(crate) fn append_regularized(&mut self, piece: LcPiece<F>, terminal: Terminal<F>) {
        for &(s, kind) in &piece.raw.events {
            // event times in the regularized chart come from the
            // accumulated physical time
            let mut seg_t = piece.raw.eval(s)[LC_TACC];
            if !seg_t.is_finite() {
                seg_t = piece.t_end();
            }
            self.events.push((seg_t, kind));
        }
        self.pieces.push(Piece::Regularized(piece));
        self.terminal = terminal;
    }

    /// Most negative time covered.
    pub fn t_start(&self) -> F {
        self.pieces.last().map(|p| p.t_end()).unwrap_or(F::zero())
    }

    pub fn reached_target(&self) -> bool {
        matches!(self.terminal, Terminal::ReachedTarget)
    }

    /// Maps a non-reached terminal to the corresponding error.
    pub fn ensure_reached(&self) -> Result<(), Error<F>> {
        match self.terminal {
            Terminal::ReachedTarget => Ok(()),
            Terminal::CollisionHandoff { t, .. } => Err(Error::CollisionBeforeT { t_col: t }),
            Terminal::StepFailure { t } => Err(Error::StepFailure { t }),
            Terminal::Event { t, kind } => match kind {
                EventKind::AngleSweepExceeds(_) => Err(Error::SweptFullTurn),
                _ => Err(Error::CollisionBeforeT { t_col: t }),
            },
        }
    }

    pub fn sample(&self, t: F) -> PhasePoint<F> {
        let t = t.min(F::zero()).max(self.t_start());
        for piece in &self.pieces {
            if t >= piece.t_end() {
                return piece.sample(t);
            }
        }
        self.pieces.last().unwrap().sample(t)
    }

    /// State at t = 0.
    pub fn start_point(&self) -> PhasePoint<F> {
        self.pieces[0].sample(self.pieces[0].t0())
    }

    /// State at the most negative covered time.
    pub fn end_point(&self) -> PhasePoint<F> {
        let last = self.pieces.last().unwrap();
        last.sample(last.t_end())
    }

    /// Accepted integration nodes, ascending in physical time.
    pub fn node_points(&self) -> Vec<PhasePoint<F>> {
        let mut pts: Vec<PhasePoint<F>> = Vec::new();
        for piece in &self.pieces {
            pts.extend(piece.node_points());
        }
        pts.sort_by(|a, b| a.state.t.partial_cmp(&b.state.t).unwrap());
        pts
    }

    /// theta(0) - theta(t_start).
    pub fn swept_angle(&self) -> F {
        self.start_point().theta - self.end_point().theta
    }

    /// Smallest radius over the accepted nodes.
    pub fn min_radius(&self) -> F {
        self.node_points()
            .iter()
            .fold(F::infinity(), |acc, p| acc.min(p.r()))
    }

    /// Diagnostics at uniformly spaced times, ascending from t_start to 0.
    pub fn sample_uniform(&self, n: usize) -> Vec<PhasePoint<F>> {
        let t0 = self.t_start();
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let f = F::from_usize(i).unwrap() / F::from_usize(n - 1).unwrap();
                self.sample(t0 * (F::one() - f))
            })
            .collect()
    }

    /// Earliest (most negative time) occurrence of an event kind, located
    /// on the dense output by bisection; `None` without a sign change.
    pub fn locate_event(&self, kind: EventKind<F>) -> Option<(F, State<F>)> {
        let theta0 = self.start_point().theta;
        let g = |p: &PhasePoint<F>| -> F { event_value(kind, p, theta0) };
        let nodes = self.node_points();
        for pair in nodes.windows(2) {
            let (ga, gb) = (g(&pair[0]), g(&pair[1]));
            if ga == F::zero() || !ga.is_finite() || !gb.is_finite() {
                continue;
            }
            let deadband = F::lit(1e-13).max(F::lit(50.0) * self.rtol);
            if ga.abs() <= deadband && gb.abs() <= deadband {
                continue;
            }
            if (ga > F::zero()) != (gb > F::zero()) || gb == F::zero() {
                let mut ta = pair[0].state.t;
                let mut tb = pair[1].state.t;
                let mut ga = ga;
                for _ in 0..90 {
                    if tb - ta <= F::lit(1e-12) {
                        break;
                    }
                    let tm = (ta + tb) * F::half();
                    let gm = g(&self.sample(tm));
                    if (ga > F::zero()) != (gm > F::zero()) || gm == F::zero() {
                        tb = tm;
                    } else {
                        ta = tm;
                        ga = gm;
                    }
                }
                let t_ev = (ta + tb) * F::half();
                return Some((t_ev, self.sample(t_ev).state));
            }
        }
        None
    }
}

fn event_value<F: Real>(kind: EventKind<F>, p: &PhasePoint<F>, theta0: F) -> F {
    match kind {
        EventKind::RadiusBelow(rc) => p.r() - rc,
        EventKind::RdotZero => {
            let scale = (p.r() * p.state.v.norm()).max(F::lit(1e-300));
            p.state.x.dot(p.state.v) / scale
        }
        EventKind::RadiusEquals(rt) => p.r() - rt,
        EventKind::AngleSweepExceeds(lim) => (p.theta - theta0).abs() - lim,
        EventKind::PhysicalTimeReached(tt) => p.state.t - tt,
        EventKind::RegularizedRadiusZero => p.r(),
    }
}

/// See [`Trajectory::locate_event`].
pub fn locate_event<F: Real>(traj: &Trajectory<F>, kind: EventKind<F>) -> Option<(F, State<F>)> {
    traj.locate_event(kind)
}

// ---------------------------------------------------------------------------
// Time-reversed systems
// ---------------------------------------------------------------------------

/// tau = -t reversal of the base system [x, v, theta, ln p].
pub(crate) struct CartesianBackward<'a, F: Real> {
    pub field: &'a FrictionField<F>,
}

fn nan_array<F: Real, const N: usize>() -> [F; N] {
    [F::nan(); N]
}

impl<F: Real> CartesianBackward<'_, F> {
    fn physical_rates(&self, y: &[F; BASE_DIM]) -> Option<[F; BASE_DIM]> {
        let s = state_from_slice(y, F::zero());
        let (xdot, xddot) = rhs_cartesian(self.field, &s).ok()?;
        let r2 = s.x.norm_sq();
        let mut out = [F::zero(); BASE_DIM];
        out[IDX_X] = xdot.x;
        out[IDX_X + 1] = xdot.y;
        out[IDX_V] = xddot.x;
        out[IDX_V + 1] = xddot.y;
        out[IDX_THETA] = s.c() / r2;
        out[IDX_LNP] = self.field.eval(s.x).ok()?;
        Some(out)
    }
}

impl<F: Real> Ode<F, BASE_DIM> for CartesianBackward<'_, F> {
    fn rhs(&self, _tau: F, y: &[F; BASE_DIM]) -> [F; BASE_DIM] {
        match self.physical_rates(y) {
            Some(mut rates) => {
                for r in rates.iter_mut() {
                    *r = -*r;
                }
                rates
            }
            None => nan_array(),
        }
    }

    fn accept_step(&self, _s0: F, y0: &[F; BASE_DIM], _s1: F, y1: &[F; BASE_DIM]) -> bool {
        (y1[IDX_THETA] - y0[IDX_THETA]).abs() <= F::PI() * F::half()
    }
}

/// tau = -t reversal of the base system plus the variational columns
/// W = dx/dv0, Z = dxdot/dv0.
pub(crate) struct CartesianVarBackward<'a, F: Real> {
    pub field: &'a FrictionField<F>,
}

impl<F: Real> Ode<F, VAR_DIM> for CartesianVarBackward<'_, F> {
    fn rhs(&self, _tau: F, y: &[F; VAR_DIM]) -> [F; VAR_DIM] {
        let s = state_from_slice(y, F::zero());
        let w = mat_from_slice(y, IDX_W);
        let z = mat_from_slice(y, IDX_Z);
        let (xdot, xddot, wdot, wddot) = match rhs_with_variational(self.field, &s, &w, &z) {
            Ok(v) => v,
            Err(_) => return nan_array(),
        };
        let d = match self.field.eval(s.x) {
            Ok(v) => v,
            Err(_) => return nan_array(),
        };
        let r2 = s.x.norm_sq();
        let mut out = [F::zero(); VAR_DIM];
        out[IDX_X] = -xdot.x;
        out[IDX_X + 1] = -xdot.y;
        out[IDX_V] = -xddot.x;
        out[IDX_V + 1] = -xddot.y;
        out[IDX_THETA] = -s.c() / r2;
        out[IDX_LNP] = -d;
        for j in 0..2 {
            let wd = wdot.col(j);
            let wdd = wddot.col(j);
            out[IDX_W + 2 * j] = -wd.x;
            out[IDX_W + 2 * j + 1] = -wd.y;
            out[IDX_Z + 2 * j] = -wdd.x;
            out[IDX_Z + 2 * j + 1] = -wdd.y;
        }
        out
    }

    fn accept_step(&self, _s0: F, y0: &[F; VAR_DIM], _s1: F, y1: &[F; VAR_DIM]) -> bool {
        (y1[IDX_THETA] - y0[IDX_THETA]).abs() <= F::PI() * F::half()
    }
}

pub(crate) fn cartesian_y0<F: Real>(state: &State<F>) -> [F; BASE_DIM] {
    let mut y0 = [F::zero(); BASE_DIM];
    y0[IDX_X] = state.x.x;
    y0[IDX_X + 1] = state.x.y;
    y0[IDX_V] = state.v.x;
    y0[IDX_V + 1] = state.v.y;
    y0[IDX_THETA] = state.x.angle();
    y0[IDX_LNP] = F::zero();
    y0
}

pub(crate) fn variational_y0<F: Real>(state: &State<F>, v_basis: Mat2<F>) -> [F; VAR_DIM] {
    let base = cartesian_y0(state);
    let mut y0 = [F::zero(); VAR_DIM];
    y0[..BASE_DIM].copy_from_slice(&base);
    for j in 0..2 {
        let col = v_basis.col(j);
        y0[IDX_Z + 2 * j] = col.x;
        y0[IDX_Z + 2 * j + 1] = col.y;
    }
    y0
}

/// Builds the event function of a kind over the Cartesian layout.
pub(crate) fn cartesian_event<'a, F: Real, const N: usize>(
    kind: EventKind<F>,
    terminal: bool,
    theta0: F,
) -> EventFn<'a, F, N> {
    let (crossing, g): (Crossing, super::EventValueFn<'a, F, N>) = match kind {
        EventKind::RadiusBelow(rc) => (
            Crossing::Falling,
            Box::new(move |_s, y: &[F; N]| Vec2::new(y[IDX_X], y[IDX_X + 1]).norm() - rc),
        ),
        EventKind::RdotZero => (
            Crossing::Any,
            Box::new(|_s, y: &[F; N]| {
                let x = Vec2::new(y[IDX_X], y[IDX_X + 1]);
                let v = Vec2::new(y[IDX_V], y[IDX_V + 1]);
                x.dot(v) / (x.norm() * v.norm()).max(F::lit(1e-300))
            }),
        ),
        EventKind::RadiusEquals(rt) => (
            Crossing::Any,
            Box::new(move |_s, y: &[F; N]| Vec2::new(y[IDX_X], y[IDX_X + 1]).norm() - rt),
        ),
        EventKind::AngleSweepExceeds(lim) => (
            Crossing::Rising,
            Box::new(move |_s, y: &[F; N]| (y[IDX_THETA] - theta0).abs() - lim),
        ),
        EventKind::PhysicalTimeReached(_) | EventKind::RegularizedRadiusZero => {
            panic!("event kind is not defined on the Cartesian chart")
        }
    };
    EventFn {
        kind,
        crossing,
        terminal,
        g,
    }
}

fn validate_start<F: Real>(
    state: &State<F>,
    t_flight: F,
    cfg: &IntegratorConfig<F>,
) -> Result<(), Error<F>> {
    cfg.validate()?;
    if state.x.norm() == F::zero() {
        return Err(Error::OriginSingularity);
    }
    if !(t_flight > F::zero()) {
        return Err(Error::invalid("flight time must be positive"));
    }
    Ok(())
}

/// Integrates backward from `state0` (data at t = 0) to t = -T, or until a
/// terminating event. The collision handoff event at `cfg.r_collision` is
/// always armed; callers may request further events.
pub fn integrate_backward<F: Real>(
    field: &FrictionField<F>,
    state0: &State<F>,
    t_flight: F,
    cfg: &IntegratorConfig<F>,
    extra_events: &[(EventKind<F>, bool)],
) -> Result<Trajectory<F>, Error<F>> {
    validate_start(state0, t_flight, cfg)?;
    let y0 = cartesian_y0(state0);
    let theta0 = y0[IDX_THETA];
    let sys = CartesianBackward { field };
    let mut events: Vec<EventFn<'_, F, BASE_DIM>> = vec![cartesian_event(
        EventKind::RadiusBelow(cfg.r_collision),
        true,
        theta0,
    )];
    for &(kind, terminal) in extra_events {
        events.push(cartesian_event(kind, terminal, theta0));
    }
    let raw = integrate_raw(&sys, y0, t_flight, cfg, &mut events);
    if let RawTerminal::MaxSteps { s } = raw.terminal {
        return Err(Error::MaxSteps {
            t: -s,
            max_steps: cfg.max_steps,
        });
    }
    Ok(Trajectory::from_cartesian_raw(
        raw,
        F::zero(),
        cfg.r_collision,
        cfg.rtol,
    ))
}

pub(crate) fn project_to_base<F: Real>(
    raw: &RawTrajectory<F, VAR_DIM>,
) -> RawTrajectory<F, BASE_DIM> {
    let shrink = |y: &[F; VAR_DIM]| -> [F; BASE_DIM] {
        let mut out = [F::zero(); BASE_DIM];
        out.copy_from_slice(&y[..BASE_DIM]);
        out
    };
    RawTrajectory {
        y_first: shrink(&raw.y_first),
        segments: raw
            .segments
            .iter()
            .map(|seg| super::Segment {
                s0: seg.s0,
                h: seg.h,
                cont: {
                    let mut cont = [[F::zero(); BASE_DIM]; 5];
                    for (dst, src) in cont.iter_mut().zip(seg.cont.iter()) {
                        dst.copy_from_slice(&src[..BASE_DIM]);
                    }
                    cont
                },
            })
            .collect(),
        s_end: raw.s_end,
        y_end: shrink(&raw.y_end),
        events: raw.events.clone(),
        terminal: raw.terminal,
        n_accepted: raw.n_accepted,
        n_rejected: raw.n_rejected,
    }
}

/// Backward integration of the variational flow.
///
/// Returns the trajectory and the Jacobian of the position at -T with
/// respect to the velocity at 0 (columns follow `v_basis`, usually the
/// identity).
pub fn integrate_variational_backward<F: Real>(
    field: &FrictionField<F>,
    state0: &State<F>,
    v_basis: Mat2<F>,
    t_flight: F,
    cfg: &IntegratorConfig<F>,
) -> Result<(Trajectory<F>, Mat2<F>), Error<F>> {
    validate_start(state0, t_flight, cfg)?;
    let y0 = variational_y0(state0, v_basis);
    let theta0 = y0[IDX_THETA];
    let sys = CartesianVarBackward { field };
    let mut events: Vec<EventFn<'_, F, VAR_DIM>> = vec![cartesian_event(
        EventKind::RadiusBelow(cfg.r_collision),
        true,
        theta0,
    )];
    let raw = integrate_raw(&sys, y0, t_flight, cfg, &mut events);
    match raw.terminal {
        RawTerminal::MaxSteps { s } => Err(Error::MaxSteps {
            t: -s,
            max_steps: cfg.max_steps,
        }),
        RawTerminal::StepFailure { s } => Err(Error::StepFailure { t: -s }),
        RawTerminal::Event(_) => Err(Error::CollisionBeforeT { t_col: -raw.s_end }),
        RawTerminal::Completed => {
            let jac = mat_from_slice(&raw.y_end, IDX_W);
            let base = project_to_base(&raw);
            Ok((
                Trajectory::from_cartesian_raw(base, F::zero(), cfg.r_collision, cfg.rtol),
                jac,
            ))
        }
    }
}

/// Crate-internal variant keeping the full variational raw trajectory,
/// including the collision-handoff outcome (used by the planar shooter).
pub(crate) fn integrate_variational_raw<F: Real>(
    field: &FrictionField<F>,
    state0: &State<F>,
    t_flight: F,
    cfg: &IntegratorConfig<F>,
    sweep_limit: Option<F>,
) -> Result<RawTrajectory<F, VAR_DIM>, Error<F>> {
    validate_start(state0, t_flight, cfg)?;
    let y0 = variational_y0(state0, Mat2::identity());
    let theta0 = y0[IDX_THETA];
    let sys = CartesianVarBackward { field };
    let mut events: Vec<EventFn<'_, F, VAR_DIM>> = vec![cartesian_event(
        EventKind::RadiusBelow(cfg.r_collision),
        true,
        theta0,
    )];
    if let Some(lim) = sweep_limit {
        events.push(cartesian_event(
            EventKind::AngleSweepExceeds(lim),
            true,
            theta0,
        ));
    }
    let raw = integrate_raw(&sys, y0, t_flight, cfg, &mut events);
    if let RawTerminal::MaxSteps { s } = raw.terminal {
        return Err(Error::MaxSteps {
            t: -s,
            max_steps: cfg.max_steps,
        });
    }
    Ok(raw)
}
