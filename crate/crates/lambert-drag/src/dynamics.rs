//! Right-hand sides and diagnostic functionals of the damped Kepler system.
//!
//! The equation of motion is xddot = -D(x)·xdot - x/|x|^3 on the punctured
//! plane. Angular momentum c = det(x, xdot) obeys cdot = -D·c and cannot
//! change sign; the total energy h = |xdot|^2/2 - 1/|x| is nonincreasing
//! since hdot = -D·(rdot^2 + c^2/r^2).

use crate::error::Error;
use crate::friction::FrictionField;
use crate::real::Real;
use crate::vec2::{wrap_angle, Mat2, Vec2};

/// Cartesian phase point at physical time t (t <= 0 by convention).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State<F> {
    pub x: Vec2<F>,
    pub v: Vec2<F>,
    pub t: F,
}

impl<F: Real> State<F> {
    pub fn new(x: Vec2<F>, v: Vec2<F>, t: F) -> Self {
        Self { x, v, t }
    }

    pub fn r(&self) -> F {
        self.x.norm()
    }

    /// Radial velocity <x, xdot>/|x|.
    pub fn rdot(&self) -> F {
        self.x.dot(self.v) / self.x.norm()
    }

    /// Angular momentum det(x, xdot).
    pub fn c(&self) -> F {
        self.x.det(self.v)
    }

    /// Total energy |xdot|^2/2 - 1/|x|.
    pub fn energy(&self) -> F {
        self.v.norm_sq() * F::half() - F::one() / self.x.norm()
    }
}

/// Diagnostic functionals along a trajectory point.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics<F> {
    pub r: F,
    /// Continuous lift of the polar angle.
    pub theta: F,
    pub c: F,
    /// Potential energy -1/r + c^2/(2 r^2).
    pub v_pot: F,
    /// Total energy rdot^2/2 + v_pot = |xdot|^2/2 - 1/r.
    pub h: F,
    /// Accumulated damping factor exp(-int_t^0 D).
    pub p: F,
}

/// (xdot, xddot) of the damped Kepler equation. Errors at x = 0.
pub fn rhs_cartesian<F: Real>(
    field: &FrictionField<F>,
    s: &State<F>,
) -> Result<(Vec2<F>, Vec2<F>), Error<F>> {
    let r2 = s.x.norm_sq();
    if r2 == F::zero() {
        return Err(Error::OriginSingularity);
    }
    let d = field.eval(s.x)?;
    let inv_r3 = F::one() / (r2 * r2.sqrt());
    let accel = -(s.v * d) - s.x * inv_r3;
    Ok((s.v, accel))
}

/// Time derivatives (xdot, xddot, Wdot, Wddot) of the state and the
/// variational matrices.
pub type VariationalRates<F> = (Vec2<F>, Vec2<F>, Mat2<F>, Mat2<F>);

/// Derivatives of the state together with a 2x2 matrix of variations.
///
/// Each column (w, wdot) of (W, Wdot) evolves by the linearization
/// wddot = -<grad D, w>·xdot - D·wdot - w/r^3 + 3<x, w>x/r^5.
pub fn rhs_with_variational<F: Real>(
    field: &FrictionField<F>,
    s: &State<F>,
    w: &Mat2<F>,
    wdot: &Mat2<F>,
) -> Result<VariationalRates<F>, Error<F>> {
    let (xdot, xddot) = rhs_cartesian(field, s)?;
    let d = field.eval(s.x)?;
    let gd = field.grad(s.x)?;
    let r2 = s.x.norm_sq();
    let inv_r3 = F::one() / (r2 * r2.sqrt());
    let inv_r5 = inv_r3 / r2;
    let col = |j: usize| -> Vec2<F> {
        let wj = w.col(j);
        let wdj = wdot.col(j);
        -(s.v * gd.dot(wj)) - wdj * d - wj * inv_r3 + s.x * (F::lit(3.0) * s.x.dot(wj) * inv_r5)
    };
    let wddot = Mat2::from_cols(col(0), col(1));
    Ok((xdot, xddot, *wdot, wddot))
}

/// Diagnostic functionals at a trajectory point.
///
/// `ln_p` is the accumulated damping exponent carried by the trajectory
/// (p = exp(ln_p)). The angle lift continues `theta_prev`; an increment
/// larger than pi/2 between consecutive samples is an error because the
/// lift becomes ambiguous (the integrator rejects such steps).
pub fn diagnostics<F: Real>(
    point: &State<F>,
    ln_p: F,
    theta_prev: Option<F>,
) -> Result<Diagnostics<F>, Error<F>> {
    let r = point.r();
    if r == F::zero() {
        return Err(Error::OriginSingularity);
    }
    let raw = point.x.angle();
    let theta = match theta_prev {
        None => raw,
        Some(prev) => {
            let inc = wrap_angle(raw - prev);
            if inc.abs() > F::PI() * F::half() {
                return Err(Error::AngularStepTooLarge);
            }
            prev + inc
        }
    };
    let c = point.c();
    let v_pot = -F::one() / r + c * c / (F::two() * r * r);
    Ok(Diagnostics {
        r,
        theta,
        c,
        v_pot,
        h: point.energy(),
        p: ln_p.exp(),
    })
}

/// State-vector layout shared by the Cartesian integrations:
/// [x1, x2, v1, v2, theta, ln p]; the variational system appends the
/// columns of W = dx/dv0 and Z = dxdot/dv0.
pub const IDX_X: usize = 0;
pub const IDX_V: usize = 2;
pub const IDX_THETA: usize = 4;
pub const IDX_LNP: usize = 5;
pub const BASE_DIM: usize = 6;
pub const IDX_W: usize = 6;
pub const IDX_Z: usize = 10;
pub const VAR_DIM: usize = 14;

pub(crate) fn state_from_slice<F: Real>(y: &[F], t: F) -> State<F> {
    State::new(
        Vec2::new(y[IDX_X], y[IDX_X + 1]),
        Vec2::new(y[IDX_V], y[IDX_V + 1]),
        t,
    )
}

pub(crate) fn mat_from_slice<F: Real>(y: &[F], base: usize) -> Mat2<F> {
    Mat2::from_cols(
        Vec2::new(y[base], y[base + 1]),
        Vec2::new(y[base + 2], y[base + 3]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circ_state() -> State<f64> {
        State::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), 0.0)
    }

    #[test]
    fn rhs_circular_orbit() {
        let zero = FrictionField::<f64>::zero();
        let (xdot, xddot) = rhs_cartesian(&zero, &circ_state()).unwrap();
        assert_eq!((xdot.x, xdot.y), (0.0, 1.0));
        assert!((xddot.x + 1.0).abs() < 1e-15 && xddot.y.abs() < 1e-15);
    }

    #[test]
    fn rhs_with_drag() {
        let field = FrictionField::constant(0.1).unwrap();
        let (_, xddot) = rhs_cartesian(&field, &circ_state()).unwrap();
        assert!((xddot.x + 1.0).abs() < 1e-15);
        assert!((xddot.y + 0.1).abs() < 1e-15);
    }

    #[test]
    fn rhs_at_rest() {
        let zero = FrictionField::<f64>::zero();
        let s = State::new(Vec2::new(2.0, 0.0), Vec2::zero(), 0.0);
        let (_, xddot) = rhs_cartesian(&zero, &s).unwrap();
        assert!((xddot.x + 0.25).abs() < 1e-15 && xddot.y.abs() < 1e-15);
    }

    #[test]
    fn rhs_errors_at_origin() {
        let zero = FrictionField::<f64>::zero();
        let s = State::new(Vec2::zero(), Vec2::new(1.0, 0.0), 0.0);
        assert!(matches!(
            rhs_cartesian(&zero, &s),
            Err(Error::OriginSingularity)
        ));
    }

    #[test]
    fn variational_circular_example() {
        let zero = FrictionField::<f64>::zero();
        let w = Mat2::from_cols(Vec2::new(1.0, 0.0), Vec2::zero());
        let wdot = Mat2::zero();
        let (_, _, _, wddot) = rhs_with_variational(&zero, &circ_state(), &w, &wdot).unwrap();
        let first = wddot.col(0);
        assert!((first.x - 2.0).abs() < 1e-15, "{:?}", first);
        assert!(first.y.abs() < 1e-15);
        let second = wddot.col(1);
        assert_eq!((second.x, second.y), (0.0, 0.0));
    }

    #[test]
    fn variational_zero_is_zero() {
        let field = FrictionField::radial_exp(0.5, 0.7).unwrap();
        let s = State::new(Vec2::new(0.3, -1.2), Vec2::new(0.4, 0.1), 0.0);
        let (_, _, wdot, wddot) =
            rhs_with_variational(&field, &s, &Mat2::zero(), &Mat2::zero()).unwrap();
        assert_eq!(wdot, Mat2::zero());
        assert_eq!(wddot, Mat2::zero());
    }

    #[test]
    fn diagnostics_examples() {
        let d = diagnostics(&circ_state(), 0.0, None).unwrap();
        assert_eq!(d.r, 1.0);
        assert_eq!(d.c, 1.0);
        assert!((d.h + 0.5).abs() < 1e-15);
        assert!((d.v_pot + 0.5).abs() < 1e-15);
        assert_eq!(d.p, 1.0);

        let s = State::<f64>::new(Vec2::new(0.0, 2.0), Vec2::new(0.0, 1.0), 0.0);
        let d = diagnostics(&s, 0.0, None).unwrap();
        assert_eq!(d.c, 0.0);
        assert!((s.rdot() - 1.0).abs() < 1e-15);
        assert!(d.h.abs() < 1e-15);

        let s = State::new(Vec2::new(1.0, 1.0), Vec2::new(-1.0, 1.0), 0.0);
        let d = diagnostics(&s, 0.0, None).unwrap();
        assert_eq!(d.c, 2.0);
        assert!((d.r - 2.0_f64.sqrt()).abs() < 1e-15);
        assert!((d.h - (1.0 - 1.0 / 2.0_f64.sqrt())).abs() < 1e-15);
        assert!((d.h - 0.292893).abs() < 1e-6);
    }

    #[test]
    fn energy_route_consistency() {
        // rdot^2/2 + v_pot must equal |xdot|^2/2 - 1/r.
        let s = State::<f64>::new(Vec2::new(0.7, -1.9), Vec2::new(1.3, 0.2), 0.0);
        let d = diagnostics(&s, 0.0, None).unwrap();
        let polar = s.rdot() * s.rdot() * 0.5 + d.v_pot;
        assert!((polar - d.h).abs() <= 1e-10 * d.h.abs().max(1.0));
    }

    #[test]
    fn theta_lift_guard() {
        let s = State::new(Vec2::new(-1.0, 1e-3), Vec2::zero(), 0.0);
        // Previous sample on the positive x-axis: increment close to pi.
        assert!(matches!(
            diagnostics(&s, 0.0, Some(0.0)),
            Err(Error::AngularStepTooLarge)
        ));
        // Small increment is lifted continuously across the branch cut.
        let prev = 3.0;
        let d = diagnostics(&s, 0.0, Some(prev)).unwrap();
        assert!((d.theta - (std::f64::consts::PI - 1e-3)).abs() < 1e-6);
    }
}
