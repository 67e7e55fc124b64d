//! Independent frictionless two-body reference.
//!
//! Closed-form Kepler propagation via the universal-variable formulation
//! with Stumpff functions, plus a classical single-revolution Lambert
//! solver. Used in tests and cross-validation only; deliberately shares no
//! numerical machinery with the adaptive integrator.

use crate::error::Error;
use crate::real::Real;
use crate::vec2::{wrap_angle, Mat2, Vec2};

/// Conic class of a two-body state (mu = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConicClass {
    Elliptic,
    Parabolic,
    Hyperbolic,
    Rectilinear,
}

/// Energy, angular momentum and conic class of a state.
#[derive(Debug, Clone, Copy)]
pub struct KeplerElements<F> {
    pub h_energy: F,
    pub c_momentum: F,
    pub class: ConicClass,
}

impl<F: Real> KeplerElements<F> {
    pub fn from_state(x: Vec2<F>, v: Vec2<F>) -> Self {
        let r = x.norm();
        let h = v.norm_sq() * F::half() - F::one() / r;
        let c = x.det(v);
        let class = if c.abs() < F::lit(1e-12) {
            ConicClass::Rectilinear
        } else if h < -F::lit(1e-12) {
            ConicClass::Elliptic
        } else if h > F::lit(1e-12) {
            ConicClass::Hyperbolic
        } else {
            ConicClass::Parabolic
        };
        Self {
            h_energy: h,
            c_momentum: c,
            class,
        }
    }
}

/// Stumpff functions C(z) and S(z), series near zero.
fn stumpff<F: Real>(z: F) -> (F, F) {
    if z.abs() < F::lit(1e-6) {
        // C = 1/2 - z/24 + z^2/720, S = 1/6 - z/120 + z^2/5040
        let c = F::half() - z / F::lit(24.0) + z * z / F::lit(720.0);
        let s = F::lit(1.0 / 6.0) - z / F::lit(120.0) + z * z / F::lit(5040.0);
        (c, s)
    } else if z > F::zero() {
        let sq = z.sqrt();
        let c = (F::one() - sq.cos()) / z;
        let s = (sq - sq.sin()) / (sq * z);
        (c, s)
    } else {
        let sq = (-z).sqrt();
        let c = (sq.cosh() - F::one()) / (-z);
        let s = (sq.sinh() - sq) / (sq * (-z));
        (c, s)
    }
}

/// Universal Kepler time-of-flight for anomaly chi from (r0, vr0, alpha).
fn universal_tof<F: Real>(chi: F, r0: F, sigma0: F, alpha: F) -> (F, F) {
    let z = alpha * chi * chi;
    let (c, s) = stumpff(z);
    let t = sigma0 * chi * chi * c + (F::one() - alpha * r0) * chi * chi * chi * s + r0 * chi;
    // dt/dchi = r(chi)
    let r = sigma0 * chi * (F::one() - z * s) + (F::one() - alpha * r0) * chi * chi * c + r0;
    (t, r)
}

/// Exact two-body propagation (mu = 1) by Newton iteration on the
/// universal anomaly, safeguarded by bisection (the time of flight is
/// monotone in the anomaly). Converges to 1e-13.
pub fn propagate_universal<F: Real>(
    x0: Vec2<F>,
    v0: Vec2<F>,
    dt: F,
) -> Result<(Vec2<F>, Vec2<F>), Error<F>> {
    let r0 = x0.norm();
    if r0 == F::zero() {
        return Err(Error::OriginSingularity);
    }
    if dt == F::zero() {
        return Ok((x0, v0));
    }
    let sigma0 = x0.dot(v0);
    let alpha = F::two() / r0 - v0.norm_sq();

    // initial guess: elliptic linearization, else dt/r0
    let mut chi = if alpha.abs() > F::lit(1e-8) {
        alpha * dt
    } else {
        dt / r0
    };
    if chi == F::zero() {
        chi = dt / r0;
    }

    // bracket the root of t(chi) = dt by expansion
    let tol = F::lit(1e-13) * (F::one() + dt.abs());
    let mut lo = chi;
    let mut hi = chi;
    let (mut t_lo, _) = universal_tof(lo, r0, sigma0, alpha);
    let (mut t_hi, _) = universal_tof(hi, r0, sigma0, alpha);
    let mut grow = chi.abs().max(F::lit(1e-3));
    let mut expansions = 0;
    while t_lo > dt {
        lo = lo - grow;
        grow = grow * F::two();
        t_lo = universal_tof(lo, r0, sigma0, alpha).0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NonConvergence(expansions));
        }
    }
    let mut grow = chi.abs().max(F::lit(1e-3));
    while t_hi < dt {
        hi = hi + grow;
        grow = grow * F::two();
        t_hi = universal_tof(hi, r0, sigma0, alpha).0;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NonConvergence(expansions));
        }
    }

    let mut converged = false;
    for _ in 0..50 {
        let (t, r) = universal_tof(chi, r0, sigma0, alpha);
        let f = t - dt;
        if f.abs() <= tol {
            converged = true;
            break;
        }
        if f > F::zero() {
            hi = chi;
        } else {
            lo = chi;
        }
        let newton = chi - f / r;
        chi = if r > F::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * F::half()
        };
    }
    if !converged {
        return Err(Error::NonConvergence(50));
    }

    let z = alpha * chi * chi;
    let (c, s) = stumpff(z);
    let f = F::one() - chi * chi * c / r0;
    let g = dt - chi * chi * chi * s;
    let x = x0 * f + v0 * g;
    let r = x.norm();
    let fdot = chi * (z * s - F::one()) / (r * r0);
    let gdot = F::one() - chi * chi * c / r;
    let v = x0 * fdot + v0 * gdot;
    Ok((x, v))
}

/// Transfer direction for the reference Lambert solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleDirection {
    Ccw,
    Cw,
}

fn mirror<F: Real>(v: Vec2<F>) -> Vec2<F> {
    Vec2::new(v.x, -v.y)
}

/// Solves the frictionless Lambert problem from A (at t = -T) to B (at
/// t = 0) for the requested rotation direction and returns the arrival
/// velocity at B (single revolution).
///
/// Uses the universal-variables time-of-flight iteration and finishes with
/// a Newton polish on [`propagate_universal`]; near half-revolution
/// transfers (where the classical iteration degenerates) are solved by the
/// polish alone, seeded from the one-parameter conic family through two
/// antipodal radii.
pub fn lambert_universal<F: Real>(
    a: Vec2<F>,
    b: Vec2<F>,
    t_flight: F,
    direction: OracleDirection,
) -> Result<Vec2<F>, Error<F>> {
    if !(t_flight > F::zero()) {
        return Err(Error::invalid("T must be positive"));
    }
    if a.norm() == F::zero() || b.norm() == F::zero() {
        return Err(Error::OriginSingularity);
    }
    // clockwise transfers are the mirror image of counterclockwise ones
    if direction == OracleDirection::Cw {
        let v = lambert_universal(mirror(a), mirror(b), t_flight, OracleDirection::Ccw)?;
        return Ok(mirror(v));
    }

    // counterclockwise transfer angle in [0, 2 pi)
    let mut dtheta = wrap_angle(b.angle() - a.angle());
    if dtheta < F::zero() {
        dtheta = dtheta + F::two() * F::PI();
    }
    if dtheta.abs() < F::lit(1e-12) || (dtheta - F::two() * F::PI()).abs() < F::lit(1e-12) {
        return Err(Error::invalid(
            "endpoints are ray-aligned; the transfer plane is degenerate",
        ));
    }

    let v2_guess = if dtheta.sin().abs() < F::lit(1e-3) {
        antipodal_seed(a, b, dtheta)
    } else {
        curtis_arrival_velocity(a, b, t_flight, dtheta)?
    };

    polish_arrival_velocity(a, b, t_flight, v2_guess)
}

/// Arrival velocity of the conic with semi-latus rectum forced by two
/// near-antipodal radii (p = 2 r1 r2/(r1 + r2), zero radial velocity seed).
fn antipodal_seed<F: Real>(a: Vec2<F>, b: Vec2<F>, _dtheta: F) -> Vec2<F> {
    let r1 = a.norm();
    let r2 = b.norm();
    let p = F::two() * r1 * r2 / (r1 + r2);
    let vt = p.sqrt() / r2;
    // counterclockwise: velocity along the CCW tangent at B
    let tangent = Vec2::new(-b.y, b.x) * (F::one() / r2);
    tangent * vt
}

/// Universal-variables time-of-flight iteration (bisection + Newton on z).
fn curtis_arrival_velocity<F: Real>(
    a: Vec2<F>,
    b: Vec2<F>,
    t_flight: F,
    dtheta: F,
) -> Result<Vec2<F>, Error<F>> {
    let r1 = a.norm();
    let r2 = b.norm();
    let acoef = dtheta.sin() * (r1 * r2 / (F::one() - dtheta.cos())).sqrt();

    let y = |z: F| -> F {
        let (c, s) = stumpff(z);
        r1 + r2 + acoef * (z * s - F::one()) / c.sqrt()
    };
    let tof = |z: F| -> F {
        let (c, s) = stumpff(z);
        let yz = y(z);
        (yz / c).powf(F::lit(1.5)) * s + acoef * yz.sqrt()
    };

    // bracket: tof is increasing in z; keep y(z) > 0
    let four_pi2 = F::lit(4.0) * F::PI() * F::PI();
    let mut lo = -four_pi2;
    while y(lo) < F::zero() {
        lo = lo * F::half();
        if lo.abs() < F::lit(1e-8) {
            break;
        }
    }
    let mut hi = four_pi2 * F::lit(0.9999);
    let mut n = 0;
    while tof(hi) < t_flight {
        hi = hi + (four_pi2 - hi) * F::half();
        n += 1;
        if n > 200 {
            return Err(Error::NonConvergence(n));
        }
    }
    while tof(lo) > t_flight {
        lo = lo - (hi - lo);
        n += 1;
        if n > 200 {
            return Err(Error::NonConvergence(n));
        }
    }

    let mut z = (lo + hi) * F::half();
    let mut converged = false;
    for _ in 0..120 {
        let f = tof(z) - t_flight;
        if f.abs() <= F::lit(1e-12) * (F::one() + t_flight) {
            converged = true;
            break;
        }
        if f > F::zero() {
            hi = z;
        } else {
            lo = z;
        }
        // derivative by central difference in z (robust across the
        // parabolic point)
        let dz = F::lit(1e-7) * (F::one() + z.abs());
        let df = (tof(z + dz) - tof(z - dz)) / (F::two() * dz);
        let newton = z - f / df;
        z = if df > F::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * F::half()
        };
    }
    if !converged {
        return Err(Error::NonConvergence(120));
    }

    let yz = y(z);
    let g = acoef * yz.sqrt();
    let gdot = F::one() - yz / r2;
    // v2 = (gdot * r2vec - r1vec)/g
    Ok((b * gdot - a) * (F::one() / g))
}

/// Newton on the propagated miss distance, using a finite-difference
/// Jacobian of the closed-form propagation.
fn polish_arrival_velocity<F: Real>(
    a: Vec2<F>,
    b: Vec2<F>,
    t_flight: F,
    mut v2: Vec2<F>,
) -> Result<Vec2<F>, Error<F>> {
    let scale = F::one() + a.norm();
    for _ in 0..60 {
        let (x, _) = propagate_universal(b, v2, -t_flight)?;
        let miss = x - a;
        if miss.norm() <= F::lit(1e-13) * scale {
            return Ok(v2);
        }
        let h = F::lit(1e-7) * (F::one() + v2.norm());
        let (xpx, _) = propagate_universal(b, v2 + Vec2::new(h, F::zero()), -t_flight)?;
        let (xpy, _) = propagate_universal(b, v2 + Vec2::new(F::zero(), h), -t_flight)?;
        let jac = Mat2::from_cols((xpx - x) * (F::one() / h), (xpy - x) * (F::one() / h));
        let delta = jac.solve(-miss).ok_or(Error::NonConvergence(60))?;
        // keep steps bounded to stay on the same conic branch
        let max_step = F::one() + v2.norm();
        let delta = if delta.norm() > max_step {
            delta * (max_step / delta.norm())
        } else {
            delta
        };
        v2 += delta;
    }
    let (x, _) = propagate_universal(b, v2, -t_flight)?;
    if (x - a).norm() <= F::lit(1e-10) * scale {
        Ok(v2)
    } else {
        Err(Error::NonConvergence(60))
    }
}
