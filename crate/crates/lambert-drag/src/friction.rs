//! Friction coefficient fields D(x) and their admissibility diagnostics.
//!
//! The drag force is -D(x)·xdot with D nonnegative, continuously
//! differentiable and bounded by `d_star`. Built-in kinds are radial; the
//! tabulated kind interpolates with a shape-preserving C1 cubic, so the
//! interpolant stays inside the data hull and the nonnegativity and
//! `d_star` bounds hold everywhere.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::real::Real;
use crate::vec2::Vec2;

/// Monotone (Fritsch-Carlson) cubic Hermite interpolant.
///
/// Endpoint derivatives are forced to zero so that the constant extension
/// used outside the knot range is globally C1.
#[derive(Debug, Clone)]
pub struct Pchip<F> {
    xs: Vec<F>,
    ys: Vec<F>,
    ds: Vec<F>,
}

impl<F: Real> Pchip<F> {
    pub fn new(xs: Vec<F>, ys: Vec<F>) -> Result<Self, Error<F>> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::invalid("table needs at least two (r, D) samples"));
        }
        for i in 1..n {
            if !(xs[i] > xs[i - 1]) {
                return Err(Error::invalid("table radii must be strictly increasing"));
            }
        }
        let mut slopes = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            slopes.push((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
        }
        let mut ds = vec![F::zero(); n];
        for i in 1..n - 1 {
            let (s0, s1) = (slopes[i - 1], slopes[i]);
            if s0 * s1 > F::zero() {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                let w1 = F::two() * h1 + h0;
                let w2 = h1 + F::two() * h0;
                ds[i] = (w1 + w2) / (w1 / s0 + w2 / s1);
            }
        }
        Ok(Self { xs, ys, ds })
    }

    fn segment(&self, x: F) -> usize {
        let mut lo = 0usize;
        let mut hi = self.xs.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Evaluates the interpolant; constant beyond the knot range.
    pub fn eval(&self, x: F) -> F {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = F::two() * t3 - F::lit(3.0) * t2 + F::one();
        let h10 = t3 - F::two() * t2 + t;
        let h01 = -F::two() * t3 + F::lit(3.0) * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.ds[i] + h01 * self.ys[i + 1] + h11 * h * self.ds[i + 1]
    }

    /// Derivative of the interpolant; zero beyond the knot range.
    pub fn deriv(&self, x: F) -> F {
        let n = self.xs.len();
        if x <= self.xs[0] || x >= self.xs[n - 1] {
            return F::zero();
        }
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let six = F::lit(6.0);
        let dh00 = six * t2 - six * t;
        let dh10 = F::lit(3.0) * t2 - F::lit(4.0) * t + F::one();
        let dh01 = -dh00;
        let dh11 = F::lit(3.0) * t2 - F::two() * t;
        (dh00 * self.ys[i] + dh01 * self.ys[i + 1]) / h + dh10 * self.ds[i] + dh11 * self.ds[i + 1]
    }
}

#[derive(Debug, Clone)]
pub enum FieldKind<F> {
    Zero,
    Constant {
        d0: F,
    },
    /// D(x) = d0 * exp(-k * |x|)
    RadialExp {
        d0: F,
        k: F,
    },
    RadialTable {
        table: Pchip<F>,
    },
}

/// Result of the small-radius gradient decay check.
///
/// The admissibility condition asks sqrt(r)·|grad D| to vanish as r -> 0;
/// `limit_estimate` is the sampled value at `r_min` and `vanishing` is the
/// trend verdict. Advisory only: solving is never blocked, but the
/// regularized chart refuses flagged fields.
#[derive(Debug, Clone, Copy)]
pub struct GradientDecayReport<F> {
    pub r_min: F,
    /// Maximum of sqrt(r)·|grad D| over the whole sample grid.
    pub max_over_grid: F,
    /// sqrt(r)·|grad D| at the smallest sampled radius.
    pub limit_estimate: F,
    /// Whether the sampled values decay toward zero at the small end.
    pub vanishing: bool,
}

#[derive(Debug, Clone)]
pub struct FrictionField<F: Real> {
    kind: FieldKind<F>,
    d_star: F,
    grad_available: bool,
    gradient_decay_ok: bool,
}

/// Default r_min used for the cached gradient-decay verdict.
const DECAY_CHECK_R_MIN: f64 = 1e-6;

impl<F: Real> FrictionField<F> {
    pub fn zero() -> Self {
        Self::from_kind(FieldKind::Zero, F::zero(), true)
    }

    pub fn constant(d0: F) -> Result<Self, Error<F>> {
        if d0 < F::zero() || !d0.is_finite() {
            return Err(Error::invalid("constant friction must be nonnegative"));
        }
        Ok(Self::from_kind(FieldKind::Constant { d0 }, d0, true))
    }

    pub fn radial_exp(d0: F, k: F) -> Result<Self, Error<F>> {
        if d0 < F::zero() || k < F::zero() || !d0.is_finite() || !k.is_finite() {
            return Err(Error::invalid("radial_exp parameters must be nonnegative"));
        }
        Ok(Self::from_kind(FieldKind::RadialExp { d0, k }, d0, true))
    }

    pub fn radial_table(samples: &[(F, F)]) -> Result<Self, Error<F>> {
        let mut d_star = F::zero();
        let mut xs = Vec::with_capacity(samples.len());
        let mut ys = Vec::with_capacity(samples.len());
        for &(r, d) in samples {
            if !(r > F::zero()) {
                return Err(Error::invalid("table radii must be positive"));
            }
            if d < F::zero() || !d.is_finite() {
                return Err(Error::invalid("table friction values must be nonnegative"));
            }
            d_star = d_star.max(d);
            xs.push(r);
            ys.push(d);
        }
        let table = Pchip::new(xs, ys)?;
        Ok(Self::from_kind(
            FieldKind::RadialTable { table },
            d_star,
            true,
        ))
    }

    fn from_kind(kind: FieldKind<F>, d_star: F, grad_available: bool) -> Self {
        let mut field = Self {
            kind,
            d_star,
            grad_available,
            gradient_decay_ok: true,
        };
        field.gradient_decay_ok = field
            .check_gradient_decay(F::lit(DECAY_CHECK_R_MIN))
            .vanishing;
        field
    }

    /// Drops the analytic gradient and falls back to central differences.
    pub fn with_numeric_gradient(mut self) -> Self {
        self.grad_available = false;
        self
    }

    /// Upper bound of D over the punctured plane.
    pub fn d_star(&self) -> F {
        self.d_star
    }

    pub fn grad_available(&self) -> bool {
        self.grad_available
    }

    /// Cached verdict of [`FrictionField::check_gradient_decay`] at r_min = 1e-6.
    pub fn gradient_decay_flagged(&self) -> bool {
        !self.gradient_decay_ok
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, FieldKind::Zero)
    }

    pub fn kind(&self) -> &FieldKind<F> {
        &self.kind
    }

    /// Radial profile; all built-in kinds depend on |x| only.
    fn profile(&self, r: F) -> F {
        match &self.kind {
            FieldKind::Zero => F::zero(),
            FieldKind::Constant { d0 } => *d0,
            FieldKind::RadialExp { d0, k } => *d0 * (-*k * r).exp(),
            FieldKind::RadialTable { table } => table.eval(r),
        }
    }

    fn profile_deriv(&self, r: F) -> F {
        match &self.kind {
            FieldKind::Zero | FieldKind::Constant { .. } => F::zero(),
            FieldKind::RadialExp { d0, k } => -*k * *d0 * (-*k * r).exp(),
            FieldKind::RadialTable { table } => table.deriv(r),
        }
    }

    /// D(x). Errors at the origin.
    pub fn eval(&self, x: Vec2<F>) -> Result<F, Error<F>> {
        let r = x.norm();
        if r == F::zero() {
            return Err(Error::OriginSingularity);
        }
        Ok(self.profile(r))
    }

    /// D as a function of the radius along a fixed ray (r > 0).
    pub fn eval_radial(&self, r: F) -> F {
        self.profile(r)
    }

    /// dD/dr along a fixed ray (r > 0).
    pub fn deriv_radial(&self, r: F) -> F {
        if self.grad_available {
            self.profile_deriv(r)
        } else {
            let h = F::lit(1e-7).max(F::lit(1e-7) * r);
            if r > h + h {
                (self.profile(r + h) - self.profile(r - h)) / (F::two() * h)
            } else {
                (self.profile(r + h) - self.profile(r)) / h
            }
        }
    }

    /// grad D(x). Errors at the origin. Falls back to central differences
    /// with step max(1e-7, 1e-7·|x|) when no analytic gradient is available.
    pub fn grad(&self, x: Vec2<F>) -> Result<Vec2<F>, Error<F>> {
        let r = x.norm();
        if r == F::zero() {
            return Err(Error::OriginSingularity);
        }
        if self.grad_available {
            let dr = self.profile_deriv(r);
            return Ok(x * (dr / r));
        }
        let h = F::lit(1e-7).max(F::lit(1e-7) * r);
        let ex = Vec2::new(h, F::zero());
        let ey = Vec2::new(F::zero(), h);
        let gx = (self.eval(x + ex)? - self.eval(x - ex)?) / (F::two() * h);
        let gy = (self.eval(x + ey)? - self.eval(x - ey)?) / (F::two() * h);
        Ok(Vec2::new(gx, gy))
    }

    /// Samples sqrt(r)·|grad D| on a log grid over [r_min, 1] and reports
    /// whether the values decay at the small end. Advisory only.
    pub fn check_gradient_decay(&self, r_min: F) -> GradientDecayReport<F> {
        let r_min = r_min.max(F::lit(1e-300)).min(F::lit(0.5));
        let r_max = F::one();
        let n = 61usize;
        let log_lo = r_min.ln();
        let log_hi = r_max.ln();
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let t = F::from_usize(i).unwrap() / F::from_usize(n - 1).unwrap();
            let r = (log_lo + (log_hi - log_lo) * t).exp();
            let g = r.sqrt() * self.deriv_radial(r).abs();
            values.push((r, g));
        }
        let limit_estimate = values[0].1;
        let max_over_grid = values.iter().fold(F::zero(), |acc, &(_, g)| acc.max(g));
        // Decay test: the value at r_min must sit clearly below the value
        // two decades up (or be negligibly small outright).
        let r_cmp = (r_min * F::lit(100.0)).min(r_max);
        let g_cmp = values
            .iter()
            .find(|&&(r, _)| r >= r_cmp)
            .map(|&(_, g)| g)
            .unwrap_or(max_over_grid);
        let abs_floor = F::lit(1e-9) * (F::one() + max_over_grid);
        let vanishing = limit_estimate <= abs_floor || limit_estimate <= F::half() * g_cmp;
        GradientDecayReport {
            r_min,
            max_over_grid,
            limit_estimate,
            vanishing,
        }
    }
}

/// Serializable field description matching the JSON schema:
/// `{"kind": "constant" | "radial_exp" | "radial_table" | "zero", ...}`,
/// tables as arrays of `[r, D]` pairs with strictly increasing r.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant { d0: f64 },
    RadialExp { d0: f64, k: f64 },
    RadialTable { table: Vec<[f64; 2]> },
}

impl FieldSpec {
    pub fn build<F: Real>(&self) -> Result<FrictionField<F>, Error<F>> {
        match self {
            FieldSpec::Zero => Ok(FrictionField::zero()),
            FieldSpec::Constant { d0 } => FrictionField::constant(F::lit(*d0)),
            FieldSpec::RadialExp { d0, k } => FrictionField::radial_exp(F::lit(*d0), F::lit(*k)),
            FieldSpec::RadialTable { table } => {
                let samples: Vec<(F, F)> =
                    table.iter().map(|p| (F::lit(p[0]), F::lit(p[1]))).collect();
                FrictionField::radial_table(&samples)
            }
        }
    }
}

impl<F: Real> FrictionField<F> {
    pub fn to_spec(&self) -> FieldSpec {
        match &self.kind {
            FieldKind::Zero => FieldSpec::Zero,
            FieldKind::Constant { d0 } => FieldSpec::Constant {
                d0: d0.to_f64().unwrap(),
            },
            FieldKind::RadialExp { d0, k } => FieldSpec::RadialExp {
                d0: d0.to_f64().unwrap(),
                k: k.to_f64().unwrap(),
            },
            FieldKind::RadialTable { table } => FieldSpec::RadialTable {
                table: table
                    .xs
                    .iter()
                    .zip(table.ys.iter())
                    .map(|(r, d)| [r.to_f64().unwrap(), d.to_f64().unwrap()])
                    .collect(),
            },
        }
    }
}
