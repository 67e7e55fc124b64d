//! Plane vectors and 2x2 matrices.
//!
//! Positions and velocities live in the punctured plane; the regularized
//! chart identifies the plane with the complex numbers, so conversions to
//! [`num_complex::Complex`] are provided.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex;

use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<F> {
    pub x: F,
    pub y: F,
}

impl<F: Real> Vec2<F> {
    #[inline]
    pub fn new(x: F, y: F) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero())
    }

    #[inline]
    pub fn dot(self, other: Self) -> F {
        self.x * other.x + self.y * other.y
    }

    /// Signed area det(self, other); the z-component of the cross product.
    #[inline]
    pub fn det(self, other: Self) -> F {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm_sq(self) -> F {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> F {
        self.norm_sq().sqrt()
    }

    /// Principal argument in (-pi, pi].
    #[inline]
    pub fn angle(self) -> F {
        self.y.atan2(self.x)
    }

    #[inline]
    pub fn unit(self) -> Self {
        let n = self.norm();
        Self::new(self.x / n, self.y / n)
    }

    #[inline]
    pub fn from_angle(theta: F) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    #[inline]
    pub fn to_complex(self) -> Complex<F> {
        Complex::new(self.x, self.y)
    }

    #[inline]
    pub fn from_complex(z: Complex<F>) -> Self {
        Self::new(z.re, z.im)
    }
}

impl<F: Real> Add for Vec2<F> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl<F: Real> AddAssign for Vec2<F> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<F: Real> Sub for Vec2<F> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl<F: Real> SubAssign for Vec2<F> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<F: Real> Neg for Vec2<F> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<F: Real> Mul<F> for Vec2<F> {
    type Output = Self;
    #[inline]
    fn mul(self, s: F) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// 2x2 matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2<F> {
    pub a: F,
    pub b: F,
    pub c: F,
    pub d: F,
}

impl<F: Real> Mat2<F> {
    #[inline]
    pub fn new(a: F, b: F, c: F, d: F) -> Self {
        Self { a, b, c, d }
    }

    #[inline]
    pub fn identity() -> Self {
        Self::new(F::one(), F::zero(), F::zero(), F::one())
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(F::zero(), F::zero(), F::zero(), F::zero())
    }

    #[inline]
    pub fn from_cols(c1: Vec2<F>, c2: Vec2<F>) -> Self {
        Self::new(c1.x, c2.x, c1.y, c2.y)
    }

    #[inline]
    pub fn col(self, j: usize) -> Vec2<F> {
        match j {
            0 => Vec2::new(self.a, self.c),
            _ => Vec2::new(self.b, self.d),
        }
    }

    #[inline]
    pub fn row(self, i: usize) -> Vec2<F> {
        match i {
            0 => Vec2::new(self.a, self.b),
            _ => Vec2::new(self.c, self.d),
        }
    }

    #[inline]
    pub fn mul_vec(self, v: Vec2<F>) -> Vec2<F> {
        Vec2::new(self.a * v.x + self.b * v.y, self.c * v.x + self.d * v.y)
    }

    #[inline]
    pub fn det(self) -> F {
        self.a * self.d - self.b * self.c
    }

    /// Solves `self * x = rhs`; `None` when the matrix is singular.
    pub fn solve(self, rhs: Vec2<F>) -> Option<Vec2<F>> {
        let det = self.det();
        if det == F::zero() || !det.is_finite() {
            return None;
        }
        Some(Vec2::new(
            (rhs.x * self.d - rhs.y * self.b) / det,
            (rhs.y * self.a - rhs.x * self.c) / det,
        ))
    }
}

/// Wraps an angle difference into (-pi, pi].
#[inline]
pub fn wrap_angle<F: Real>(dtheta: F) -> F {
    let two_pi = F::PI() * F::two();
    let mut a = dtheta % two_pi;
    if a > F::PI() {
        a = a - two_pi;
    } else if a <= -F::PI() {
        a = a + two_pi;
    }
    a
}
