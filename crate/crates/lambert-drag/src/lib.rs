//! Boundary-value solver for the planar Kepler problem with
//! position-dependent linear drag:
//!
//! ```text
//! xddot + D(x)·xdot = -x/|x|^3,        x(-T) = A,  x(0) = B.
//! ```
//!
//! Given two endpoints, a flight time and a friction field, the solver
//! returns the unique rectilinear arc when A and B lie on the same ray
//! from the origin, and one arc per rotation direction (clockwise and
//! counterclockwise) otherwise. Arcs sweep less than one full turn.
//!
//! The construction shoots backward in time from B and continues the
//! arrival angle from the ray-aligned configuration (where the rectilinear
//! solution is known and nondegenerate) to the requested endpoint. Near
//! the origin, integration switches to Levi-Civita regularized
//! coordinates, which stay smooth through collisions and make the
//! position map continuous across bouncing data.
//!
//! The core is generic over the scalar type (`f32`/`f64`) through the
//! [`real::Real`] trait; the `*64` aliases below fix `f64`, which every
//! default tolerance assumes.
//!
//! ```
//! use lambert_drag::lambert::{solve, Direction, LambertProblem};
//! use lambert_drag::{FrictionField64, IntegratorConfig64, Vec2_64};
//!
//! let field = FrictionField64::constant(0.1)?;
//! let problem = LambertProblem::new(
//!     Vec2_64::new(1.0, 0.0),          // A = x(-T)
//!     Vec2_64::new(0.0, 1.0),          // B = x(0)
//!     std::f64::consts::FRAC_PI_2,     // flight time T
//!     &field,
//!     Direction::Auto,
//! )?;
//! let out = solve(&problem, &IntegratorConfig64::default())?;
//! assert_eq!(out.arcs.len(), 2); // one arc per rotation direction
//! for arc in &out.arcs {
//!     assert!(arc.residual_position < 1e-8);
//! }
//! # Ok::<(), lambert_drag::Error64>(())
//! ```

// Guards of the form `!(x > 0)` are deliberate: they reject NaN along with
// the out-of-range values, which `x <= 0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod friction;
pub mod integrator;
pub mod lambert;
pub mod levi_civita;
pub mod oracle;
pub mod real;
pub mod rectilinear;
pub mod vec2;

pub use error::Error;
pub use real::Real;
pub use vec2::{Mat2, Vec2};

/// f64 aliases for the main public types.
pub type Vec2_64 = vec2::Vec2<f64>;
pub type Mat2_64 = vec2::Mat2<f64>;
pub type FrictionField64 = friction::FrictionField<f64>;
pub type State64 = dynamics::State<f64>;
pub type IntegratorConfig64 = integrator::IntegratorConfig<f64>;
pub type Trajectory64 = integrator::Trajectory<f64>;
pub type LambertProblem64<'a> = lambert::LambertProblem<'a, f64>;
pub type ArcSolution64 = lambert::ArcSolution<f64>;
pub type SolveOutcome64 = lambert::SolveOutcome<f64>;
pub type Error64 = error::Error<f64>;
