//! Dormand-Prince 5(4) step kernel with 4th-order dense output.
//!
//! Classic 7-stage FSAL pair; the dense output is the standard quartic
//! interpolant built from one extra linear combination of the stages.

use crate::real::Real;

pub(crate) const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

pub(crate) const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

/// 5th-order weights (row 7 of A by the FSAL property).
pub(crate) const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];

/// Error weights: 5th-order minus embedded 4th-order solution.
pub(crate) const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dense-output stage weights.
pub(crate) const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

pub(crate) struct StepResult<F, const N: usize> {
    pub y1: [F; N],
    /// Scaled RMS error of the embedded pair.
    pub err: F,
    pub k: [[F; N]; 7],
}

/// One Dormand-Prince step from (t0, y0) with derivative k1 = f(t0, y0).
pub(crate) fn rk_step<F: Real, const N: usize>(
    rhs: &mut impl FnMut(F, &[F; N]) -> [F; N],
    t0: F,
    y0: &[F; N],
    h: F,
    k1: &[F; N],
    rtol: F,
    atol: F,
) -> StepResult<F, N> {
    let mut k = [[F::zero(); N]; 7];
    k[0] = *k1;
    for stage in 1..7 {
        let mut y = *y0;
        for (j, kj) in k.iter().enumerate().take(stage) {
            let a = F::lit(A[stage][j]);
            if a != F::zero() {
                for i in 0..N {
                    y[i] = y[i] + kj[i] * (a * h);
                }
            }
        }
        k[stage] = rhs(t0 + F::lit(C[stage]) * h, &y);
    }

    let mut y1 = *y0;
    for (j, kj) in k.iter().enumerate() {
        let b = F::lit(B[j]);
        if b != F::zero() {
            for i in 0..N {
                y1[i] = y1[i] + kj[i] * (b * h);
            }
        }
    }

    let mut err_acc = F::zero();
    for i in 0..N {
        let mut e = F::zero();
        for (j, kj) in k.iter().enumerate() {
            e = e + kj[i] * F::lit(E[j]);
        }
        e = e * h;
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        let q = e / sc;
        err_acc = err_acc + q * q;
    }
    let err = (err_acc / F::from_usize(N).unwrap()).sqrt();

    StepResult { y1, err, k }
}

/// Dense-output coefficients for one accepted step.
///
/// `k[6]` must hold f(t0 + h, y1) (the FSAL stage).
pub(crate) fn dense_coefficients<F: Real, const N: usize>(
    y0: &[F; N],
    y1: &[F; N],
    h: F,
    k: &[[F; N]; 7],
) -> [[F; N]; 5] {
    let mut cont = [[F::zero(); N]; 5];
    for i in 0..N {
        let ydiff = y1[i] - y0[i];
        let bspl = h * k[0][i] - ydiff;
        cont[0][i] = y0[i];
        cont[1][i] = ydiff;
        cont[2][i] = bspl;
        cont[3][i] = ydiff - h * k[6][i] - bspl;
        let mut acc = F::zero();
        for (j, kj) in k.iter().enumerate() {
            acc = acc + kj[i] * F::lit(D[j]);
        }
        cont[4][i] = acc * h;
    }
    cont
}

/// Evaluates the interpolant at fraction `theta` in [0, 1] of the step.
pub(crate) fn dense_eval<F: Real, const N: usize>(cont: &[[F; N]; 5], theta: F) -> [F; N] {
    let om = F::one() - theta;
    let mut y = [F::zero(); N];
    for i in 0..N {
        y[i] = cont[0][i]
            + theta * (cont[1][i] + om * (cont[2][i] + theta * (cont[3][i] + om * cont[4][i])));
    }
    y
}
