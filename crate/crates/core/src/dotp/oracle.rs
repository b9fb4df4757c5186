//! Arbitrary-precision reference for MXDOTP.
//!
//! Decodes every operand to an exact rational, forms
//! `2^s * sum(a_i * b_i) + c` without any intermediate rounding, and rounds
//! once to FP32. Shares nothing with the window datapath beyond the FP8
//! decoder.

use num_rational::BigRational;
use num_traits::Zero;

use super::{Fp32Value, LANES};
use crate::exact::{self, ExtendedReal};
use crate::formats::{decode_fp8, Fp8Code, Fp8Format, ScaleE8M0};

pub fn mx_dotp_oracle(
    pa: &[u8; LANES],
    pb: &[u8; LANES],
    xa: ScaleE8M0,
    xb: ScaleE8M0,
    c: Fp32Value,
    format: Fp8Format,
) -> Fp32Value {
    Fp32Value(exact::to_f32_bits(&exact_result(pa, pb, xa, xb, c, format)))
}

/// The unrounded result as an extended real.
pub fn exact_result(
    pa: &[u8; LANES],
    pb: &[u8; LANES],
    xa: ScaleE8M0,
    xb: ScaleE8M0,
    c: Fp32Value,
    format: Fp8Format,
) -> ExtendedReal {
    if xa.is_nan() || xb.is_nan() {
        return ExtendedReal::NaN;
    }
    let mut terms = Vec::with_capacity(LANES + 1);
    for i in 0..LANES {
        let a = decode_fp8(Fp8Code::new(pa[i], format));
        let b = decode_fp8(Fp8Code::new(pb[i], format));
        terms.push(mul(&a, &b));
    }
    let scale = exact::pow2(xa.exponent().unwrap() + xb.exponent().unwrap());
    let mut sum = ExtendedReal::Zero { negative: true };
    for t in &terms {
        sum = add(&sum, t);
    }
    let scaled = match sum {
        ExtendedReal::Finite(q) => ExtendedReal::Finite(q * scale),
        other => other,
    };
    add(&scaled, &ExtendedReal::from_f32_bits(c.bits()))
}

fn sign_of(v: &ExtendedReal) -> bool {
    match v {
        ExtendedReal::Zero { negative } | ExtendedReal::Infinity { negative } => *negative,
        ExtendedReal::Finite(q) => q < &BigRational::zero(),
        ExtendedReal::NaN => false,
    }
}

fn mul(a: &ExtendedReal, b: &ExtendedReal) -> ExtendedReal {
    use ExtendedReal::*;
    let negative = sign_of(a) ^ sign_of(b);
    match (a, b) {
        (NaN, _) | (_, NaN) => NaN,
        (Infinity { .. }, Zero { .. }) | (Zero { .. }, Infinity { .. }) => NaN,
        (Infinity { .. }, _) | (_, Infinity { .. }) => Infinity { negative },
        (Zero { .. }, _) | (_, Zero { .. }) => Zero { negative },
        (Finite(x), Finite(y)) => Finite(x * y),
    }
}

/// IEEE addition semantics, exact, with round-to-nearest zero-sign rules.
fn add(a: &ExtendedReal, b: &ExtendedReal) -> ExtendedReal {
    use ExtendedReal::*;
    match (a, b) {
        (NaN, _) | (_, NaN) => NaN,
        (Infinity { negative: x }, Infinity { negative: y }) => {
            if x == y {
                Infinity { negative: *x }
            } else {
                NaN
            }
        }
        (Infinity { .. }, _) => a.clone(),
        (_, Infinity { .. }) => b.clone(),
        (Zero { negative: x }, Zero { negative: y }) => Zero { negative: *x && *y },
        (Zero { .. }, _) => b.clone(),
        (_, Zero { .. }) => a.clone(),
        (Finite(x), Finite(y)) => ExtendedReal::from_rational(x + y),
    }
}
