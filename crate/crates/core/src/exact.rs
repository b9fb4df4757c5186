//! Exact extended reals and round-to-nearest-even onto binary float grids.
//!
//! Everything here works on arbitrary-precision rationals. The format layer
//! uses it to encode values into FP8, and the dot-product reference uses it
//! for its single final rounding to FP32.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

/// A real number, a signed zero, a signed infinity, or NaN.
///
/// `Finite` never holds zero; use [`ExtendedReal::from_rational`] to build
/// values so that zero is folded into `Zero { negative: false }`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtendedReal {
    Zero { negative: bool },
    Finite(BigRational),
    Infinity { negative: bool },
    NaN,
}

impl ExtendedReal {
    pub fn from_rational(q: BigRational) -> Self {
        if q.is_zero() {
            ExtendedReal::Zero { negative: false }
        } else {
            ExtendedReal::Finite(q)
        }
    }

    /// `(-1)^negative * significand * 2^exponent`, exactly.
    pub fn dyadic(negative: bool, significand: u64, exponent: i32) -> Self {
        if significand == 0 {
            return ExtendedReal::Zero { negative };
        }
        let mut q = pow2(exponent) * BigInt::from(significand);
        if negative {
            q = -q;
        }
        ExtendedReal::Finite(q)
    }

    /// Exact value of an `f64`.
    pub fn from_f64(v: f64) -> Self {
        if v.is_nan() {
            return ExtendedReal::NaN;
        }
        if v.is_infinite() {
            return ExtendedReal::Infinity { negative: v < 0.0 };
        }
        let bits = v.to_bits();
        let negative = bits >> 63 == 1;
        let field = ((bits >> 52) & 0x7FF) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        if field == 0 {
            ExtendedReal::dyadic(negative, frac, -1074)
        } else {
            ExtendedReal::dyadic(negative, frac | (1u64 << 52), field - 1075)
        }
    }

    /// Exact value of a single-precision bit pattern.
    pub fn from_f32_bits(bits: u32) -> Self {
        let negative = bits >> 31 == 1;
        let field = ((bits >> 23) & 0xFF) as i32;
        let frac = (bits & 0x7F_FFFF) as u64;
        match field {
            0xFF if frac == 0 => ExtendedReal::Infinity { negative },
            0xFF => ExtendedReal::NaN,
            0 => ExtendedReal::dyadic(negative, frac, -149),
            _ => ExtendedReal::dyadic(negative, frac | (1 << 23), field - 150),
        }
    }

    pub fn is_nan(&self) -> bool {
        matches!(self, ExtendedReal::NaN)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtendedReal::Zero { .. })
    }

    /// The rational value of a finite input (zero included).
    pub fn to_rational(&self) -> Option<BigRational> {
        match self {
            ExtendedReal::Zero { .. } => Some(BigRational::zero()),
            ExtendedReal::Finite(q) => Some(q.clone()),
            _ => None,
        }
    }

    /// Nearest `f64`; exact whenever the value is an `f64` (all FP8, FP9 and
    /// dequantized MX values are).
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedReal::Zero { negative } => {
                if *negative {
                    -0.0
                } else {
                    0.0
                }
            }
            ExtendedReal::Infinity { negative } => {
                if *negative {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
            ExtendedReal::NaN => f64::NAN,
            ExtendedReal::Finite(q) => {
                let r = round_nearest_even(q, 53, -1074);
                let v = ldexp(r.significand as f64, r.exponent);
                if r.negative {
                    -v
                } else {
                    v
                }
            }
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Zero { negative: true } => write!(f, "-0"),
            ExtendedReal::Zero { negative: false } => write!(f, "+0"),
            ExtendedReal::Infinity { negative: true } => write!(f, "-inf"),
            ExtendedReal::Infinity { negative: false } => write!(f, "+inf"),
            ExtendedReal::NaN => write!(f, "NaN"),
            ExtendedReal::Finite(q) => write!(f, "{q}"),
        }
    }
}

/// `2^e` as a rational.
pub fn pow2(e: i32) -> BigRational {
    let p = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new_raw(BigInt::one(), p)
    }
}

/// Result of rounding onto a float grid: `(-1)^negative * significand * 2^exponent`.
///
/// `significand` may equal `2^precision` when rounding carried out of the
/// top bit; callers renormalize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rounded {
    pub negative: bool,
    pub significand: u64,
    pub exponent: i32,
}

/// Round a nonzero rational to the nearest value with `precision` significand
/// bits, ties to even, never using a quantum finer than `2^min_quantum_exp`
/// (which models gradual underflow). The exponent range is unbounded above;
/// overflow is the caller's decision.
pub fn round_nearest_even(q: &BigRational, precision: u32, min_quantum_exp: i32) -> Rounded {
    debug_assert!(!q.is_zero());
    debug_assert!(precision <= 63);
    let negative = q.is_negative();
    let num = q.numer().abs().to_biguint().expect("non-negative");
    let den = q.denom().to_biguint().expect("positive denominator");

    let l = floor_log2_ratio(&num, &den);
    let quantum = (l - (precision as i64 - 1)).max(min_quantum_exp as i64);

    // scaled = |q| / 2^quantum as num_s / den_s
    let (num_s, den_s) = if quantum >= 0 {
        (num, den << quantum as usize)
    } else {
        (num << (-quantum) as usize, den)
    };
    let (int, rem) = num_s.div_rem(&den_s);
    let mut sig = int;
    match (rem << 1usize).cmp(&den_s) {
        Ordering::Greater => sig += 1u32,
        Ordering::Equal if sig.is_odd() => sig += 1u32,
        _ => {}
    }
    let significand = u64::try_from(&sig).expect("significand fits in 64 bits");
    Rounded {
        negative,
        significand,
        exponent: quantum as i32,
    }
}

/// `floor(log2(num / den))` for positive integers.
fn floor_log2_ratio(num: &BigUint, den: &BigUint) -> i64 {
    let mut l = num.bits() as i64 - den.bits() as i64;
    let below = if l >= 0 {
        *num < (den << l as usize)
    } else {
        (num << (-l) as usize) < *den
    };
    if below {
        l -= 1;
    }
    l
}

/// Canonical quiet NaN emitted by every FP32-producing path in this crate.
pub const F32_CANONICAL_NAN: u32 = 0x7FC0_0000;

/// Round an extended real to single precision (RNE, gradual underflow,
/// overflow to infinity).
pub fn to_f32_bits(v: &ExtendedReal) -> u32 {
    match v {
        ExtendedReal::NaN => F32_CANONICAL_NAN,
        ExtendedReal::Zero { negative } => (*negative as u32) << 31,
        ExtendedReal::Infinity { negative } => ((*negative as u32) << 31) | 0x7F80_0000,
        ExtendedReal::Finite(q) => {
            let r = round_nearest_even(q, 24, -149);
            pack_f32(r)
        }
    }
}

fn pack_f32(r: Rounded) -> u32 {
    let sign = (r.negative as u32) << 31;
    let (mut sig, mut exp) = (r.significand, r.exponent);
    if sig == 1 << 24 {
        sig >>= 1;
        exp += 1;
    }
    if sig == 0 {
        return sign;
    }
    if sig < 1 << 23 {
        debug_assert_eq!(exp, -149);
        return sign | sig as u32;
    }
    let field = exp + 23 + 127;
    if field >= 0xFF {
        return sign | 0x7F80_0000;
    }
    sign | ((field as u32) << 23) | (sig as u32 - (1 << 23))
}

/// `x * 2^e` without intermediate overflow; exact when the result is representable.
pub fn ldexp(mut x: f64, mut e: i32) -> f64 {
    let up = 2f64.powi(1000);
    let down = 2f64.powi(-1000);
    while e > 1000 {
        x *= up;
        e -= 1000;
    }
    while e < -1000 {
        x *= down;
        e += 1000;
    }
    x * 2f64.powi(e)
}
