//! Bit-exact model of the MXDOTP datapath.
//!
//! Eight FP9 products are summed exactly in a 95-bit two's-complement
//! fixed-point window whose LSB weighs `2^-34` (the product of two minimum
//! FP9 subnormals). The FP32 accumulator, shifted by the negated combined
//! block scale, is added into the same window before a single
//! round-to-nearest-even conversion that applies the scale. Only integer
//! arithmetic is used; FP32 values are carried as bit patterns.
//!
//! When the accumulator and the product sum are too far apart to share the
//! window, the window is re-anchored under the larger operand and the
//! smaller one collapses into a sticky bit. The window always keeps at least
//! 60 bits below the leading bit of the larger operand, far more than the
//! 24 + 2 needed for a correct final rounding.

pub mod cases;
pub mod oracle;

use crate::exact::F32_CANONICAL_NAN;
use crate::formats::{fp8_to_fp9, Fp8Code, Fp8Format, Fp9Code, ScaleE8M0};

pub use oracle::mx_dotp_oracle;

/// Lanes consumed by one MXDOTP.
pub const LANES: usize = 8;
/// Width of the accumulation window, sign included.
pub const WINDOW_BITS: u32 = 95;
/// Fractional bits of the window in its default position.
pub const ANCHOR: i32 = 34;

/// Usable magnitude bits of the window below its top (one spare bit absorbs
/// the carry of the final addition).
const SPAN: i32 = WINDOW_BITS as i32 - 2;

/// Single-precision value carried as its bit pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct Fp32Value(pub u32);

impl Fp32Value {
    pub const ZERO: Fp32Value = Fp32Value(0);
    pub const NAN: Fp32Value = Fp32Value(F32_CANONICAL_NAN);

    pub fn from_f32(v: f32) -> Self {
        Fp32Value(v.to_bits())
    }

    pub fn to_f32(self) -> f32 {
        f32::from_bits(self.0)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn is_negative(self) -> bool {
        self.0 >> 31 == 1
    }

    const fn exponent_field(self) -> u32 {
        (self.0 >> 23) & 0xFF
    }

    pub const fn is_nan(self) -> bool {
        self.exponent_field() == 0xFF && self.0 & 0x7F_FFFF != 0
    }

    pub const fn is_infinite(self) -> bool {
        self.exponent_field() == 0xFF && self.0 & 0x7F_FFFF == 0
    }

    pub const fn is_zero(self) -> bool {
        self.0 & 0x7FFF_FFFF == 0
    }

    /// `(negative, significand, exponent)` with value `significand * 2^exponent`.
    fn unpack(self) -> Option<(bool, u32, i32)> {
        let field = self.exponent_field();
        let frac = self.0 & 0x7F_FFFF;
        match field {
            0xFF => None,
            0 => Some((self.is_negative(), frac, -149)),
            _ => Some((self.is_negative(), frac | 1 << 23, field as i32 - 150)),
        }
    }
}

/// Exact product of two FP9 values: `(-1)^negative * significand * 2^exponent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fp9Product {
    pub negative: bool,
    /// In `[0, 225]`.
    pub significand: u16,
    /// At least `-34`.
    pub exponent: i32,
}

impl Fp9Product {
    pub const ZERO: Fp9Product = Fp9Product {
        negative: false,
        significand: 0,
        exponent: -ANCHOR,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductOutcome {
    Finite(Fp9Product),
    Infinity { negative: bool },
    NaN,
}

pub fn fp9_product(a: Fp9Code, b: Fp9Code) -> ProductOutcome {
    let negative = a.is_negative() ^ b.is_negative();
    if a.is_nan() || b.is_nan() {
        return ProductOutcome::NaN;
    }
    let a_zero = a.bits() & 0xFF == 0;
    let b_zero = b.bits() & 0xFF == 0;
    if a.is_infinite() || b.is_infinite() {
        return if a_zero || b_zero {
            ProductOutcome::NaN
        } else {
            ProductOutcome::Infinity { negative }
        };
    }
    let (_, ma, ea) = a.unpack().expect("finite");
    let (_, mb, eb) = b.unpack().expect("finite");
    ProductOutcome::Finite(Fp9Product {
        negative,
        significand: (ma * mb) as u16,
        exponent: ea + eb - 6,
    })
}

/// Fixed-point accumulation window.
///
/// Represents `(value + f) * 2^lsb_exponent` with `f = 0` when `sticky` is
/// clear and `f` in `(0, 1)` when it is set, i.e. `value` is the floor of the
/// exact sum on the window grid. `lsb_exponent` is `-ANCHOR` unless an
/// operand forced the window to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AccWindow {
    pub value: i128,
    pub lsb_exponent: i32,
    pub sticky: bool,
    /// Every contribution so far was a negative zero.
    pub negative_zero: bool,
}

impl AccWindow {
    pub const fn zero() -> Self {
        AccWindow {
            value: 0,
            lsb_exponent: -ANCHOR,
            sticky: false,
            negative_zero: false,
        }
    }

    /// Whether `value` fits the 95-bit two's-complement window.
    pub fn in_range(&self) -> bool {
        let limit = 1i128 << (WINDOW_BITS - 1);
        (-limit..limit).contains(&self.value)
    }
}

pub fn sum_products(products: &[Fp9Product; LANES]) -> AccWindow {
    let mut value = 0i128;
    for p in products {
        debug_assert!(p.exponent >= -ANCHOR);
        let term = (p.significand as i128) << (p.exponent + ANCHOR);
        value += if p.negative { -term } else { term };
    }
    let window = AccWindow {
        value,
        lsb_exponent: -ANCHOR,
        sticky: false,
        negative_zero: products.iter().all(|p| p.significand == 0 && p.negative),
    };
    debug_assert!(window.in_range());
    window
}

/// How the accumulator met the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlignPath {
    /// Accumulator was zero.
    Skip,
    /// Both operands fit one window; exact addition.
    Near,
    /// Accumulator far above the product sum; the sum collapses into sticky.
    AccumulatorDominant,
    /// Accumulator far below the product sum; it collapses into sticky.
    AccumulatorNegligible,
}

/// Add `c * 2^-scale_exp` into the window.
pub fn align_accumulator(window: AccWindow, c: Fp32Value, scale_exp: i32) -> AccWindow {
    align_accumulator_traced(window, c, scale_exp).0
}

/// [`align_accumulator`], also reporting which alignment path was taken.
pub fn align_accumulator_traced(
    window: AccWindow,
    c: Fp32Value,
    scale_exp: i32,
) -> (AccWindow, AlignPath) {
    debug_assert!(!window.sticky, "window already carries a sticky bit");
    let (c_neg, c_sig, c_exp) = c.unpack().expect("accumulator must be finite");
    if c_sig == 0 {
        let w = AccWindow {
            negative_zero: window.negative_zero && c_neg,
            ..window
        };
        return (w, AlignPath::Skip);
    }
    let acc = if c_neg {
        -(c_sig as i128)
    } else {
        c_sig as i128
    };
    let acc_lsb = c_exp - scale_exp;
    let acc_top = acc_lsb + bit_len(c_sig as u128);

    if window.value == 0 {
        let lsb = if acc_top - acc_lsb.min(-ANCHOR) <= SPAN {
            acc_lsb.min(-ANCHOR)
        } else {
            acc_lsb
        };
        let w = AccWindow {
            value: acc << (acc_lsb - lsb),
            lsb_exponent: lsb,
            sticky: false,
            negative_zero: false,
        };
        return (w, AlignPath::Near);
    }

    let win_lsb = window.lsb_exponent;
    let win_top = win_lsb + bit_len(window.value.unsigned_abs());
    let top = acc_top.max(win_top);
    let low = acc_lsb.min(win_lsb);

    if top - low <= SPAN {
        let value = (window.value << (win_lsb - low)) + (acc << (acc_lsb - low));
        let w = AccWindow {
            value,
            lsb_exponent: low,
            sticky: false,
            negative_zero: false,
        };
        debug_assert!(w.in_range());
        return (w, AlignPath::Near);
    }

    // Re-anchor the window under the larger operand. Both operands are at
    // most 70 bits wide, so the larger one lands exactly on the new grid and
    // only the smaller one loses bits.
    let lsb = top - SPAN;
    let (big, big_lsb, small, small_lsb, path) = if acc_top >= win_top {
        (
            acc,
            acc_lsb,
            window.value,
            win_lsb,
            AlignPath::AccumulatorDominant,
        )
    } else {
        (
            window.value,
            win_lsb,
            acc,
            acc_lsb,
            AlignPath::AccumulatorNegligible,
        )
    };
    debug_assert!(big_lsb >= lsb && small_lsb < lsb);
    let (small_floor, sticky) = floor_shift(small, (lsb - small_lsb) as u32);
    let w = AccWindow {
        value: (big << (big_lsb - lsb)) + small_floor,
        lsb_exponent: lsb,
        sticky,
        negative_zero: false,
    };
    debug_assert!(w.in_range());
    (w, path)
}

/// `floor(v / 2^shift)` and whether any discarded bit was set.
fn floor_shift(v: i128, shift: u32) -> (i128, bool) {
    if shift >= 127 {
        return (if v < 0 { -1 } else { 0 }, v != 0);
    }
    let floor = v >> shift;
    (floor, v & ((1i128 << shift) - 1) != 0)
}

fn bit_len(v: u128) -> i32 {
    128 - v.leading_zeros() as i32
}

/// Round `window * 2^scale_exp` to FP32, ties to even, honoring sticky.
pub fn round_result(window: AccWindow, scale_exp: i32) -> Fp32Value {
    if window.value == 0 && !window.sticky {
        return Fp32Value((window.negative_zero as u32) << 31);
    }
    let negative = window.value < 0;
    // Magnitude in the same floor-plus-sticky form.
    let mag: u128 = if negative {
        let m = window.value.unsigned_abs();
        if window.sticky {
            m - 1
        } else {
            m
        }
    } else {
        window.value as u128
    };
    debug_assert!(mag != 0, "sticky without a leading operand");
    let sign = (negative as u32) << 31;
    let lsb = window.lsb_exponent + scale_exp;
    let msb = lsb + bit_len(mag) - 1;
    let quantum = (msb - 23).max(-149);
    let shift = quantum - lsb;

    let mut sig: u128 = if shift <= 0 {
        debug_assert!(!window.sticky);
        mag << (-shift)
    } else if shift >= 127 {
        0
    } else {
        let kept = mag >> shift;
        let rem = mag & ((1u128 << shift) - 1);
        let half = 1u128 << (shift - 1);
        let up = rem > half || (rem == half && (window.sticky || kept & 1 == 1));
        kept + up as u128
    };
    let mut exp = quantum;
    if sig == 1 << 24 {
        sig >>= 1;
        exp += 1;
    }
    if sig == 0 {
        return Fp32Value(sign);
    }
    if sig < 1 << 23 {
        return Fp32Value(sign | sig as u32);
    }
    let field = exp + 23 + 127;
    if field >= 0xFF {
        return Fp32Value(sign | 0x7F80_0000);
    }
    Fp32Value(sign | (field as u32) << 23 | (sig as u32 & 0x7F_FFFF))
}

/// One MXDOTP: `RNE(2^s * sum(pa[i] * pb[i]) + c)` with
/// `s = (xa - 127) + (xb - 127)`.
pub fn mx_dotp(
    pa: &[u8; LANES],
    pb: &[u8; LANES],
    xa: ScaleE8M0,
    xb: ScaleE8M0,
    c: Fp32Value,
    format: Fp8Format,
) -> Fp32Value {
    let (Some(ea), Some(eb)) = (xa.exponent(), xb.exponent()) else {
        return Fp32Value::NAN;
    };
    if c.is_nan() {
        return Fp32Value::NAN;
    }
    let mut pos_inf = c.is_infinite() && !c.is_negative();
    let mut neg_inf = c.is_infinite() && c.is_negative();
    let mut products = [Fp9Product::ZERO; LANES];
    for i in 0..LANES {
        let a = fp8_to_fp9(Fp8Code::new(pa[i], format));
        let b = fp8_to_fp9(Fp8Code::new(pb[i], format));
        match fp9_product(a, b) {
            ProductOutcome::NaN => return Fp32Value::NAN,
            ProductOutcome::Infinity { negative: true } => neg_inf = true,
            ProductOutcome::Infinity { negative: false } => pos_inf = true,
            ProductOutcome::Finite(p) => products[i] = p,
        }
    }
    match (pos_inf, neg_inf) {
        (true, true) => return Fp32Value::NAN,
        (true, false) => return Fp32Value(0x7F80_0000),
        (false, true) => return Fp32Value(0xFF80_0000),
        (false, false) => {}
    }
    let scale_exp = ea + eb;
    let window = sum_products(&products);
    let window = align_accumulator(window, c, scale_exp);
    round_result(window, scale_exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{self, ExtendedReal};
    use crate::formats::{decode_fp9, Fp9Code};
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn fp9(v: f64) -> Fp9Code {
        // Every test value below is exact in E4M3 or E5M2.
        let c = crate::formats::encode_fp8_f64(v, Fp8Format::E5M2, false);
        let c4 = crate::formats::encode_fp8_f64(v, Fp8Format::E4M3, false);
        if c.to_f64() == v {
            fp8_to_fp9(c)
        } else {
            assert_eq!(c4.to_f64(), v);
            fp8_to_fp9(c4)
        }
    }

    fn window_value(w: &AccWindow) -> BigRational {
        BigRational::from_integer(BigInt::from(w.value)) * exact::pow2(w.lsb_exponent)
    }

    #[test]
    fn product_examples() {
        let ProductOutcome::Finite(p) = fp9_product(fp9(-0.0), fp9(3.0)) else {
            panic!()
        };
        assert_eq!((p.negative, p.significand), (true, 0));

        let min = Fp9Code::from_bits(0x001);
        assert_eq!(decode_fp9(min).to_f64(), 2f64.powi(-17));
        assert_eq!(
            fp9_product(min, min),
            ProductOutcome::Finite(Fp9Product {
                negative: false,
                significand: 1,
                exponent: -34
            })
        );

        let max = Fp9Code::from_bits(0x0F7);
        assert_eq!(decode_fp9(max).to_f64(), 61440.0);
        assert_eq!(
            fp9_product(max, max),
            ProductOutcome::Finite(Fp9Product {
                negative: false,
                significand: 225,
                exponent: 24
            })
        );
        let inf = Fp9Code::from_bits(0x0F8);
        assert_eq!(fp9_product(inf, fp9(0.0)), ProductOutcome::NaN);
        assert_eq!(
            fp9_product(inf, fp9(-1.0)),
            ProductOutcome::Infinity { negative: true }
        );
        assert_eq!(fp9_product(Fp9Code::NAN, fp9(1.0)), ProductOutcome::NaN);
    }

    #[test]
    fn product_is_exact_for_all_fp9_pairs() {
        let finite: Vec<Fp9Code> = (0..512u16)
            .map(Fp9Code::from_bits)
            .filter(|c| !c.is_nan() && !c.is_infinite())
            .collect();
        for &a in &finite {
            for &b in finite.iter().step_by(7) {
                let ProductOutcome::Finite(p) = fp9_product(a, b) else {
                    panic!()
                };
                let got = ExtendedReal::dyadic(p.negative, p.significand as u64, p.exponent);
                let want =
                    decode_fp9(a).to_rational().unwrap() * decode_fp9(b).to_rational().unwrap();
                assert_eq!(got.to_rational().unwrap(), want);
                assert!(p.exponent >= -ANCHOR && p.significand <= 225);
            }
        }
    }

    #[test]
    fn sum_examples() {
        assert_eq!(sum_products(&[Fp9Product::ZERO; 8]).value, 0);
        let min = Fp9Product {
            negative: false,
            significand: 1,
            exponent: -34,
        };
        let w = sum_products(&[min; 8]);
        assert_eq!((w.value, w.lsb_exponent, w.sticky), (8, -34, false));
        let max = Fp9Product {
            negative: true,
            significand: 225,
            exponent: 24,
        };
        let w = sum_products(&[max; 8]);
        assert!(w.in_range());
        assert_eq!(w.value, -(8 * 225i128) << 58);
    }

    #[test]
    fn align_examples() {
        let w = AccWindow {
            value: 12345,
            ..AccWindow::zero()
        };
        let (same, path) = align_accumulator_traced(w, Fp32Value::ZERO, 5);
        assert_eq!(
            (same.value, same.lsb_exponent, same.sticky, path),
            (12345, -34, false, AlignPath::Skip)
        );

        let one = align_accumulator(AccWindow::zero(), Fp32Value::from_f32(1.0), 0);
        assert_eq!((one.value, one.lsb_exponent), (1i128 << 34, -34));

        let tiny = AccWindow {
            value: 1,
            ..AccWindow::zero()
        };
        let (w, path) = align_accumulator_traced(tiny, Fp32Value::from_f32(2f32.powi(100)), 0);
        assert_eq!(path, AlignPath::AccumulatorDominant);
        assert!(w.sticky);
        // 2^100 + 2^-34 rounds back to 2^100.
        assert_eq!(round_result(w, 0).to_f32(), 2f32.powi(100));

        let (w, path) = align_accumulator_traced(
            AccWindow {
                value: 1i128 << 60,
                ..AccWindow::zero()
            },
            Fp32Value::from_f32(f32::from_bits(1)),
            20,
        );
        assert_eq!(path, AlignPath::AccumulatorNegligible);
        assert!(w.sticky);
    }

    #[test]
    fn round_examples() {
        assert_eq!(round_result(AccWindow::zero(), 77), Fp32Value(0));
        let one = AccWindow {
            value: 1i128 << 34,
            ..AccWindow::zero()
        };
        assert_eq!(round_result(one, 3).to_f32(), 8.0);
        // 3 * 2^-34 plus a sticky fraction, scaled so the FP32 grid is coarser:
        // with s = -130 the quantum 2^-149 is 2^15 window units.
        let w = AccWindow {
            value: (1i128 << 14) * 3,
            sticky: true,
            ..AccWindow::zero()
        };
        let exact_lo = window_value(&w) * exact::pow2(-130);
        let exact_hi = (window_value(&w) + exact::pow2(-34 - 10)) * exact::pow2(-130);
        let lo = exact::to_f32_bits(&ExtendedReal::from_rational(exact_lo));
        let hi = exact::to_f32_bits(&ExtendedReal::from_rational(exact_hi));
        // 1.5 quanta plus sticky must round up to 2 quanta.
        assert_eq!(round_result(w, -130).bits(), 2);
        assert_eq!(lo, 2); // tie at exactly 1.5 quanta goes to even (2)
        assert_eq!(hi, 2);
    }

    #[test]
    fn mx_dotp_examples() {
        let f = Fp8Format::E4M3;
        assert_eq!(
            mx_dotp(
                &[0; 8],
                &[0; 8],
                ScaleE8M0(3),
                ScaleE8M0(250),
                Fp32Value::from_f32(5.0),
                f
            )
            .to_f32(),
            5.0
        );
        assert!(mx_dotp(
            &[0x38; 8],
            &[0x38; 8],
            ScaleE8M0::NAN,
            ScaleE8M0::ONE,
            Fp32Value::ZERO,
            f
        )
        .is_nan());
        assert_eq!(
            mx_dotp(
                &[0x38; 8],
                &[0x38; 8],
                ScaleE8M0::ONE,
                ScaleE8M0::ONE,
                Fp32Value::ZERO,
                f
            )
            .to_f32(),
            8.0
        );
    }

    #[test]
    fn zero_sign_rules() {
        let f = Fp8Format::E4M3;
        let neg = Fp32Value::from_f32(-0.0);
        // (-0) * (+0) in every lane plus -0 accumulator: every contribution is -0.
        let r = mx_dotp(&[0x80; 8], &[0; 8], ScaleE8M0::ONE, ScaleE8M0::ONE, neg, f);
        assert_eq!(r.bits(), 0x8000_0000);
        let r = mx_dotp(
            &[0x80; 8],
            &[0; 8],
            ScaleE8M0::ONE,
            ScaleE8M0::ONE,
            Fp32Value::ZERO,
            f,
        );
        assert_eq!(r.bits(), 0);
        // Exact cancellation gives +0.
        let mut pa = [0u8; 8];
        pa[0] = 0x38;
        pa[1] = 0xB8;
        let r = mx_dotp(&pa, &[0x38; 8], ScaleE8M0::ONE, ScaleE8M0::ONE, neg, f);
        assert_eq!(r.bits(), 0);
    }

    #[test]
    fn infinity_algebra() {
        let f = Fp8Format::E5M2;
        let mut pa = [0x3Cu8; 8];
        pa[0] = 0x7C;
        let one = ScaleE8M0::ONE;
        assert_eq!(
            mx_dotp(&pa, &[0x3C; 8], one, one, Fp32Value::ZERO, f).bits(),
            0x7F80_0000
        );
        pa[1] = 0xFC;
        assert!(mx_dotp(&pa, &[0x3C; 8], one, one, Fp32Value::ZERO, f).is_nan());
        pa[1] = 0x3C;
        let minus_inf = Fp32Value::from_f32(f32::NEG_INFINITY);
        assert!(mx_dotp(&pa, &[0x3C; 8], one, one, minus_inf, f).is_nan());
        // Inf * 0 is NaN.
        let mut pb = [0x3Cu8; 8];
        pb[0] = 0;
        assert!(mx_dotp(&pa, &pb, one, one, Fp32Value::ZERO, f).is_nan());
        // E4M3 NaN element.
        assert!(mx_dotp(
            &[0x7F; 8],
            &[0x38; 8],
            one,
            one,
            Fp32Value::ZERO,
            Fp8Format::E4M3
        )
        .is_nan());
    }

    #[test]
    fn anchor_tightness() {
        let f = Fp8Format::E5M2;
        let a = fp8_to_fp9(Fp8Code::new(0x01, f));
        // E5M2's smallest subnormal is 2^-16; two give 2^-32 = 4 window LSBs.
        let ProductOutcome::Finite(p) = fp9_product(a, a) else {
            panic!()
        };
        let mut products = [Fp9Product::ZERO; 8];
        products[0] = p;
        let w = sum_products(&products);
        assert_eq!((w.value, w.sticky), (4, false));
        let min = Fp9Code::from_bits(1);
        let ProductOutcome::Finite(p) = fp9_product(min, min) else {
            panic!()
        };
        products[0] = p;
        assert_eq!(sum_products(&products).value, 1);
    }

    fn lanes() -> impl Strategy<Value = [u8; 8]> {
        prop::array::uniform8(any::<u8>())
    }

    proptest! {
        #[test]
        fn operand_symmetry(pa in lanes(), pb in lanes(), xa in any::<u8>(), xb in any::<u8>(), c in any::<u32>(), e4 in any::<bool>()) {
            let f = if e4 { Fp8Format::E4M3 } else { Fp8Format::E5M2 };
            let r1 = mx_dotp(&pa, &pb, ScaleE8M0(xa), ScaleE8M0(xb), Fp32Value(c), f);
            let r2 = mx_dotp(&pb, &pa, ScaleE8M0(xb), ScaleE8M0(xa), Fp32Value(c), f);
            prop_assert_eq!(r1, r2);
        }

        #[test]
        fn lane_permutation_invariance(pa in lanes(), pb in lanes(), xa in 100u8..150, xb in 100u8..150, c in any::<u32>(), rot in 0usize..8) {
            let f = Fp8Format::E4M3;
            let mut qa = pa;
            let mut qb = pb;
            qa.rotate_left(rot);
            qb.rotate_left(rot);
            qa.swap(0, 7);
            qb.swap(0, 7);
            let r1 = mx_dotp(&pa, &pb, ScaleE8M0(xa), ScaleE8M0(xb), Fp32Value(c), f);
            let r2 = mx_dotp(&qa, &qb, ScaleE8M0(xa), ScaleE8M0(xb), Fp32Value(c), f);
            prop_assert_eq!(r1, r2);
        }

        #[test]
        fn scale_shift_doubles(pa in lanes(), pb in lanes(), xa in 1u8..253, xb in 1u8..254, e4 in any::<bool>()) {
            let f = if e4 { Fp8Format::E4M3 } else { Fp8Format::E5M2 };
            let r1 = mx_dotp(&pa, &pb, ScaleE8M0(xa), ScaleE8M0(xb), Fp32Value::ZERO, f).to_f32();
            let r2 = mx_dotp(&pa, &pb, ScaleE8M0(xa + 1), ScaleE8M0(xb), Fp32Value::ZERO, f).to_f32();
            // Doubling is exact unless r1 sits in the subnormal range or overflows.
            if r1.is_finite() && (r1 == 0.0 || r1.abs() >= f32::MIN_POSITIVE) && (r1 * 2.0).is_finite() {
                prop_assert_eq!(r2.to_bits(), (r1 * 2.0).to_bits());
            } else if r1.is_nan() {
                prop_assert!(r2.is_nan());
            }
        }

        #[test]
        fn matches_oracle(pa in lanes(), pb in lanes(), xa in any::<u8>(), xb in any::<u8>(), c in any::<u32>(), e4 in any::<bool>()) {
            let f = if e4 { Fp8Format::E4M3 } else { Fp8Format::E5M2 };
            let got = mx_dotp(&pa, &pb, ScaleE8M0(xa), ScaleE8M0(xb), Fp32Value(c), f);
            let want = mx_dotp_oracle(&pa, &pb, ScaleE8M0(xa), ScaleE8M0(xb), Fp32Value(c), f);
            prop_assert_eq!(got, want);
        }
    }
}
