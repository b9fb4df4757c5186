//! MX number formats: FP8 elements (E5M2, E4M3), the E8M0 block scale, the
//! FP9 (E5M3) intermediate format, and block quantization.
//!
//! Special values follow the OCP MX conventions. E5M2 is IEEE-like (an
//! all-ones exponent encodes Inf or NaN). E4M3 has no infinity and a single
//! NaN pattern per sign, `S.1111.111`, which buys it one more binade of
//! finite values (max 448). E8M0 is an unsigned biased exponent with NaN at
//! `0xFF` and no zero.

use std::fmt;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::exact::{self, ExtendedReal};

/// Block size fixed by the MX specification.
pub const DEFAULT_BLOCK_SIZE: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fp8Format {
    E5M2,
    E4M3,
}

impl Fp8Format {
    pub const fn exponent_bits(self) -> u32 {
        match self {
            Fp8Format::E5M2 => 5,
            Fp8Format::E4M3 => 4,
        }
    }

    pub const fn mantissa_bits(self) -> u32 {
        match self {
            Fp8Format::E5M2 => 2,
            Fp8Format::E4M3 => 3,
        }
    }

    pub const fn bias(self) -> i32 {
        match self {
            Fp8Format::E5M2 => 15,
            Fp8Format::E4M3 => 7,
        }
    }

    /// Unbiased exponent of the largest finite binade.
    pub const fn emax(self) -> i32 {
        match self {
            Fp8Format::E5M2 => 15,
            Fp8Format::E4M3 => 8,
        }
    }

    /// Exponent of the smallest subnormal step (`2^min_quantum` is the
    /// smallest positive value).
    pub const fn min_quantum(self) -> i32 {
        1 - self.bias() - self.mantissa_bits() as i32
    }

    pub const fn max_finite(self) -> Fp8Code {
        match self {
            Fp8Format::E5M2 => Fp8Code::new(0x7B, self),
            Fp8Format::E4M3 => Fp8Code::new(0x7E, self),
        }
    }

    /// Canonical NaN (positive sign).
    pub const fn nan(self) -> Fp8Code {
        Fp8Code::new(0x7F, self)
    }

    /// Numeric code used by the tensor file format.
    pub const fn code(self) -> u8 {
        match self {
            Fp8Format::E5M2 => 0,
            Fp8Format::E4M3 => 1,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Fp8Format::E5M2),
            1 => Some(Fp8Format::E4M3),
            _ => None,
        }
    }
}

impl fmt::Display for Fp8Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fp8Format::E5M2 => "e5m2",
            Fp8Format::E4M3 => "e4m3",
        })
    }
}

impl std::str::FromStr for Fp8Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "e5m2" => Ok(Fp8Format::E5M2),
            "e4m3" => Ok(Fp8Format::E4M3),
            other => Err(format!(
                "unknown FP8 format {other:?} (expected e5m2 or e4m3)"
            )),
        }
    }
}

/// Classification of a decoded code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Zero,
    Subnormal,
    Normal,
    Infinite,
    Nan,
}

/// Finite value as `(-1)^negative * significand * 2^exponent` with an
/// integer significand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Unpacked {
    pub negative: bool,
    pub significand: u32,
    pub exponent: i32,
}

/// An 8-bit element pattern tagged with its format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fp8Code {
    bits: u8,
    format: Fp8Format,
}

impl Fp8Code {
    pub const fn new(bits: u8, format: Fp8Format) -> Self {
        Self { bits, format }
    }

    pub const fn bits(self) -> u8 {
        self.bits
    }

    pub const fn format(self) -> Fp8Format {
        self.format
    }

    pub fn is_negative(self) -> bool {
        self.bits & 0x80 != 0
    }

    fn fields(self) -> (u32, u32) {
        let m = self.format.mantissa_bits();
        let e = self.format.exponent_bits();
        let exp = (self.bits as u32 >> m) & ((1 << e) - 1);
        let man = self.bits as u32 & ((1 << m) - 1);
        (exp, man)
    }

    pub fn class(self) -> Class {
        let (exp, man) = self.fields();
        let exp_ones = (1 << self.format.exponent_bits()) - 1;
        match self.format {
            Fp8Format::E5M2 if exp == exp_ones => {
                if man == 0 {
                    Class::Infinite
                } else {
                    Class::Nan
                }
            }
            Fp8Format::E4M3 if exp == exp_ones && man == 0b111 => Class::Nan,
            _ if exp == 0 && man == 0 => Class::Zero,
            _ if exp == 0 => Class::Subnormal,
            _ => Class::Normal,
        }
    }

    pub fn is_nan(self) -> bool {
        self.class() == Class::Nan
    }

    /// Integer decomposition of a finite code (zero included).
    pub fn unpack(self) -> Option<Unpacked> {
        let (exp, man) = self.fields();
        let m = self.format.mantissa_bits();
        let negative = self.is_negative();
        match self.class() {
            Class::Nan | Class::Infinite => None,
            Class::Zero | Class::Subnormal => Some(Unpacked {
                negative,
                significand: man,
                exponent: self.format.min_quantum(),
            }),
            Class::Normal => Some(Unpacked {
                negative,
                significand: man | (1 << m),
                exponent: exp as i32 - self.format.bias() - m as i32,
            }),
        }
    }

    /// Exact value as an `f64` (every FP8 value is one).
    pub fn to_f64(self) -> f64 {
        decode_fp8(self).to_f64()
    }
}

/// Exact value of an element code.
pub fn decode_fp8(code: Fp8Code) -> ExtendedReal {
    match code.class() {
        Class::Nan => ExtendedReal::NaN,
        Class::Infinite => ExtendedReal::Infinity {
            negative: code.is_negative(),
        },
        _ => {
            let u = code.unpack().expect("finite");
            ExtendedReal::dyadic(u.negative, u.significand as u64, u.exponent)
        }
    }
}

/// Round-to-nearest-even into `format`.
///
/// Finite overflow saturates to the largest finite magnitude when
/// `saturating`; otherwise it becomes Inf (E5M2) or NaN (E4M3). Infinite
/// inputs stay infinite in E5M2 and become NaN in E4M3, in both modes.
pub fn encode_fp8(value: &ExtendedReal, format: Fp8Format, saturating: bool) -> Fp8Code {
    let sign = |negative: bool| if negative { 0x80u8 } else { 0 };
    let overflow = |negative: bool| match (format, saturating) {
        (_, true) => Fp8Code::new(format.max_finite().bits | sign(negative), format),
        (Fp8Format::E5M2, false) => Fp8Code::new(0x7C | sign(negative), format),
        (Fp8Format::E4M3, false) => format.nan(),
    };
    match value {
        ExtendedReal::NaN => format.nan(),
        ExtendedReal::Zero { negative } => Fp8Code::new(sign(*negative), format),
        ExtendedReal::Infinity { negative } => match format {
            Fp8Format::E5M2 => Fp8Code::new(0x7C | sign(*negative), format),
            Fp8Format::E4M3 => format.nan(),
        },
        ExtendedReal::Finite(q) => {
            let m = format.mantissa_bits();
            let r = exact::round_nearest_even(q, m + 1, format.min_quantum());
            let (mut sig, mut exp) = (r.significand as u32, r.exponent);
            if sig == 1 << (m + 1) {
                sig >>= 1;
                exp += 1;
            }
            if sig == 0 {
                return Fp8Code::new(sign(r.negative), format);
            }
            let max = format.max_finite().unpack().expect("finite");
            if exp > max.exponent || (exp == max.exponent && sig > max.significand) {
                return overflow(r.negative);
            }
            let bits = if sig < 1 << m {
                sig
            } else {
                let field = (exp + format.bias() + m as i32) as u32;
                (field << m) | (sig - (1 << m))
            };
            Fp8Code::new(bits as u8 | sign(r.negative), format)
        }
    }
}

/// Convenience wrapper for `f64` inputs.
pub fn encode_fp8_f64(value: f64, format: Fp8Format, saturating: bool) -> Fp8Code {
    encode_fp8(&ExtendedReal::from_f64(value), format, saturating)
}

/// E8M0 block scale: `2^(bits - 127)`, NaN at `0xFF`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScaleE8M0(pub u8);

impl ScaleE8M0 {
    pub const BIAS: i32 = 127;
    pub const NAN: ScaleE8M0 = ScaleE8M0(0xFF);
    pub const ONE: ScaleE8M0 = ScaleE8M0(127);

    pub const fn bits(self) -> u8 {
        self.0
    }

    pub const fn is_nan(self) -> bool {
        self.0 == 0xFF
    }

    /// Unbiased exponent, `None` for NaN.
    pub const fn exponent(self) -> Option<i32> {
        if self.is_nan() {
            None
        } else {
            Some(self.0 as i32 - Self::BIAS)
        }
    }

    /// Scale with the given unbiased exponent, clamped to `[-127, 127]`.
    pub fn from_exponent_clamped(exp: i32) -> Self {
        ScaleE8M0((exp.clamp(-127, 127) + Self::BIAS) as u8)
    }
}

pub fn decode_e8m0(scale: ScaleE8M0) -> ExtendedReal {
    match scale.exponent() {
        None => ExtendedReal::NaN,
        Some(e) => ExtendedReal::dyadic(false, 1, e),
    }
}

/// A 9-bit E5M3 pattern (bias 15) that holds every finite E5M2 and E4M3 value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fp9Code(u16);

impl Fp9Code {
    pub const BIAS: i32 = 15;
    pub const NAN: Fp9Code = Fp9Code(0x0FC);

    pub fn from_bits(bits: u16) -> Self {
        Fp9Code(bits & 0x1FF)
    }

    pub const fn bits(self) -> u16 {
        self.0
    }

    pub const fn is_negative(self) -> bool {
        self.0 & 0x100 != 0
    }

    pub const fn exponent_field(self) -> u16 {
        (self.0 >> 3) & 0x1F
    }

    pub const fn mantissa_field(self) -> u16 {
        self.0 & 0x7
    }

    pub const fn is_nan(self) -> bool {
        self.exponent_field() == 0x1F && self.mantissa_field() != 0
    }

    pub const fn is_infinite(self) -> bool {
        self.exponent_field() == 0x1F && self.mantissa_field() == 0
    }

    /// `(negative, m, e)` with value `m * 2^(e - 3)`, `m` in `[0, 15]`.
    ///
    /// Subnormals keep `e = -14` with `m < 8`, so no normalization is needed.
    pub fn unpack(self) -> Option<(bool, u32, i32)> {
        let (e, m) = (self.exponent_field() as i32, self.mantissa_field() as u32);
        match e {
            0x1F => None,
            0 => Some((self.is_negative(), m, 1 - Self::BIAS)),
            _ => Some((self.is_negative(), m | 8, e - Self::BIAS)),
        }
    }
}

pub fn decode_fp9(code: Fp9Code) -> ExtendedReal {
    if code.is_nan() {
        return ExtendedReal::NaN;
    }
    if code.is_infinite() {
        return ExtendedReal::Infinity {
            negative: code.is_negative(),
        };
    }
    let (negative, m, e) = code.unpack().expect("finite");
    ExtendedReal::dyadic(negative, m as u64, e - 3)
}

/// Exact widening of an FP8 element into FP9.
pub fn fp8_to_fp9(code: Fp8Code) -> Fp9Code {
    let sign = if code.is_negative() { 0x100 } else { 0 };
    match code.class() {
        Class::Nan => Fp9Code::NAN,
        Class::Infinite => Fp9Code(sign | 0x0F8),
        Class::Zero => Fp9Code(sign),
        Class::Subnormal | Class::Normal => {
            let u = code.unpack().expect("finite");
            let width = 32 - u.significand.leading_zeros() as i32;
            let msb = u.exponent + width - 1;
            let bits = if msb >= 1 - Fp9Code::BIAS {
                let sig4 = u.significand << (4 - width);
                let field = (msb + Fp9Code::BIAS) as u16;
                (field << 3) | (sig4 as u16 & 0x7)
            } else {
                // FP9 subnormal quantum is 2^-17; every FP8 subnormal sits on it.
                (u.significand << (u.exponent + 17)) as u16
            };
            Fp9Code(sign | bits)
        }
    }
}

/// `k` elements sharing one E8M0 scale.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MxBlock {
    pub scale: ScaleE8M0,
    pub format: Fp8Format,
    pub elements: Vec<u8>,
}

impl MxBlock {
    pub fn element(&self, i: usize) -> Fp8Code {
        Fp8Code::new(self.elements[i], self.format)
    }
}

/// Shared-scale exponent for a block: `floor(log2(max|v|)) - emax`,
/// clamped to the E8M0 range. All-zero blocks get exponent 0.
pub fn shared_exponent(values: &[f64], format: Fp8Format) -> i32 {
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return 0;
    }
    (floor_log2(max) - format.emax()).clamp(-127, 127)
}

fn floor_log2(v: f64) -> i32 {
    let bits = v.to_bits();
    let field = ((bits >> 52) & 0x7FF) as i32;
    if field == 0 {
        let frac = bits & ((1u64 << 52) - 1);
        -1074 + (63 - frac.leading_zeros() as i32)
    } else {
        field - 1023
    }
}

/// Quantize one block: pick the shared scale, then cast every element
/// `v / scale` with saturation.
pub fn quantize_block(values: &[f64], format: Fp8Format) -> Result<MxBlock, FormatError> {
    if values.is_empty() {
        return Err(FormatError::EmptyBlock);
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(FormatError::UnquantizableInput { index });
    }
    let shared = shared_exponent(values, format);
    let inv_scale = exact::pow2(-shared);
    let elements = values
        .iter()
        .map(|&v| {
            let scaled = match ExtendedReal::from_f64(v) {
                ExtendedReal::Finite(q) => ExtendedReal::Finite(q * &inv_scale),
                other => other,
            };
            encode_fp8(&scaled, format, true).bits()
        })
        .collect();
    Ok(MxBlock {
        scale: ScaleE8M0::from_exponent_clamped(shared),
        format,
        elements,
    })
}

/// Element-wise `decode_fp8 * decode_e8m0(scale)`. The products are exact
/// in `f64` (their exponents stay within roughly `[-143, 143]`).
pub fn dequantize_block(block: &MxBlock) -> Result<Vec<f64>, FormatError> {
    let e = block.scale.exponent().ok_or(FormatError::NanScaledBlock)?;
    Ok(block
        .elements
        .iter()
        .map(|&b| exact::ldexp(Fp8Code::new(b, block.format).to_f64(), e))
        .collect())
}

/// Row-major matrix of FP8 elements with one scale per (row, column block).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MxTensor {
    pub rows: usize,
    pub cols: usize,
    pub format: Fp8Format,
    pub block_size: usize,
    pub scales: Vec<ScaleE8M0>,
    pub elements: Vec<u8>,
}

impl MxTensor {
    pub fn blocks_per_row(&self) -> usize {
        self.cols.div_ceil(self.block_size)
    }

    pub fn element(&self, row: usize, col: usize) -> Fp8Code {
        Fp8Code::new(self.elements[row * self.cols + col], self.format)
    }

    pub fn scale(&self, row: usize, block: usize) -> ScaleE8M0 {
        self.scales[row * self.blocks_per_row() + block]
    }

    pub fn block(&self, row: usize, block: usize) -> MxBlock {
        let start = row * self.cols + block * self.block_size;
        let end = (start + self.block_size).min((row + 1) * self.cols);
        MxBlock {
            scale: self.scale(row, block),
            format: self.format,
            elements: self.elements[start..end].to_vec(),
        }
    }

    /// Dequantized values in row-major order.
    pub fn dequantize(&self) -> Result<Vec<f64>, FormatError> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for b in 0..self.blocks_per_row() {
                out.extend(dequantize_block(&self.block(r, b))?);
            }
        }
        Ok(out)
    }
}

/// Quantize a row-major matrix with blocks along each row.
pub fn quantize_matrix(
    values: &[f64],
    rows: usize,
    cols: usize,
    format: Fp8Format,
    block_size: usize,
) -> Result<MxTensor, FormatError> {
    if values.len() != rows * cols {
        return Err(FormatError::ShapeMismatch {
            rows,
            cols,
            actual: values.len(),
        });
    }
    if block_size == 0 || !cols.is_multiple_of(block_size) {
        return Err(FormatError::BlockMisalignment { cols, block_size });
    }
    let mut scales = Vec::with_capacity(rows * cols / block_size);
    let mut elements = Vec::with_capacity(rows * cols);
    for row in values.chunks_exact(cols.max(1)).take(rows) {
        for chunk in row.chunks_exact(block_size) {
            let block = quantize_block(chunk, format)?;
            scales.push(block.scale);
            elements.extend(block.elements);
        }
    }
    Ok(MxTensor {
        rows,
        cols,
        format,
        block_size,
        scales,
        elements,
    })
}

/// Rational value of a dequantized element, for reference computations.
pub fn scaled_value(code: Fp8Code, scale: ScaleE8M0) -> Option<BigRational> {
    let e = scale.exponent()?;
    decode_fp8(code).to_rational().map(|q| q * exact::pow2(e))
}
