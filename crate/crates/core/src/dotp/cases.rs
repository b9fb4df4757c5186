//! Test-vector corpora for MXDOTP: directed corner cases and a seeded
//! random stream biased toward cancellation.

use std::fmt;

use rand::Rng;

use super::{mx_dotp, mx_dotp_oracle, oracle::exact_result, Fp32Value, LANES};
use crate::exact::ExtendedReal;
use crate::formats::{Fp8Format, ScaleE8M0};

/// One MXDOTP input vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DotpCase {
    pub format: Fp8Format,
    pub pa: [u8; LANES],
    pub pb: [u8; LANES],
    pub xa: u8,
    pub xb: u8,
    pub c: u32,
}

impl DotpCase {
    pub fn run(&self) -> Fp32Value {
        mx_dotp(
            &self.pa,
            &self.pb,
            ScaleE8M0(self.xa),
            ScaleE8M0(self.xb),
            Fp32Value(self.c),
            self.format,
        )
    }

    pub fn reference(&self) -> Fp32Value {
        mx_dotp_oracle(
            &self.pa,
            &self.pb,
            ScaleE8M0(self.xa),
            ScaleE8M0(self.xb),
            Fp32Value(self.c),
            self.format,
        )
    }

    /// Datapath and reference agree bit for bit (any NaN matches any NaN).
    pub fn check(&self) -> Result<(), Mismatch> {
        let got = self.run();
        let want = self.reference();
        if got == want || (got.is_nan() && want.is_nan()) {
            Ok(())
        } else {
            Err(Mismatch {
                case: *self,
                got,
                want,
            })
        }
    }
}

impl fmt::Display for DotpCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = |v: &[u8; LANES]| {
            v.iter()
                .map(|b| format!("{b:02x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(
            f,
            "format={} a=[{}] b=[{}] xa={:#04x} xb={:#04x} c={:#010x}",
            self.format,
            hex(&self.pa),
            hex(&self.pb),
            self.xa,
            self.xb,
            self.c
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub case: DotpCase,
    pub got: Fp32Value,
    pub want: Fp32Value,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: got {:#010x}, expected {:#010x}",
            self.case, self.got.0, self.want.0
        )
    }
}

/// Interesting element encodings for a format: zeros, subnormal extremes,
/// one, the largest finite value, and their negations.
fn special_elements(format: Fp8Format) -> Vec<u8> {
    let max = format.max_finite().bits();
    let min_normal = 1u8 << format.mantissa_bits();
    let max_sub = min_normal - 1;
    let one = (format.bias() as u8) << format.mantissa_bits();
    let mut v = vec![0x00, 0x01, max_sub, min_normal, one, one + 1, max, max - 1];
    let neg: Vec<u8> = v.iter().map(|b| b | 0x80).collect();
    v.extend(neg);
    v
}

/// FP32 bit patterns exercising the accumulator path.
const C_PATTERNS: [u32; 14] = [
    0x0000_0000, // +0
    0x8000_0000, // -0
    0x0000_0001, // min subnormal
    0x807F_FFFF, // -max subnormal
    0x0080_0000, // min normal
    0x3F80_0000, // 1
    0xBF80_0000, // -1
    0x4B80_0000, // 2^24
    0x7F7F_FFFF, // max finite
    0xFF7F_FFFF, // -max finite
    0x7F80_0000, // +inf
    0xFF80_0000, // -inf
    0x7FC0_0000, // NaN
    0x3380_0000, // 2^-24
];

const SCALES: [u8; 8] = [0, 1, 64, 127, 128, 200, 254, 0xFF];

/// Directed corner cases for one format. Deterministic; several hundred
/// vectors.
pub fn corner_cases(format: Fp8Format) -> Vec<DotpCase> {
    let elems = special_elements(format);
    let mut out = Vec::new();
    let case = |pa: [u8; LANES], pb: [u8; LANES], xa: u8, xb: u8, c: u32| DotpCase {
        format,
        pa,
        pb,
        xa,
        xb,
        c,
    };

    // Uniform lanes across elements, accumulators and scale extremes.
    for (i, &e) in elems.iter().enumerate() {
        for (j, &c) in C_PATTERNS.iter().enumerate() {
            let xa = SCALES[(i + j) % SCALES.len()];
            let xb = SCALES[(i * 3 + j) % SCALES.len()];
            out.push(case(
                [e; LANES],
                [elems[(i + j) % elems.len()]; LANES],
                xa,
                xb,
                c,
            ));
        }
    }

    // A single minimum-subnormal product against every accumulator, at the
    // extreme scale exponents.
    for &c in &C_PATTERNS {
        for (xa, xb) in [(0u8, 0u8), (254, 254), (127, 127), (0, 254)] {
            let mut pa = [0u8; LANES];
            pa[3] = 0x01;
            out.push(case(pa, pa, xa, xb, c));
        }
    }

    // Exact cancellation of the products against each other.
    for &e in &elems {
        let mut pa = [e; LANES];
        for lane in pa.iter_mut().skip(LANES / 2) {
            *lane ^= 0x80;
        }
        let one = (format.bias() as u8) << format.mantissa_bits();
        for &c in &[0x0000_0000u32, 0x8000_0000, 0x0000_0001] {
            out.push(case(pa, [one; LANES], 127, 127, c));
        }
    }

    // Ties: the product sum sits half an FP32 ulp from c, with and without
    // extra low-order bits that act as sticky.
    for &x in &[127u8, 100, 140] {
        let one = (format.bias() as u8) << format.mantissa_bits();
        let mut pa = [0u8; LANES];
        pa[0] = one;
        // c = 2^24 * 2^(s) so that 1 * 2^s is exactly half an ulp.
        let s = 2 * (x as i32 - 127);
        let c_field = (24 + s + 127) as u32;
        let c = c_field << 23;
        out.push(case(pa, [one; LANES], x, x, c));
        out.push(case(pa, [one; LANES], x, x, c | 1));
        let mut pa2 = pa;
        pa2[1] = 0x01;
        out.push(case(pa2, [one; LANES], x, x, c));
        pa2[1] = 0x81;
        out.push(case(pa2, [one; LANES], x, x, c));
    }

    // Overflow of the scaled sum.
    let max = format.max_finite().bits();
    out.push(case([max; LANES], [max; LANES], 254, 254, 0));
    out.push(case(
        [max | 0x80; LANES],
        [max; LANES],
        254,
        200,
        0x7F7F_FFFF,
    ));

    out
}

/// Random vectors: half with random accumulator bits, half with the
/// accumulator set near the negated scaled product sum to force deep
/// cancellation.
pub fn random_cases<R: Rng>(rng: &mut R, format: Fp8Format, count: usize) -> Vec<DotpCase> {
    (0..count)
        .map(|i| {
            let mut pa = [0u8; LANES];
            let mut pb = [0u8; LANES];
            rng.fill(&mut pa);
            rng.fill(&mut pb);
            let xa = rng.gen_range(64..=190);
            let xb = rng.gen_range(64..=190);
            let mut case = DotpCase {
                format,
                pa,
                pb,
                xa,
                xb,
                c: rng.gen(),
            };
            if i % 2 == 1 {
                case.c = 0;
                if let ExtendedReal::Finite(q) = exact_result(
                    &pa,
                    &pb,
                    ScaleE8M0(xa),
                    ScaleE8M0(xb),
                    Fp32Value::ZERO,
                    format,
                ) {
                    let bits = crate::exact::to_f32_bits(&ExtendedReal::from_rational(-q));
                    // Perturb the low bits so the residual varies.
                    case.c = bits ^ rng.gen_range(0..4u32);
                }
            }
            case
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn corner_corpus_is_large_and_passes() {
        for format in [Fp8Format::E4M3, Fp8Format::E5M2] {
            let cases = corner_cases(format);
            assert!(cases.len() >= 200, "{} cases", cases.len());
            for c in &cases {
                c.check().unwrap_or_else(|m| panic!("{m}"));
            }
        }
    }

    #[test]
    fn random_corpus_passes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for format in [Fp8Format::E4M3, Fp8Format::E5M2] {
            for c in random_cases(&mut rng, format, 2000) {
                c.check().unwrap_or_else(|m| panic!("{m}"));
            }
        }
    }

    #[test]
    fn display_is_reproducible() {
        let c = DotpCase {
            format: Fp8Format::E5M2,
            pa: [1, 2, 3, 4, 5, 6, 7, 8],
            pb: [0; 8],
            xa: 127,
            xb: 0xFF,
            c: 0x3F80_0000,
        };
        assert_eq!(
            c.to_string(),
            "format=e5m2 a=[01,02,03,04,05,06,07,08] b=[00,00,00,00,00,00,00,00] xa=0x7f xb=0xff c=0x3f800000"
        );
    }
}
