//! The three GEMM kernels, `C = A * B` with `B` supplied transposed, built as
//! per-core instruction programs and executed on a simulated cluster.
//!
//! * `Fp32`: two-lane SIMD FMA over streamed FP32 operands inside an FREP.
//! * `Fp8ToFp32`: software baseline without streams or FREP. FP8 pairs are
//!   loaded and converted to FP32, FMA-accumulated per block, reduced, and
//!   scaled by an FP32 built from the two biased block exponents.
//! * `Mxfp8`: MXDOTP with A, B and the reshaped scales all streamed; one
//!   FREP per block.
//!
//! Output rows are split contiguously across cores; each core owns a copy
//! of the L1 image and runs on its own thread.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::core::{CoreState, Instr, Memory};
use super::cycle_model::{CycleModel, InstrClass};
use super::encoding::MxdotpInstruction;
use super::metrics::CycleReport;
use super::ssr::SsrConfig;
use crate::dotp::{mx_dotp_oracle, Fp32Value, LANES};
use crate::error::IsaError;
use crate::formats::{Fp8Format, MxTensor};

/// Output columns per tile (one accumulator register each).
pub const UNROLL: usize = 8;
/// Capacity of the modeled L1 scratchpad.
pub const L1_BYTES: usize = 128 * 1024;

/// Accumulators `f8..f15`; `f3` holds zero.
const ACC: u8 = 8;
const ZERO: u8 = 3;
const LOOP: u8 = 5;
const T1: u8 = 6;
const T2: u8 = 7;
const T3: u8 = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    Fp32,
    Fp8ToFp32,
    Mxfp8,
}

impl KernelVariant {
    pub const ALL: [KernelVariant; 3] = [
        KernelVariant::Fp32,
        KernelVariant::Fp8ToFp32,
        KernelVariant::Mxfp8,
    ];

    /// Peak FLOP per cycle per core: 8 lanes of multiply-add for MXDOTP,
    /// two for the SIMD FMA.
    pub fn peak_flops_per_cycle(self) -> u64 {
        match self {
            KernelVariant::Mxfp8 => 16,
            KernelVariant::Fp32 | KernelVariant::Fp8ToFp32 => 4,
        }
    }

    /// Bytes of A, B and C resident in L1 (scales excluded).
    pub fn footprint_bytes(self, m: usize, n: usize, k: usize) -> usize {
        let elem = match self {
            KernelVariant::Fp32 => 4,
            _ => 1,
        };
        (m * k + n * k) * elem + m * n * 4
    }

    pub fn fits_l1(self, m: usize, n: usize, k: usize) -> bool {
        self.footprint_bytes(m, n, k) <= L1_BYTES
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::Fp32 => "fp32",
            KernelVariant::Fp8ToFp32 => "fp8_to_fp32",
            KernelVariant::Mxfp8 => "mxfp8",
        }
    }
}

impl fmt::Display for KernelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        KernelVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown kernel variant `{s}`"))
    }
}

/// Kernel operands: `a` is `m x k`, `bt` is `n x k` (B transposed), both
/// row-major.
#[derive(Clone, Copy, Debug)]
pub enum KernelInput<'a> {
    Fp32 { a: &'a [f32], bt: &'a [f32] },
    Mx { a: &'a MxTensor, bt: &'a MxTensor },
}

fn dims_err(msg: impl Into<String>) -> IsaError {
    IsaError::Dimensions(msg.into())
}

fn check_common(m: usize, n: usize, k: usize, cores: usize) -> Result<(), IsaError> {
    if m == 0 || n == 0 || k == 0 || cores == 0 {
        return Err(dims_err("m, n, k and cores must be positive"));
    }
    if !m.is_multiple_of(cores) {
        return Err(dims_err(format!(
            "m = {m} is not divisible by {cores} cores"
        )));
    }
    if !n.is_multiple_of(UNROLL) {
        return Err(dims_err(format!("n = {n} is not a multiple of {UNROLL}")));
    }
    Ok(())
}

fn check_mx(a: &MxTensor, bt: &MxTensor, m: usize, n: usize, k: usize) -> Result<(), IsaError> {
    if a.format != bt.format {
        return Err(IsaError::FormatMismatch(format!(
            "A is {}, B is {}",
            a.format, bt.format
        )));
    }
    if a.block_size != bt.block_size {
        return Err(dims_err(format!(
            "block sizes differ: {} vs {}",
            a.block_size, bt.block_size
        )));
    }
    if (a.rows, a.cols) != (m, k) || (bt.rows, bt.cols) != (n, k) {
        return Err(dims_err(format!(
            "A is {}x{}, B^T is {}x{}, expected {m}x{k} and {n}x{k}",
            a.rows, a.cols, bt.rows, bt.cols
        )));
    }
    if a.block_size == 0 || !a.block_size.is_multiple_of(LANES) || !k.is_multiple_of(a.block_size) {
        return Err(dims_err(format!(
            "block size {} must be a multiple of {LANES} dividing k = {k}",
            a.block_size
        )));
    }
    Ok(())
}

/// Pack the block scales into the 64-bit words streamed to MXDOTP.
///
/// Words are laid out as `[row][tile][block][w]` with `w in 0..2`; pair
/// slot `sl` of word `w` holds `(X_A[row][block], X_B[tile*8 + 4w + sl][block])`
/// with `X_A` in the low byte. Each word serves four consecutive MXDOTPs,
/// which read it through stream repetition with `sl = j % 4`.
pub fn reshape_scales(a: &MxTensor, bt: &MxTensor) -> Vec<u64> {
    let blocks = a.blocks_per_row();
    let tiles = bt.rows / UNROLL;
    let mut words = Vec::with_capacity(a.rows * tiles * blocks * 2);
    for r in 0..a.rows {
        for t in 0..tiles {
            for b in 0..blocks {
                for w in 0..2 {
                    let mut word = 0u64;
                    for sl in 0..4 {
                        let col = t * UNROLL + 4 * w + sl;
                        let pair = u64::from(a.scale(r, b).bits())
                            | u64::from(bt.scale(col, b).bits()) << 8;
                        word |= pair << (16 * sl);
                    }
                    words.push(word);
                }
            }
        }
    }
    words
}

/// FP32 bit pattern the software baseline builds from two biased scales:
/// `(sa + sb - 127) << 23`. Equals `2^((sa-127) + (sb-127))` whenever the
/// biased sum lies in `1..=254`.
pub fn fp8_to_fp32_scale_bits(sa: u8, sb: u8) -> u32 {
    ((i64::from(sa) + i64::from(sb) - 127) << 23) as u32
}

struct Layout {
    a: u64,
    b: u64,
    /// MXFP8: reshaped scale words. FP8-to-FP32: A scales, then B scales.
    s: u64,
    sb: u64,
    c: u64,
    size: usize,
}

fn align8(x: usize) -> usize {
    x.div_ceil(8) * 8
}

impl Layout {
    fn new(
        a_bytes: usize,
        b_bytes: usize,
        s_bytes: usize,
        sb_bytes: usize,
        c_bytes: usize,
    ) -> Self {
        let a = 0;
        let b = align8(a_bytes);
        let s = b + align8(b_bytes);
        let sb = s + align8(s_bytes);
        let c = sb + align8(sb_bytes);
        Layout {
            a: a as u64,
            b: b as u64,
            s: s as u64,
            sb: sb as u64,
            c: c as u64,
            size: c + align8(c_bytes),
        }
    }
}

fn write_f32s(mem: &mut Memory, addr: u64, values: &[f32]) -> Result<(), IsaError> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    mem.write(addr, &bytes)
}

fn ssr(base: u64, dims: &[(u32, i64)], repeat: u32) -> Box<SsrConfig> {
    let mut cfg = SsrConfig {
        base,
        strides: [0; 4],
        bounds: [1; 4],
        repeat,
    };
    for (d, &(bound, stride)) in dims.iter().enumerate() {
        cfg.bounds[d] = bound;
        cfg.strides[d] = stride;
    }
    Box::new(cfg)
}

fn loop_tail(p: &mut Vec<Instr>) {
    p.push(Instr::Addi {
        xd: LOOP,
        xs: LOOP,
        imm: 1,
    });
    p.push(Instr::Branch);
}

fn init_accumulators(p: &mut Vec<Instr>) {
    for j in 0..UNROLL as u8 {
        p.push(Instr::Vfcpka {
            fd: ACC + j,
            fs1: ZERO,
            fs2: ZERO,
        });
    }
}

struct Shape {
    n: usize,
    k: usize,
    rows: std::ops::Range<usize>,
}

fn mxfp8_program(l: &Layout, s: &Shape, format: Fp8Format, block_size: usize) -> Vec<Instr> {
    let (n, k) = (s.n, s.k);
    let rows = s.rows.len();
    let tiles = n / UNROLL;
    let blocks = k / block_size;
    let r0 = s.rows.start;
    let a_cfg = ssr(
        l.a + (r0 * k) as u64,
        &[
            ((k / 8) as u32, 8),
            (tiles as u32, 0),
            (rows as u32, k as i64),
        ],
        UNROLL as u32 - 1,
    );
    let b_cfg = ssr(
        l.b,
        &[
            (UNROLL as u32, k as i64),
            ((k / 8) as u32, 8),
            (tiles as u32, (UNROLL * k) as i64),
            (rows as u32, 0),
        ],
        0,
    );
    let s_cfg = ssr(
        l.s + (r0 * tiles * blocks * 16) as u64,
        &[
            (2, 8),
            ((block_size / 8) as u32, 0),
            (blocks as u32, 16),
            ((rows * tiles) as u32, (16 * blocks) as i64),
        ],
        3,
    );
    let mut p = vec![
        Instr::SetFormat(format),
        Instr::FmvWX { fd: ZERO, xs: 0 },
        Instr::SsrConfigure {
            stream: 0,
            config: a_cfg,
        },
        Instr::SsrConfigure {
            stream: 1,
            config: b_cfg,
        },
        Instr::SsrConfigure {
            stream: 2,
            config: s_cfg,
        },
        Instr::SsrEnable(true),
    ];
    for r in s.rows.clone() {
        for t in 0..tiles {
            init_accumulators(&mut p);
            for _ in 0..blocks {
                p.push(Instr::Frep {
                    reps: (block_size / 8) as u32,
                    body: UNROLL,
                });
                for j in 0..UNROLL as u8 {
                    let inst = MxdotpInstruction {
                        rd: ACC + j,
                        rs1: 0,
                        rs2: 1,
                        rs3: 2,
                        sl: j % 4,
                    };
                    p.push(Instr::Mxdotp(inst));
                }
                loop_tail(&mut p);
            }
            for j in 0..UNROLL {
                p.push(Instr::Fsw {
                    fs: ACC + j as u8,
                    addr: l.c + ((r * n + t * UNROLL + j) * 4) as u64,
                });
            }
            loop_tail(&mut p);
        }
    }
    p.push(Instr::SsrEnable(false));
    p
}

fn fp32_program(l: &Layout, s: &Shape) -> Vec<Instr> {
    let (n, k) = (s.n, s.k);
    let rows = s.rows.len();
    let tiles = n / UNROLL;
    let a_cfg = ssr(
        l.a + (s.rows.start * k * 4) as u64,
        &[
            ((k / 2) as u32, 8),
            (tiles as u32, 0),
            (rows as u32, 4 * k as i64),
        ],
        UNROLL as u32 - 1,
    );
    let b_cfg = ssr(
        l.b,
        &[
            (UNROLL as u32, 4 * k as i64),
            ((k / 2) as u32, 8),
            (tiles as u32, (4 * UNROLL * k) as i64),
            (rows as u32, 0),
        ],
        0,
    );
    let mut p = vec![
        Instr::FmvWX { fd: ZERO, xs: 0 },
        Instr::SsrConfigure {
            stream: 0,
            config: a_cfg,
        },
        Instr::SsrConfigure {
            stream: 1,
            config: b_cfg,
        },
        Instr::SsrEnable(true),
    ];
    for r in s.rows.clone() {
        for t in 0..tiles {
            init_accumulators(&mut p);
            p.push(Instr::Frep {
                reps: (k / 2) as u32,
                body: UNROLL,
            });
            for j in 0..UNROLL as u8 {
                p.push(Instr::Vfmac {
                    fd: ACC + j,
                    fs1: 0,
                    fs2: 1,
                });
            }
            for j in 0..UNROLL as u8 {
                p.push(Instr::Vfsum {
                    fd: ACC + j,
                    fs: ACC + j,
                });
            }
            for j in 0..UNROLL {
                p.push(Instr::Fsw {
                    fs: ACC + j as u8,
                    addr: l.c + ((r * n + t * UNROLL + j) * 4) as u64,
                });
            }
            loop_tail(&mut p);
        }
    }
    p.push(Instr::SsrEnable(false));
    p
}

fn fp8_to_fp32_program(l: &Layout, s: &Shape, format: Fp8Format, block_size: usize) -> Vec<Instr> {
    const RESULT: u8 = 18;
    const PARTIAL: u8 = 19;
    const SCALE: u8 = 12;
    // f0..f7 hold converted operands, so zero lives elsewhere.
    const ZERO: u8 = 20;
    let (n, k) = (s.n, s.k);
    let blocks = k / block_size;
    let mut p = vec![Instr::SetFormat(format), Instr::FmvWX { fd: ZERO, xs: 0 }];
    for r in s.rows.clone() {
        for col in 0..n {
            p.push(Instr::Vfcpka {
                fd: RESULT,
                fs1: ZERO,
                fs2: ZERO,
            });
            for b in 0..blocks {
                for fd in [ACC, ACC + 1, ACC + 2, ACC + 3, PARTIAL] {
                    p.push(Instr::Vfcpka {
                        fd,
                        fs1: ZERO,
                        fs2: ZERO,
                    });
                }
                p.push(Instr::Lbu {
                    xd: T1,
                    addr: l.s + (r * blocks + b) as u64,
                });
                p.push(Instr::Lbu {
                    xd: T2,
                    addr: l.sb + (col * blocks + b) as u64,
                });
                p.push(Instr::Add {
                    xd: T3,
                    xs1: T1,
                    xs2: T2,
                });
                p.push(Instr::Addi {
                    xd: T3,
                    xs: T3,
                    imm: -127,
                });
                for g in 0..block_size / 8 {
                    let off = b * block_size + g * 8;
                    for (base, reg0) in [
                        (l.a + (r * k + off) as u64, 0u8),
                        (l.b + (col * k + off) as u64, 4),
                    ] {
                        for i in 0..4u8 {
                            p.push(Instr::Flh {
                                fd: reg0 + i,
                                addr: base + 2 * u64::from(i),
                            });
                            p.push(Instr::Vfcvt {
                                fd: reg0 + i,
                                fs: reg0 + i,
                            });
                        }
                    }
                    for i in 0..4u8 {
                        p.push(Instr::Vfmac {
                            fd: ACC + i,
                            fs1: i,
                            fs2: 4 + i,
                        });
                    }
                    loop_tail(&mut p);
                }
                p.push(Instr::Vfadd {
                    fd: ACC,
                    fs1: ACC,
                    fs2: ACC + 1,
                });
                p.push(Instr::Vfadd {
                    fd: ACC + 2,
                    fs1: ACC + 2,
                    fs2: ACC + 3,
                });
                p.push(Instr::Vfadd {
                    fd: ACC,
                    fs1: ACC,
                    fs2: ACC + 2,
                });
                p.push(Instr::Vfsum {
                    fd: PARTIAL,
                    fs: ACC,
                });
                p.push(Instr::Slli {
                    xd: T3,
                    xs: T3,
                    shamt: 23,
                });
                p.push(Instr::FmvWX { fd: SCALE, xs: T3 });
                p.push(Instr::FmaddS {
                    fd: RESULT,
                    fs1: PARTIAL,
                    fs2: SCALE,
                    fs3: RESULT,
                });
            }
            p.push(Instr::Fsw {
                fs: RESULT,
                addr: l.c + ((r * n + col) * 4) as u64,
            });
        }
    }
    p
}

/// Run one kernel on `cores` simulated cores. Returns the `m x n` row-major
/// result and the cluster timing report.
pub fn run_kernel(
    variant: KernelVariant,
    input: KernelInput<'_>,
    m: usize,
    n: usize,
    k: usize,
    cores: usize,
    model: &CycleModel,
) -> Result<(Vec<f32>, CycleReport), IsaError> {
    check_common(m, n, k, cores)?;
    let c_bytes = m * n * 4;
    let (layout, mem) = match (variant, input) {
        (KernelVariant::Fp32, KernelInput::Fp32 { a, bt }) => {
            if !k.is_multiple_of(2) {
                return Err(dims_err(format!("k = {k} must be even")));
            }
            if a.len() != m * k || bt.len() != n * k {
                return Err(dims_err(format!(
                    "operand lengths {} and {} do not match {m}x{k} and {n}x{k}",
                    a.len(),
                    bt.len()
                )));
            }
            let l = Layout::new(m * k * 4, n * k * 4, 0, 0, c_bytes);
            let mut mem = Memory::new(l.size);
            write_f32s(&mut mem, l.a, a)?;
            write_f32s(&mut mem, l.b, bt)?;
            (l, mem)
        }
        (KernelVariant::Mxfp8, KernelInput::Mx { a, bt }) => {
            check_mx(a, bt, m, n, k)?;
            let words = reshape_scales(a, bt);
            let l = Layout::new(m * k, n * k, words.len() * 8, 0, c_bytes);
            let mut mem = Memory::new(l.size);
            mem.write(l.a, &a.elements)?;
            mem.write(l.b, &bt.elements)?;
            let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
            mem.write(l.s, &bytes)?;
            (l, mem)
        }
        (KernelVariant::Fp8ToFp32, KernelInput::Mx { a, bt }) => {
            check_mx(a, bt, m, n, k)?;
            let sa: Vec<u8> = a.scales.iter().map(|s| s.bits()).collect();
            let sb: Vec<u8> = bt.scales.iter().map(|s| s.bits()).collect();
            let l = Layout::new(m * k, n * k, sa.len(), sb.len(), c_bytes);
            let mut mem = Memory::new(l.size);
            mem.write(l.a, &a.elements)?;
            mem.write(l.b, &bt.elements)?;
            mem.write(l.s, &sa)?;
            mem.write(l.sb, &sb)?;
            (l, mem)
        }
        (v, _) => {
            return Err(IsaError::FormatMismatch(format!(
                "variant {v} does not accept these operands"
            )))
        }
    };
    let (format, block_size) = match input {
        KernelInput::Mx { a, .. } => (a.format, a.block_size),
        KernelInput::Fp32 { .. } => (Fp8Format::E4M3, 0),
    };

    let rows_per_core = m / cores;
    let runs: Vec<Result<(CoreState, super::core::CoreRun), IsaError>> =
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..cores)
                .map(|core| {
                    let shape = Shape {
                        n,
                        k,
                        rows: core * rows_per_core..(core + 1) * rows_per_core,
                    };
                    let mem = mem.clone();
                    let layout = &layout;
                    scope.spawn(move || {
                        let program = match variant {
                            KernelVariant::Fp32 => fp32_program(layout, &shape),
                            KernelVariant::Mxfp8 => {
                                mxfp8_program(layout, &shape, format, block_size)
                            }
                            KernelVariant::Fp8ToFp32 => {
                                fp8_to_fp32_program(layout, &shape, format, block_size)
                            }
                        };
                        let mut state = CoreState::new(mem);
                        let run = state.run(&program, model)?;
                        Ok((state, run))
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("core thread panicked"))
                .collect()
        });

    let mut c = vec![0f32; m * n];
    let mut per_core_cycles = Vec::with_capacity(cores);
    let mut issued = std::collections::BTreeMap::<InstrClass, u64>::new();
    for (core, run) in runs.into_iter().enumerate() {
        let (state, run) = run?;
        let rows = core * rows_per_core..(core + 1) * rows_per_core;
        let bytes = state
            .memory
            .read(layout.c + (rows.start * n * 4) as u64, rows.len() * n * 4)?;
        for (dst, chunk) in c[rows.start * n..rows.end * n]
            .iter_mut()
            .zip(bytes.chunks_exact(4))
        {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        per_core_cycles.push(run.cycles);
        for (class, count) in run.issued {
            *issued.entry(class).or_insert(0) += count;
        }
    }
    let report = CycleReport {
        variant,
        m,
        n,
        k,
        cores,
        total_cycles: per_core_cycles.iter().copied().max().unwrap_or(0),
        per_core_cycles,
        useful_flops: 2 * (m * n * k) as u64,
        peak_flops_per_cycle: variant.peak_flops_per_cycle(),
        issued,
        cycle_model: model.fingerprint(),
    };
    Ok((c, report))
}

/// MXFP8 GEMM evaluated with the arbitrary-precision MXDOTP reference,
/// chaining one call per 8 reduction elements from a `+0` accumulator.
pub fn mxfp8_oracle_gemm(a: &MxTensor, bt: &MxTensor) -> Vec<f32> {
    let k = a.cols;
    let mut c = Vec::with_capacity(a.rows * bt.rows);
    for r in 0..a.rows {
        for col in 0..bt.rows {
            let mut acc = Fp32Value::ZERO;
            for kk in (0..k).step_by(LANES) {
                let pa: [u8; LANES] = a.elements[r * k + kk..r * k + kk + LANES]
                    .try_into()
                    .unwrap();
                let pb: [u8; LANES] = bt.elements[col * k + kk..col * k + kk + LANES]
                    .try_into()
                    .unwrap();
                let b = kk / a.block_size;
                acc = mx_dotp_oracle(&pa, &pb, a.scale(r, b), bt.scale(col, b), acc, a.format);
            }
            c.push(acc.to_f32());
        }
    }
    c
}

/// Plain FP32 GEMM in the FP32 kernel's order: even and odd reduction
/// indices accumulate separately with fused multiply-adds, then add.
pub fn fp32_reference_gemm(a: &[f32], bt: &[f32], m: usize, n: usize, k: usize) -> Vec<f32> {
    let mut c = Vec::with_capacity(m * n);
    for r in 0..m {
        for col in 0..n {
            let (mut even, mut odd) = (0f32, 0f32);
            for kk in (0..k).step_by(2) {
                even = a[r * k + kk].mul_add(bt[col * k + kk], even);
                odd = a[r * k + kk + 1].mul_add(bt[col * k + kk + 1], odd);
            }
            c.push(even + odd);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{quantize_matrix, ScaleE8M0};
    use crate::isa::cycle_model::Cost;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn mx_pair(seed: u64, m: usize, n: usize, k: usize, format: Fp8Format) -> (MxTensor, MxTensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = quantize_matrix(&random(&mut rng, m * k), m, k, format, 32).unwrap();
        let bt = quantize_matrix(&random(&mut rng, n * k), n, k, format, 32).unwrap();
        (a, bt)
    }

    /// Scalar emulation of the software baseline's arithmetic.
    fn fp8_to_fp32_reference(a: &MxTensor, bt: &MxTensor) -> Vec<f32> {
        let (k, bs) = (a.cols, a.block_size);
        let cvt = |c: crate::formats::Fp8Code| c.to_f64() as f32;
        let mut out = Vec::new();
        for r in 0..a.rows {
            for col in 0..bt.rows {
                let mut result = 0f32;
                for b in 0..k / bs {
                    let mut acc = [[0f32; 2]; 4];
                    for g in 0..bs / 8 {
                        for i in 0..4 {
                            for lane in 0..2 {
                                let kk = b * bs + g * 8 + 2 * i + lane;
                                acc[i][lane] = cvt(a.element(r, kk))
                                    .mul_add(cvt(bt.element(col, kk)), acc[i][lane]);
                            }
                        }
                    }
                    let s01 = [acc[0][0] + acc[1][0], acc[0][1] + acc[1][1]];
                    let s23 = [acc[2][0] + acc[3][0], acc[2][1] + acc[3][1]];
                    let s = [s01[0] + s23[0], s01[1] + s23[1]];
                    let partial = s[0] + s[1];
                    let scale = f32::from_bits(fp8_to_fp32_scale_bits(
                        a.scale(r, b).bits(),
                        bt.scale(col, b).bits(),
                    ));
                    result = partial.mul_add(scale, result);
                }
                out.push(result);
            }
        }
        out
    }

    #[test]
    fn mxfp8_matches_chained_oracle() {
        for (seed, format) in [(1, Fp8Format::E4M3), (2, Fp8Format::E5M2)] {
            let (m, n, k) = (8, 16, 64);
            let (a, bt) = mx_pair(seed, m, n, k, format);
            let (c, report) = run_kernel(
                KernelVariant::Mxfp8,
                KernelInput::Mx { a: &a, bt: &bt },
                m,
                n,
                k,
                2,
                &CycleModel::default(),
            )
            .unwrap();
            let want = mxfp8_oracle_gemm(&a, &bt);
            let same = c.iter().zip(&want).all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same);
            assert_eq!(report.issued[&InstrClass::Mxdotp], (m * n * k / 8) as u64);
        }
    }

    #[test]
    fn fp32_matches_reference_loop() {
        let (m, n, k) = (4, 8, 32);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f32> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bt: Vec<f32> = (0..n * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (c, _) = run_kernel(
            KernelVariant::Fp32,
            KernelInput::Fp32 { a: &a, bt: &bt },
            m,
            n,
            k,
            2,
            &CycleModel::default(),
        )
        .unwrap();
        assert_eq!(c, fp32_reference_gemm(&a, &bt, m, n, k));
    }

    #[test]
    fn fp8_to_fp32_matches_scalar_emulation() {
        let (m, n, k) = (4, 8, 64);
        let (a, bt) = mx_pair(4, m, n, k, Fp8Format::E4M3);
        let (c, _) = run_kernel(
            KernelVariant::Fp8ToFp32,
            KernelInput::Mx { a: &a, bt: &bt },
            m,
            n,
            k,
            4,
            &CycleModel::default(),
        )
        .unwrap();
        assert_eq!(c, fp8_to_fp32_reference(&a, &bt));
        // Close to the exact product.
        let want = mxfp8_oracle_gemm(&a, &bt);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() <= 1e-4 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn zero_matrices_give_zero() {
        let (m, n, k) = (8, 8, 32);
        let zeros = vec![0.0; m * k];
        let a = quantize_matrix(&zeros, m, k, Fp8Format::E5M2, 32).unwrap();
        let model = CycleModel::default();
        for v in [KernelVariant::Mxfp8, KernelVariant::Fp8ToFp32] {
            let (c, _) =
                run_kernel(v, KernelInput::Mx { a: &a, bt: &a }, m, n, k, 8, &model).unwrap();
            assert!(c.iter().all(|&x| x == 0.0));
        }
        let z32 = vec![0f32; m * k];
        let (c, _) = run_kernel(
            KernelVariant::Fp32,
            KernelInput::Fp32 { a: &z32, bt: &z32 },
            m,
            n,
            k,
            8,
            &model,
        )
        .unwrap();
        assert!(c.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reshape_examples() {
        let a = quantize_matrix(&[1.0; 32], 1, 32, Fp8Format::E4M3, 32).unwrap();
        let bt = quantize_matrix(&vec![1.0; 8 * 32], 8, 32, Fp8Format::E4M3, 32).unwrap();
        let words = reshape_scales(&a, &bt);
        assert_eq!(words.len(), 2);
        assert_eq!(words[0], words[1]);
        let pair = words[0] & 0xFFFF;
        assert!((0..4).all(|sl| (words[0] >> (16 * sl)) & 0xFFFF == pair));

        let mut vals = vec![1.0; 8 * 32];
        for j in 0..8 {
            vals[j * 32] = (1 << j) as f64;
        }
        let bt = quantize_matrix(&vals, 8, 32, Fp8Format::E4M3, 32).unwrap();
        let words = reshape_scales(&a, &bt);
        for j in 0..8 {
            let pair = (words[j / 4] >> (16 * (j % 4))) & 0xFFFF;
            assert_eq!(pair as u8, a.scale(0, 0).bits());
            assert_eq!((pair >> 8) as u8, bt.scale(j, 0).bits());
        }
        assert_ne!(words[0], words[1]);
    }

    #[test]
    fn scale_construction_is_exact() {
        for sa in 0..=255u16 {
            for sb in 0..=255u16 {
                let biased = sa as i32 + sb as i32 - 127;
                if !(1..=254).contains(&biased) || sa == 255 || sb == 255 {
                    continue;
                }
                let got = f32::from_bits(fp8_to_fp32_scale_bits(sa as u8, sb as u8));
                let want = crate::exact::ldexp(1.0, (sa as i32 - 127) + (sb as i32 - 127)) as f32;
                assert_eq!(got, want);
                let _ = ScaleE8M0(sa as u8);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let (a, bt) = mx_pair(5, 8, 8, 32, Fp8Format::E4M3);
        let model = CycleModel::default();
        let input = KernelInput::Mx { a: &a, bt: &bt };
        assert!(matches!(
            run_kernel(KernelVariant::Mxfp8, input, 8, 8, 32, 3, &model),
            Err(IsaError::Dimensions(_))
        ));
        assert!(matches!(
            run_kernel(KernelVariant::Mxfp8, input, 8, 8, 64, 8, &model),
            Err(IsaError::Dimensions(_))
        ));
        assert!(matches!(
            run_kernel(KernelVariant::Fp32, input, 8, 8, 32, 8, &model),
            Err(IsaError::FormatMismatch(_))
        ));
        let (a5, _) = mx_pair(5, 8, 8, 32, Fp8Format::E5M2);
        assert!(matches!(
            run_kernel(
                KernelVariant::Mxfp8,
                KernelInput::Mx { a: &a5, bt: &bt },
                8,
                8,
                32,
                8,
                &model
            ),
            Err(IsaError::FormatMismatch(_))
        ));
    }

    #[test]
    fn functional_result_ignores_timing() {
        let (a, bt) = mx_pair(6, 8, 8, 64, Fp8Format::E4M3);
        let input = KernelInput::Mx { a: &a, bt: &bt };
        let mut slow = CycleModel::default();
        for class in InstrClass::ALL {
            slow.set(
                class,
                Cost {
                    issue: 3,
                    latency: 7,
                },
            );
        }
        for v in [KernelVariant::Mxfp8, KernelVariant::Fp8ToFp32] {
            let (c1, r1) = run_kernel(v, input, 8, 8, 64, 2, &CycleModel::default()).unwrap();
            let (c2, r2) = run_kernel(v, input, 8, 8, 64, 2, &slow).unwrap();
            let (c3, _) = run_kernel(v, input, 8, 8, 64, 2, &CycleModel::ideal()).unwrap();
            assert_eq!(c1, c2);
            assert_eq!(c1, c3);
            assert!(r2.total_cycles > r1.total_cycles);
        }
    }

    #[test]
    fn ideal_model_reaches_peak() {
        let (a, bt) = mx_pair(7, 16, 16, 128, Fp8Format::E4M3);
        let (_, r) = run_kernel(
            KernelVariant::Mxfp8,
            KernelInput::Mx { a: &a, bt: &bt },
            16,
            16,
            128,
            8,
            &CycleModel::ideal(),
        )
        .unwrap();
        assert_eq!(r.utilization(), 1.0);
        assert_eq!(r.gflops_at(1.0), 128.0);
    }

    #[test]
    fn l1_rule() {
        assert!(KernelVariant::Fp32.fits_l1(64, 64, 128));
        assert!(!KernelVariant::Fp32.fits_l1(64, 64, 256));
        assert!(KernelVariant::Mxfp8.fits_l1(64, 64, 256));
    }
}
