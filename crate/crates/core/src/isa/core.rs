//! Single-core model: FP register file with stream-mapped registers, a small
//! integer register file, the FP8 format CSR, an ideal L1 image, and a
//! pseudo-dual-issue timing model.
//!
//! The integer pipeline walks the program and offloads FP instructions to an
//! FP sequencer that runs behind it. Both sides stall on register
//! scoreboards. An FREP hands a body of FP instructions to the sequencer,
//! which replays it without further integer-side work.

use std::collections::BTreeMap;

use super::cycle_model::{CycleModel, InstrClass};
use super::encoding::MxdotpInstruction;
use super::ssr::{SsrConfig, SsrStream};
use crate::dotp::{mx_dotp, Fp32Value, LANES};
use crate::error::IsaError;
use crate::formats::{Fp8Code, Fp8Format, ScaleE8M0};

pub const FP_REGS: usize = 32;
pub const INT_REGS: usize = 32;
/// Streams are bound to `f0`, `f1`, `f2`.
pub const STREAMS: usize = 3;
pub const READ_PORTS: usize = 3;

/// Upper half written by scalar FP operations.
const NAN_BOX: u64 = 0xFFFF_FFFF_0000_0000;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    bytes: Vec<u8>,
}

impl Memory {
    pub fn new(size: usize) -> Self {
        Memory {
            bytes: vec![0; size],
        }
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    fn range(&self, addr: u64, len: usize) -> Result<std::ops::Range<usize>, IsaError> {
        let start = usize::try_from(addr).map_err(|_| IsaError::OutOfBounds { addr, len })?;
        match start.checked_add(len) {
            Some(end) if end <= self.bytes.len() => Ok(start..end),
            _ => Err(IsaError::OutOfBounds { addr, len }),
        }
    }

    pub fn read(&self, addr: u64, len: usize) -> Result<&[u8], IsaError> {
        Ok(&self.bytes[self.range(addr, len)?])
    }

    pub fn write(&mut self, addr: u64, data: &[u8]) -> Result<(), IsaError> {
        let r = self.range(addr, data.len())?;
        self.bytes[r].copy_from_slice(data);
        Ok(())
    }

    pub fn read_u64(&self, addr: u64) -> Result<u64, IsaError> {
        Ok(u64::from_le_bytes(self.read(addr, 8)?.try_into().unwrap()))
    }

    pub fn read_u32(&self, addr: u64) -> Result<u32, IsaError> {
        Ok(u32::from_le_bytes(self.read(addr, 4)?.try_into().unwrap()))
    }

    pub fn read_u16(&self, addr: u64) -> Result<u16, IsaError> {
        Ok(u16::from_le_bytes(self.read(addr, 2)?.try_into().unwrap()))
    }

    pub fn read_u8(&self, addr: u64) -> Result<u8, IsaError> {
        Ok(self.read(addr, 1)?[0])
    }
}

/// The instruction subset used by the GEMM kernels.
///
/// `f*` fields index FP registers, `x*` fields integer registers. Memory
/// operands carry absolute addresses; address arithmetic is folded into the
/// integer ALU instructions that a real kernel would execute, which are
/// still issued and timed.
#[derive(Clone, Debug, PartialEq)]
pub enum Instr {
    Mxdotp(MxdotpInstruction),
    /// Lane-wise fused `fd += fs1 * fs2` on two FP32 lanes.
    Vfmac {
        fd: u8,
        fs1: u8,
        fs2: u8,
    },
    Vfadd {
        fd: u8,
        fs1: u8,
        fs2: u8,
    },
    /// `fd.lo = fs.lo + fs.hi`, `fd.hi = 0`.
    Vfsum {
        fd: u8,
        fs: u8,
    },
    /// `fd = [fs1.lo, fs2.lo]`.
    Vfcpka {
        fd: u8,
        fs1: u8,
        fs2: u8,
    },
    /// Two FP8 values in the low 16 bits of `fs` to two FP32 lanes.
    Vfcvt {
        fd: u8,
        fs: u8,
    },
    /// Scalar fused `fd = fs1 * fs2 + fs3`.
    FmaddS {
        fd: u8,
        fs1: u8,
        fs2: u8,
        fs3: u8,
    },
    FmvWX {
        fd: u8,
        xs: u8,
    },
    Flh {
        fd: u8,
        addr: u64,
    },
    Fsw {
        fs: u8,
        addr: u64,
    },
    Lbu {
        xd: u8,
        addr: u64,
    },
    Add {
        xd: u8,
        xs1: u8,
        xs2: u8,
    },
    Addi {
        xd: u8,
        xs: u8,
        imm: i64,
    },
    Slli {
        xd: u8,
        xs: u8,
        shamt: u32,
    },
    /// Loop back-edge; only its cost is modeled.
    Branch,
    SsrConfigure {
        stream: usize,
        config: Box<SsrConfig>,
    },
    SsrEnable(bool),
    SetFormat(Fp8Format),
    /// Repeat the next `body` instructions `reps` times on the FP sequencer.
    Frep {
        reps: u32,
        body: usize,
    },
}

impl Instr {
    pub fn class(&self) -> InstrClass {
        match self {
            Instr::Mxdotp(_) => InstrClass::Mxdotp,
            Instr::Vfmac { .. } => InstrClass::Vfmac,
            Instr::Vfadd { .. } => InstrClass::Vfadd,
            Instr::Vfsum { .. } => InstrClass::Vfsum,
            Instr::Vfcpka { .. } => InstrClass::Vfcpka,
            Instr::Vfcvt { .. } => InstrClass::Vfcvt,
            Instr::FmaddS { .. } => InstrClass::Fmadd,
            Instr::FmvWX { .. } => InstrClass::Fmv,
            Instr::Flh { .. } => InstrClass::FpLoad,
            Instr::Fsw { .. } => InstrClass::FpStore,
            Instr::Lbu { .. } => InstrClass::IntLoad,
            Instr::Add { .. } | Instr::Addi { .. } | Instr::Slli { .. } => InstrClass::IntAlu,
            Instr::Branch => InstrClass::Branch,
            Instr::SsrConfigure { .. } | Instr::SsrEnable(_) => InstrClass::SsrCfg,
            Instr::SetFormat(_) => InstrClass::Csr,
            Instr::Frep { .. } => InstrClass::Frep,
        }
    }

    /// Executed by the FP sequencer.
    pub fn is_fp(&self) -> bool {
        matches!(
            self,
            Instr::Mxdotp(_)
                | Instr::Vfmac { .. }
                | Instr::Vfadd { .. }
                | Instr::Vfsum { .. }
                | Instr::Vfcpka { .. }
                | Instr::Vfcvt { .. }
                | Instr::FmaddS { .. }
                | Instr::FmvWX { .. }
                | Instr::Flh { .. }
                | Instr::Fsw { .. }
        )
    }

    fn fp_sources(&self) -> Vec<u8> {
        match *self {
            Instr::Mxdotp(m) => vec![m.rd, m.rs1, m.rs2, m.rs3],
            Instr::Vfmac { fd, fs1, fs2 } => vec![fd, fs1, fs2],
            Instr::Vfadd { fs1, fs2, .. } | Instr::Vfcpka { fs1, fs2, .. } => vec![fs1, fs2],
            Instr::Vfsum { fs, .. } | Instr::Vfcvt { fs, .. } | Instr::Fsw { fs, .. } => vec![fs],
            Instr::FmaddS { fs1, fs2, fs3, .. } => vec![fs1, fs2, fs3],
            _ => vec![],
        }
    }

    fn int_sources(&self) -> Vec<u8> {
        match *self {
            Instr::FmvWX { xs, .. } | Instr::Addi { xs, .. } | Instr::Slli { xs, .. } => vec![xs],
            Instr::Add { xs1, xs2, .. } => vec![xs1, xs2],
            _ => vec![],
        }
    }

    fn fp_dest(&self) -> Option<u8> {
        match *self {
            Instr::Mxdotp(m) => Some(m.rd),
            Instr::Vfmac { fd, .. }
            | Instr::Vfadd { fd, .. }
            | Instr::Vfsum { fd, .. }
            | Instr::Vfcpka { fd, .. }
            | Instr::Vfcvt { fd, .. }
            | Instr::FmaddS { fd, .. }
            | Instr::FmvWX { fd, .. }
            | Instr::Flh { fd, .. } => Some(fd),
            _ => None,
        }
    }

    fn int_dest(&self) -> Option<u8> {
        match *self {
            Instr::Lbu { xd, .. }
            | Instr::Add { xd, .. }
            | Instr::Addi { xd, .. }
            | Instr::Slli { xd, .. } => Some(xd),
            _ => None,
        }
    }
}

/// Timing outcome of one program on one core.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoreRun {
    pub cycles: u64,
    pub issued: BTreeMap<InstrClass, u64>,
}

#[derive(Clone, Debug, Default)]
struct Timing {
    int_clock: u64,
    fp_clock: u64,
    int_ready: [u64; INT_REGS],
    fp_ready: [u64; FP_REGS],
    horizon: u64,
}

impl Timing {
    fn total(&self) -> u64 {
        self.int_clock.max(self.fp_clock).max(self.horizon)
    }
}

#[derive(Clone, Debug)]
pub struct CoreState {
    pub fregs: [u64; FP_REGS],
    pub xregs: [i64; INT_REGS],
    pub format: Option<Fp8Format>,
    pub memory: Memory,
    streams: [Option<SsrStream>; STREAMS],
    ssr_enabled: bool,
}

fn lo(w: u64) -> f32 {
    f32::from_bits(w as u32)
}

fn hi(w: u64) -> f32 {
    f32::from_bits((w >> 32) as u32)
}

fn pack(lo: f32, hi: f32) -> u64 {
    u64::from(hi.to_bits()) << 32 | u64::from(lo.to_bits())
}

fn fp8_to_f32(bits: u8, format: Fp8Format) -> f32 {
    // Every FP8 value, infinities and NaN included, is exact in f32.
    Fp8Code::new(bits, format).to_f64() as f32
}

impl CoreState {
    pub fn new(memory: Memory) -> Self {
        CoreState {
            fregs: [0; FP_REGS],
            xregs: [0; INT_REGS],
            format: None,
            memory,
            streams: Default::default(),
            ssr_enabled: false,
        }
    }

    pub fn configure_stream(&mut self, stream: usize, config: &SsrConfig) -> Result<(), IsaError> {
        if stream >= STREAMS {
            return Err(IsaError::InvalidStream(format!("no stream {stream}")));
        }
        config.validate()?;
        self.streams[stream] = Some(config.stream());
        Ok(())
    }

    pub fn set_ssr_enabled(&mut self, on: bool) {
        self.ssr_enabled = on;
    }

    pub fn stream(&self, stream: usize) -> Option<&SsrStream> {
        self.streams.get(stream).and_then(Option::as_ref)
    }

    fn is_stream_mapped(&self, reg: u8) -> bool {
        self.ssr_enabled && (reg as usize) < STREAMS
    }

    fn read_f(&mut self, reg: u8) -> Result<u64, IsaError> {
        if self.is_stream_mapped(reg) {
            let s = self.streams[reg as usize]
                .as_mut()
                .ok_or(IsaError::StreamNotConfigured(reg as usize))?;
            let (addr, _) = s.ssr_next()?;
            self.memory.read_u64(addr)
        } else {
            Ok(self.fregs[reg as usize])
        }
    }

    fn write_f(&mut self, reg: u8, value: u64) -> Result<(), IsaError> {
        if self.is_stream_mapped(reg) {
            return Err(IsaError::StreamRegisterWrite(reg));
        }
        self.fregs[reg as usize] = value;
        Ok(())
    }

    fn x(&self, reg: u8) -> i64 {
        if reg == 0 {
            0
        } else {
            self.xregs[reg as usize]
        }
    }

    fn write_x(&mut self, reg: u8, value: i64) {
        if reg != 0 {
            self.xregs[reg as usize] = value;
        }
    }

    fn csr_format(&self) -> Result<Fp8Format, IsaError> {
        self.format.ok_or(IsaError::FormatNotConfigured)
    }

    /// Execute one MXDOTP against the register file and streams.
    pub fn execute_mxdotp(&mut self, inst: &MxdotpInstruction) -> Result<(), IsaError> {
        let from_regfile = [inst.rs1, inst.rs2, inst.rs3]
            .iter()
            .filter(|&&r| !self.is_stream_mapped(r))
            .count();
        // The accumulator always comes from the register file.
        let reads = 1 + from_regfile;
        if reads > READ_PORTS {
            return Err(IsaError::RegisterPortViolation { reads });
        }
        let format = self.csr_format()?;
        let a = self.read_f(inst.rs1)?.to_le_bytes();
        let b = self.read_f(inst.rs2)?.to_le_bytes();
        let scales = self.read_f(inst.rs3)?;
        let acc = self.read_f(inst.rd)?;
        let pair = (scales >> (16 * u32::from(inst.sl))) as u16;
        let (xa, xb) = (ScaleE8M0(pair as u8), ScaleE8M0((pair >> 8) as u8));
        let pa: [u8; LANES] = a;
        let pb: [u8; LANES] = b;
        let r = mx_dotp(&pa, &pb, xa, xb, Fp32Value(acc as u32), format);
        self.write_f(inst.rd, (acc & !0xFFFF_FFFF) | u64::from(r.bits()))
    }

    fn execute(&mut self, instr: &Instr) -> Result<(), IsaError> {
        match *instr {
            Instr::Mxdotp(ref m) => self.execute_mxdotp(m)?,
            Instr::Vfmac { fd, fs1, fs2 } => {
                let a = self.read_f(fs1)?;
                let b = self.read_f(fs2)?;
                let c = self.read_f(fd)?;
                let r = pack(lo(a).mul_add(lo(b), lo(c)), hi(a).mul_add(hi(b), hi(c)));
                self.write_f(fd, r)?;
            }
            Instr::Vfadd { fd, fs1, fs2 } => {
                let a = self.read_f(fs1)?;
                let b = self.read_f(fs2)?;
                self.write_f(fd, pack(lo(a) + lo(b), hi(a) + hi(b)))?;
            }
            Instr::Vfsum { fd, fs } => {
                let a = self.read_f(fs)?;
                self.write_f(fd, pack(lo(a) + hi(a), 0.0))?;
            }
            Instr::Vfcpka { fd, fs1, fs2 } => {
                let a = self.read_f(fs1)?;
                let b = self.read_f(fs2)?;
                self.write_f(fd, pack(lo(a), lo(b)))?;
            }
            Instr::Vfcvt { fd, fs } => {
                let format = self.csr_format()?;
                let v = self.read_f(fs)?;
                let r = pack(
                    fp8_to_f32(v as u8, format),
                    fp8_to_f32((v >> 8) as u8, format),
                );
                self.write_f(fd, r)?;
            }
            Instr::FmaddS { fd, fs1, fs2, fs3 } => {
                let a = lo(self.read_f(fs1)?);
                let b = lo(self.read_f(fs2)?);
                let c = lo(self.read_f(fs3)?);
                self.write_f(fd, NAN_BOX | u64::from(a.mul_add(b, c).to_bits()))?;
            }
            Instr::FmvWX { fd, xs } => {
                let v = self.x(xs) as u32;
                self.write_f(fd, NAN_BOX | u64::from(v))?;
            }
            Instr::Flh { fd, addr } => {
                let v = self.memory.read_u16(addr)?;
                self.write_f(fd, !0xFFFF | u64::from(v))?;
            }
            Instr::Fsw { fs, addr } => {
                let v = self.read_f(fs)? as u32;
                self.memory.write(addr, &v.to_le_bytes())?;
            }
            Instr::Lbu { xd, addr } => {
                let v = self.memory.read_u8(addr)?;
                self.write_x(xd, i64::from(v));
            }
            Instr::Add { xd, xs1, xs2 } => self.write_x(xd, self.x(xs1).wrapping_add(self.x(xs2))),
            Instr::Addi { xd, xs, imm } => self.write_x(xd, self.x(xs).wrapping_add(imm)),
            Instr::Slli { xd, xs, shamt } => self.write_x(xd, self.x(xs).wrapping_shl(shamt)),
            Instr::Branch => {}
            Instr::SsrConfigure { stream, ref config } => self.configure_stream(stream, config)?,
            Instr::SsrEnable(on) => self.set_ssr_enabled(on),
            Instr::SetFormat(f) => self.format = Some(f),
            Instr::Frep { .. } => unreachable!("FREP is expanded by the runner"),
        }
        Ok(())
    }

    fn sources_ready(&self, instr: &Instr, t: &Timing) -> u64 {
        let fp = instr
            .fp_sources()
            .into_iter()
            .filter(|&r| !self.is_stream_mapped(r))
            .map(|r| t.fp_ready[r as usize]);
        let int = instr
            .int_sources()
            .into_iter()
            .map(|r| t.int_ready[r as usize]);
        fp.chain(int).max().unwrap_or(0)
    }

    fn retire(&self, instr: &Instr, start: u64, model: &CycleModel, t: &mut Timing) {
        let ready = start + model.cost(instr.class()).latency;
        if let Some(r) = instr.fp_dest() {
            t.fp_ready[r as usize] = ready;
            t.horizon = t.horizon.max(ready);
        }
        if let Some(r) = instr.int_dest() {
            t.int_ready[r as usize] = ready;
            t.horizon = t.horizon.max(ready);
        }
    }

    /// Issue one FP instruction on the sequencer no earlier than `dispatch`.
    fn issue_fp(
        &mut self,
        instr: &Instr,
        dispatch: u64,
        model: &CycleModel,
        t: &mut Timing,
    ) -> Result<(), IsaError> {
        let start = t.fp_clock.max(dispatch).max(self.sources_ready(instr, t));
        self.execute(instr)?;
        t.fp_clock = start + model.cost(instr.class()).issue;
        self.retire(instr, start, model, t);
        Ok(())
    }

    /// Execute a program to completion, returning its cycle count and the
    /// dynamic instruction mix.
    pub fn run(&mut self, program: &[Instr], model: &CycleModel) -> Result<CoreRun, IsaError> {
        let mut t = Timing::default();
        let mut issued = BTreeMap::new();
        let offload = model.cost(InstrClass::Offload).issue;
        let mut pc = 0;
        while pc < program.len() {
            let instr = &program[pc];
            *issued.entry(instr.class()).or_insert(0) += 1;
            match *instr {
                Instr::Frep { reps, body } => {
                    let end = pc + 1 + body;
                    if end > program.len() {
                        return Err(IsaError::TruncatedFrep { body });
                    }
                    let body_instrs = &program[pc + 1..end];
                    if let Some(bad) = body_instrs.iter().find(|i| !i.is_fp()) {
                        return Err(IsaError::InvalidFrepBody(format!("{bad:?}")));
                    }
                    let cost = model.cost(InstrClass::Frep);
                    let dispatch = t.int_clock;
                    t.int_clock += cost.issue + body as u64 * offload;
                    t.fp_clock = t.fp_clock.max(dispatch) + cost.latency;
                    let seq_start = t.fp_clock;
                    for _ in 0..reps {
                        for bi in body_instrs {
                            *issued.entry(bi.class()).or_insert(0) += 1;
                            self.issue_fp(bi, seq_start, model, &mut t)?;
                        }
                    }
                    pc = end;
                    continue;
                }
                _ if instr.is_fp() => {
                    let dispatch = t.int_clock;
                    t.int_clock += offload;
                    self.issue_fp(instr, dispatch, model, &mut t)?;
                }
                _ => {
                    let mut start = t.int_clock.max(self.sources_ready(instr, &t));
                    let mut issue = model.cost(instr.class()).issue;
                    match instr {
                        Instr::SsrConfigure { config, .. } => {
                            start = start.max(t.fp_clock);
                            issue *= config.config_writes() as u64;
                        }
                        Instr::SsrEnable(_) | Instr::SetFormat(_) => start = start.max(t.fp_clock),
                        _ => {}
                    }
                    self.execute(instr)?;
                    t.int_clock = start + issue;
                    self.retire(instr, start, model, &mut t);
                }
            }
            pc += 1;
        }
        Ok(CoreRun {
            cycles: t.total(),
            issued,
        })
    }
}
