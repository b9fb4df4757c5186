//! Instruction-level model of an MXDOTP-capable core cluster.

pub mod core;
pub mod cycle_model;
pub mod encoding;
pub mod kernels;
pub mod metrics;
pub mod ssr;

pub use self::core::{CoreRun, CoreState, Instr, Memory};
pub use cycle_model::{Cost, CycleModel, InstrClass};
pub use encoding::{decode_instruction, encode_instruction, MxdotpInstruction, OPCODE};
pub use kernels::{
    fp32_reference_gemm, fp8_to_fp32_scale_bits, mxfp8_oracle_gemm, reshape_scales, run_kernel,
    KernelInput, KernelVariant,
};
pub use metrics::{compute_metrics, speedup, CycleReport, MetricsRow};
pub use ssr::{SsrConfig, SsrStream};
