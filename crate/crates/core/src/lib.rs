//! Software model of microscaling (MX) FP8 arithmetic and the MXDOTP
//! scaled dot-product-accumulate instruction.
//!
//! The crate is split in three layers:
//!
//! * [`formats`]: the element formats (E5M2, E4M3), the E8M0 block scale,
//!   the FP9 (E5M3) intermediate format, and block quantization.
//! * [`dotp`]: a bit-exact, integer-only model of the MXDOTP datapath
//!   together with an arbitrary-precision reference that defines the
//!   correctly rounded result.
//! * [`isa`]: instruction encoding, stream registers, FREP loops, a
//!   cycle model, and the three GEMM kernels (FP32, FP8-to-FP32, MXFP8)
//!   executed on a simulated multi-core cluster.

pub mod dotp;
pub mod error;
pub mod exact;
pub mod formats;
pub mod isa;

pub use error::{FormatError, IsaError};
