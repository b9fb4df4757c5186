use std::path::{Path, PathBuf};

use mxdotp::dotp::cases::{corner_cases, random_cases, DotpCase, Mismatch};
use mxdotp::dotp::Fp32Value;
use mxdotp::formats::{quantize_matrix, Fp8Format, MxTensor, DEFAULT_BLOCK_SIZE};
use mxdotp::isa::{compute_metrics, run_kernel, CycleModel, KernelInput, KernelVariant};
use mxdotp::{FormatError, IsaError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::report::{BenchMetadata, BenchRecord, BenchReport, GemmReport};
use crate::tensor_file::{self, F32Matrix, FileError, MatrixFile};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error("{0}")]
    Usage(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            _ => 2,
        }
    }
}

pub fn load_cycle_model(path: Option<&Path>) -> Result<CycleModel, CliError> {
    match path {
        None => Ok(CycleModel::default()),
        Some(p) => {
            let bytes = tensor_file::read_bytes(p)?;
            let text = String::from_utf8(bytes)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            Ok(CycleModel::from_toml_str(&text)?)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizeSummary {
    pub tensor: MxTensor,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

pub fn quantize(
    input: &Path,
    output: &Path,
    format: Fp8Format,
    block_size: usize,
) -> Result<QuantizeSummary, CliError> {
    let m = tensor_file::decode_f32(&tensor_file::read_bytes(input)?)?;
    if block_size == 0 || block_size > 255 {
        return Err(CliError::Usage(format!(
            "block size {block_size} must be in 1..=255"
        )));
    }
    let values: Vec<f64> = m.values.iter().map(|&v| f64::from(v)).collect();
    let tensor = quantize_matrix(&values, m.rows, m.cols, format, block_size)?;
    let back = tensor.dequantize()?;
    let errs: Vec<f64> = values
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let max_abs_error = errs.iter().copied().fold(0.0, f64::max);
    let mean_abs_error = if errs.is_empty() {
        0.0
    } else {
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    tensor_file::write_bytes(output, &tensor_file::encode_mx(&tensor))?;
    Ok(QuantizeSummary {
        tensor,
        max_abs_error,
        mean_abs_error,
    })
}

#[derive(Clone, Debug)]
pub struct GemmArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    pub variant: KernelVariant,
    /// Format the core's CSR is configured with; must match MX inputs.
    pub format: Option<Fp8Format>,
    pub cores: usize,
    pub freq_ghz: f64,
    pub cycle_model: Option<PathBuf>,
    pub output: PathBuf,
    pub report: Option<PathBuf>,
}

/// `B` is supplied transposed (`n x k`).
pub fn gemm(args: &GemmArgs) -> Result<GemmReport, CliError> {
    let model = load_cycle_model(args.cycle_model.as_deref())?;
    let a = MatrixFile::decode(&tensor_file::read_bytes(&args.a)?)?;
    let bt = MatrixFile::decode(&tensor_file::read_bytes(&args.b)?)?;
    let (m, k) = a.dims();
    let (n, kb) = bt.dims();
    if k != kb {
        return Err(CliError::Usage(format!(
            "shape mismatch: A is {m}x{k} but B^T is {n}x{kb}"
        )));
    }
    let input = match (args.variant, &a, &bt) {
        (KernelVariant::Fp32, MatrixFile::F32(a), MatrixFile::F32(b)) => KernelInput::Fp32 {
            a: &a.values,
            bt: &b.values,
        },
        (KernelVariant::Fp8ToFp32 | KernelVariant::Mxfp8, MatrixFile::Mx(a), MatrixFile::Mx(b)) => {
            for t in [a, b] {
                if let Some(f) = args.format {
                    if t.format != f {
                        return Err(CliError::Usage(format!(
                            "input is {} but the core is configured for {f}",
                            t.format
                        )));
                    }
                }
            }
            KernelInput::Mx { a, bt: b }
        }
        (v, _, _) => {
            return Err(CliError::Usage(format!(
                "variant {v} needs {} inputs",
                if v == KernelVariant::Fp32 {
                    "raw FP32"
                } else {
                    "MXT1"
                }
            )))
        }
    };
    let (c, report) = run_kernel(args.variant, input, m, n, k, args.cores, &model)?;
    let out = F32Matrix::new(m, n, c)?;
    tensor_file::write_bytes(&args.output, &tensor_file::encode_f32(&out))?;
    let gemm_report = GemmReport::new(report, args.freq_ghz);
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&gemm_report).expect("report serializes") + "\n";
        tensor_file::write_bytes(path, json.as_bytes())?;
    }
    Ok(gemm_report)
}

#[derive(Clone, Debug)]
pub struct BenchArgs {
    pub m: usize,
    pub n: usize,
    pub ks: Vec<usize>,
    pub cores: usize,
    pub freq_ghz: f64,
    pub seed: u64,
    pub format: Fp8Format,
    pub block_size: usize,
    pub cycle_model: Option<PathBuf>,
}

impl Default for BenchArgs {
    fn default() -> Self {
        BenchArgs {
            m: 64,
            n: 64,
            ks: vec![32, 64, 128, 256],
            cores: 8,
            freq_ghz: 1.0,
            seed: 0,
            format: Fp8Format::E4M3,
            block_size: DEFAULT_BLOCK_SIZE,
            cycle_model: None,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

/// Sweep all three kernels over `ks`. The FP32 kernel is skipped where its
/// operands do not fit in L1.
pub fn bench(args: &BenchArgs) -> Result<BenchReport, CliError> {
    let model = load_cycle_model(args.cycle_model.as_deref())?;
    let (m, n) = (args.m, args.n);
    let mut records = Vec::new();
    for &k in &args.ks {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ (k as u64).rotate_left(32));
        let a = uniform(&mut rng, m * k);
        let bt = uniform(&mut rng, n * k);
        let qa = quantize_matrix(&a, m, k, args.format, args.block_size)?;
        let qb = quantize_matrix(&bt, n, k, args.format, args.block_size)?;
        let a32: Vec<f32> = a.iter().map(|&v| v as f32).collect();
        let b32: Vec<f32> = bt.iter().map(|&v| v as f32).collect();
        let mut reports = Vec::new();
        for v in KernelVariant::ALL {
            if v == KernelVariant::Fp32 && !v.fits_l1(m, n, k) {
                continue;
            }
            let input = match v {
                KernelVariant::Fp32 => KernelInput::Fp32 { a: &a32, bt: &b32 },
                _ => KernelInput::Mx { a: &qa, bt: &qb },
            };
            reports.push(run_kernel(v, input, m, n, k, args.cores, &model)?.1);
        }
        records.extend(
            compute_metrics(&reports, args.freq_ghz)?
                .into_iter()
                .map(BenchRecord::from),
        );
    }
    Ok(BenchReport {
        metadata: BenchMetadata {
            m,
            n,
            ks: args.ks.clone(),
            cores: args.cores,
            freq_ghz: args.freq_ghz,
            seed: args.seed,
            format: args.format,
            block_size: args.block_size,
            cycle_model: model.fingerprint(),
        },
        records,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifySummary {
    pub format: Fp8Format,
    pub random: usize,
    pub directed: usize,
    pub first_mismatch: Option<Mismatch>,
}

/// A directed vector with a NaN block scale; its result must be NaN.
pub fn nan_scale_case(format: Fp8Format) -> DotpCase {
    DotpCase {
        format,
        pa: [0x38; 8],
        pb: [0x38; 8],
        xa: 0xFF,
        xb: 127,
        c: 0,
    }
}

/// Compare the datapath against the reference on the directed corpus and
/// `count` seeded random vectors, spread over worker threads. The first
/// mismatch in corpus order is reported.
pub fn verify(format: Fp8Format, count: usize, seed: u64) -> VerifySummary {
    let mut directed = corner_cases(format);
    directed.push(nan_scale_case(format));
    if let Some(m) = directed.iter().find_map(|c| c.check().err()) {
        return VerifySummary {
            format,
            random: 0,
            directed: directed.len(),
            first_mismatch: Some(m),
        };
    }
    let nan = nan_scale_case(format).run();
    if !nan.is_nan() {
        return VerifySummary {
            format,
            random: 0,
            directed: directed.len(),
            first_mismatch: Some(Mismatch {
                case: nan_scale_case(format),
                got: nan,
                want: Fp32Value::NAN,
            }),
        };
    }

    const CHUNK: usize = 16_384;
    let chunks = count.div_ceil(CHUNK);
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(chunks.max(1));
    let results: Vec<Option<(usize, Mismatch)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..chunks).step_by(workers).find_map(|chunk| {
                        let len = CHUNK.min(count - chunk * CHUNK);
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        rng.set_stream(chunk as u64 * 2 + format.code() as u64);
                        random_cases(&mut rng, format, len)
                            .iter()
                            .find_map(|c| c.check().err())
                            .map(|m| (chunk, m))
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("verify worker panicked"))
            .collect()
    });
    let first_mismatch = results
        .into_iter()
        .flatten()
        .min_by_key(|(chunk, _)| *chunk)
        .map(|(_, m)| m);
    VerifySummary {
        format,
        random: count,
        directed: directed.len(),
        first_mismatch,
    }
}
