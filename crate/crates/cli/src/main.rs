use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mxdotp::formats::{Fp8Format, DEFAULT_BLOCK_SIZE};
use mxdotp::isa::KernelVariant;
use mxdotp_cli::commands::{self, BenchArgs, CliError, GemmArgs};
use mxdotp_cli::tensor_file;

#[derive(Parser)]
#[command(
    name = "mxdotp",
    version,
    about = "MX FP8 dot-product model and GEMM cycle simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quantize a raw FP32 matrix into an MXT1 file.
    Quantize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "e4m3")]
        format: Fp8Format,
        #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
        block_size: usize,
    },
    /// Run one GEMM kernel; B is given transposed (n x k).
    Gemm {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "mxfp8")]
        variant: KernelVariant,
        /// FP8 format the core is configured with; MX inputs must match.
        #[arg(long)]
        format: Option<Fp8Format>,
        #[arg(long, default_value_t = 8)]
        cores: usize,
        #[arg(long, default_value_t = 1.0)]
        freq_ghz: f64,
        #[arg(long)]
        cycle_model: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep the three kernels over the reduction dimension.
    Bench {
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 8)]
        cores: usize,
        #[arg(long, default_value_t = 1.0)]
        freq_ghz: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "e4m3")]
        format: Fp8Format,
        #[arg(long, default_value_t = DEFAULT_BLOCK_SIZE)]
        block_size: usize,
        #[arg(long)]
        cycle_model: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check the datapath against the exact reference.
    Verify {
        /// Random vectors per format.
        #[arg(long, default_value_t = 1_000_000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to one format (default: both).
        #[arg(long)]
        format: Option<Fp8Format>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Quantize {
            input,
            output,
            format,
            block_size,
        } => {
            let s = commands::quantize(&input, &output, format, block_size)?;
            println!(
                "{}x{} {} block {} -> {}",
                s.tensor.rows,
                s.tensor.cols,
                format,
                block_size,
                output.display()
            );
            println!(
                "max abs error {:e}, mean abs error {:e}",
                s.max_abs_error, s.mean_abs_error
            );
        }
        Command::Gemm {
            a,
            b,
            variant,
            format,
            cores,
            freq_ghz,
            cycle_model,
            output,
            report,
        } => {
            let r = commands::gemm(&GemmArgs {
                a,
                b,
                variant,
                format,
                cores,
                freq_ghz,
                cycle_model,
                output,
                report,
            })?;
            println!(
                "{} {}x{}x{} on {} cores: {} cycles, utilization {:.2}%, {:.2} GFLOPS",
                variant,
                r.report.m,
                r.report.n,
                r.report.k,
                r.report.cores,
                r.report.total_cycles,
                100.0 * r.utilization,
                r.gflops
            );
        }
        Command::Bench {
            m,
            n,
            k,
            cores,
            freq_ghz,
            seed,
            format,
            block_size,
            cycle_model,
            report,
            csv,
        } => {
            let r = commands::bench(&BenchArgs {
                m,
                n,
                ks: k,
                cores,
                freq_ghz,
                seed,
                format,
                block_size,
                cycle_model,
            })?;
            println!(
                "{:<12} {:>5} {:>10} {:>8} {:>8} {:>8} {:>8}",
                "variant", "k", "cycles", "util%", "GFLOPS", "vs fp32", "vs fp8"
            );
            let opt = |s: Option<f64>| s.map_or("-".to_string(), |v| format!("{v:.2}"));
            for rec in &r.records {
                println!(
                    "{:<12} {:>5} {:>10} {:>8.2} {:>8.2} {:>8} {:>8}",
                    rec.variant.to_string(),
                    rec.k,
                    rec.cycles,
                    100.0 * rec.utilization,
                    rec.gflops,
                    opt(rec.speedup_vs_fp32),
                    opt(rec.speedup_vs_fp8_to_fp32)
                );
            }
            if let Some(p) = report {
                tensor_file::write_bytes(&p, r.to_json().as_bytes())?;
            }
            if let Some(p) = csv {
                tensor_file::write_bytes(&p, r.to_csv().as_bytes())?;
            }
        }
        Command::Verify {
            count,
            seed,
            format,
        } => {
            let formats = match format {
                Some(f) => vec![f],
                None => vec![Fp8Format::E5M2, Fp8Format::E4M3],
            };
            for f in formats {
                let s = commands::verify(f, count, seed);
                match s.first_mismatch {
                    None => println!(
                        "{f}: {} directed + {} random cases, 0 mismatches",
                        s.directed, s.random
                    ),
                    Some(m) => return Err(CliError::Verification(m.to_string())),
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
