//! Prints cycles, utilization and speedups for the m = n = 64, 8-core sweep
//! under a cycle-model file (default: the shipped table).
//!
//! cargo run --release -p mxdotp --example sweep -- [cycle_model.toml]

use mxdotp::formats::{quantize_matrix, Fp8Format};
use mxdotp::isa::{compute_metrics, run_kernel, CycleModel, KernelInput, KernelVariant};
use rand::{Rng, SeedableRng};

fn main() {
    let model = match std::env::args().nth(1) {
        Some(path) => CycleModel::from_toml_str(&std::fs::read_to_string(path).unwrap()).unwrap(),
        None => CycleModel::default(),
    };
    let (m, n, cores) = (64, 64, 8);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    for k in [32, 64, 128, 256] {
        let a: Vec<f64> = (0..m * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bt: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let qa = quantize_matrix(&a, m, k, Fp8Format::E4M3, 32).unwrap();
        let qb = quantize_matrix(&bt, n, k, Fp8Format::E4M3, 32).unwrap();
        let a32: Vec<f32> = a.iter().map(|&v| v as f32).collect();
        let b32: Vec<f32> = bt.iter().map(|&v| v as f32).collect();
        let mut reports = Vec::new();
        for v in KernelVariant::ALL {
            if !v.fits_l1(m, n, k) {
                continue;
            }
            let input = match v {
                KernelVariant::Fp32 => KernelInput::Fp32 { a: &a32, bt: &b32 },
                _ => KernelInput::Mx { a: &qa, bt: &qb },
            };
            reports.push(run_kernel(v, input, m, n, k, cores, &model).unwrap().1);
        }
        for row in compute_metrics(&reports, 1.0).unwrap() {
            println!(
                "k={:<4} {:<12} cycles={:<8} util={:6.2}% gflops={:7.2} vs_fp32={:>6} vs_fp8={:>6}",
                row.k,
                row.variant.to_string(),
                row.cycles,
                100.0 * row.utilization,
                row.gflops,
                row.speedup_vs_fp32
                    .map_or("-".into(), |s| format!("{s:.2}")),
                row.speedup_vs_fp8_to_fp32
                    .map_or("-".into(), |s| format!("{s:.2}")),
            );
        }
    }
}
