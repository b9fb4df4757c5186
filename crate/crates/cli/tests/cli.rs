use std::path::Path;
use std::process::{Command, Output};

use mxdotp::formats::{quantize_matrix, Fp8Format, MxTensor, ScaleE8M0};
use mxdotp::isa::{fp32_reference_gemm, mxfp8_oracle_gemm};
use mxdotp_cli::report::{records_from_csv, BenchReport};
use mxdotp_cli::tensor_file::{decode_f32, decode_mx, encode_f32, encode_mx, F32Matrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn mxdotp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mxdotp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_f32(path: &Path, rows: usize, cols: usize, values: Vec<f32>) {
    std::fs::write(
        path,
        encode_f32(&F32Matrix::new(rows, cols, values).unwrap()),
    )
    .unwrap();
}

fn random_f32(seed: u64, len: usize) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn quantize_zero_matrix() {
    let dir = TempDir::new().unwrap();
    let (input, output) = (dir.path().join("z.f32"), dir.path().join("z.mxt"));
    write_f32(&input, 4, 64, vec![0.0; 256]);
    let out = mxdotp(&["quantize", p(&input), "-o", p(&output), "--format", "e5m2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let t = decode_mx(&std::fs::read(&output).unwrap()).unwrap();
    assert!(t.scales.iter().all(|&s| s == ScaleE8M0(127)));
    assert!(t.elements.iter().all(|&e| e == 0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("max abs error"));
}

#[test]
fn quantize_matches_library() {
    let dir = TempDir::new().unwrap();
    let (input, output) = (dir.path().join("i.f32"), dir.path().join("i.mxt"));
    let mut values = vec![0f32; 32 * 32];
    for i in 0..32 {
        values[i * 32 + i] = 1.0 + i as f32;
    }
    write_f32(&input, 32, 32, values.clone());
    let out = mxdotp(&[
        "quantize",
        p(&input),
        "-o",
        p(&output),
        "--block-size",
        "16",
    ]);
    assert!(out.status.success());
    let t = decode_mx(&std::fs::read(&output).unwrap()).unwrap();
    let want = quantize_matrix(
        &values.iter().map(|&v| f64::from(v)).collect::<Vec<_>>(),
        32,
        32,
        Fp8Format::E4M3,
        16,
    )
    .unwrap();
    assert_eq!(t, want);
}

#[test]
fn quantize_misaligned_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("m.f32");
    write_f32(&input, 64, 33, vec![1.0; 64 * 33]);
    let out = mxdotp(&["quantize", p(&input), "-o", p(&dir.path().join("m.mxt"))]);
    assert_eq!(out.status.code(), Some(2));
    let out = mxdotp(&["quantize", p(&dir.path().join("missing.f32")), "-o", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gemm_mxfp8_matches_oracle() {
    let dir = TempDir::new().unwrap();
    let (m, n, k) = (8, 8, 32);
    for (name, rows, seed) in [("a", m, 1), ("b", n, 2)] {
        let f = dir.path().join(format!("{name}.f32"));
        write_f32(&f, rows, k, random_f32(seed, rows * k));
        let out = mxdotp(&[
            "quantize",
            p(&f),
            "-o",
            p(&dir.path().join(format!("{name}.mxt"))),
        ]);
        assert!(out.status.success());
    }
    let (c, report) = (dir.path().join("c.f32"), dir.path().join("r.json"));
    let out = mxdotp(&[
        "gemm",
        "--a",
        p(&dir.path().join("a.mxt")),
        "--b",
        p(&dir.path().join("b.mxt")),
        "--variant",
        "mxfp8",
        "--format",
        "e4m3",
        "-o",
        p(&c),
        "--report",
        p(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = decode_mx(&std::fs::read(dir.path().join("a.mxt")).unwrap()).unwrap();
    let b = decode_mx(&std::fs::read(dir.path().join("b.mxt")).unwrap()).unwrap();
    let got = decode_f32(&std::fs::read(&c).unwrap()).unwrap();
    assert_eq!((got.rows, got.cols), (m, n));
    let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&got.values), bits(&mxfp8_oracle_gemm(&a, &b)));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["variant"], "mxfp8");
    assert_eq!(json["useful_flops"], 2 * m * n * k);
    assert!(json["total_cycles"].as_u64().unwrap() > 0);
}

#[test]
fn gemm_fp32_matches_reference_loop() {
    let dir = TempDir::new().unwrap();
    let (m, n, k) = (8, 16, 24);
    let (a, bt) = (random_f32(3, m * k), random_f32(4, n * k));
    write_f32(&dir.path().join("a.f32"), m, k, a.clone());
    write_f32(&dir.path().join("b.f32"), n, k, bt.clone());
    let c = dir.path().join("c.f32");
    let out = mxdotp(&[
        "gemm",
        "--a",
        p(&dir.path().join("a.f32")),
        "--b",
        p(&dir.path().join("b.f32")),
        "--variant",
        "fp32",
        "--cores",
        "4",
        "-o",
        p(&c),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let got = decode_f32(&std::fs::read(&c).unwrap()).unwrap();
    assert_eq!(got.values, fp32_reference_gemm(&a, &bt, m, n, k));
}

#[test]
fn gemm_guards() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("a.f32");
    write_f32(&f, 8, 32, random_f32(5, 256));
    let e5 = dir.path().join("a5.mxt");
    assert!(
        mxdotp(&["quantize", p(&f), "-o", p(&e5), "--format", "e5m2"])
            .status
            .success()
    );
    let c = dir.path().join("c.f32");
    let run = |a: &Path, b: &Path, variant: &str, extra: &[&str]| {
        let mut args = vec![
            "gemm",
            "--a",
            p(a),
            "--b",
            p(b),
            "--variant",
            variant,
            "-o",
            p(&c),
        ];
        args.extend_from_slice(extra);
        mxdotp(&args).status.code()
    };
    // Core configured for E4M3, file holds E5M2.
    assert_eq!(run(&e5, &e5, "mxfp8", &["--format", "e4m3"]), Some(2));
    assert!(!c.exists());
    // Variant and file kind disagree.
    assert_eq!(run(&f, &f, "mxfp8", &[]), Some(2));
    assert_eq!(run(&e5, &e5, "fp32", &[]), Some(2));
    // Reduction dimensions disagree.
    let g = dir.path().join("g.f32");
    write_f32(&g, 8, 16, vec![0.0; 128]);
    assert_eq!(run(&f, &g, "fp32", &[]), Some(2));
    // Unknown variant is a clap usage error.
    assert_eq!(run(&f, &f, "int8", &[]), Some(2));
}

#[test]
fn bench_is_deterministic_and_csv_agrees() {
    let dir = TempDir::new().unwrap();
    let run = |tag: &str| {
        let (json, csv) = (
            dir.path().join(format!("{tag}.json")),
            dir.path().join(format!("{tag}.csv")),
        );
        let out = mxdotp(&[
            "bench",
            "--m",
            "16",
            "--n",
            "16",
            "--k",
            "32,64",
            "--seed",
            "9",
            "--report",
            p(&json),
            "--csv",
            p(&csv),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (
            std::fs::read(json).unwrap(),
            std::fs::read_to_string(csv).unwrap(),
        )
    };
    let (j1, c1) = run("one");
    let (j2, c2) = run("two");
    assert_eq!(j1, j2);
    assert_eq!(c1, c2);
    let report: BenchReport = serde_json::from_slice(&j1).unwrap();
    assert_eq!(report.records.len(), 6);
    assert_eq!(records_from_csv(&c1).unwrap(), report.records);
    assert_eq!(report.metadata.cycle_model.len(), 64);
}

#[test]
fn verify_exit_codes() {
    let out = mxdotp(&["verify", "--count", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let out = mxdotp(&[
        "verify", "--count", "3000", "--seed", "17", "--format", "e5m2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 mismatches"));
    assert_eq!(
        mxdotp(&["verify", "--format", "e3m4"]).status.code(),
        Some(2)
    );
}

fn arb_tensor() -> impl Strategy<Value = MxTensor> {
    (
        0usize..5,
        1usize..4,
        prop::sample::select(vec![8usize, 16, 32]),
        any::<bool>(),
    )
        .prop_flat_map(|(rows, blocks, block_size, e4)| {
            let cols = blocks * block_size;
            (
                prop::collection::vec(any::<u8>(), rows * blocks),
                prop::collection::vec(any::<u8>(), rows * cols),
            )
                .prop_map(move |(scales, elements)| MxTensor {
                    rows,
                    cols,
                    format: if e4 { Fp8Format::E4M3 } else { Fp8Format::E5M2 },
                    block_size,
                    scales: scales.into_iter().map(ScaleE8M0).collect(),
                    elements,
                })
        })
}

proptest! {
    #[test]
    fn mx_file_roundtrip(t in arb_tensor()) {
        let bytes = encode_mx(&t);
        prop_assert_eq!(bytes.len(), 14 + t.scales.len() + t.elements.len());
        prop_assert_eq!(decode_mx(&bytes).unwrap(), t);
    }
}
