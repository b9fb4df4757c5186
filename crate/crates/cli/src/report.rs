use mxdotp::formats::Fp8Format;
use mxdotp::isa::{CycleReport, KernelVariant, MetricsRow};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchMetadata {
    pub m: usize,
    pub n: usize,
    pub ks: Vec<usize>,
    pub cores: usize,
    pub freq_ghz: f64,
    pub seed: u64,
    pub format: Fp8Format,
    pub block_size: usize,
    pub cycle_model: String,
}

/// One `(variant, k)` measurement. Field order is the CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub variant: KernelVariant,
    pub k: usize,
    pub cycles: u64,
    pub utilization: f64,
    pub gflops: f64,
    pub speedup_vs_fp32: Option<f64>,
    pub speedup_vs_fp8_to_fp32: Option<f64>,
}

impl From<MetricsRow> for BenchRecord {
    fn from(r: MetricsRow) -> Self {
        BenchRecord {
            variant: r.variant,
            k: r.k,
            cycles: r.cycles,
            utilization: r.utilization,
            gflops: r.gflops,
            speedup_vs_fp32: r.speedup_vs_fp32,
            speedup_vs_fp8_to_fp32: r.speedup_vs_fp8_to_fp32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub metadata: BenchMetadata,
    pub records: Vec<BenchRecord>,
}

impl BenchReport {
    pub fn record(&self, variant: KernelVariant, k: usize) -> Option<&BenchRecord> {
        self.records
            .iter()
            .find(|r| r.variant == variant && r.k == k)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).expect("record serializes");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }
}

pub fn records_from_csv(text: &str) -> Result<Vec<BenchRecord>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

/// JSON written by `gemm --report`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GemmReport {
    #[serde(flatten)]
    pub report: CycleReport,
    pub utilization: f64,
    pub freq_ghz: f64,
    pub gflops: f64,
}

impl GemmReport {
    pub fn new(report: CycleReport, freq_ghz: f64) -> Self {
        GemmReport {
            utilization: report.utilization(),
            gflops: report.gflops_at(freq_ghz),
            freq_ghz,
            report,
        }
    }
}
