use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cycle_model::InstrClass;
use super::kernels::KernelVariant;
use crate::error::IsaError;

/// Timing summary of one kernel run on the cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub variant: KernelVariant,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub cores: usize,
    /// Cycles of the slowest core.
    pub total_cycles: u64,
    pub per_core_cycles: Vec<u64>,
    /// `2 m n k`; block scaling is not counted.
    pub useful_flops: u64,
    /// Per core.
    pub peak_flops_per_cycle: u64,
    /// Dynamic instruction counts summed over cores.
    pub issued: BTreeMap<InstrClass, u64>,
    pub cycle_model: String,
}

impl CycleReport {
    pub fn utilization(&self) -> f64 {
        let peak = self.peak_flops_per_cycle as f64 * self.cores as f64;
        self.useful_flops as f64 / (peak * self.total_cycles as f64)
    }

    pub fn gflops_at(&self, freq_ghz: f64) -> f64 {
        self.useful_flops as f64 / self.total_cycles as f64 * freq_ghz
    }

    fn shape(&self) -> (usize, usize, usize, usize) {
        (self.m, self.n, self.k, self.cores)
    }
}

/// `cycles(baseline) / cycles(fast)`.
pub fn speedup(fast: &CycleReport, baseline: &CycleReport) -> Result<f64, IsaError> {
    if fast.shape() != baseline.shape() {
        return Err(IsaError::MismatchedReports(format!(
            "{:?} vs {:?}",
            fast.shape(),
            baseline.shape()
        )));
    }
    Ok(baseline.total_cycles as f64 / fast.total_cycles as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub variant: KernelVariant,
    pub k: usize,
    pub cycles: u64,
    pub utilization: f64,
    pub gflops: f64,
    pub speedup_vs_fp32: Option<f64>,
    pub speedup_vs_fp8_to_fp32: Option<f64>,
}

/// One row per report; speedup columns are filled when the corresponding
/// baseline is among `reports`. All reports must share `(m, n, k, cores)`.
pub fn compute_metrics(
    reports: &[CycleReport],
    freq_ghz: f64,
) -> Result<Vec<MetricsRow>, IsaError> {
    let find = |v: KernelVariant| reports.iter().find(|r| r.variant == v);
    let fp32 = find(KernelVariant::Fp32);
    let fp8 = find(KernelVariant::Fp8ToFp32);
    reports
        .iter()
        .map(|r| {
            if r.shape() != reports[0].shape() {
                return Err(IsaError::MismatchedReports(format!(
                    "{:?} vs {:?}",
                    r.shape(),
                    reports[0].shape()
                )));
            }
            Ok(MetricsRow {
                variant: r.variant,
                k: r.k,
                cycles: r.total_cycles,
                utilization: r.utilization(),
                gflops: r.gflops_at(freq_ghz),
                speedup_vs_fp32: fp32.map(|b| speedup(r, b)).transpose()?,
                speedup_vs_fp8_to_fp32: fp8.map(|b| speedup(r, b)).transpose()?,
            })
        })
        .collect()
}
