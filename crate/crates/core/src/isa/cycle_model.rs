use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::IsaError;

const DEFAULT_TOML: &str = include_str!("../../cycle_model.toml");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrClass {
    Mxdotp,
    Vfmac,
    Vfadd,
    Vfsum,
    Fmadd,
    Vfcvt,
    Vfcpka,
    Fmv,
    FpLoad,
    FpStore,
    IntLoad,
    IntAlu,
    Branch,
    SsrCfg,
    Frep,
    Csr,
    Offload,
}

impl InstrClass {
    pub const ALL: [InstrClass; 17] = [
        InstrClass::Mxdotp,
        InstrClass::Vfmac,
        InstrClass::Vfadd,
        InstrClass::Vfsum,
        InstrClass::Fmadd,
        InstrClass::Vfcvt,
        InstrClass::Vfcpka,
        InstrClass::Fmv,
        InstrClass::FpLoad,
        InstrClass::FpStore,
        InstrClass::IntLoad,
        InstrClass::IntAlu,
        InstrClass::Branch,
        InstrClass::SsrCfg,
        InstrClass::Frep,
        InstrClass::Csr,
        InstrClass::Offload,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstrClass::Mxdotp => "mxdotp",
            InstrClass::Vfmac => "vfmac",
            InstrClass::Vfadd => "vfadd",
            InstrClass::Vfsum => "vfsum",
            InstrClass::Fmadd => "fmadd",
            InstrClass::Vfcvt => "vfcvt",
            InstrClass::Vfcpka => "vfcpka",
            InstrClass::Fmv => "fmv",
            InstrClass::FpLoad => "fp_load",
            InstrClass::FpStore => "fp_store",
            InstrClass::IntLoad => "int_load",
            InstrClass::IntAlu => "int_alu",
            InstrClass::Branch => "branch",
            InstrClass::SsrCfg => "ssr_cfg",
            InstrClass::Frep => "frep",
            InstrClass::Csr => "csr",
            InstrClass::Offload => "offload",
        }
    }
}

impl fmt::Display for InstrClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstrClass {
    type Err = IsaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InstrClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| IsaError::CycleModel(format!("unknown instruction class `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cost {
    pub issue: u64,
    pub latency: u64,
}

/// Issue cost and latency for every instruction class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleModel {
    costs: BTreeMap<InstrClass, Cost>,
}

impl CycleModel {
    /// Parse a table with exactly one entry per class.
    pub fn from_toml_str(text: &str) -> Result<Self, IsaError> {
        let raw: BTreeMap<String, Cost> =
            toml::from_str(text).map_err(|e| IsaError::CycleModel(e.to_string()))?;
        let mut costs = BTreeMap::new();
        for (name, cost) in raw {
            costs.insert(name.parse::<InstrClass>()?, cost);
        }
        if let Some(missing) = InstrClass::ALL.iter().find(|c| !costs.contains_key(c)) {
            return Err(IsaError::CycleModel(format!("missing class `{missing}`")));
        }
        Ok(CycleModel { costs })
    }

    pub fn to_toml_string(&self) -> String {
        let raw: BTreeMap<&str, Cost> = self.costs.iter().map(|(c, v)| (c.name(), *v)).collect();
        toml::to_string(&raw).expect("plain table serializes")
    }

    /// No overheads: MXDOTP issues once per cycle with single-cycle latency
    /// and everything else is free.
    pub fn ideal() -> Self {
        let mut costs: BTreeMap<_, _> = InstrClass::ALL
            .into_iter()
            .map(|c| {
                (
                    c,
                    Cost {
                        issue: 0,
                        latency: 0,
                    },
                )
            })
            .collect();
        costs.insert(
            InstrClass::Mxdotp,
            Cost {
                issue: 1,
                latency: 1,
            },
        );
        CycleModel { costs }
    }

    pub fn cost(&self, class: InstrClass) -> Cost {
        self.costs[&class]
    }

    pub fn set(&mut self, class: InstrClass, cost: Cost) {
        self.costs.insert(class, cost);
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Default for CycleModel {
    fn default() -> Self {
        CycleModel::from_toml_str(DEFAULT_TOML).expect("shipped cycle model is valid")
    }
}
