//! Experiment configuration: the JSON document consumed by `run`.

use crate::{BenchError, Result};
use qctn::ansatz::Family;
use qctn::hamiltonian::ModelSpec;
use qctn::optimize::OptimizerConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnsatzConfig {
    /// A circuit family optimized over a strictly increasing depth schedule,
    /// each stage initialized from the previous optimum.
    Circuit {
        family: Family,
        #[serde(default)]
        q: usize,
        tau_schedule: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        q_m: Option<usize>,
    },
    /// Dense-MPS baseline via DMRG at the listed bond dimensions.
    DenseMps { bonds: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveChoice {
    Energy,
    Infidelity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case")]
pub enum ReferencePolicy {
    /// Exact diagonalization (qubit count permitting).
    Ed,
    /// DMRG at the given bond dimension.
    Dmrg { bond: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthPerturbation {
    /// Scale from the mean per-gate gradient max-norm at the grown point.
    Auto,
    /// Fixed angle scale.
    Fixed(f64),
}

impl Default for GrowthPerturbation {
    fn default() -> Self {
        GrowthPerturbation::Auto
    }
}

fn default_init_strength() -> f64 {
    0.1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub ansatz: AnsatzConfig,
    pub objective: ObjectiveChoice,
    pub optimizer: OptimizerConfig,
    pub reference: ReferencePolicy,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    /// Angle scale of the random initialization at the first depth stage.
    #[serde(default = "default_init_strength")]
    pub init_strength: f64,
    #[serde(default)]
    pub growth_perturbation: GrowthPerturbation,
    /// Local-sweep passes before the gradient stage (0 disables).
    #[serde(default)]
    pub warmup_sweeps: usize,
    /// Marks configs meant to mirror full-scale runs; not exercised in CI.
    #[serde(default)]
    pub paper_scale: bool,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(s).map_err(|e| BenchError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(BenchError::Config("need at least one seed".into()));
        }
        match &self.ansatz {
            AnsatzConfig::Circuit { tau_schedule, family, q, q_m } => {
                if tau_schedule.is_empty() {
                    return Err(BenchError::Config("empty tau schedule".into()));
                }
                for w in tau_schedule.windows(2) {
                    if w[1] <= w[0] {
                        return Err(BenchError::Config(
                            "tau schedule must be strictly increasing".into(),
                        ));
                    }
                }
                // surface construction errors now rather than mid-run
                qctn::ansatz::build_ansatz(
                    *family,
                    self.model.qubit_count(),
                    *q,
                    tau_schedule[0],
                    *q_m,
                )
                .map_err(|e| BenchError::Config(e.to_string()))?;
            }
            AnsatzConfig::DenseMps { bonds } => {
                if bonds.is_empty() {
                    return Err(BenchError::Config("empty bond list".into()));
                }
            }
        }
        if let ReferencePolicy::Ed = self.reference {
            if self.model.qubit_count() > qctn::oracle::ED_LANCZOS_LIMIT {
                return Err(BenchError::Config(format!(
                    "ED reference not resolvable at {} qubits",
                    self.model.qubit_count()
                )));
            }
        }
        if self.init_strength < 0.0 {
            return Err(BenchError::Config("negative init strength".into()));
        }
        Ok(())
    }

    pub fn config_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self).expect("config serializes"));
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSpec::heisenberg(8),
            ansatz: AnsatzConfig::Circuit {
                family: Family::QmpsB,
                q: 2,
                tau_schedule: vec![2, 4],
                q_m: None,
            },
            objective: ObjectiveChoice::Energy,
            optimizer: qctn::optimize::OptimizerConfig::new(qctn::optimize::OptMethod::Lbfgs, 50),
            reference: ReferencePolicy::Ed,
            output_dir: PathBuf::from("out"),
            seeds: vec![1],
            init_strength: 0.1,
            growth_perturbation: GrowthPerturbation::Auto,
            warmup_sweeps: 0,
            paper_scale: false,
        }
    }

    #[test]
    fn json_roundtrip_and_hash_stability() {
        let cfg = sample();
        let s = cfg.to_json();
        let back = ExperimentConfig::from_json(&s).unwrap();
        assert_eq!(cfg.config_hash(), back.config_hash());
    }

    #[test]
    fn schedule_must_increase() {
        let mut cfg = sample();
        if let AnsatzConfig::Circuit { tau_schedule, .. } = &mut cfg.ansatz {
            *tau_schedule = vec![4, 4];
        }
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn oversized_ed_reference_is_rejected() {
        let mut cfg = sample();
        cfg.model = ModelSpec::heisenberg(24);
        assert!(cfg.validate().is_err());
    }
}
