//! JSON run configuration.
//!
//! ```json
//! {
//!   "machine": { "vec_reg_bits": 128, "vec_var_bits": 128, "num_vec_regs": 32,
//!                "elem_bits": 8, "mode": "int8" },
//!   "layers": [ { "ih": 16, "iw": 16, "ic": 16, "oc": 16, "fh": 3, "fw": 3, "s": 1, "pad": 1 } ],
//!   "candidates": [ [ { "x": 16, "anchor": "os", "aux_weight_vars": 9 } ] ],
//!   "weights": { "loads": 1, "arithmetic": 0 },
//!   "seed": 7
//! }
//! ```
//!
//! `candidates` and `weights` are optional; a missing or empty candidate list
//! for a layer falls back to the default search space.

use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;
use simdflow_core::pipeline::{default_candidates, Candidate, CostWeights, NetworkSpec};
use simdflow_core::{DataflowSpec, LayerConfig, Mode, VectorMachineConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineJson {
    pub vec_reg_bits: usize,
    pub vec_var_bits: usize,
    pub num_vec_regs: usize,
    pub elem_bits: usize,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CandidateJson {
    pub x: usize,
    #[serde(flatten)]
    pub spec: DataflowSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub machine: MachineJson,
    pub layers: Vec<LayerConfig>,
    #[serde(default)]
    pub candidates: Vec<Vec<CandidateJson>>,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> anyhow::Result<()> {
        if self.layers.is_empty() {
            bail!("config lists no layers");
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate().with_context(|| format!("layer {i}"))?;
        }
        if self.candidates.len() > self.layers.len() {
            bail!(
                "{} candidate lists for {} layers",
                self.candidates.len(),
                self.layers.len()
            );
        }
        self.machine(self.machine.mode)?;
        Ok(())
    }

    /// The register file, with `elem_bits` forced to 1 in binary mode and to
    /// 8 when an int8 run overrides a binary config.
    pub fn machine(&self, mode: Mode) -> anyhow::Result<VectorMachineConfig> {
        let m = &self.machine;
        let elem_bits = match mode {
            Mode::Binary => 1,
            Mode::Int8 if m.elem_bits == 1 => 8,
            Mode::Int8 => m.elem_bits,
        };
        Ok(VectorMachineConfig::new(
            m.vec_reg_bits,
            m.vec_var_bits,
            m.num_vec_regs,
            elem_bits,
        )?)
    }

    pub fn layer(&self, k: usize) -> anyhow::Result<LayerConfig> {
        match self.layers.get(k) {
            Some(l) => Ok(*l),
            None => bail!("layer {k} out of range; config has {} layers", self.layers.len()),
        }
    }

    pub fn candidates(&self, k: usize, base: &VectorMachineConfig) -> Vec<Candidate> {
        match self.candidates.get(k) {
            Some(list) if !list.is_empty() => list
                .iter()
                .map(|c| Candidate {
                    x: c.x,
                    spec: c.spec.clone(),
                })
                .collect(),
            _ => default_candidates(&self.layers[k], base),
        }
    }

    pub fn network(&self, mode: Mode) -> anyhow::Result<NetworkSpec> {
        let machine = self.machine(mode)?;
        Ok(NetworkSpec {
            layers: self.layers.clone(),
            candidates: (0..self.layers.len()).map(|k| self.candidates(k, &machine)).collect(),
            machine,
            mode,
        })
    }
}
