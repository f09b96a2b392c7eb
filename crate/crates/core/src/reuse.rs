//! Analytic reuse counts and the auxiliary-gain table used to pick stash
//! allocations before anything is simulated.
//!
//! Table symbols: `H = ih·iw·x`, `R = fh·fw·x`, `E = oh·ow`. Gains are per
//! (channel block, kernel) tile; multiply by `ceil(ic/x)·oc` for a layer.

use crate::error::{Error, Result};
use crate::model::{Anchor, AuxKind, DataflowSpec, LayerConfig, VectorMachineConfig};

/// Memory operations saved by one more auxiliary vector variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxGain {
    pub delta_reads: f64,
    pub delta_writes: f64,
}

impl AuxGain {
    fn reads(v: f64) -> Self {
        AuxGain {
            delta_reads: v,
            delta_writes: 0.0,
        }
    }

    fn both(v: f64) -> Self {
        AuxGain {
            delta_reads: v,
            delta_writes: v,
        }
    }
}

/// Inputs shared by two horizontally adjacent output windows.
pub fn input_reuse_count(layer: &LayerConfig) -> usize {
    layer.fw.saturating_sub(layer.s) * layer.fh
}

/// Table value for adding the `n`-th variable (1-based) of `aux` under `anchor`.
pub fn aux_gain(
    anchor: Anchor,
    aux: AuxKind,
    n: usize,
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
) -> Result<AuxGain> {
    gain_with_lanes(anchor, aux, n, layer, vmc.x())
}

/// [`aux_gain`] expressed in vector instructions rather than elements, i.e.
/// with `H` and `R` counted in channel-block vectors.
pub fn aux_gain_instructions(anchor: Anchor, aux: AuxKind, n: usize, layer: &LayerConfig) -> Result<AuxGain> {
    gain_with_lanes(anchor, aux, n, layer, 1)
}

fn gain_with_lanes(anchor: Anchor, aux: AuxKind, n: usize, layer: &LayerConfig, x: usize) -> Result<AuxGain> {
    layer.validate()?;
    if aux == anchor.kind() {
        return Err(Error::IncompatibleAux { anchor, aux });
    }
    let (ih, fh, fw, s) = (layer.ih as f64, layer.fh as f64, layer.fw as f64, layer.s);
    let h = (layer.ih * layer.iw * x) as f64;
    let r = (layer.fh * layer.fw * x) as f64;
    let e = layer.e() as f64;
    let r_vars = layer.fh * layer.fw * x;
    let h_vars = layer.ih * layer.iw * x;

    let outside = |what: &str| {
        Error::OutsideTableRange(format!(
            "{anchor}/{} with variable {n} at stride {s}, fw {}: {what}",
            aux.name(),
            layer.fw
        ))
    };
    let in_range = |lo: usize, hi: usize| (lo..=hi).contains(&n);
    if !(1..layer.fw).contains(&s) {
        return Err(outside("stride outside [1, fw-1]"));
    }

    match (anchor, aux) {
        (Anchor::Os, _) => {
            if !in_range(1, r_vars) {
                return Err(outside("variable index outside [1, R]"));
            }
            Ok(AuxGain::reads(e))
        }
        (Anchor::Ws, AuxKind::Input) => {
            if !in_range(1, h_vars) {
                return Err(outside("variable index outside [1, H]"));
            }
            Ok(AuxGain::reads(r))
        }
        (Anchor::Ws, _) => {
            if !in_range(1, layer.e()) {
                return Err(outside("variable index outside [1, E]"));
            }
            Ok(AuxGain::both(r))
        }
        (Anchor::Is, AuxKind::Weight) => {
            if s == 1 {
                if !in_range(1, r_vars) {
                    return Err(outside("variable index outside [1, R]"));
                }
                Ok(AuxGain::reads(h))
            } else if in_range(1, layer.fw) {
                Ok(AuxGain::reads(h / s as f64))
            } else if in_range(layer.fw + 1, 2 * layer.fw) {
                Ok(AuxGain::reads(h / ((fw - s as f64) * s as f64)))
            } else {
                Err(outside("variable index outside [1, 2fw]"))
            }
        }
        (Anchor::Is, _) => {
            let sf = s as f64;
            if s == 1 {
                if !in_range(1, r_vars) {
                    return Err(outside("variable index outside [1, R]"));
                }
                return Ok(AuxGain::both(h));
            }
            let v = match n {
                1 => h + h / fw,
                2 => ih / (fw - sf) * (h + h / fw) + ih / sf * (fw - sf - 1.0),
                _ if in_range(3, 3 + layer.fw - s) => (fh - sf) * (fw - sf) * h / r,
                _ => return Err(outside("variable index outside [1, 3+fw-s]")),
            };
            Ok(AuxGain::both(v))
        }
    }
}

/// Anchors ordered from most to least promising.
pub fn rank_anchors(layer: &LayerConfig, _vmc: &VectorMachineConfig) -> [Anchor; 3] {
    if layer.s == 1 {
        [Anchor::Os, Anchor::Is, Anchor::Ws]
    } else {
        [Anchor::Os, Anchor::Ws, Anchor::Is]
    }
}

/// Output anchoring with every spare variable given to weights first, then inputs.
pub fn recommend(vmc: &VectorMachineConfig, layer: &LayerConfig) -> DataflowSpec {
    let budget = vmc.aux_budget();
    let weights = budget.min(layer.window());
    DataflowSpec::basic(Anchor::Os)
        .with_priority(&[AuxKind::Weight, AuxKind::Input])
        .with_aux(AuxKind::Weight, weights)
        .with_aux(AuxKind::Input, budget - weights)
}
