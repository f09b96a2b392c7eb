//! Input-anchored tiles: each input is loaded once and scattered into every
//! output it touches. Stashed outputs accumulate in vector variables for the
//! span of one input row and are reduced once when the row is done with them.

use std::collections::{HashMap, VecDeque};

use super::{
    assoc_idx, Builder, Instr, IrMeta, ScheduleIr, Source, StashShift, Var, ACC, FIRST_STASH, INPUT_TMP, WEIGHT_TMP,
};
use crate::error::Result;
use crate::model::{DataflowSpec, LayerConfig, Mode, VectorMachineConfig};

pub(super) fn generate(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    spec: &DataflowSpec,
    mode: Mode,
) -> Result<ScheduleIr> {
    let window = layer.window();
    let nw = spec.aux_weight_vars.min(window);
    let no = spec.aux_output_vars;
    let ow = layer.ow();

    let mut b = Builder::new(mode);
    for p in 0..nw {
        b.load(FIRST_STASH + p as Var, Source::Weight, p);
    }
    let prologue_len = b.instrs.len();

    let mut free: VecDeque<Var> = (0..no).map(|i| FIRST_STASH + (nw + i) as Var).collect();
    // Stashed output -> (variable, products accumulated so far).
    let mut live: HashMap<(usize, usize), (Var, u32)> = HashMap::new();
    let mut used_pool = 0usize;

    for h in 0..layer.ih {
        let pairs: Vec<_> = (0..layer.iw).map(|w| assoc_idx(h, w, layer)).collect();
        // Last input column of this row touching each output.
        let mut last_use: HashMap<(usize, usize), usize> = HashMap::new();
        for (w, ps) in pairs.iter().enumerate() {
            for &(o, _) in ps {
                last_use.insert(o, w);
            }
        }
        for (w, ps) in pairs.iter().enumerate() {
            if ps.is_empty() {
                continue;
            }
            b.load(INPUT_TMP, Source::Input, h * layer.iw + w);
            for &(o, (r, c)) in ps {
                let p = r * layer.fw + c;
                let wv = if p < nw {
                    FIRST_STASH + p as Var
                } else {
                    b.load(WEIGHT_TMP, Source::Weight, p);
                    WEIGHT_TMP
                };
                let offset = o.0 * ow + o.1;
                let last = last_use[&o] == w;
                if let Some(&(v, macs)) = live.get(&o) {
                    b.product(ACC, INPUT_TMP, wv);
                    b.push(Instr::VAdd { dst: v, a: v, b: ACC });
                    if last {
                        b.write_back(v, macs + 1, offset);
                        live.remove(&o);
                        free.push_back(v);
                    } else {
                        live.insert(o, (v, macs + 1));
                    }
                } else if let Some(v) = (!last).then(|| free.pop_front()).flatten() {
                    b.product(v, INPUT_TMP, wv);
                    live.insert(o, (v, 1));
                    used_pool = used_pool.max(no - free.len());
                } else {
                    b.product(ACC, INPUT_TMP, wv);
                    b.write_back(ACC, 1, offset);
                }
            }
        }
        debug_assert!(live.is_empty());
    }

    let idle = spec.aux_weight_vars - nw + (no - used_pool);
    Ok(ScheduleIr {
        instrs: b.instrs,
        prologue_len,
        epilogue_len: 0,
        meta: IrMeta {
            spec: spec.clone(),
            layer: *layer,
            vmc: *vmc,
            mode,
            unroll: 1,
            shift: StashShift::Rotate,
            elided_loads: 0,
            idle_vars: idle,
        },
    })
}
