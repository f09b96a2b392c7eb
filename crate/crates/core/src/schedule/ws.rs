//! Weight-anchored tiles: one pass over the outputs per filter tap. Stashed
//! outputs stay in vector variables across all passes and are reduced in an
//! epilogue after the last pass.

use std::collections::HashMap;

use super::{Builder, Instr, IrMeta, ScheduleIr, Source, StashShift, Var, ACC, FIRST_STASH, INPUT_TMP, WEIGHT_TMP};
use crate::error::Result;
use crate::model::{DataflowSpec, LayerConfig, Mode, VectorMachineConfig};

/// Inputs to stash: the most reused first, earliest first among equals.
fn stashed_inputs(layer: &LayerConfig, n: usize) -> Vec<(usize, usize)> {
    let mut uses = vec![0usize; layer.ih * layer.iw];
    for oy in 0..layer.oh() {
        for ox in 0..layer.ow() {
            for r in 0..layer.fh {
                for c in 0..layer.fw {
                    if let Some((h, w)) = layer.input_at(oy, ox, r, c) {
                        uses[h * layer.iw + w] += 1;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..uses.len()).filter(|&i| uses[i] > 0).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(uses[i]), i));
    order
        .into_iter()
        .take(n)
        .map(|i| (i / layer.iw, i % layer.iw))
        .collect()
}

pub(super) fn generate(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    spec: &DataflowSpec,
    mode: Mode,
) -> Result<ScheduleIr> {
    let (oh, ow) = (layer.oh(), layer.ow());
    let window = layer.window();
    let inputs = stashed_inputs(layer, spec.aux_input_vars);
    let ni = inputs.len();
    let no = spec.aux_output_vars.min(oh * ow);

    let mut b = Builder::new(mode);
    let mut in_var: HashMap<(usize, usize), Var> = HashMap::new();
    for (i, &(h, w)) in inputs.iter().enumerate() {
        let v = FIRST_STASH + i as Var;
        b.load(v, Source::Input, h * layer.iw + w);
        in_var.insert((h, w), v);
    }
    let out_var = |e: usize| (e < no).then(|| FIRST_STASH + (ni + e) as Var);
    for e in 0..no {
        b.push(Instr::VZero {
            dst: FIRST_STASH + (ni + e) as Var,
        });
    }
    let prologue_len = b.instrs.len();

    let mut macs = vec![0u32; no];

    for p in 0..window {
        let (r, c) = (p / layer.fw, p % layer.fw);
        b.load(WEIGHT_TMP, Source::Weight, p);
        for e in 0..oh * ow {
            let Some(at) = layer.input_at(e / ow, e % ow, r, c) else {
                b.elided += 1;
                continue;
            };
            let iv = match in_var.get(&at) {
                Some(&v) => v,
                None => {
                    b.load(INPUT_TMP, Source::Input, at.0 * layer.iw + at.1);
                    INPUT_TMP
                }
            };
            b.product(ACC, iv, WEIGHT_TMP);
            match out_var(e) {
                Some(v) => {
                    b.push(Instr::VAdd { dst: v, a: v, b: ACC });
                    if let Some(m) = macs.get_mut(e) {
                        *m += 1;
                    }
                }
                None => b.write_back(ACC, 1, e),
            }
        }
    }

    let body_end = b.instrs.len();
    for (e, &m) in macs.iter().enumerate() {
        // An output whose every tap lies in the padding still gets its zero.
        b.write_back(FIRST_STASH + (ni + e) as Var, m, e);
    }
    let epilogue_len = b.instrs.len() - body_end;

    let idle = spec.aux_input_vars - ni + spec.aux_output_vars - no;
    Ok(ScheduleIr {
        instrs: b.instrs,
        prologue_len,
        epilogue_len,
        meta: IrMeta {
            spec: spec.clone(),
            layer: *layer,
            vmc: *vmc,
            mode,
            unroll: 1,
            shift: StashShift::Rotate,
            elided_loads: b.elided,
            idle_vars: idle,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::{gen_basic, gen_extended_ws};
    use super::*;
    use crate::model::Anchor;

    fn vmc() -> VectorMachineConfig {
        VectorMachineConfig::new(32, 32, 32, 8).unwrap()
    }

    fn loads(ir: &ScheduleIr, src: Source) -> usize {
        ir.instrs
            .iter()
            .filter(|i| matches!(i, Instr::VLoad { src: s, .. } if *s == src))
            .count()
    }

    fn count(ir: &ScheduleIr, op: &str) -> usize {
        ir.instrs.iter().filter(|i| i.opcode() == op).count()
    }

    #[test]
    fn basic_tile_counts() {
        let l = LayerConfig::new(3, 3, 4, 1, 2, 2, 1, 0).unwrap();
        let ir = gen_basic(Anchor::Ws, &l, &vmc(), Mode::Int8).unwrap();
        assert_eq!(loads(&ir, Source::Weight), 4);
        assert_eq!(loads(&ir, Source::Input), 16);
        assert_eq!(count(&ir, "VREDSUM"), 16);
        assert_eq!(count(&ir, "SACC"), 16);
    }

    #[test]
    fn stashed_outputs_write_back_once() {
        let l = LayerConfig::new(3, 3, 4, 1, 2, 2, 1, 0).unwrap();
        let ir = gen_extended_ws(&l, &vmc(), 0, 4, Mode::Int8).unwrap();
        assert_eq!(count(&ir, "SACC"), 4);
        assert_eq!(count(&ir, "VZERO"), 4);
        assert_eq!(ir.epilogue().iter().filter(|i| i.opcode() == "SACC").count(), 4);
    }

    #[test]
    fn stashed_inputs_prefer_most_reused() {
        let l = LayerConfig::new(5, 5, 4, 1, 3, 3, 1, 0).unwrap();
        assert_eq!(stashed_inputs(&l, 1), vec![(2, 2)]);
        let l = LayerConfig::new(6, 6, 4, 1, 3, 3, 1, 0).unwrap();
        assert_eq!(stashed_inputs(&l, 2), vec![(2, 2), (2, 3)]);
    }

    #[test]
    fn strided_stash_hit_once_per_stride() {
        // Stride 2, 4x4 filter: any input is reached by at most two taps per axis.
        let l = LayerConfig::new(10, 10, 4, 1, 4, 4, 2, 0).unwrap();
        let basic = gen_basic(Anchor::Ws, &l, &vmc(), Mode::Int8).unwrap();
        let ext = gen_extended_ws(&l, &vmc(), 1, 0, Mode::Int8).unwrap();
        let saved = loads(&basic, Source::Input) - (loads(&ext, Source::Input) - 1);
        assert_eq!(saved, 4);
    }
}
