//! Output-anchored tiles: every output accumulates in `v2` until all of its
//! taps are done, then one reduction writes it back.

use super::rotation::{secondary_unroll_factor, stash_rows};
use super::{Builder, Instr, IrMeta, ScheduleIr, Source, StashShift, Var, ACC, FIRST_STASH, INPUT_TMP, WEIGHT_TMP};
use crate::error::Result;
use crate::model::{Anchor, AuxKind, DataflowSpec, LayerConfig, Mode, VectorMachineConfig};

/// Extended output anchoring with the input stash pinned to fixed variables,
/// shifting contents with VMOV between outputs. Diagnostic only: this is the
/// data movement secondary unrolling exists to remove.
pub fn gen_extended_os_without_rotation(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    num_in_stash: usize,
    num_wgt_stash: usize,
    mode: Mode,
) -> Result<ScheduleIr> {
    let spec = DataflowSpec::basic(Anchor::Os)
        .with_aux(AuxKind::Input, num_in_stash)
        .with_aux(AuxKind::Weight, num_wgt_stash);
    layer.validate()?;
    spec.validate(vmc)?;
    generate(layer, vmc, &spec, mode, StashShift::Moves)
}

pub(super) fn generate(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    spec: &DataflowSpec,
    mode: Mode,
    requested: StashShift,
) -> Result<ScheduleIr> {
    let window = layer.window();
    let nw = spec.aux_weight_vars.min(window);
    let ni = spec.aux_input_vars.min(window);
    let rows = stash_rows(layer, ni);
    let s = layer.s;

    let mut unroll = secondary_unroll_factor(layer, ni, s);
    let shift = match requested {
        StashShift::Rotate if unroll > super::MAX_UNROLL => StashShift::MovesFallback,
        other => other,
    };
    if shift != StashShift::Rotate {
        unroll = 1;
    }

    let weight_var = |p: usize| (p < nw).then(|| FIRST_STASH + p as Var);
    let in_base = FIRST_STASH + nw as Var;
    let row_first: Vec<usize> = rows
        .iter()
        .scan(0, |acc, &m| {
            let first = *acc;
            *acc += m;
            Some(first)
        })
        .collect();
    // Stash variable serving tap (r, c) during the `phase`-th unrolled iteration.
    let input_var = |r: usize, c: usize, phase: usize| -> Option<Var> {
        let m = *rows.get(r)?;
        if c >= m {
            return None;
        }
        let slot = if shift == StashShift::Rotate && m > s {
            (c + phase * s) % m
        } else {
            c
        };
        Some(in_base + (row_first[r] + slot) as Var)
    };
    let flat = |(h, w): (usize, usize)| h * layer.iw + w;

    let mut b = Builder::new(mode);
    let mut held: Vec<Option<(usize, usize)>> = vec![None; ni];

    for p in 0..nw {
        b.load(FIRST_STASH + p as Var, Source::Weight, p);
    }
    for r in 0..layer.fh {
        for c in 0..layer.fw {
            if let (Some(v), Some(at)) = (input_var(r, c, 0), layer.input_at(0, 0, r, c)) {
                b.load(v, Source::Input, flat(at));
                held[(v - in_base) as usize] = Some(at);
            }
        }
    }
    let prologue_len = b.instrs.len();

    for oy in 0..layer.oh() {
        for ox in 0..layer.ow() {
            let phase = ox % unroll;
            b.push(Instr::VZero { dst: ACC });
            let mut macs = 0u32;
            for r in 0..layer.fh {
                for c in 0..layer.fw {
                    let p = r * layer.fw + c;
                    let stashed_in = input_var(r, c, phase);
                    let Some(at) = layer.input_at(oy, ox, r, c) else {
                        b.elided += u64::from(stashed_in.is_none()) + u64::from(weight_var(p).is_none());
                        continue;
                    };
                    let iv = match stashed_in {
                        Some(v) => {
                            let slot = (v - in_base) as usize;
                            if held[slot] != Some(at) {
                                let row = row_first[r]..row_first[r] + rows[r];
                                let donor = row.clone().find(|&i| i != slot && held[i] == Some(at));
                                match donor {
                                    Some(d) if shift != StashShift::Rotate => {
                                        b.push(Instr::VMov {
                                            dst: v,
                                            src: in_base + d as Var,
                                        });
                                    }
                                    _ => b.load(v, Source::Input, flat(at)),
                                }
                                held[slot] = Some(at);
                            }
                            v
                        }
                        None => {
                            b.load(INPUT_TMP, Source::Input, flat(at));
                            INPUT_TMP
                        }
                    };
                    let wv = match weight_var(p) {
                        Some(v) => v,
                        None => {
                            b.load(WEIGHT_TMP, Source::Weight, p);
                            WEIGHT_TMP
                        }
                    };
                    let dst = if iv == INPUT_TMP || wv != WEIGHT_TMP {
                        INPUT_TMP
                    } else {
                        WEIGHT_TMP
                    };
                    b.product(dst, iv, wv);
                    b.push(Instr::VAdd {
                        dst: ACC,
                        a: ACC,
                        b: dst,
                    });
                    macs += 1;
                }
            }
            b.write_back(ACC, macs, oy * layer.ow() + ox);
        }
    }

    let idle = spec.aux_weight_vars - nw + spec.aux_input_vars - ni;
    Ok(ScheduleIr {
        instrs: b.instrs,
        prologue_len,
        epilogue_len: 0,
        meta: IrMeta {
            spec: spec.clone(),
            layer: *layer,
            vmc: *vmc,
            mode,
            unroll,
            shift,
            elided_loads: b.elided,
            idle_vars: idle,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::super::gen_basic;
    use super::*;

    fn vmc() -> VectorMachineConfig {
        VectorMachineConfig::new(32, 32, 32, 8).unwrap()
    }

    fn count(ir: &ScheduleIr, op: &str) -> usize {
        ir.instrs.iter().filter(|i| i.opcode() == op).count()
    }

    #[test]
    fn basic_tile_counts() {
        let l = LayerConfig::new(3, 3, 4, 1, 2, 2, 1, 0).unwrap();
        let ir = gen_basic(Anchor::Os, &l, &vmc(), Mode::Int8).unwrap();
        assert_eq!(count(&ir, "VLOAD"), 32);
        assert_eq!(count(&ir, "VREDSUM"), 4);
        assert_eq!(count(&ir, "SACC"), 4);
        assert_eq!(ir.vars_used().len(), 3);
    }

    #[test]
    fn weight_stash_removes_weight_reloads() {
        let l = LayerConfig::new(3, 3, 4, 1, 2, 2, 1, 0).unwrap();
        let ir = super::super::gen_extended_os(&l, &vmc(), 0, 4, Mode::Int8).unwrap();
        let weight_loads = ir
            .instrs
            .iter()
            .filter(|i| {
                matches!(
                    i,
                    Instr::VLoad {
                        src: Source::Weight,
                        ..
                    }
                )
            })
            .count();
        let input_loads = ir
            .instrs
            .iter()
            .filter(|i| matches!(i, Instr::VLoad { src: Source::Input, .. }))
            .count();
        assert_eq!((weight_loads, input_loads), (4, 16));
        assert_eq!(count(&ir, "VMOV"), 0);
    }

    #[test]
    fn rotation_avoids_moves_that_fixed_assignment_needs() {
        let l = LayerConfig::new(8, 8, 4, 1, 3, 3, 1, 0).unwrap();
        let rot = super::super::gen_extended_os(&l, &vmc(), 5, 0, Mode::Int8).unwrap();
        let fixed = gen_extended_os_without_rotation(&l, &vmc(), 5, 0, Mode::Int8).unwrap();
        assert_eq!(rot.meta.unroll, 6);
        assert_eq!(count(&rot, "VMOV"), 0);
        assert!(count(&fixed, "VMOV") > 0);
        let loads = |ir: &ScheduleIr| count(ir, "VLOAD");
        assert_eq!(loads(&rot), loads(&fixed));
    }

    #[test]
    fn long_rotation_period_falls_back_to_moves() {
        // fw = 9 with 17 stashed positions: rows of 9 and 8 rotate with period 72.
        let l = LayerConfig::new(12, 12, 4, 1, 9, 9, 1, 0).unwrap();
        let ir = super::super::gen_extended_os(&l, &vmc(), 17, 0, Mode::Int8).unwrap();
        assert_eq!(ir.meta.shift, StashShift::MovesFallback);
        assert_eq!(ir.meta.unroll, 1);
    }

    #[test]
    fn padded_taps_are_elided() {
        let l = LayerConfig::new(3, 3, 4, 1, 3, 3, 1, 1).unwrap();
        let ir = gen_basic(Anchor::Os, &l, &vmc(), Mode::Int8).unwrap();
        // 9 outputs x 9 taps, of which 9·9 − (sum of valid taps) are in the padding.
        let valid: usize = (0..3)
            .flat_map(|oy| (0..3).map(move |ox| (oy, ox)))
            .map(|(oy, ox)| (0..9).filter(|t| l.input_at(oy, ox, t / 3, t % 3).is_some()).count())
            .sum();
        assert_eq!(count(&ir, "VLOAD"), 2 * valid);
        assert_eq!(ir.meta.elided_loads as usize, 2 * (81 - valid));
    }
}
