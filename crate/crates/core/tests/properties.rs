use std::collections::HashSet;

use proptest::prelude::*;
use simdflow_core::model::{ckrs_xc_offset, nchw_xc_offset, pack, transform_moves, unpack};
use simdflow_core::pipeline::{layout_dp, CostTable};
use simdflow_core::reuse::{aux_gain, recommend};
use simdflow_core::schedule::generate;
use simdflow_core::{
    Anchor, AuxKind, DataflowSpec, Instr, LayerConfig, Layout, Mode, PackedTensor, TensorKind, VectorMachineConfig,
};

fn tensor(kind: TensorKind, layout: Layout, dims: Vec<usize>) -> PackedTensor {
    let n: usize = dims.iter().product();
    let data = (0..n as i64).map(|v| v * 7 % 255 - 127).collect();
    PackedTensor::new(kind, layout, dims, data).unwrap()
}

proptest! {
    #[test]
    fn pack_unpack_roundtrip(c in 1usize..20, h in 1usize..6, w in 1usize..6, k in 1usize..4, x in 1usize..9) {
        let t = tensor(TensorKind::Input, Layout::Nchw, vec![c, h, w]);
        let p = pack(&t, x).unwrap();
        prop_assert_eq!(p.data.len(), c.div_ceil(x) * x * h * w);
        prop_assert_eq!(unpack(&p).unwrap(), t);

        let t = tensor(TensorKind::Weight, Layout::Ckrs, vec![c, k, h, w]);
        prop_assert_eq!(unpack(&pack(&t, x).unwrap()).unwrap(), t);
    }

    #[test]
    fn offsets_are_injective_and_in_bounds(c in 1usize..12, h in 1usize..5, w in 1usize..5, k in 1usize..3, x in 1usize..9) {
        let len = c.div_ceil(x) * x * h * w;
        let mut seen = HashSet::new();
        for ci in 0..c {
            for hi in 0..h {
                for wi in 0..w {
                    let o = nchw_xc_offset((c, h, w), x, (ci, hi, wi)).unwrap();
                    prop_assert!(o < len);
                    prop_assert!(seen.insert(o));
                }
            }
        }
        let len = c.div_ceil(x) * x * k * h * w;
        let mut seen = HashSet::new();
        for ci in 0..c {
            for ki in 0..k {
                for r in 0..h {
                    for s in 0..w {
                        let o = ckrs_xc_offset((c, k, h, w), x, (ci, ki, r, s)).unwrap();
                        prop_assert!(o < len);
                        prop_assert!(seen.insert(o));
                    }
                }
            }
        }
        prop_assert!(nchw_xc_offset((c, h, w), x, (c, 0, 0)).is_err());
    }

    #[test]
    fn transforms_cost_nothing_only_when_unchanged(c in 1usize..40, h in 1usize..8, a in 0usize..4, b in 0usize..4) {
        let widths = [1, 4, 16, 32];
        let moves = transform_moves((c, h, h), widths[a], widths[b]);
        prop_assert_eq!(moves == 0, a == b);
    }

    #[test]
    fn output_anchor_gains_are_flat(ih in 4usize..16, fh in 2usize..5, s in 1usize..3, n in 1usize..40) {
        prop_assume!(s < fh && fh <= ih);
        let l = LayerConfig::new(ih, ih, 16, 1, fh, fh, s, 0).unwrap();
        let vmc = VectorMachineConfig::neon(8, 16).unwrap();
        for aux in [AuxKind::Input, AuxKind::Weight] {
            match aux_gain(Anchor::Os, aux, n, &l, &vmc) {
                Ok(g) => {
                    prop_assert!(n <= fh * fh * 16);
                    prop_assert_eq!((g.delta_reads, g.delta_writes), (l.e() as f64, 0.0));
                }
                Err(_) => prop_assert!(n > fh * fh * 16),
            }
        }
        prop_assert!(aux_gain(Anchor::Os, AuxKind::Output, 1, &l, &vmc).is_err());
    }

    #[test]
    fn recommendation_fills_budget_weights_first(regs in 4usize..64, ih in 3usize..20, fh in 1usize..6) {
        prop_assume!(fh <= ih);
        let vmc = VectorMachineConfig::new(128, 128, regs, 8).unwrap();
        let l = LayerConfig::new(ih, ih, 16, 4, fh, fh, 1, 0).unwrap();
        let r = recommend(&vmc, &l);
        prop_assert_eq!(r.anchor, Anchor::Os);
        prop_assert_eq!(r.total_aux(), vmc.aux_budget());
        prop_assert_eq!(r.aux(AuxKind::Weight), vmc.aux_budget().min(l.window()));
        prop_assert!(r.validate(&vmc).is_ok());
    }

    #[test]
    fn output_anchor_writes_in_khw_order(ih in 3usize..10, fh in 1usize..4, s in 1usize..3, pad in 0usize..2, ni in 0usize..10) {
        prop_assume!(fh <= ih);
        let l = LayerConfig::new(ih, ih, 16, 2, fh, fh, s, pad).unwrap();
        let vmc = VectorMachineConfig::neon(8, 16).unwrap();
        let spec = DataflowSpec::basic(Anchor::Os).with_aux(AuxKind::Input, ni);
        let ir = generate(&l, &vmc, &spec, Mode::Int8).unwrap();
        let offsets: Vec<usize> = ir.instrs.iter().filter_map(|i| match i {
            Instr::SAcc { offset } => Some(*offset),
            _ => None,
        }).collect();
        prop_assert_eq!(offsets, (0..l.e()).collect::<Vec<_>>());
    }

    #[test]
    fn extra_candidate_never_hurts(costs in proptest::collection::vec(0u64..100, 6), extra in 0u64..100) {
        let table = |with_extra: bool| {
            let second: Vec<u64> = if with_extra { vec![costs[3], costs[4], extra] } else { vec![costs[3], costs[4]] };
            let n = second.len();
            CostTable {
                labels: vec![vec!["a".into(), "b".into()], (0..n).map(|j| j.to_string()).collect()],
                layer_cost: vec![vec![costs[0], costs[1]], second],
                boundary: vec![vec![vec![costs[2], costs[5]]], vec![vec![1; n], vec![2; n]]],
                widths: vec![vec![1, 1], vec![1; n]],
            }
        };
        let without = layout_dp(&table(false)).unwrap().total;
        let with = layout_dp(&table(true)).unwrap().total;
        prop_assert!(with <= without);
    }
}
