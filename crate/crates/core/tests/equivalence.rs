//! Every generated schedule, run on the vector machine, must reproduce the
//! scalar oracle exactly and stay inside the register budget.

use proptest::prelude::*;
use simdflow_core::model::{Anchor, AuxKind, DataflowSpec, LayerConfig, Mode, VectorMachineConfig};
use simdflow_core::schedule::{gen_extended_os_without_rotation, generate};
use simdflow_core::workload::verify;

#[derive(Debug, Clone)]
struct Case {
    layer: LayerConfig,
    vmc: VectorMachineConfig,
    spec: DataflowSpec,
    mode: Mode,
    seed: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (
        (3usize..=12, 3usize..=12, 1usize..=9, 1usize..=3),
        (1usize..=5, 1usize..=5, 1usize..=2, 0usize..=1),
        (0usize..3, 0usize..12, 0usize..12),
        (any::<bool>(), 0usize..3, any::<u64>()),
    )
        .prop_filter_map(
            "filter must fit",
            |((ih, iw, ic, oc), (fh, fw, s, pad), (a, n1, n2), (binary, width, seed))| {
                let layer = LayerConfig::new(ih, iw, ic, oc, fh, fw, s, pad).ok()?;
                let mode = if binary { Mode::Binary } else { Mode::Int8 };
                let (elem, x) = match mode {
                    Mode::Int8 => (8, [4, 8, 16][width]),
                    Mode::Binary => (1, [64, 128, 256][width]),
                };
                let vmc = VectorMachineConfig::new(x * elem, x * elem, 32, elem).ok()?;
                let anchor = Anchor::ALL[a];
                let [k1, k2] = anchor.aux_kinds();
                let budget = vmc.aux_budget();
                let n1 = n1.min(budget);
                let n2 = n2.min(budget - n1);
                let spec = DataflowSpec::basic(anchor).with_aux(k1, n1).with_aux(k2, n2);
                Some(Case {
                    layer,
                    vmc,
                    spec,
                    mode,
                    seed,
                })
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn machine_matches_oracle(c in case()) {
        let ir = generate(&c.layer, &c.vmc, &c.spec, c.mode).unwrap();
        let v = verify(&ir, c.seed).unwrap();
        prop_assert!(v.passed(), "{} {} {:?}: {:?}", c.layer, c.spec, c.mode, v.mismatch);
        prop_assert!(v.report.peak_live_vars <= c.vmc.num_var_available());
        let tiles = (c.layer.ic.div_ceil(c.vmc.x()) * c.layer.oc) as u64;
        prop_assert_eq!(v.report.layer.vector_loads, v.report.tile.vector_loads * tiles);
        if c.spec.anchor == Anchor::Os {
            prop_assert_eq!(v.report.tile.vmov, 0);
        }
    }

    #[test]
    fn fixed_assignment_matches_oracle(c in case()) {
        let ni = c.spec.aux(AuxKind::Input);
        let nw = c.spec.aux(AuxKind::Weight);
        prop_assume!(c.spec.anchor == Anchor::Os);
        let ir = gen_extended_os_without_rotation(&c.layer, &c.vmc, ni, nw, c.mode).unwrap();
        let v = verify(&ir, c.seed).unwrap();
        prop_assert!(v.passed(), "{} {}: {:?}", c.layer, c.spec, v.mismatch);
    }
}
