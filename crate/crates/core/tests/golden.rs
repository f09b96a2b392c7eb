//! Byte-for-byte snapshots of emitted sources and IR dumps.
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p simdflow-core --test golden`.

use std::path::PathBuf;

use simdflow_core::emit::{emit, emit_oracle, EmitConfig, Flavor};
use simdflow_core::schedule::gen_basic;
use simdflow_core::{Anchor, LayerConfig, Mode, VectorMachineConfig};

fn check(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(
        actual, expected,
        "{name} drifted; rerun with UPDATE_GOLDEN=1 if intended"
    );
}

fn pointwise() -> (LayerConfig, VectorMachineConfig) {
    (
        LayerConfig::new(2, 2, 16, 1, 1, 1, 1, 0).unwrap(),
        VectorMachineConfig::neon(8, 16).unwrap(),
    )
}

#[test]
fn basic_os_pointwise_neon() {
    let (l, vmc) = pointwise();
    let ir = gen_basic(Anchor::Os, &l, &vmc, Mode::Int8).unwrap();
    check("os_1x1.ir", &ir.to_text());
    let cfg = EmitConfig::new(Flavor::NeonC, "conv_os_1x1", Mode::Int8).with_guard("CONV_OS_1X1_H");
    check("os_1x1_neon.c", &emit(&ir, &cfg).unwrap());
}

#[test]
fn pointwise_oracle() {
    let (l, vmc) = pointwise();
    let cfg = EmitConfig::new(Flavor::ScalarC, "conv_ref_1x1", Mode::Int8);
    check("ref_1x1.c", &emit_oracle(&l, vmc.x(), &cfg).unwrap());
}

#[test]
fn binary_ws_scalar() {
    let l = LayerConfig::new(3, 3, 64, 1, 2, 2, 1, 0).unwrap();
    let vmc = VectorMachineConfig::new(64, 64, 8, 1).unwrap();
    let ir = gen_basic(Anchor::Ws, &l, &vmc, Mode::Binary).unwrap();
    let cfg = EmitConfig::new(Flavor::ScalarC, "conv_ws_bin", Mode::Binary);
    check("ws_binary_scalar.c", &emit(&ir, &cfg).unwrap());
}
