//! Seeded random tensors and the execute-versus-oracle check built on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{pack, LayerConfig, Layout, Mode, PackedTensor, TensorKind};
use crate::schedule::ScheduleIr;
use crate::simvm::{execute, first_mismatch, scalar_oracle, CostReport};

fn sample(rng: &mut impl Rng, mode: Mode, n: usize, lo: i64, hi: i64) -> Vec<i64> {
    (0..n)
        .map(|_| match mode {
            Mode::Int8 => rng.gen_range(lo..=hi),
            Mode::Binary => rng.gen_range(0..=1),
        })
        .collect()
}

/// Unblocked `NCHW` input with int8 values (or bits in binary mode).
pub fn random_input(layer: &LayerConfig, mode: Mode, rng: &mut impl Rng) -> PackedTensor {
    let dims = vec![layer.ic, layer.ih, layer.iw];
    let data = sample(rng, mode, dims.iter().product(), -128, 127);
    PackedTensor::new(TensorKind::Input, Layout::Nchw, dims, data).expect("dims match data")
}

/// Unblocked `CKRS` weights with int8 values (or bits in binary mode).
pub fn random_weights(layer: &LayerConfig, mode: Mode, rng: &mut impl Rng) -> PackedTensor {
    let dims = vec![layer.ic, layer.oc, layer.fh, layer.fw];
    let data = sample(rng, mode, dims.iter().product(), -128, 127);
    PackedTensor::new(TensorKind::Weight, Layout::Ckrs, dims, data).expect("dims match data")
}

#[derive(Debug, Clone)]
pub struct Verification {
    pub report: CostReport,
    /// First differing `(k, h, w)` with the machine and oracle values.
    pub mismatch: Option<((usize, usize, usize), i64, i64)>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none()
    }
}

/// Executes `ir` on tensors drawn from `seed` and compares with the oracle.
pub fn verify(ir: &ScheduleIr, seed: u64) -> Result<Verification> {
    let meta = &ir.meta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = random_input(&meta.layer, meta.mode, &mut rng);
    let weights = random_weights(&meta.layer, meta.mode, &mut rng);
    let x = meta.vmc.x();
    let (out, report) = execute(ir, &pack(&input, x)?, &pack(&weights, x)?, meta.mode)?;
    let expected = scalar_oracle(&meta.layer, &input, &weights, meta.mode)?;
    Ok(Verification {
        report,
        mismatch: first_mismatch(&out, &expected),
    })
}
