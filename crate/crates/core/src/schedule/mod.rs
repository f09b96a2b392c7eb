//! Schedule generation: one fully unrolled (channel block, kernel) tile per
//! dataflow, expressed in a small abstract vector instruction set.
//!
//! Variable conventions shared by all generators: `v0` holds the freshly
//! loaded input, `v1` the freshly loaded weight and `v2` the output
//! accumulator (output anchoring) or the product temporary (input and weight
//! anchoring). Stash variables start at `v3`.
//!
//! Memory operands are tile-relative vector indices. The executing machine
//! adds the tile base: `cb·ih·iw` for inputs, `(cb·oc + k)·fh·fw` for
//! weights and `k·oh·ow` for scalar outputs.

mod is;
mod os;
mod rotation;
mod text;
mod ws;

pub use os::gen_extended_os_without_rotation;
pub use rotation::{alloc_rotation, lcm, secondary_unroll_factor, stash_rows};
pub use text::parse_ir;

use std::collections::BTreeSet;
use std::fmt;

use crate::error::Result;
use crate::model::{Anchor, DataflowSpec, LayerConfig, Mode, VectorMachineConfig};

pub type Var = u16;

/// Scratch variables every schedule reserves.
pub const INPUT_TMP: Var = 0;
pub const WEIGHT_TMP: Var = 1;
pub const ACC: Var = 2;
pub const FIRST_STASH: Var = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Input,
    Weight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instr {
    VLoad {
        dst: Var,
        src: Source,
        index: usize,
    },
    VZero {
        dst: Var,
    },
    VMul {
        dst: Var,
        a: Var,
        b: Var,
    },
    VAdd {
        dst: Var,
        a: Var,
        b: Var,
    },
    VXor {
        dst: Var,
        a: Var,
        b: Var,
    },
    VPopcnt {
        dst: Var,
        src: Var,
    },
    VMov {
        dst: Var,
        src: Var,
    },
    /// Horizontal sum into the scalar register. `macs` is the number of
    /// products accumulated in `src`; binary mode needs it to undo the
    /// popcount encoding.
    VRedSum {
        src: Var,
        macs: u32,
    },
    /// `outputs[offset] += scalar`.
    SAcc {
        offset: usize,
    },
}

impl Instr {
    pub fn opcode(&self) -> &'static str {
        match self {
            Instr::VLoad { .. } => "VLOAD",
            Instr::VZero { .. } => "VZERO",
            Instr::VMul { .. } => "VMUL",
            Instr::VAdd { .. } => "VADD",
            Instr::VXor { .. } => "VXOR",
            Instr::VPopcnt { .. } => "VPOPCNT",
            Instr::VMov { .. } => "VMOV",
            Instr::VRedSum { .. } => "VREDSUM",
            Instr::SAcc { .. } => "SACC",
        }
    }

    /// Variable written, if any.
    pub fn def(&self) -> Option<Var> {
        match *self {
            Instr::VLoad { dst, .. }
            | Instr::VZero { dst }
            | Instr::VMul { dst, .. }
            | Instr::VAdd { dst, .. }
            | Instr::VXor { dst, .. }
            | Instr::VPopcnt { dst, .. }
            | Instr::VMov { dst, .. } => Some(dst),
            Instr::VRedSum { .. } | Instr::SAcc { .. } => None,
        }
    }

    /// Variables read.
    pub fn uses(&self) -> impl Iterator<Item = Var> {
        let (a, b) = match *self {
            Instr::VMul { a, b, .. } | Instr::VAdd { a, b, .. } | Instr::VXor { a, b, .. } => (Some(a), Some(b)),
            Instr::VPopcnt { src, .. } | Instr::VMov { src, .. } | Instr::VRedSum { src, .. } => (Some(src), None),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = self.opcode();
        match *self {
            Instr::VLoad { dst, src, index } => {
                let t = match src {
                    Source::Input => "in",
                    Source::Weight => "wgt",
                };
                write!(f, "{op} v{dst}, {t}[{index}]")
            }
            Instr::VZero { dst } => write!(f, "{op} v{dst}"),
            Instr::VMul { dst, a, b } | Instr::VAdd { dst, a, b } | Instr::VXor { dst, a, b } => {
                write!(f, "{op} v{dst}, v{a}, v{b}")
            }
            Instr::VPopcnt { dst, src } | Instr::VMov { dst, src } => write!(f, "{op} v{dst}, v{src}"),
            Instr::VRedSum { src, macs } => write!(f, "{op} s, v{src}, #{macs}"),
            Instr::SAcc { offset } => write!(f, "{op} out[{offset}], s"),
        }
    }
}

/// How an output-anchored schedule keeps its input stash aligned with the
/// sliding window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StashShift {
    /// Secondary unrolling: each unrolled iteration renames stash variables.
    Rotate,
    /// Fixed row-major assignment, shifting stash contents with VMOV.
    Moves,
    /// Rotation period too long to unroll; fell back to VMOV shifting.
    MovesFallback,
}

impl StashShift {
    pub fn name(self) -> &'static str {
        match self {
            StashShift::Rotate => "rotate",
            StashShift::Moves => "moves",
            StashShift::MovesFallback => "fallback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Section {
    Prologue,
    Body,
    Epilogue,
}

/// Longest secondary unrolling emitted before falling back to VMOV shifting.
pub const MAX_UNROLL: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrMeta {
    pub spec: DataflowSpec,
    pub layer: LayerConfig,
    pub vmc: VectorMachineConfig,
    pub mode: Mode,
    /// Secondary unroll factor of the output loop (1 when not unrolled).
    pub unroll: usize,
    pub shift: StashShift,
    /// Loads skipped per tile because they fall in the zero padding.
    pub elided_loads: u64,
    /// Requested stash variables the dataflow cannot put to use.
    pub idle_vars: usize,
}

impl IrMeta {
    pub fn channel_blocks(&self) -> usize {
        self.layer.channel_blocks(self.vmc.x())
    }

    pub fn kernels(&self) -> usize {
        self.layer.oc
    }

    pub fn tiles(&self) -> usize {
        self.channel_blocks() * self.kernels()
    }
}

/// Instructions for one (channel block, kernel) tile. The first
/// `prologue_len` instructions fill stashes and the last `epilogue_len`
/// drain them; everything between is the unrolled body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleIr {
    pub instrs: Vec<Instr>,
    pub prologue_len: usize,
    pub epilogue_len: usize,
    pub meta: IrMeta,
}

impl ScheduleIr {
    pub fn prologue(&self) -> &[Instr] {
        &self.instrs[..self.prologue_len]
    }

    pub fn body(&self) -> &[Instr] {
        &self.instrs[self.prologue_len..self.instrs.len() - self.epilogue_len]
    }

    pub fn epilogue(&self) -> &[Instr] {
        &self.instrs[self.instrs.len() - self.epilogue_len..]
    }

    /// Which section instruction `i` belongs to.
    pub fn section(&self, i: usize) -> Section {
        if i < self.prologue_len {
            Section::Prologue
        } else if i >= self.instrs.len() - self.epilogue_len {
            Section::Epilogue
        } else {
            Section::Body
        }
    }

    /// Distinct variable ids referenced anywhere in the tile.
    pub fn vars_used(&self) -> BTreeSet<Var> {
        self.instrs
            .iter()
            .flat_map(|i| i.def().into_iter().chain(i.uses()))
            .collect()
    }

    pub fn to_text(&self) -> String {
        text::render(self)
    }
}

/// Instruction stream under construction, shared by the generators.
struct Builder {
    instrs: Vec<Instr>,
    mode: Mode,
    elided: u64,
}

impl Builder {
    fn new(mode: Mode) -> Self {
        Builder {
            instrs: Vec::new(),
            mode,
            elided: 0,
        }
    }

    fn push(&mut self, i: Instr) {
        self.instrs.push(i);
    }

    fn load(&mut self, dst: Var, src: Source, index: usize) {
        self.push(Instr::VLoad { dst, src, index });
    }

    /// One lane-wise product: a multiply, or XOR + popcount in binary mode.
    fn product(&mut self, dst: Var, a: Var, b: Var) {
        match self.mode {
            Mode::Int8 => self.push(Instr::VMul { dst, a, b }),
            Mode::Binary => {
                self.push(Instr::VXor { dst, a, b });
                self.push(Instr::VPopcnt { dst, src: dst });
            }
        }
    }

    fn write_back(&mut self, src: Var, macs: u32, offset: usize) {
        self.push(Instr::VRedSum { src, macs });
        self.push(Instr::SAcc { offset });
    }
}

/// `(output, (r, sc))` pairs an input element contributes to, in ascending
/// output order. Ascending output order walks the filter taps backwards.
pub fn assoc_idx(h: usize, w: usize, layer: &LayerConfig) -> Vec<((usize, usize), (usize, usize))> {
    let axis = |pos: usize, taps: usize, outs: usize| -> Vec<(usize, usize)> {
        (0..taps)
            .rev()
            .filter_map(|t| {
                let shifted = (pos + layer.pad).checked_sub(t)?;
                (shifted % layer.s == 0 && shifted / layer.s < outs).then_some((shifted / layer.s, t))
            })
            .collect()
    };
    let rows = axis(h, layer.fh, layer.oh());
    let cols = axis(w, layer.fw, layer.ow());
    let mut pairs = Vec::with_capacity(rows.len() * cols.len());
    for &(oy, r) in &rows {
        for &(ox, c) in &cols {
            pairs.push(((oy, ox), (r, c)));
        }
    }
    pairs
}

/// Basic dataflow: anchoring stationarity only, three vector variables.
pub fn gen_basic(anchor: Anchor, layer: &LayerConfig, vmc: &VectorMachineConfig, mode: Mode) -> Result<ScheduleIr> {
    generate(layer, vmc, &DataflowSpec::basic(anchor), mode)
}

pub fn gen_extended_os(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    num_in_stash: usize,
    num_wgt_stash: usize,
    mode: Mode,
) -> Result<ScheduleIr> {
    let spec = DataflowSpec::basic(Anchor::Os)
        .with_aux(crate::model::AuxKind::Input, num_in_stash)
        .with_aux(crate::model::AuxKind::Weight, num_wgt_stash);
    generate(layer, vmc, &spec, mode)
}

pub fn gen_extended_is(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    num_wgt_stash: usize,
    num_out_stash: usize,
    mode: Mode,
) -> Result<ScheduleIr> {
    let spec = DataflowSpec::basic(Anchor::Is)
        .with_aux(crate::model::AuxKind::Weight, num_wgt_stash)
        .with_aux(crate::model::AuxKind::Output, num_out_stash);
    generate(layer, vmc, &spec, mode)
}

pub fn gen_extended_ws(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    num_in_stash: usize,
    num_out_stash: usize,
    mode: Mode,
) -> Result<ScheduleIr> {
    let spec = DataflowSpec::basic(Anchor::Ws)
        .with_aux(crate::model::AuxKind::Input, num_in_stash)
        .with_aux(crate::model::AuxKind::Output, num_out_stash);
    generate(layer, vmc, &spec, mode)
}

/// Generates the tile schedule for any valid spec.
pub fn generate(layer: &LayerConfig, vmc: &VectorMachineConfig, spec: &DataflowSpec, mode: Mode) -> Result<ScheduleIr> {
    layer.validate()?;
    vmc.validate()?;
    spec.validate(vmc)?;
    if mode == Mode::Binary && vmc.elem_bits != 1 {
        return Err(crate::error::Error::InvalidMachine(format!(
            "binary mode needs 1-bit elements, machine has {}",
            vmc.elem_bits
        )));
    }
    match spec.anchor {
        Anchor::Os => os::generate(layer, vmc, spec, mode, StashShift::Rotate),
        Anchor::Is => is::generate(layer, vmc, spec, mode),
        Anchor::Ws => ws::generate(layer, vmc, spec, mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(ih: usize, fh: usize, s: usize, pad: usize) -> LayerConfig {
        LayerConfig::new(ih, ih, 4, 2, fh, fh, s, pad).unwrap()
    }

    fn brute_pairs(h: usize, w: usize, l: &LayerConfig) -> BTreeSet<((usize, usize), (usize, usize))> {
        let mut set = BTreeSet::new();
        for oy in 0..l.oh() {
            for ox in 0..l.ow() {
                for r in 0..l.fh {
                    for c in 0..l.fw {
                        if l.input_at(oy, ox, r, c) == Some((h, w)) {
                            set.insert(((oy, ox), (r, c)));
                        }
                    }
                }
            }
        }
        set
    }

    #[test]
    fn assoc_idx_matches_brute_force() {
        for (ih, fh, s, pad) in [(6, 2, 1, 0), (7, 3, 2, 0), (8, 3, 2, 1), (5, 3, 1, 1), (9, 2, 3, 0)] {
            let l = layer(ih, fh, s, pad);
            for h in 0..ih {
                for w in 0..ih {
                    let pairs = assoc_idx(h, w, &l);
                    let got: BTreeSet<_> = pairs.iter().copied().collect();
                    assert_eq!(got, brute_pairs(h, w, &l), "{l} at ({h},{w})");
                    assert!(pairs.windows(2).all(|p| p[0].0 < p[1].0));
                }
            }
        }
    }

    #[test]
    fn assoc_idx_examples() {
        let l = layer(6, 2, 1, 0);
        assert_eq!(assoc_idx(2, 2, &l).len(), 4);
        assert_eq!(assoc_idx(0, 0, &l).len(), 1);
        let l = layer(7, 3, 2, 0);
        let counts: BTreeSet<usize> = (0..7)
            .flat_map(|h| (0..7).map(move |w| (h, w)))
            .map(|(h, w)| assoc_idx(h, w, &l).len())
            .collect();
        assert_eq!(counts, BTreeSet::from([1, 2, 4]));
    }
}
