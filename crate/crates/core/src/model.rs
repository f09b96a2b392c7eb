//! Layer geometry, machine description, dataflow selection and the blocked
//! tensor layouts every other module works in.
//!
//! Blocked layouts group `x` channels per spatial position. Inputs and
//! outputs use NCHW[xc] (`((c/x · H + h) · W + w) · x + c%x`) and weights use
//! CKRS[xc] (`(((c/x · K + k) · R + r) · S + s) · x + c%x`). A channel count
//! that is not a multiple of `x` leaves the tail lanes of the last block
//! zero-filled.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// 8-bit integer lanes, exact integer accumulation.
    #[default]
    Int8,
    /// 1-bit lanes encoding ±1 (bit 0 is +1); dot products via XOR and popcount.
    Binary,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Int8 => "int8",
            Mode::Binary => "binary",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "int8" => Ok(Mode::Int8),
            "binary" => Ok(Mode::Binary),
            other => Err(Error::InvalidSpec(format!("unknown mode `{other}`"))),
        }
    }
}

/// The data type whose traversal order drives the loop nest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Anchor {
    #[serde(rename = "is")]
    Is,
    #[serde(rename = "ws")]
    Ws,
    #[serde(rename = "os")]
    Os,
}

impl Anchor {
    pub const ALL: [Anchor; 3] = [Anchor::Is, Anchor::Ws, Anchor::Os];

    pub fn name(self) -> &'static str {
        match self {
            Anchor::Is => "is",
            Anchor::Ws => "ws",
            Anchor::Os => "os",
        }
    }

    /// The data type anchored by this dataflow.
    pub fn kind(self) -> AuxKind {
        match self {
            Anchor::Is => AuxKind::Input,
            Anchor::Ws => AuxKind::Weight,
            Anchor::Os => AuxKind::Output,
        }
    }

    /// The two data types that may be stashed as auxiliaries.
    pub fn aux_kinds(self) -> [AuxKind; 2] {
        match self {
            Anchor::Is => [AuxKind::Weight, AuxKind::Output],
            Anchor::Ws => [AuxKind::Input, AuxKind::Output],
            Anchor::Os => [AuxKind::Input, AuxKind::Weight],
        }
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Anchor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "is" => Ok(Anchor::Is),
            "ws" => Ok(Anchor::Ws),
            "os" => Ok(Anchor::Os),
            other => Err(Error::InvalidSpec(format!("unknown anchor `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxKind {
    Input,
    Weight,
    Output,
}

impl AuxKind {
    pub fn name(self) -> &'static str {
        match self {
            AuxKind::Input => "input",
            AuxKind::Weight => "weight",
            AuxKind::Output => "output",
        }
    }
}

/// Geometry of one convolution layer (batch size 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerConfig {
    pub ih: usize,
    pub iw: usize,
    pub ic: usize,
    pub oc: usize,
    pub fh: usize,
    pub fw: usize,
    pub s: usize,
    #[serde(default)]
    pub pad: usize,
}

impl LayerConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(ih: usize, iw: usize, ic: usize, oc: usize, fh: usize, fw: usize, s: usize, pad: usize) -> Result<Self> {
        let layer = LayerConfig {
            ih,
            iw,
            ic,
            oc,
            fh,
            fw,
            s,
            pad,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("ih", self.ih),
            ("iw", self.iw),
            ("ic", self.ic),
            ("oc", self.oc),
            ("fh", self.fh),
            ("fw", self.fw),
            ("s", self.s),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidLayer(format!("{name} must be at least 1")));
        }
        if self.fh > self.ih + 2 * self.pad || self.fw > self.iw + 2 * self.pad {
            return Err(Error::InvalidLayer(format!(
                "{}x{} filter does not fit a padded {}x{} input",
                self.fh,
                self.fw,
                self.ih + 2 * self.pad,
                self.iw + 2 * self.pad
            )));
        }
        Ok(())
    }

    /// Output height. Only meaningful on a validated layer.
    pub fn oh(&self) -> usize {
        (self.ih + 2 * self.pad - self.fh) / self.s + 1
    }

    pub fn ow(&self) -> usize {
        (self.iw + 2 * self.pad - self.fw) / self.s + 1
    }

    /// Output positions per channel, `oh · ow`.
    pub fn e(&self) -> usize {
        self.oh() * self.ow()
    }

    /// Filter positions per channel, `fh · fw`.
    pub fn window(&self) -> usize {
        self.fh * self.fw
    }

    pub fn input_positions(&self) -> usize {
        self.ih * self.iw
    }

    pub fn channel_blocks(&self, x: usize) -> usize {
        self.ic.div_ceil(x)
    }

    /// Unpadded input coordinate read by output `(oy, ox)` at filter tap
    /// `(r, c)`, or `None` when the tap lands in the zero padding.
    pub fn input_at(&self, oy: usize, ox: usize, r: usize, c: usize) -> Option<(usize, usize)> {
        let h = (oy * self.s + r).checked_sub(self.pad)?;
        let w = (ox * self.s + c).checked_sub(self.pad)?;
        (h < self.ih && w < self.iw).then_some((h, w))
    }
}

impl fmt::Display for LayerConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ih={} iw={} ic={} oc={} fh={} fw={} s={} pad={}",
            self.ih, self.iw, self.ic, self.oc, self.fh, self.fw, self.s, self.pad
        )
    }
}

/// `(oh, ow)` for a layer.
pub fn output_dims(layer: &LayerConfig) -> Result<(usize, usize)> {
    layer.validate()?;
    let (h, w) = (layer.ih + 2 * layer.pad, layer.iw + 2 * layer.pad);
    if h < layer.fh || w < layer.fw {
        return Err(Error::InvalidLayer("empty output".into()));
    }
    Ok(((h - layer.fh) / layer.s + 1, (w - layer.fw) / layer.s + 1))
}

/// Register file description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VectorMachineConfig {
    pub vec_reg_bits: usize,
    pub vec_var_bits: usize,
    pub num_vec_regs: usize,
    pub elem_bits: usize,
}

impl VectorMachineConfig {
    pub fn new(vec_reg_bits: usize, vec_var_bits: usize, num_vec_regs: usize, elem_bits: usize) -> Result<Self> {
        let vmc = VectorMachineConfig {
            vec_reg_bits,
            vec_var_bits,
            num_vec_regs,
            elem_bits,
        };
        vmc.validate()?;
        Ok(vmc)
    }

    /// 128-bit registers, 32 of them, `x · elem_bits`-wide variables.
    pub fn neon(elem_bits: usize, x: usize) -> Result<Self> {
        Self::new(128, x * elem_bits, 32, elem_bits)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vec_reg_bits == 0 || self.elem_bits == 0 || self.vec_var_bits == 0 {
            return Err(Error::InvalidMachine("bit widths must be positive".into()));
        }
        if !self.vec_var_bits.is_multiple_of(self.vec_reg_bits) {
            return Err(Error::InvalidMachine(format!(
                "vec_var_bits {} is not a multiple of vec_reg_bits {}",
                self.vec_var_bits, self.vec_reg_bits
            )));
        }
        if !self.vec_var_bits.is_multiple_of(self.elem_bits) {
            return Err(Error::InvalidMachine(format!(
                "vec_var_bits {} is not a multiple of elem_bits {}",
                self.vec_var_bits, self.elem_bits
            )));
        }
        if self.num_var_available() < 3 {
            return Err(Error::InvalidMachine(format!(
                "only {} vector variables fit; at least 3 are required",
                self.num_var_available()
            )));
        }
        Ok(())
    }

    /// Lanes per vector variable.
    pub fn x(&self) -> usize {
        self.vec_var_bits / self.elem_bits
    }

    pub fn regs_per_var(&self) -> usize {
        self.vec_var_bits / self.vec_reg_bits
    }

    pub fn num_var_available(&self) -> usize {
        self.num_vec_regs / self.regs_per_var()
    }

    /// Variables left after the three anchoring ones.
    pub fn aux_budget(&self) -> usize {
        self.num_var_available().saturating_sub(3)
    }

    /// Same register file with `x`-lane variables.
    pub fn with_lanes(&self, x: usize) -> Result<Self> {
        Self::new(self.vec_reg_bits, x * self.elem_bits, self.num_vec_regs, self.elem_bits)
    }
}

/// Anchoring stationarity plus the number of variables stashed per auxiliary type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DataflowSpec {
    pub anchor: Anchor,
    #[serde(default)]
    pub aux_input_vars: usize,
    #[serde(default)]
    pub aux_weight_vars: usize,
    #[serde(default)]
    pub aux_output_vars: usize,
    /// Auxiliary types in the order they are filled when splitting a budget.
    #[serde(default)]
    pub priority: Vec<AuxKind>,
}

impl DataflowSpec {
    /// Anchoring stationarity only.
    pub fn basic(anchor: Anchor) -> Self {
        DataflowSpec {
            anchor,
            aux_input_vars: 0,
            aux_weight_vars: 0,
            aux_output_vars: 0,
            priority: anchor.aux_kinds().to_vec(),
        }
    }

    pub fn with_aux(mut self, kind: AuxKind, vars: usize) -> Self {
        match kind {
            AuxKind::Input => self.aux_input_vars = vars,
            AuxKind::Weight => self.aux_weight_vars = vars,
            AuxKind::Output => self.aux_output_vars = vars,
        }
        self
    }

    pub fn with_priority(mut self, priority: &[AuxKind]) -> Self {
        self.priority = priority.to_vec();
        self
    }

    pub fn aux(&self, kind: AuxKind) -> usize {
        match kind {
            AuxKind::Input => self.aux_input_vars,
            AuxKind::Weight => self.aux_weight_vars,
            AuxKind::Output => self.aux_output_vars,
        }
    }

    pub fn total_aux(&self) -> usize {
        self.aux_input_vars + self.aux_weight_vars + self.aux_output_vars
    }

    pub fn vars_needed(&self) -> usize {
        3 + self.total_aux()
    }

    /// Checks anchor/auxiliary compatibility and the register budget.
    pub fn validate(&self, vmc: &VectorMachineConfig) -> Result<()> {
        let own = self.anchor.kind();
        if self.aux(own) != 0 {
            return Err(Error::IncompatibleAux {
                anchor: self.anchor,
                aux: own,
            });
        }
        if let Some(k) = self.priority.iter().find(|k| **k == own) {
            return Err(Error::IncompatibleAux {
                anchor: self.anchor,
                aux: *k,
            });
        }
        let available = vmc.num_var_available();
        if self.vars_needed() > available {
            return Err(Error::RegisterBudget {
                spec: self.to_string(),
                needed: self.vars_needed(),
                available,
            });
        }
        Ok(())
    }

    /// Fills `budget` variables following `priority`, each type capped by `caps`.
    pub fn fill(anchor: Anchor, budget: usize, priority: &[AuxKind], caps: impl Fn(AuxKind) -> usize) -> Self {
        let mut spec = DataflowSpec::basic(anchor).with_priority(priority);
        let mut left = budget;
        for &kind in priority {
            let n = left.min(caps(kind));
            spec = spec.with_aux(kind, n);
            left -= n;
        }
        spec
    }
}

impl fmt::Display for DataflowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.anchor)?;
        for kind in self.anchor.aux_kinds() {
            write!(f, " {}={}", kind.name(), self.aux(kind))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorKind {
    Input,
    Weight,
    Output,
}

/// Memory layout of a tensor. Logical dims are always stored unblocked:
/// `[c, h, w]` for NCHW-family, `[c, k, r, s]` for CKRS-family and
/// `[k, h, w]` for scalar outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Nchw,
    NchwXc { x: usize },
    Ckrs,
    CkrsXc { x: usize },
    KhwScalar,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Layout::Nchw => f.write_str("NCHW"),
            Layout::NchwXc { x } => write!(f, "NCHW[{x}c]"),
            Layout::Ckrs => f.write_str("CKRS"),
            Layout::CkrsXc { x } => write!(f, "CKRS[{x}c]"),
            Layout::KhwScalar => f.write_str("KHW"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedTensor {
    pub kind: TensorKind,
    pub layout: Layout,
    pub dims: Vec<usize>,
    pub data: Vec<i64>,
}

impl PackedTensor {
    pub fn new(kind: TensorKind, layout: Layout, dims: Vec<usize>, data: Vec<i64>) -> Result<Self> {
        let expected = Self::storage_len(layout, &dims)?;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{layout} tensor with dims {dims:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(PackedTensor {
            kind,
            layout,
            dims,
            data,
        })
    }

    pub fn zeros(kind: TensorKind, layout: Layout, dims: Vec<usize>) -> Result<Self> {
        let len = Self::storage_len(layout, &dims)?;
        Self::new(kind, layout, dims, vec![0; len])
    }

    /// Stored element count, including zero tail lanes for blocked layouts.
    pub fn storage_len(layout: Layout, dims: &[usize]) -> Result<usize> {
        let rank = match layout {
            Layout::Nchw | Layout::NchwXc { .. } | Layout::KhwScalar => 3,
            Layout::Ckrs | Layout::CkrsXc { .. } => 4,
        };
        if dims.len() != rank {
            return Err(Error::ShapeMismatch(format!(
                "{layout} expects {rank} dims, got {}",
                dims.len()
            )));
        }
        let rest: usize = dims[1..].iter().product();
        Ok(match layout {
            Layout::NchwXc { x } | Layout::CkrsXc { x } => {
                if x == 0 {
                    return Err(Error::ShapeMismatch("block width 0".into()));
                }
                dims[0].div_ceil(x) * x * rest
            }
            _ => dims[0] * rest,
        })
    }
}

fn check(name: &str, v: usize, bound: usize) -> Result<()> {
    if v >= bound {
        return Err(Error::OutOfRange(format!("{name}={v} not below {bound}")));
    }
    Ok(())
}

/// Offset of `(c, h, w)` in an NCHW[xc] tensor of the given extent.
pub fn nchw_xc_offset(
    (channels, height, width): (usize, usize, usize),
    x: usize,
    (c, h, w): (usize, usize, usize),
) -> Result<usize> {
    check("c", c, channels)?;
    check("h", h, height)?;
    check("w", w, width)?;
    Ok((((c / x) * height + h) * width + w) * x + c % x)
}

/// Offset of `(c, k, r, s)` in a CKRS[xc] tensor of the given extent.
pub fn ckrs_xc_offset(
    (channels, kernels, rows, cols): (usize, usize, usize, usize),
    x: usize,
    (c, k, r, s): (usize, usize, usize, usize),
) -> Result<usize> {
    check("c", c, channels)?;
    check("k", k, kernels)?;
    check("r", r, rows)?;
    check("s", s, cols)?;
    Ok(((((c / x) * kernels + k) * rows + r) * cols + s) * x + c % x)
}

/// Input-tensor offset of `(c, h, w)` under the layer's NCHW[xc] layout.
pub fn nchw_xc_index(layer: &LayerConfig, vmc: &VectorMachineConfig, c: usize, h: usize, w: usize) -> Result<usize> {
    nchw_xc_offset((layer.ic, layer.ih, layer.iw), vmc.x(), (c, h, w))
}

/// Weight-tensor offset of input channel `c`, kernel `k`, tap `(r, sc)` under CKRS[xc].
pub fn ckrs_xc_index(
    layer: &LayerConfig,
    vmc: &VectorMachineConfig,
    c: usize,
    k: usize,
    r: usize,
    sc: usize,
) -> Result<usize> {
    ckrs_xc_offset((layer.ic, layer.oc, layer.fh, layer.fw), vmc.x(), (c, k, r, sc))
}

/// NCHW → NCHW[xc], zero-filling tail lanes.
pub fn pack(t: &PackedTensor, x: usize) -> Result<PackedTensor> {
    match t.layout {
        Layout::Nchw => {
            let (c, h, w) = (t.dims[0], t.dims[1], t.dims[2]);
            let mut out = PackedTensor::zeros(t.kind, Layout::NchwXc { x }, t.dims.clone())?;
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        let dst = nchw_xc_offset((c, h, w), x, (ci, hi, wi))?;
                        out.data[dst] = t.data[(ci * h + hi) * w + wi];
                    }
                }
            }
            Ok(out)
        }
        Layout::Ckrs => {
            let d = (t.dims[0], t.dims[1], t.dims[2], t.dims[3]);
            let mut out = PackedTensor::zeros(t.kind, Layout::CkrsXc { x }, t.dims.clone())?;
            for c in 0..d.0 {
                for k in 0..d.1 {
                    for r in 0..d.2 {
                        for s in 0..d.3 {
                            let dst = ckrs_xc_offset(d, x, (c, k, r, s))?;
                            out.data[dst] = t.data[((c * d.1 + k) * d.2 + r) * d.3 + s];
                        }
                    }
                }
            }
            Ok(out)
        }
        other => Err(Error::ShapeMismatch(format!("cannot pack a {other} tensor"))),
    }
}

/// NCHW[xc] → NCHW (or CKRS[xc] → CKRS), dropping tail lanes.
pub fn unpack(t: &PackedTensor) -> Result<PackedTensor> {
    match t.layout {
        Layout::NchwXc { x } => {
            let (c, h, w) = (t.dims[0], t.dims[1], t.dims[2]);
            let mut data = Vec::with_capacity(c * h * w);
            for ci in 0..c {
                for hi in 0..h {
                    for wi in 0..w {
                        data.push(t.data[nchw_xc_offset((c, h, w), x, (ci, hi, wi))?]);
                    }
                }
            }
            PackedTensor::new(t.kind, Layout::Nchw, t.dims.clone(), data)
        }
        Layout::CkrsXc { x } => {
            let d = (t.dims[0], t.dims[1], t.dims[2], t.dims[3]);
            let mut data = Vec::with_capacity(d.0 * d.1 * d.2 * d.3);
            for c in 0..d.0 {
                for k in 0..d.1 {
                    for r in 0..d.2 {
                        for s in 0..d.3 {
                            data.push(t.data[ckrs_xc_offset(d, x, (c, k, r, s))?]);
                        }
                    }
                }
            }
            PackedTensor::new(t.kind, Layout::Ckrs, t.dims.clone(), data)
        }
        other => Err(Error::ShapeMismatch(format!("cannot unpack a {other} tensor"))),
    }
}

/// Element moves performed when converting an NCHW-family tensor of `dims`
/// from block width `from` to block width `to` (1 means plain NCHW). The
/// conversion unpacks and then packs, so it is directional: packing also
/// writes the zero tail.
pub fn transform_moves(dims: (usize, usize, usize), from: usize, to: usize) -> u64 {
    if from == to {
        return 0;
    }
    let (c, h, w) = dims;
    let unpack = if from == 1 { 0 } else { c * h * w };
    let pack = if to == 1 { 0 } else { c.div_ceil(to) * to * h * w };
    (unpack + pack) as u64
}

/// Maps ±1 values to bits, bit 0 encoding +1.
pub fn binarize(values: &[i64]) -> Result<Vec<i64>> {
    values
        .iter()
        .map(|&v| match v {
            1 => Ok(0),
            -1 => Ok(1),
            other => Err(Error::ShapeMismatch(format!("binary tensors hold ±1, found {other}"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layer(ih: usize, fh: usize, s: usize, pad: usize) -> LayerConfig {
        LayerConfig::new(ih, ih, 1, 1, fh, fh, s, pad).unwrap()
    }

    #[test]
    fn output_dims_examples() {
        assert_eq!(output_dims(&layer(4, 3, 1, 0)).unwrap().0, 2);
        assert_eq!(output_dims(&layer(112, 3, 2, 1)).unwrap().0, 56);
        // Brute-force count of filter placements along one axis.
        let placements = (0..56).filter(|p| p + 5 <= 56).count();
        assert_eq!(placements, 52);
        assert_eq!(output_dims(&layer(56, 5, 1, 0)).unwrap().0, placements);
    }

    #[test]
    fn rejects_bad_layers() {
        assert!(LayerConfig::new(2, 2, 1, 1, 3, 3, 1, 0).is_err());
        assert!(LayerConfig::new(2, 2, 1, 1, 3, 3, 1, 1).is_ok());
        assert!(LayerConfig::new(4, 4, 0, 1, 3, 3, 1, 0).is_err());
        assert!(LayerConfig::new(4, 4, 1, 1, 3, 3, 0, 0).is_err());
    }

    #[test]
    fn machine_invariants() {
        let vmc = VectorMachineConfig::new(128, 256, 32, 8).unwrap();
        assert_eq!(vmc.regs_per_var(), 2);
        assert_eq!(vmc.num_var_available(), 16);
        assert_eq!(vmc.x(), 32);
        assert!(VectorMachineConfig::new(128, 192, 32, 8).is_err());
        assert!(VectorMachineConfig::new(128, 512, 8, 8).is_err());
        assert!(VectorMachineConfig::new(128, 512, 12, 8).is_ok());
    }

    #[test]
    fn spec_compatibility_and_budget() {
        let vmc = VectorMachineConfig::new(128, 512, 32, 8).unwrap();
        let ok = DataflowSpec::basic(Anchor::Os).with_aux(AuxKind::Weight, 5);
        ok.validate(&vmc).unwrap();
        let over = DataflowSpec::basic(Anchor::Os).with_aux(AuxKind::Weight, 6);
        let err = over.validate(&vmc).unwrap_err();
        assert!(err.to_string().contains("register budget"));
        for anchor in Anchor::ALL {
            let bad = DataflowSpec::basic(anchor).with_aux(anchor.kind(), 1);
            assert!(matches!(bad.validate(&vmc), Err(Error::IncompatibleAux { .. })));
        }
    }

    #[test]
    fn index_examples() {
        let l = LayerConfig::new(8, 8, 8, 1, 1, 1, 1, 0).unwrap();
        let vmc = VectorMachineConfig::new(32, 32, 32, 8).unwrap();
        assert_eq!(vmc.x(), 4);
        assert_eq!(nchw_xc_index(&l, &vmc, 0, 0, 0).unwrap(), 0);
        assert_eq!(nchw_xc_index(&l, &vmc, 5, 0, 0).unwrap(), 257);
        let small = LayerConfig::new(2, 2, 4, 1, 1, 1, 1, 0).unwrap();
        assert_eq!(nchw_xc_index(&small, &vmc, 3, 1, 1).unwrap(), 15);
        assert!(nchw_xc_index(&small, &vmc, 4, 0, 0).is_err());
        assert!(nchw_xc_index(&small, &vmc, 0, 2, 0).is_err());

        let w = LayerConfig::new(3, 3, 8, 2, 3, 3, 1, 0).unwrap();
        assert_eq!(ckrs_xc_index(&w, &vmc, 0, 0, 0, 0).unwrap(), 0);
        assert_eq!(ckrs_xc_index(&w, &vmc, 0, 1, 0, 0).unwrap(), 36);
        assert_eq!(ckrs_xc_index(&w, &vmc, 4, 0, 1, 2).unwrap(), 92);
        assert!(ckrs_xc_index(&w, &vmc, 0, 2, 0, 0).is_err());
    }

    #[test]
    fn pack_identity_for_single_lane() {
        let t = PackedTensor::new(TensorKind::Input, Layout::Nchw, vec![1, 2, 3], (0..6).collect()).unwrap();
        let p = pack(&t, 1).unwrap();
        assert_eq!(p.data, t.data);
    }

    #[test]
    fn pack_zero_fills_tail_block() {
        let t = PackedTensor::new(TensorKind::Input, Layout::Nchw, vec![6, 1, 1], vec![1, 2, 3, 4, 5, 6]).unwrap();
        let p = pack(&t, 4).unwrap();
        assert_eq!(p.data, vec![1, 2, 3, 4, 5, 6, 0, 0]);
        assert_eq!(unpack(&p).unwrap(), t);
    }

    #[test]
    fn pack_rejects_wrong_layout_and_dims() {
        assert!(PackedTensor::new(TensorKind::Input, Layout::Nchw, vec![2, 2], vec![0; 4]).is_err());
        assert!(PackedTensor::new(TensorKind::Input, Layout::Nchw, vec![2, 2, 2], vec![0; 7]).is_err());
        let t = PackedTensor::zeros(TensorKind::Output, Layout::KhwScalar, vec![1, 2, 2]).unwrap();
        assert!(pack(&t, 4).is_err());
        assert!(unpack(&t).is_err());
    }

    #[test]
    fn transform_moves_rules() {
        assert_eq!(transform_moves((6, 2, 2), 4, 4), 0);
        assert_eq!(transform_moves((6, 2, 2), 1, 1), 0);
        assert_eq!(transform_moves((6, 2, 2), 1, 4), 32);
        assert_eq!(transform_moves((6, 2, 2), 4, 1), 24);
        assert_eq!(transform_moves((6, 2, 2), 4, 2), 24 + 24);
    }
}
