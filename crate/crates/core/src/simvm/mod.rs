//! Abstract vector machine: runs a tile schedule over every (channel block,
//! kernel) pair of a layer, counting what it retires.
//!
//! Registers hold either integer lanes or, in binary mode, bit-packed words.
//! Accumulation is exact (`i64`), so results compare bit-for-bit against the
//! scalar oracle.

mod oracle;

pub use oracle::{first_mismatch, scalar_oracle};

use std::fmt::Write as _;

use crate::error::{Error, ExecError, ExecErrorKind, Result};
use crate::model::{Layout, Mode, PackedTensor, TensorKind};
use crate::schedule::{Instr, ScheduleIr, Section, Source, Var};

/// Instruction tallies for one tile or a whole layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Counts {
    pub vector_loads: u64,
    /// Loads issued while filling stashes, included in `vector_loads`.
    pub prologue_loads: u64,
    /// Loads skipped because they fall in the zero padding (not included above).
    pub elided_loads: u64,
    pub scalar_reads: u64,
    pub scalar_writes: u64,
    /// Stash write-backs after the body, included in `sacc` and the scalar counts.
    pub epilogue_sacc: u64,
    pub vmul: u64,
    pub vadd: u64,
    pub vxor: u64,
    pub vpopcnt: u64,
    pub vredsum: u64,
    pub vmov: u64,
    pub vzero: u64,
    pub sacc: u64,
}

impl Counts {
    pub const CATEGORIES: [&'static str; 14] = [
        "vector_loads",
        "prologue_loads",
        "elided_loads",
        "scalar_reads",
        "scalar_writes",
        "epilogue_sacc",
        "vmul",
        "vadd",
        "vxor",
        "vpopcnt",
        "vredsum",
        "vmov",
        "vzero",
        "sacc",
    ];

    pub fn values(&self) -> [u64; 14] {
        [
            self.vector_loads,
            self.prologue_loads,
            self.elided_loads,
            self.scalar_reads,
            self.scalar_writes,
            self.epilogue_sacc,
            self.vmul,
            self.vadd,
            self.vxor,
            self.vpopcnt,
            self.vredsum,
            self.vmov,
            self.vzero,
            self.sacc,
        ]
    }

    pub fn get(&self, category: &str) -> Option<u64> {
        Self::CATEGORIES
            .iter()
            .position(|c| *c == category)
            .map(|i| self.values()[i])
    }

    /// Loads outside the stash-filling prologue.
    pub fn body_loads(&self) -> u64 {
        self.vector_loads - self.prologue_loads
    }

    /// Scalar output reads outside the stash-draining epilogue.
    pub fn body_scalar_reads(&self) -> u64 {
        self.scalar_reads - self.epilogue_sacc
    }

    /// Scalar output writes outside the stash-draining epilogue.
    pub fn body_scalar_writes(&self) -> u64 {
        self.scalar_writes - self.epilogue_sacc
    }

    fn record(&mut self, instr: &Instr, section: Section) {
        match instr {
            Instr::VLoad { .. } => {
                self.vector_loads += 1;
                self.prologue_loads += u64::from(section == Section::Prologue);
            }
            Instr::VZero { .. } => self.vzero += 1,
            Instr::VMul { .. } => self.vmul += 1,
            Instr::VAdd { .. } => self.vadd += 1,
            Instr::VXor { .. } => self.vxor += 1,
            Instr::VPopcnt { .. } => self.vpopcnt += 1,
            Instr::VMov { .. } => self.vmov += 1,
            Instr::VRedSum { .. } => self.vredsum += 1,
            Instr::SAcc { .. } => {
                self.sacc += 1;
                self.epilogue_sacc += u64::from(section == Section::Epilogue);
                self.scalar_reads += 1;
                self.scalar_writes += 1;
            }
        }
    }

    fn scaled(&self, n: u64) -> Counts {
        let mut out = *self;
        for (dst, v) in out.fields_mut().into_iter().zip(self.values()) {
            *dst = v * n;
        }
        out
    }

    fn add(&mut self, other: &Counts) {
        for (dst, v) in self.fields_mut().into_iter().zip(other.values()) {
            *dst += v;
        }
    }

    fn fields_mut(&mut self) -> [&mut u64; 14] {
        [
            &mut self.vector_loads,
            &mut self.prologue_loads,
            &mut self.elided_loads,
            &mut self.scalar_reads,
            &mut self.scalar_writes,
            &mut self.epilogue_sacc,
            &mut self.vmul,
            &mut self.vadd,
            &mut self.vxor,
            &mut self.vpopcnt,
            &mut self.vredsum,
            &mut self.vmov,
            &mut self.vzero,
            &mut self.sacc,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostReport {
    pub tile: Counts,
    pub layer: Counts,
    pub tiles: u64,
    pub peak_live_vars: usize,
}

impl CostReport {
    /// `category,count` rows: whole-layer counts, then `tile.`-prefixed ones.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,count\n");
        for (name, v) in Counts::CATEGORIES.iter().zip(self.layer.values()) {
            let _ = writeln!(out, "{name},{v}");
        }
        let _ = writeln!(out, "peak_live_vars,{}", self.peak_live_vars);
        let _ = writeln!(out, "tiles,{}", self.tiles);
        for (name, v) in Counts::CATEGORIES.iter().zip(self.tile.values()) {
            let _ = writeln!(out, "tile.{name},{v}");
        }
        out
    }
}

/// Signed per-category differences `a − b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportDelta {
    pub tile: Vec<(&'static str, i64)>,
    pub layer: Vec<(&'static str, i64)>,
    pub peak_live_vars: i64,
}

impl ReportDelta {
    pub fn tile(&self, category: &str) -> i64 {
        self.tile.iter().find(|(c, _)| *c == category).map_or(0, |(_, v)| *v)
    }

    pub fn layer(&self, category: &str) -> i64 {
        self.layer.iter().find(|(c, _)| *c == category).map_or(0, |(_, v)| *v)
    }

    pub fn is_zero(&self) -> bool {
        self.peak_live_vars == 0 && self.tile.iter().chain(&self.layer).all(|(_, v)| *v == 0)
    }
}

pub fn diff_reports(a: &CostReport, b: &CostReport) -> ReportDelta {
    let diff = |x: &Counts, y: &Counts| {
        Counts::CATEGORIES
            .iter()
            .zip(x.values().into_iter().zip(y.values()))
            .map(|(name, (p, q))| (*name, p as i64 - q as i64))
            .collect()
    };
    ReportDelta {
        tile: diff(&a.tile, &b.tile),
        layer: diff(&a.layer, &b.layer),
        peak_live_vars: a.peak_live_vars as i64 - b.peak_live_vars as i64,
    }
}

/// Maximum number of simultaneously live variables in one tile. A variable is
/// live from a write until its last read before the next write.
pub fn peak_live(ir: &ScheduleIr) -> usize {
    let width = ir.vars_used().last().map_or(0, |&v| v as usize + 1);
    let mut live = vec![false; width];
    let mut count = 0usize;
    let mut peak = 0usize;
    for instr in ir.instrs.iter().rev() {
        let def = instr.def();
        // Across this instruction its destination and sources are all held.
        let mut here = count;
        if let Some(d) = def {
            if !live[d as usize] {
                here += 1;
            }
        }
        for u in instr.uses() {
            if !live[u as usize] && Some(u) != def {
                here += 1;
            }
        }
        peak = peak.max(here);
        if let Some(d) = def {
            if live[d as usize] {
                live[d as usize] = false;
                count -= 1;
            }
        }
        for u in instr.uses() {
            if !live[u as usize] {
                live[u as usize] = true;
                count += 1;
            }
        }
    }
    peak
}

/// Instruction counts without executing: every tile retires the same stream.
pub fn count(ir: &ScheduleIr) -> Result<CostReport> {
    let available = ir.meta.vmc.num_var_available();
    if let Some((i, v)) = ir.instrs.iter().enumerate().find_map(|(i, ins)| {
        ins.def()
            .into_iter()
            .chain(ins.uses())
            .find(|&v| v as usize >= available)
            .map(|v| (i, v))
    }) {
        return Err(exec_err(ir, i, ExecErrorKind::VarOutOfRange { var: v, available }).into());
    }
    let peak = peak_live(ir);
    if peak > available {
        return Err(Error::Exec(ExecError {
            position: 0,
            instr: "tile".into(),
            kind: ExecErrorKind::BudgetExceeded { live: peak, available },
        }));
    }
    let mut tile = Counts {
        elided_loads: ir.meta.elided_loads,
        ..Counts::default()
    };
    for (i, instr) in ir.instrs.iter().enumerate() {
        tile.record(instr, ir.section(i));
    }
    let tiles = ir.meta.tiles() as u64;
    Ok(CostReport {
        tile,
        layer: tile.scaled(tiles),
        tiles,
        peak_live_vars: peak,
    })
}

fn exec_err(ir: &ScheduleIr, position: usize, kind: ExecErrorKind) -> ExecError {
    ExecError {
        position,
        instr: ir.instrs[position].to_string(),
        kind,
    }
}

#[derive(Debug, Clone)]
enum Value {
    Lanes(Vec<i64>),
    Bits(Vec<u64>),
}

/// Runs `ir` on blocked input (`NCHW[xc]`) and weights (`CKRS[xc]`),
/// returning the `KHW` scalar output and the retired-instruction report.
pub fn execute(
    ir: &ScheduleIr,
    input: &PackedTensor,
    weights: &PackedTensor,
    mode: Mode,
) -> Result<(PackedTensor, CostReport)> {
    let meta = &ir.meta;
    let (layer, vmc) = (&meta.layer, &meta.vmc);
    let x = vmc.x();
    if mode != meta.mode {
        return Err(Error::Unsupported(format!(
            "schedule generated for {} mode, run in {mode}",
            meta.mode
        )));
    }
    if mode == Mode::Binary && vmc.elem_bits != 1 {
        return Err(Error::InvalidMachine("binary mode needs 1-bit elements".into()));
    }
    let expect = |t: &PackedTensor, layout: Layout, dims: Vec<usize>, what: &str| {
        if t.layout != layout || t.dims != dims {
            return Err(Error::ShapeMismatch(format!(
                "{what} is {} {:?}, schedule expects {layout} {dims:?}",
                t.layout, t.dims
            )));
        }
        Ok(())
    };
    expect(input, Layout::NchwXc { x }, vec![layer.ic, layer.ih, layer.iw], "input")?;
    expect(
        weights,
        Layout::CkrsXc { x },
        vec![layer.ic, layer.oc, layer.fh, layer.fw],
        "weights",
    )?;

    let report = count(ir)?;
    let (oh, ow) = (layer.oh(), layer.ow());
    let mut output = PackedTensor::zeros(TensorKind::Output, Layout::KhwScalar, vec![layer.oc, oh, ow])?;
    let in_extent = layer.ih * layer.iw;
    let w_extent = layer.window();
    let out_extent = oh * ow;
    let words = x.div_ceil(64);

    let mut regs: Vec<Option<Value>> = vec![None; vmc.num_var_available()];
    let nregs = regs.len();
    let mut tiles = 0u64;
    let mut layer_counts = Counts::default();

    for cb in 0..meta.channel_blocks() {
        let valid_lanes = (layer.ic - cb * x).min(x) as i64;
        for k in 0..layer.oc {
            regs.iter_mut().for_each(|r| *r = None);
            let mut scalar: Option<i64> = None;
            let mut tile = Counts {
                elided_loads: meta.elided_loads,
                ..Counts::default()
            };
            for (pos, instr) in ir.instrs.iter().enumerate() {
                let fail = |kind| Error::Exec(exec_err(ir, pos, kind));
                let read = |regs: &[Option<Value>], v: Var| -> Result<Value> {
                    regs.get(v as usize)
                        .ok_or_else(|| {
                            fail(ExecErrorKind::VarOutOfRange {
                                var: v,
                                available: regs.len(),
                            })
                        })?
                        .clone()
                        .ok_or_else(|| fail(ExecErrorKind::UnwrittenVar(v)))
                };
                let dst_slot = |v: Var| -> Result<usize> {
                    if (v as usize) < nregs {
                        Ok(v as usize)
                    } else {
                        Err(fail(ExecErrorKind::VarOutOfRange {
                            var: v,
                            available: nregs,
                        }))
                    }
                };
                tile.record(instr, ir.section(pos));
                match *instr {
                    Instr::VLoad { dst, src, index } => {
                        let (t, extent, base) = match src {
                            Source::Input => (input, in_extent, cb * in_extent),
                            Source::Weight => (weights, w_extent, (cb * layer.oc + k) * w_extent),
                        };
                        if index >= extent {
                            return Err(fail(ExecErrorKind::IndexOutOfBounds { index, len: extent }));
                        }
                        let start = (base + index) * x;
                        let lanes = &t.data[start..start + x];
                        let value = match mode {
                            Mode::Int8 => Value::Lanes(lanes.to_vec()),
                            Mode::Binary => {
                                let mut packed = vec![0u64; words];
                                for (l, &bit) in lanes.iter().enumerate() {
                                    packed[l / 64] |= ((bit & 1) as u64) << (l % 64);
                                }
                                Value::Bits(packed)
                            }
                        };
                        regs[dst_slot(dst)?] = Some(value);
                    }
                    Instr::VZero { dst } => {
                        let n = if mode == Mode::Binary { words } else { x };
                        regs[dst_slot(dst)?] = Some(Value::Lanes(vec![0; n]));
                    }
                    Instr::VMul { dst, a, b } | Instr::VAdd { dst, a, b } => {
                        let (Value::Lanes(p), Value::Lanes(q)) = (read(&regs, a)?, read(&regs, b)?) else {
                            return Err(fail(ExecErrorKind::LaneMismatch));
                        };
                        if p.len() != q.len() {
                            return Err(fail(ExecErrorKind::LaneMismatch));
                        }
                        let out = if matches!(instr, Instr::VMul { .. }) {
                            p.iter().zip(&q).map(|(u, v)| u * v).collect()
                        } else {
                            p.iter().zip(&q).map(|(u, v)| u + v).collect()
                        };
                        regs[dst_slot(dst)?] = Some(Value::Lanes(out));
                    }
                    Instr::VXor { dst, a, b } => {
                        let (Value::Bits(p), Value::Bits(q)) = (read(&regs, a)?, read(&regs, b)?) else {
                            return Err(fail(ExecErrorKind::LaneMismatch));
                        };
                        let out = p.iter().zip(&q).map(|(u, v)| u ^ v).collect();
                        regs[dst_slot(dst)?] = Some(Value::Bits(out));
                    }
                    Instr::VPopcnt { dst, src } => {
                        let Value::Bits(p) = read(&regs, src)? else {
                            return Err(fail(ExecErrorKind::LaneMismatch));
                        };
                        let out = p.iter().map(|w| i64::from(w.count_ones())).collect();
                        regs[dst_slot(dst)?] = Some(Value::Lanes(out));
                    }
                    Instr::VMov { dst, src } => {
                        let v = read(&regs, src)?;
                        regs[dst_slot(dst)?] = Some(v);
                    }
                    Instr::VRedSum { src, macs } => {
                        let Value::Lanes(p) = read(&regs, src)? else {
                            return Err(fail(ExecErrorKind::LaneMismatch));
                        };
                        let sum: i64 = p.iter().sum();
                        scalar = Some(match mode {
                            Mode::Int8 => sum,
                            // Each product contributes valid − 2·popcount(a ^ b).
                            Mode::Binary => i64::from(macs) * valid_lanes - 2 * sum,
                        });
                    }
                    Instr::SAcc { offset } => {
                        if offset >= out_extent {
                            return Err(fail(ExecErrorKind::IndexOutOfBounds {
                                index: offset,
                                len: out_extent,
                            }));
                        }
                        let v = scalar.take().ok_or_else(|| fail(ExecErrorKind::NoScalar))?;
                        output.data[k * out_extent + offset] += v;
                    }
                }
            }
            layer_counts.add(&tile);
            tiles += 1;
        }
    }

    debug_assert_eq!(layer_counts, report.layer);
    Ok((
        output,
        CostReport {
            tile: report.tile,
            layer: layer_counts,
            tiles,
            peak_live_vars: report.peak_live_vars,
        },
    ))
}
