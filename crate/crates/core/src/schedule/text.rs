//! Plain-text IR dump, one instruction per line, and its parser.
//!
//! ```text
//! ; @meta anchor=os aux_input=0 aux_weight=4 aux_output=0 priority=input,weight mode=int8 unroll=1 shift=rotate elided=0 idle=0
//! ; @layer ih=3 iw=3 ic=4 oc=1 fh=2 fw=2 s=1 pad=0
//! ; @machine vec_reg_bits=32 vec_var_bits=32 num_vec_regs=32 elem_bits=8
//! ; @tile channel_blocks=1 kernels=1
//! ; @prologue
//! VLOAD v3, wgt[0]
//! ; @body
//! VZERO v2
//! VREDSUM s, v2, #4
//! SACC out[0], s ; o(0,0)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Instr, IrMeta, ScheduleIr, Source, StashShift, Var};
use crate::error::{Error, Result};
use crate::model::{Anchor, AuxKind, DataflowSpec, LayerConfig, Mode, VectorMachineConfig};

pub(super) fn render(ir: &ScheduleIr) -> String {
    let m = &ir.meta;
    let (l, v, spec) = (&m.layer, &m.vmc, &m.spec);
    let priority: Vec<&str> = spec.priority.iter().map(|k| k.name()).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "; @meta anchor={} aux_input={} aux_weight={} aux_output={} priority={} mode={} unroll={} shift={} elided={} idle={}",
        spec.anchor,
        spec.aux_input_vars,
        spec.aux_weight_vars,
        spec.aux_output_vars,
        if priority.is_empty() { "-".to_string() } else { priority.join(",") },
        m.mode,
        m.unroll,
        m.shift.name(),
        m.elided_loads,
        m.idle_vars
    );
    let _ = writeln!(
        out,
        "; @layer ih={} iw={} ic={} oc={} fh={} fw={} s={} pad={}",
        l.ih, l.iw, l.ic, l.oc, l.fh, l.fw, l.s, l.pad
    );
    let _ = writeln!(
        out,
        "; @machine vec_reg_bits={} vec_var_bits={} num_vec_regs={} elem_bits={}",
        v.vec_reg_bits, v.vec_var_bits, v.num_vec_regs, v.elem_bits
    );
    let _ = writeln!(
        out,
        "; @tile channel_blocks={} kernels={}",
        m.channel_blocks(),
        m.kernels()
    );
    out.push_str("; @prologue\n");
    let ow = l.ow();
    let epilogue_start = ir.instrs.len() - ir.epilogue_len;
    for (i, instr) in ir.instrs.iter().enumerate() {
        if i == ir.prologue_len {
            out.push_str("; @body\n");
        }
        if i == epilogue_start && ir.epilogue_len > 0 {
            out.push_str("; @epilogue\n");
        }
        match instr {
            Instr::SAcc { offset } => {
                let _ = writeln!(out, "{instr} ; o({},{})", offset / ow, offset % ow);
            }
            _ => {
                let _ = writeln!(out, "{instr}");
            }
        }
    }
    if ir.prologue_len == ir.instrs.len() {
        out.push_str("; @body\n");
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn fields(line: usize, rest: &str) -> Result<HashMap<String, String>> {
    rest.split_whitespace()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| perr(line, format!("expected key=value, found `{kv}`")))
        })
        .collect()
}

fn get<T: std::str::FromStr>(line: usize, map: &HashMap<String, String>, key: &str) -> Result<T> {
    let raw = map.get(key).ok_or_else(|| perr(line, format!("missing `{key}`")))?;
    raw.parse()
        .map_err(|_| perr(line, format!("bad value for `{key}`: `{raw}`")))
}

fn var(line: usize, tok: &str) -> Result<Var> {
    tok.strip_prefix('v')
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| perr(line, format!("expected a vector variable, found `{tok}`")))
}

fn mem(line: usize, tok: &str, prefix: &str) -> Result<usize> {
    tok.strip_prefix(prefix)
        .and_then(|t| t.strip_prefix('['))
        .and_then(|t| t.strip_suffix(']'))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| perr(line, format!("expected `{prefix}[N]`, found `{tok}`")))
}

fn instr(line: usize, text: &str) -> Result<Instr> {
    let (op, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let args: Vec<&str> = rest.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
    let arity = |n: usize| {
        if args.len() == n {
            Ok(())
        } else {
            Err(perr(line, format!("{op} takes {n} operands, found {}", args.len())))
        }
    };
    Ok(match op {
        "VLOAD" => {
            arity(2)?;
            let dst = var(line, args[0])?;
            if args[1].starts_with("in[") {
                Instr::VLoad {
                    dst,
                    src: Source::Input,
                    index: mem(line, args[1], "in")?,
                }
            } else {
                Instr::VLoad {
                    dst,
                    src: Source::Weight,
                    index: mem(line, args[1], "wgt")?,
                }
            }
        }
        "VZERO" => {
            arity(1)?;
            Instr::VZero {
                dst: var(line, args[0])?,
            }
        }
        "VMUL" | "VADD" | "VXOR" => {
            arity(3)?;
            let (dst, a, b) = (var(line, args[0])?, var(line, args[1])?, var(line, args[2])?);
            match op {
                "VMUL" => Instr::VMul { dst, a, b },
                "VADD" => Instr::VAdd { dst, a, b },
                _ => Instr::VXor { dst, a, b },
            }
        }
        "VPOPCNT" | "VMOV" => {
            arity(2)?;
            let (dst, src) = (var(line, args[0])?, var(line, args[1])?);
            if op == "VMOV" {
                Instr::VMov { dst, src }
            } else {
                Instr::VPopcnt { dst, src }
            }
        }
        "VREDSUM" => {
            arity(3)?;
            if args[0] != "s" {
                return Err(perr(line, "VREDSUM writes the scalar register `s`"));
            }
            let macs = args[2]
                .strip_prefix('#')
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| perr(line, format!("expected `#N`, found `{}`", args[2])))?;
            Instr::VRedSum {
                src: var(line, args[1])?,
                macs,
            }
        }
        "SACC" => {
            arity(2)?;
            if args[1] != "s" {
                return Err(perr(line, "SACC reads the scalar register `s`"));
            }
            Instr::SAcc {
                offset: mem(line, args[0], "out")?,
            }
        }
        other => return Err(perr(line, format!("unknown opcode `{other}`"))),
    })
}

/// Parses a dump produced by [`ScheduleIr::to_text`].
pub fn parse_ir(src: &str) -> Result<ScheduleIr> {
    let mut meta = None;
    let mut layer = None;
    let mut vmc = None;
    let mut instrs = Vec::new();
    let mut prologue_len = None;
    let mut epilogue_start = None;

    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let text = raw.trim();
        if let Some(directive) = text.strip_prefix("; @") {
            let (name, rest) = directive.split_once(' ').unwrap_or((directive, ""));
            match name {
                "meta" => meta = Some(fields(line, rest)?),
                "layer" => {
                    let f = fields(line, rest)?;
                    layer = Some(LayerConfig {
                        ih: get(line, &f, "ih")?,
                        iw: get(line, &f, "iw")?,
                        ic: get(line, &f, "ic")?,
                        oc: get(line, &f, "oc")?,
                        fh: get(line, &f, "fh")?,
                        fw: get(line, &f, "fw")?,
                        s: get(line, &f, "s")?,
                        pad: get(line, &f, "pad")?,
                    });
                }
                "machine" => {
                    let f = fields(line, rest)?;
                    vmc = Some(VectorMachineConfig {
                        vec_reg_bits: get(line, &f, "vec_reg_bits")?,
                        vec_var_bits: get(line, &f, "vec_var_bits")?,
                        num_vec_regs: get(line, &f, "num_vec_regs")?,
                        elem_bits: get(line, &f, "elem_bits")?,
                    });
                }
                "body" => prologue_len = Some(instrs.len()),
                "epilogue" => epilogue_start = Some(instrs.len()),
                "tile" | "prologue" => {}
                other => return Err(perr(line, format!("unknown directive `@{other}`"))),
            }
            continue;
        }
        let code = text.split(';').next().unwrap_or("").trim();
        if !code.is_empty() {
            instrs.push(instr(line, code)?);
        }
    }

    let end = src.lines().count();
    let f = meta.ok_or_else(|| perr(end, "missing `; @meta` header"))?;
    let layer = layer.ok_or_else(|| perr(end, "missing `; @layer` header"))?;
    let vmc = vmc.ok_or_else(|| perr(end, "missing `; @machine` header"))?;
    layer.validate()?;
    vmc.validate()?;
    let priority = match f.get("priority").map(String::as_str) {
        None | Some("-") => Vec::new(),
        Some(list) => list
            .split(',')
            .map(|k| match k {
                "input" => Ok(AuxKind::Input),
                "weight" => Ok(AuxKind::Weight),
                "output" => Ok(AuxKind::Output),
                other => Err(perr(1, format!("unknown auxiliary type `{other}`"))),
            })
            .collect::<Result<_>>()?,
    };
    let spec = DataflowSpec {
        anchor: get::<Anchor>(1, &f, "anchor")?,
        aux_input_vars: get(1, &f, "aux_input")?,
        aux_weight_vars: get(1, &f, "aux_weight")?,
        aux_output_vars: get(1, &f, "aux_output")?,
        priority,
    };
    let shift = match f.get("shift").map(String::as_str) {
        Some("rotate") | None => StashShift::Rotate,
        Some("moves") => StashShift::Moves,
        Some("fallback") => StashShift::MovesFallback,
        Some(other) => return Err(perr(1, format!("unknown shift `{other}`"))),
    };
    let prologue_len = prologue_len.unwrap_or(0);
    let epilogue_start = epilogue_start.unwrap_or(instrs.len());
    if epilogue_start < prologue_len {
        return Err(perr(end, "`; @epilogue` precedes `; @body`"));
    }
    Ok(ScheduleIr {
        prologue_len,
        epilogue_len: instrs.len() - epilogue_start,
        instrs,
        meta: IrMeta {
            spec,
            layer,
            vmc,
            mode: get::<Mode>(1, &f, "mode")?,
            unroll: get(1, &f, "unroll")?,
            shift,
            elided_loads: get(1, &f, "elided")?,
            idle_vars: get(1, &f, "idle")?,
        },
    })
}
