//! C source emission for a tile schedule.
//!
//! The generated function walks channel blocks outermost and kernels inside,
//! running the unrolled tile for each pair. Every IR variable becomes one
//! `vvar` temporary; each IR op becomes one call to a small inline helper
//! whose body issues one intrinsic statement per 128-bit register of the
//! variable.
//!
//! int8 kernels widen loads to 16 bits, multiply in 16 bits and accumulate
//! pairwise into 32-bit lanes. Binary kernels keep 1-bit lanes packed
//! eight per byte (lane `l` at bit `l % 8` of byte `l / 8`), count with
//! `vcnt` and accumulate counts in 16-bit lanes.
//!
//! The NEON flavor includes a portable stand-in for the handful of
//! intrinsics it uses when `__ARM_NEON` is not defined, so the same source
//! builds and runs on any host C compiler.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{LayerConfig, Mode};
use crate::schedule::{Instr, ScheduleIr, Source, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    NeonC,
    ScalarC,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::NeonC => "neon_c",
            Flavor::ScalarC => "scalar_c",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmitConfig {
    pub flavor: Flavor,
    pub function: String,
    /// Wraps the file in `#ifndef GUARD` / `#define GUARD` when set.
    pub include_guard: Option<String>,
    pub mode: Mode,
}

impl EmitConfig {
    pub fn new(flavor: Flavor, function: impl Into<String>, mode: Mode) -> Self {
        EmitConfig {
            flavor,
            function: function.into(),
            include_guard: None,
            mode,
        }
    }

    pub fn with_guard(mut self, guard: impl Into<String>) -> Self {
        self.include_guard = Some(guard.into());
        self
    }
}

fn elem_type(mode: Mode) -> &'static str {
    match mode {
        Mode::Int8 => "int8_t",
        Mode::Binary => "uint8_t",
    }
}

/// The shared kernel signature.
pub fn signature(cfg: &EmitConfig) -> String {
    let t = elem_type(cfg.mode);
    format!(
        "void {}(const {t} *input, const {t} *weight, int32_t *output)",
        cfg.function
    )
}

fn check_ident(name: &str) -> Result<()> {
    let ok = name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(Error::Unsupported(format!("`{name}` is not a C identifier")))
    }
}

fn open(out: &mut String, cfg: &EmitConfig, what: &str) -> Result<()> {
    check_ident(&cfg.function)?;
    let _ = writeln!(out, "/* {what} */");
    if let Some(g) = &cfg.include_guard {
        check_ident(g)?;
        let _ = writeln!(out, "#ifndef {g}\n#define {g}");
    }
    out.push_str("\n#include <stdint.h>\n#include <string.h>\n");
    Ok(())
}

fn close(out: &mut String, cfg: &EmitConfig) {
    if let Some(g) = &cfg.include_guard {
        let _ = writeln!(out, "\n#endif /* {g} */");
    }
}

/// Value representation a variable holds at a given point of the tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// int8 data or products widened to 16-bit lanes.
    Wide16,
    /// 32-bit accumulator lanes.
    Acc32,
    /// Packed 1-bit lanes.
    Bits,
    /// Per-lane popcounts.
    Counts,
}

const NEON_SHIM: &str = r#"
#if defined(__ARM_NEON)
#include <arm_neon.h>
#else
/* Portable stand-ins for the NEON intrinsics used below. */
typedef struct { int8_t v[16]; } int8x16_t;
typedef struct { int8_t v[8]; } int8x8_t;
typedef struct { int16_t v[8]; } int16x8_t;
typedef struct { int32_t v[4]; } int32x4_t;
typedef struct { uint8_t v[16]; } uint8x16_t;
typedef struct { uint16_t v[8]; } uint16x8_t;

static inline int8x16_t vld1q_s8(const int8_t *p) { int8x16_t r; memcpy(r.v, p, 16); return r; }
static inline int8x8_t vget_low_s8(int8x16_t a) { int8x8_t r; memcpy(r.v, a.v, 8); return r; }
static inline int8x8_t vget_high_s8(int8x16_t a) { int8x8_t r; memcpy(r.v, a.v + 8, 8); return r; }
static inline int16x8_t vmovl_s8(int8x8_t a) { int16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = a.v[i]; return r; }
static inline int16x8_t vmulq_s16(int16x8_t a, int16x8_t b) { int16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = (int16_t)(a.v[i] * b.v[i]); return r; }
static inline int32x4_t vdupq_n_s32(int32_t x) { int32x4_t r; for (int i = 0; i < 4; ++i) r.v[i] = x; return r; }
static inline int32x4_t vpaddlq_s16(int16x8_t a) { int32x4_t r; for (int i = 0; i < 4; ++i) r.v[i] = (int32_t)a.v[2 * i] + a.v[2 * i + 1]; return r; }
static inline int32x4_t vpadalq_s16(int32x4_t acc, int16x8_t a) { for (int i = 0; i < 4; ++i) acc.v[i] += (int32_t)a.v[2 * i] + a.v[2 * i + 1]; return acc; }
static inline int32x4_t vaddq_s32(int32x4_t a, int32x4_t b) { for (int i = 0; i < 4; ++i) a.v[i] += b.v[i]; return a; }
static inline int32_t vaddvq_s32(int32x4_t a) { return a.v[0] + a.v[1] + a.v[2] + a.v[3]; }
static inline int32_t vaddlvq_s16(int16x8_t a) { int32_t s = 0; for (int i = 0; i < 8; ++i) s += a.v[i]; return s; }
static inline uint8x16_t vld1q_u8(const uint8_t *p) { uint8x16_t r; memcpy(r.v, p, 16); return r; }
static inline uint8x16_t veorq_u8(uint8x16_t a, uint8x16_t b) { for (int i = 0; i < 16; ++i) a.v[i] ^= b.v[i]; return a; }
static inline uint8x16_t vcntq_u8(uint8x16_t a) { for (int i = 0; i < 16; ++i) { uint8_t x = a.v[i], n = 0; while (x) { n += x & 1; x >>= 1; } a.v[i] = n; } return a; }
static inline uint16x8_t vpaddlq_u8(uint8x16_t a) { uint16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = (uint16_t)(a.v[2 * i] + a.v[2 * i + 1]); return r; }
static inline uint16x8_t vaddq_u16(uint16x8_t a, uint16x8_t b) { for (int i = 0; i < 8; ++i) a.v[i] = (uint16_t)(a.v[i] + b.v[i]); return a; }
static inline uint16x8_t vdupq_n_u16(uint16_t x) { uint16x8_t r; for (int i = 0; i < 8; ++i) r.v[i] = x; return r; }
static inline uint32_t vaddlvq_u16(uint16x8_t a) { uint32_t s = 0; for (int i = 0; i < 8; ++i) s += a.v[i]; return s; }
#endif
"#;

/// Helper definitions for one flavor, with `regs` 128-bit registers per variable.
fn helpers(out: &mut String, flavor: Flavor, mode: Mode, x: usize) {
    let mut h = |s: String| out.push_str(&s);
    match (flavor, mode) {
        (Flavor::NeonC, Mode::Int8) => {
            let regs = x / 16;
            h(format!(
                "\ntypedef struct {{ int16x8_t p[{}]; int32x4_t a[{}]; }} vvar;\n\n",
                2 * regs,
                2 * regs
            ));
            let mut load = String::from("static inline void v_load(vvar *d, const int8_t *src) {\n");
            for r in 0..regs {
                let _ = writeln!(load, "    int8x16_t t{r} = vld1q_s8(src + {});", 16 * r);
                let _ = writeln!(load, "    d->p[{}] = vmovl_s8(vget_low_s8(t{r}));", 2 * r);
                let _ = writeln!(load, "    d->p[{}] = vmovl_s8(vget_high_s8(t{r}));", 2 * r + 1);
            }
            load.push_str("}\n");
            h(load);
            let per = |name: &str, args: &str, body: &dyn Fn(usize) -> String| {
                let mut f = format!("static inline {name}({args}) {{\n");
                for j in 0..2 * regs {
                    let _ = writeln!(f, "    {}", body(j));
                }
                f.push_str("}\n");
                f
            };
            h(per("void v_zero", "vvar *d", &|j| {
                format!("d->a[{j}] = vdupq_n_s32(0);")
            }));
            h(per("void v_mul", "vvar *d, const vvar *a, const vvar *b", &|j| {
                format!("d->p[{j}] = vmulq_s16(a->p[{j}], b->p[{j}]);")
            }));
            h(per("void v_add_ap", "vvar *d, const vvar *a, const vvar *b", &|j| {
                format!("d->a[{j}] = vpadalq_s16(a->a[{j}], b->p[{j}]);")
            }));
            h(per("void v_add_pp", "vvar *d, const vvar *a, const vvar *b", &|j| {
                format!("d->a[{j}] = vpadalq_s16(vpaddlq_s16(a->p[{j}]), b->p[{j}]);")
            }));
            h(per("void v_add_aa", "vvar *d, const vvar *a, const vvar *b", &|j| {
                format!("d->a[{j}] = vaddq_s32(a->a[{j}], b->a[{j}]);")
            }));
            let sum = |f: &str, field: &str| {
                (0..2 * regs)
                    .map(|j| format!("{f}(a->{field}[{j}])"))
                    .collect::<Vec<_>>()
                    .join(" + ")
            };
            h(format!(
                "static inline int32_t v_redsum_a(const vvar *a) {{ return {}; }}\n",
                sum("vaddvq_s32", "a")
            ));
            h(format!(
                "static inline int32_t v_redsum_p(const vvar *a) {{ return {}; }}\n",
                sum("vaddlvq_s16", "p")
            ));
        }
        (Flavor::NeonC, Mode::Binary) => {
            let regs = x / 128;
            h(format!(
                "\ntypedef struct {{ uint8x16_t b[{regs}]; uint16x8_t n[{regs}]; }} vvar;\n\n"
            ));
            let per = |name: &str, args: &str, body: &dyn Fn(usize) -> String| {
                let mut f = format!("static inline {name}({args}) {{\n");
                for j in 0..regs {
                    let _ = writeln!(f, "    {}", body(j));
                }
                f.push_str("}\n");
                f
            };
            h(per("void v_load", "vvar *d, const uint8_t *src", &|j| {
                format!("d->b[{j}] = vld1q_u8(src + {});", 16 * j)
            }));
            h(per("void v_zero", "vvar *d", &|j| {
                format!("d->n[{j}] = vdupq_n_u16(0);")
            }));
            h(per("void v_xor", "vvar *d, const vvar *a, const vvar *b", &|j| {
                format!("d->b[{j}] = veorq_u8(a->b[{j}], b->b[{j}]);")
            }));
            h(per("void v_popcnt", "vvar *d, const vvar *a", &|j| {
                format!("d->n[{j}] = vpaddlq_u8(vcntq_u8(a->b[{j}]));")
            }));
            h(per("void v_add", "vvar *d, const vvar *a, const vvar *b", &|j| {
                format!("d->n[{j}] = vaddq_u16(a->n[{j}], b->n[{j}]);")
            }));
            let sum = (0..regs)
                .map(|j| format!("(int32_t)vaddlvq_u16(a->n[{j}])"))
                .collect::<Vec<_>>()
                .join(" + ");
            h(format!(
                "static inline int32_t v_redsum(const vvar *a) {{ return {sum}; }}\n"
            ));
        }
        (Flavor::ScalarC, Mode::Int8) => {
            h(format!(
                "\n#define X {x}\ntypedef struct {{ int32_t l[X]; }} vvar;\n\n\
static inline void v_load(vvar *d, const int8_t *src) {{ for (int i = 0; i < X; ++i) d->l[i] = src[i]; }}\n\
static inline void v_zero(vvar *d) {{ for (int i = 0; i < X; ++i) d->l[i] = 0; }}\n\
static inline void v_mul(vvar *d, const vvar *a, const vvar *b) {{ for (int i = 0; i < X; ++i) d->l[i] = a->l[i] * b->l[i]; }}\n\
static inline void v_add(vvar *d, const vvar *a, const vvar *b) {{ for (int i = 0; i < X; ++i) d->l[i] = a->l[i] + b->l[i]; }}\n\
static inline int32_t v_redsum(const vvar *a) {{ int32_t s = 0; for (int i = 0; i < X; ++i) s += a->l[i]; return s; }}\n"
            ));
        }
        (Flavor::ScalarC, Mode::Binary) => {
            h(format!(
                "\n#define XB {}\ntypedef struct {{ uint8_t b[XB]; int32_t n[XB]; }} vvar;\n\n\
static inline int32_t pc8(uint8_t v) {{ int32_t n = 0; while (v) {{ n += v & 1; v >>= 1; }} return n; }}\n\
static inline void v_load(vvar *d, const uint8_t *src) {{ for (int i = 0; i < XB; ++i) d->b[i] = src[i]; }}\n\
static inline void v_zero(vvar *d) {{ for (int i = 0; i < XB; ++i) d->n[i] = 0; }}\n\
static inline void v_xor(vvar *d, const vvar *a, const vvar *b) {{ for (int i = 0; i < XB; ++i) d->b[i] = a->b[i] ^ b->b[i]; }}\n\
static inline void v_popcnt(vvar *d, const vvar *a) {{ for (int i = 0; i < XB; ++i) d->n[i] = pc8(a->b[i]); }}\n\
static inline void v_add(vvar *d, const vvar *a, const vvar *b) {{ for (int i = 0; i < XB; ++i) d->n[i] = a->n[i] + b->n[i]; }}\n\
static inline int32_t v_redsum(const vvar *a) {{ int32_t s = 0; for (int i = 0; i < XB; ++i) s += a->n[i]; return s; }}\n",
                x / 8
            ));
        }
    }
}

/// Emits the kernel for `ir`.
pub fn emit(ir: &ScheduleIr, cfg: &EmitConfig) -> Result<String> {
    let meta = &ir.meta;
    let (l, x) = (&meta.layer, meta.vmc.x());
    if cfg.mode != meta.mode {
        return Err(Error::Unsupported(format!(
            "{} schedule emitted as {}",
            meta.mode, cfg.mode
        )));
    }
    let granule = match (cfg.flavor, cfg.mode) {
        (Flavor::NeonC, Mode::Int8) => 16,
        (Flavor::NeonC, Mode::Binary) => 128,
        (Flavor::ScalarC, Mode::Int8) => 1,
        (Flavor::ScalarC, Mode::Binary) => 8,
    };
    if x % granule != 0 {
        return Err(Error::Unsupported(format!(
            "{} {} kernels need lanes in multiples of {granule}, schedule has {x}",
            cfg.flavor.name(),
            cfg.mode
        )));
    }

    let spec = &meta.spec;
    let mut out = String::new();
    open(
        &mut out,
        cfg,
        &format!("{} {} kernel: {} | {} | x={x}", cfg.flavor.name(), cfg.mode, spec, l),
    )?;
    if cfg.flavor == Flavor::NeonC {
        out.push_str(NEON_SHIM);
    }
    helpers(&mut out, cfg.flavor, cfg.mode, x);

    let body = tile_body(ir, cfg)?;
    let vars: BTreeSet<Var> = ir.vars_used();
    let (oh, ow) = (l.oh(), l.ow());
    let vec_bytes = match cfg.mode {
        Mode::Int8 => x,
        Mode::Binary => x / 8,
    };

    let _ = writeln!(out, "\n{} {{", signature(cfg));
    let _ = writeln!(out, "    memset(output, 0, sizeof(int32_t) * {});", l.oc * oh * ow);
    let _ = writeln!(out, "    for (int cb = 0; cb < {}; ++cb) {{", meta.channel_blocks());
    if cfg.mode == Mode::Binary {
        let _ = writeln!(
            out,
            "        const int32_t valid = {} - cb * {x} < {x} ? {} - cb * {x} : {x};",
            l.ic, l.ic
        );
    }
    let _ = writeln!(out, "        for (int k = 0; k < {}; ++k) {{", l.oc);
    let t = elem_type(cfg.mode);
    let _ = writeln!(
        out,
        "            const {t} *in = input + (size_t)cb * {};",
        l.ih * l.iw * vec_bytes
    );
    let _ = writeln!(
        out,
        "            const {t} *wgt = weight + ((size_t)cb * {} + k) * {};",
        l.oc,
        l.window() * vec_bytes
    );
    let _ = writeln!(out, "            int32_t *out = output + (size_t)k * {};", oh * ow);
    if !vars.is_empty() {
        let names: Vec<String> = vars.iter().map(|v| format!("v{v}")).collect();
        let _ = writeln!(out, "            vvar {};", names.join(", "));
    }
    let _ = writeln!(out, "            int32_t s;");
    for line in body {
        let _ = writeln!(out, "            {line}");
    }
    out.push_str("        }\n    }\n}\n");
    close(&mut out, cfg);
    Ok(out)
}

fn tile_body(ir: &ScheduleIr, cfg: &EmitConfig) -> Result<Vec<String>> {
    let x = ir.meta.vmc.x();
    let stride = match cfg.mode {
        Mode::Int8 => x,
        Mode::Binary => x / 8,
    };
    let neon = cfg.flavor == Flavor::NeonC;
    let mut kinds: Vec<Option<Kind>> = vec![None; ir.vars_used().last().map_or(0, |&v| v as usize + 1)];
    let mut lines = Vec::with_capacity(ir.instrs.len());
    for (pos, instr) in ir.instrs.iter().enumerate() {
        let bad = || {
            Error::Unsupported(format!(
                "instruction {pos} (`{instr}`) has no {} {} lowering",
                cfg.flavor.name(),
                cfg.mode
            ))
        };
        let kind_of = |v: Var, kinds: &[Option<Kind>]| kinds[v as usize].ok_or_else(bad);
        let (line, def) = match (*instr, cfg.mode) {
            (Instr::VLoad { dst, src, index }, m) => {
                let base = match src {
                    Source::Input => "in",
                    Source::Weight => "wgt",
                };
                let k = if m == Mode::Int8 { Kind::Wide16 } else { Kind::Bits };
                (format!("v_load(&v{dst}, {base} + {});", index * stride), Some((dst, k)))
            }
            (Instr::VZero { dst }, m) => {
                let k = if m == Mode::Int8 { Kind::Acc32 } else { Kind::Counts };
                (format!("v_zero(&v{dst});"), Some((dst, k)))
            }
            (Instr::VMul { dst, a, b }, Mode::Int8) => {
                (format!("v_mul(&v{dst}, &v{a}, &v{b});"), Some((dst, Kind::Wide16)))
            }
            (Instr::VAdd { dst, a, b }, Mode::Int8) => {
                let name = if neon {
                    match (kind_of(a, &kinds)?, kind_of(b, &kinds)?) {
                        (Kind::Acc32, Kind::Wide16) => "v_add_ap",
                        (Kind::Wide16, Kind::Acc32) => {
                            lines.push(format!("v_add_ap(&v{dst}, &v{b}, &v{a});"));
                            kinds[dst as usize] = Some(Kind::Acc32);
                            continue;
                        }
                        (Kind::Wide16, Kind::Wide16) => "v_add_pp",
                        (Kind::Acc32, Kind::Acc32) => "v_add_aa",
                        _ => return Err(bad()),
                    }
                } else {
                    "v_add"
                };
                (format!("{name}(&v{dst}, &v{a}, &v{b});"), Some((dst, Kind::Acc32)))
            }
            (Instr::VAdd { dst, a, b }, Mode::Binary) => {
                (format!("v_add(&v{dst}, &v{a}, &v{b});"), Some((dst, Kind::Counts)))
            }
            (Instr::VXor { dst, a, b }, Mode::Binary) => {
                (format!("v_xor(&v{dst}, &v{a}, &v{b});"), Some((dst, Kind::Bits)))
            }
            (Instr::VPopcnt { dst, src }, Mode::Binary) => {
                (format!("v_popcnt(&v{dst}, &v{src});"), Some((dst, Kind::Counts)))
            }
            (Instr::VMov { dst, src }, _) => (format!("v{dst} = v{src};"), Some((dst, kind_of(src, &kinds)?))),
            (Instr::VRedSum { src, .. }, Mode::Int8) => {
                let f = match (neon, kind_of(src, &kinds)?) {
                    (false, _) => "v_redsum",
                    (true, Kind::Acc32) => "v_redsum_a",
                    (true, _) => "v_redsum_p",
                };
                (format!("s = {f}(&v{src});"), None)
            }
            (Instr::VRedSum { src, macs }, Mode::Binary) => {
                (format!("s = {macs} * valid - 2 * v_redsum(&v{src});"), None)
            }
            (Instr::SAcc { offset }, _) => (format!("out[{offset}] += s;"), None),
            _ => return Err(bad()),
        };
        if let Some((v, k)) = def {
            kinds[v as usize] = Some(k);
        }
        lines.push(line);
    }
    Ok(lines)
}

/// Scalar reference kernel with the same signature and memory layout as
/// [`emit`]: blocked input and weights, `KHW` output, padding skipped.
pub fn emit_oracle(layer: &LayerConfig, x: usize, cfg: &EmitConfig) -> Result<String> {
    layer.validate()?;
    if cfg.mode == Mode::Binary && !x.is_multiple_of(8) {
        return Err(Error::Unsupported(format!(
            "binary kernels need lanes in multiples of 8, got {x}"
        )));
    }
    let l = layer;
    let (oh, ow) = (l.oh(), l.ow());
    let mut out = String::new();
    open(&mut out, cfg, &format!("scalar reference: {l} | x={x}"))?;
    let _ = writeln!(out, "\n{} {{", signature(cfg));
    let _ = writeln!(out, "    for (int k = 0; k < {}; ++k) {{", l.oc);
    let _ = writeln!(out, "        for (int oy = 0; oy < {oh}; ++oy) {{");
    let _ = writeln!(out, "            for (int ox = 0; ox < {ow}; ++ox) {{");
    out.push_str("                int32_t acc = 0;\n");
    let _ = writeln!(out, "                for (int c = 0; c < {}; ++c) {{", l.ic);
    let _ = writeln!(out, "                    for (int r = 0; r < {}; ++r) {{", l.fh);
    let _ = writeln!(out, "                        for (int sc = 0; sc < {}; ++sc) {{", l.fw);
    let _ = writeln!(
        out,
        "                            const int h = oy * {} + r - {};",
        l.s, l.pad
    );
    let _ = writeln!(
        out,
        "                            const int w = ox * {} + sc - {};",
        l.s, l.pad
    );
    if l.pad > 0 {
        let _ = writeln!(
            out,
            "                            if (h < 0 || h >= {} || w < 0 || w >= {}) continue;",
            l.ih, l.iw
        );
    }
    let _ = writeln!(
        out,
        "                            const size_t ie = ((size_t)(c / {x} * {} + h) * {} + w) * {x} + c % {x};",
        l.ih, l.iw
    );
    let _ = writeln!(
        out,
        "                            const size_t we = (((size_t)(c / {x} * {} + k) * {} + r) * {} + sc) * {x} + c % {x};",
        l.oc, l.fh, l.fw
    );
    match cfg.mode {
        Mode::Int8 => out.push_str("                            acc += (int32_t)input[ie] * weight[we];\n"),
        Mode::Binary => {
            out.push_str("                            const int bi = (input[ie >> 3] >> (ie & 7)) & 1;\n");
            out.push_str("                            const int bw = (weight[we >> 3] >> (we & 7)) & 1;\n");
            out.push_str("                            acc += 1 - 2 * (bi ^ bw);\n");
        }
    }
    out.push_str("                        }\n                    }\n                }\n");
    let _ = writeln!(out, "                output[(k * {oh} + oy) * {ow} + ox] = acc;");
    out.push_str("            }\n        }\n    }\n}\n");
    close(&mut out, cfg);
    Ok(out)
}
