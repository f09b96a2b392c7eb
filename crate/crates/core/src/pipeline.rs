//! Network-level search: cost every (layer, blocking) candidate by simulated
//! instruction counts, then pick one candidate per layer with a DP that also
//! charges for re-blocking activations between layers.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{transform_moves, Anchor, AuxKind, DataflowSpec, LayerConfig, Mode, VectorMachineConfig};
use crate::schedule::generate;
use crate::simvm::{count, CostReport, Counts};

/// Per-category weights turning a [`Counts`] into one cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CostWeights {
    pub loads: u64,
    pub scalar_reads: u64,
    pub scalar_writes: u64,
    pub vmov: u64,
    pub vredsum: u64,
    /// Applies to vmul, vadd, vxor, vpopcnt and vzero.
    pub arithmetic: u64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            loads: 1,
            scalar_reads: 1,
            scalar_writes: 1,
            vmov: 1,
            vredsum: 1,
            arithmetic: 0,
        }
    }
}

impl CostWeights {
    pub fn cost(&self, c: &Counts) -> u64 {
        self.loads * c.vector_loads
            + self.scalar_reads * c.scalar_reads
            + self.scalar_writes * c.scalar_writes
            + self.vmov * c.vmov
            + self.vredsum * c.vredsum
            + self.arithmetic * (c.vmul + c.vadd + c.vxor + c.vpopcnt + c.vzero)
    }

    /// Applies `key=value` overrides such as `loads=2,arithmetic=1`.
    pub fn with_overrides(mut self, list: &str) -> Result<Self> {
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidSpec(format!("cost weight `{item}` is not key=value")))?;
            let v: u64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("cost weight `{item}` needs a non-negative integer")))?;
            let slot = match k.trim() {
                "loads" => &mut self.loads,
                "scalar_reads" => &mut self.scalar_reads,
                "scalar_writes" => &mut self.scalar_writes,
                "vmov" => &mut self.vmov,
                "vredsum" => &mut self.vredsum,
                "arithmetic" => &mut self.arithmetic,
                other => return Err(Error::InvalidSpec(format!("unknown cost weight `{other}`"))),
            };
            *slot = v;
        }
        Ok(self)
    }
}

/// One blocking choice for a layer: lanes per vector variable plus dataflow.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub x: usize,
    pub spec: DataflowSpec,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x={} {}", self.x, self.spec)
    }
}

fn priority_rank(spec: &DataflowSpec) -> u8 {
    u8::from(spec.priority.first() != Some(&AuxKind::Weight))
}

/// Upper bound on useful stash variables of each type.
fn useful_cap(layer: &LayerConfig, anchor: Anchor, kind: AuxKind) -> usize {
    match (anchor, kind) {
        (Anchor::Ws, AuxKind::Input) => layer.input_positions(),
        (_, AuxKind::Output) => layer.e(),
        _ => layer.window(),
    }
}

/// Default search space: `x` of one, two and four registers (kept when it
/// divides `ic`; one register otherwise), each anchor with every split of the
/// full auxiliary budget between its two stash types, plus the basic dataflows.
pub fn default_candidates(layer: &LayerConfig, base: &VectorMachineConfig) -> Vec<Candidate> {
    let lanes = base.vec_reg_bits / base.elem_bits;
    let mut xs: Vec<usize> = [lanes, 2 * lanes, 4 * lanes]
        .into_iter()
        .filter(|x| layer.ic.is_multiple_of(*x))
        .collect();
    if xs.is_empty() {
        xs.push(lanes);
    }
    let mut out = Vec::new();
    for x in xs {
        let Ok(vmc) = base.with_lanes(x) else { continue };
        let budget = vmc.aux_budget();
        for anchor in Anchor::ALL {
            let mut specs = vec![DataflowSpec::basic(anchor)];
            let [a, b] = anchor.aux_kinds();
            let order = if anchor == Anchor::Os {
                [AuxKind::Weight, AuxKind::Input]
            } else {
                [a, b]
            };
            for k in 0..=budget {
                let first = k.min(useful_cap(layer, anchor, order[0]));
                let second = (budget - k).min(useful_cap(layer, anchor, order[1]));
                let spec = DataflowSpec::basic(anchor)
                    .with_priority(&order)
                    .with_aux(order[0], first)
                    .with_aux(order[1], second);
                if !specs.iter().any(|s| {
                    s.aux_input_vars == spec.aux_input_vars
                        && s.aux_weight_vars == spec.aux_weight_vars
                        && s.aux_output_vars == spec.aux_output_vars
                }) {
                    specs.push(spec);
                }
            }
            out.extend(specs.into_iter().map(|spec| Candidate { x, spec }));
        }
    }
    out
}

/// Simulated counts for one layer under one candidate.
pub fn simulate(layer: &LayerConfig, base: &VectorMachineConfig, cand: &Candidate, mode: Mode) -> Result<CostReport> {
    let vmc = base.with_lanes(cand.x)?;
    let ir = generate(layer, &vmc, &cand.spec, mode)?;
    count(&ir)
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub candidate: Candidate,
    pub cost: u64,
    pub report: CostReport,
}

/// Costs every candidate and returns them best first. Ties go to smaller
/// `x`, then weight-first priority, then fewer stash variables, then input order.
pub fn blocking_sweep(
    layer: &LayerConfig,
    base: &VectorMachineConfig,
    candidates: &[Candidate],
    weights: &CostWeights,
    mode: Mode,
) -> Result<Vec<SweepRow>> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates("blocking sweep".into()));
    }
    let mut rows: Vec<(usize, SweepRow)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let report = simulate(layer, base, c, mode)?;
            Ok((
                i,
                SweepRow {
                    candidate: c.clone(),
                    cost: weights.cost(&report.layer),
                    report,
                },
            ))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|(i, r)| {
        (
            r.cost,
            r.candidate.x,
            priority_rank(&r.candidate.spec),
            r.candidate.spec.total_aux(),
            *i,
        )
    });
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rank,x,anchor,aux_input,aux_weight,aux_output,priority,cost,vector_loads,scalar_reads,scalar_writes,vredsum,vmov\n");
    for (i, r) in rows.iter().enumerate() {
        let s = &r.candidate.spec;
        let c = &r.report.layer;
        let priority: Vec<&str> = s.priority.iter().map(|k| k.name()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            i,
            r.candidate.x,
            s.anchor,
            s.aux_input_vars,
            s.aux_weight_vars,
            s.aux_output_vars,
            priority.join("|"),
            r.cost,
            c.vector_loads,
            c.scalar_reads,
            c.scalar_writes,
            c.vredsum,
            c.vmov
        );
    }
    out
}

/// Layers in order with their candidate blockings.
#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub layers: Vec<LayerConfig>,
    pub candidates: Vec<Vec<Candidate>>,
    /// Register file; each candidate sets its own variable width.
    pub machine: VectorMachineConfig,
    pub mode: Mode,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::EmptyCandidates("network has no layers".into()));
        }
        if self.candidates.len() != self.layers.len() {
            return Err(Error::InvalidSpec(format!(
                "{} candidate sets for {} layers",
                self.candidates.len(),
                self.layers.len()
            )));
        }
        for (i, (l, c)) in self.layers.iter().zip(&self.candidates).enumerate() {
            l.validate().map_err(|e| e.at_layer(i))?;
            if c.is_empty() {
                return Err(Error::EmptyCandidates(format!("layer {i}")));
            }
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].oc != pair[1].ic {
                return Err(Error::InvalidLayer(format!(
                    "layer {} produces {} channels but layer {} expects {}",
                    i,
                    pair[0].oc,
                    i + 1,
                    pair[1].ic
                )));
            }
        }
        Ok(())
    }
}

/// Layer costs plus boundary transform costs.
///
/// `boundary[i][a][b]` is the cost of feeding layer `i` under candidate `b`
/// when its producer used candidate `a`. Boundary 0 is the network input,
/// which arrives unblocked and has a single "candidate".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostTable {
    pub labels: Vec<Vec<String>>,
    pub layer_cost: Vec<Vec<u64>>,
    pub boundary: Vec<Vec<Vec<u64>>>,
    /// Block width of each candidate, used for boundary labels.
    pub widths: Vec<Vec<usize>>,
}

pub fn collect_costs(net: &NetworkSpec, weights: &CostWeights) -> Result<CostTable> {
    net.validate()?;
    let cells: Vec<(usize, usize)> = net
        .candidates
        .iter()
        .enumerate()
        .flat_map(|(i, c)| (0..c.len()).map(move |j| (i, j)))
        .collect();
    let costs: Vec<u64> = cells
        .par_iter()
        .map(|&(i, j)| {
            simulate(&net.layers[i], &net.machine, &net.candidates[i][j], net.mode)
                .map(|r| weights.cost(&r.layer))
                .map_err(|e| e.at_layer(i))
        })
        .collect::<Result<_>>()?;

    let mut layer_cost: Vec<Vec<u64>> = net.candidates.iter().map(|c| vec![0; c.len()]).collect();
    for (&(i, j), c) in cells.iter().zip(costs) {
        layer_cost[i][j] = c;
    }
    let widths: Vec<Vec<usize>> = net.candidates.iter().map(|c| c.iter().map(|k| k.x).collect()).collect();
    let mut boundary = Vec::with_capacity(net.layers.len());
    for (i, l) in net.layers.iter().enumerate() {
        let (from, dims) = if i == 0 {
            (vec![1], (l.ic, l.ih, l.iw))
        } else {
            let p = &net.layers[i - 1];
            (widths[i - 1].clone(), (p.oc, p.oh(), p.ow()))
        };
        boundary.push(
            from.iter()
                .map(|&a| widths[i].iter().map(|&b| transform_moves(dims, a, b)).collect())
                .collect(),
        );
    }
    Ok(CostTable {
        labels: net
            .candidates
            .iter()
            .map(|c| c.iter().map(|k| k.to_string()).collect())
            .collect(),
        layer_cost,
        boundary,
        widths,
    })
}

impl CostTable {
    /// `layer,config,cost` rows.
    pub fn layer_csv(&self) -> String {
        let mut out = String::from("layer,config,cost\n");
        for (i, (labels, costs)) in self.labels.iter().zip(&self.layer_cost).enumerate() {
            for (label, c) in labels.iter().zip(costs) {
                let _ = writeln!(out, "{i},{label},{c}");
            }
        }
        out
    }

    /// `boundary,layout_a,layout_b,cost` rows, one per distinct width pair.
    pub fn boundary_csv(&self) -> String {
        let mut out = String::from("boundary,layout_a,layout_b,cost\n");
        let layout = |x: usize| {
            if x == 1 {
                "NCHW".to_string()
            } else {
                format!("NCHW[{x}c]")
            }
        };
        for (i, m) in self.boundary.iter().enumerate() {
            let from: Vec<usize> = if i == 0 { vec![1] } else { self.widths[i - 1].clone() };
            let mut seen = Vec::new();
            for (a, row) in m.iter().enumerate() {
                for (b, &c) in row.iter().enumerate() {
                    let key = (from[a], self.widths[i][b]);
                    if !seen.contains(&key) {
                        seen.push(key);
                        let _ = writeln!(out, "{i},{},{},{c}", layout(key.0), layout(key.1));
                    }
                }
            }
        }
        out
    }

    /// Total cost of a full assignment, transforms included.
    pub fn assignment_cost(&self, configs: &[usize]) -> u64 {
        let mut prev = 0;
        let mut total = 0;
        for (i, &j) in configs.iter().enumerate() {
            total += self.boundary[i][prev][j] + self.layer_cost[i][j];
            prev = j;
        }
        total
    }

    /// Per-layer cheapest candidates, ignoring transforms.
    pub fn greedy(&self) -> Vec<usize> {
        self.layer_cost
            .iter()
            .map(|c| (0..c.len()).min_by_key(|&j| (c[j], j)).unwrap_or(0))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub configs: Vec<usize>,
    pub total: u64,
}

/// Minimum-cost candidate per layer; ties resolve to the lowest index.
pub fn layout_dp(table: &CostTable) -> Result<Assignment> {
    let n = table.layer_cost.len();
    if n == 0 || table.layer_cost.iter().any(Vec::is_empty) {
        return Err(Error::EmptyCandidates("layout DP".into()));
    }
    let mut best: Vec<u64> = (0..table.layer_cost[0].len())
        .map(|j| table.boundary[0][0][j] + table.layer_cost[0][j])
        .collect();
    let mut back: Vec<Vec<usize>> = vec![vec![0; best.len()]];
    for i in 1..n {
        let mut next = Vec::with_capacity(table.layer_cost[i].len());
        let mut from = Vec::with_capacity(table.layer_cost[i].len());
        for j in 0..table.layer_cost[i].len() {
            let (p, c) = best
                .iter()
                .enumerate()
                .map(|(p, &b)| (p, b + table.boundary[i][p][j]))
                .min_by_key(|&(p, c)| (c, p))
                .expect("nonempty");
            next.push(c + table.layer_cost[i][j]);
            from.push(p);
        }
        best = next;
        back.push(from);
    }
    let (mut j, &total) = best.iter().enumerate().min_by_key(|&(j, &c)| (c, j)).expect("nonempty");
    let mut configs = vec![0; n];
    for i in (0..n).rev() {
        configs[i] = j;
        j = back[i][j];
    }
    Ok(Assignment { configs, total })
}

/// Human-readable DP result.
pub fn layout_report(table: &CostTable, a: &Assignment) -> String {
    let mut out = String::new();
    for (i, &j) in a.configs.iter().enumerate() {
        let prev = if i == 0 { 0 } else { a.configs[i - 1] };
        let _ = writeln!(
            out,
            "layer {i}: {} cost={} transform={}",
            table.labels[i][j], table.layer_cost[i][j], table.boundary[i][prev][j]
        );
    }
    let greedy = table.greedy();
    let _ = writeln!(out, "total={}", a.total);
    let _ = writeln!(out, "greedy_total={}", table.assignment_cost(&greedy));
    out
}
