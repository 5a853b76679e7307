//! Gate-level netlists in ISCAS `.bench` form.
//!
//! A [`Netlist`] is immutable once built. It is produced either by
//! [`parse_bench`] or by a [`NetlistBuilder`], and both paths run the same
//! validation: arity, single drivers, resolvable references and an acyclic
//! combinational core.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a net inside a [`Netlist`].
pub type NetId = usize;
/// Index of a gate inside a [`Netlist`].
pub type GateId = usize;

/// Name of the reserved save-select net.
///
/// `SEL` is never driven by a gate. The simulator derives it from the
/// disruptive-zone VDD schedule: it is 1 for a cycle only when that zone was
/// powered for the whole cycle.
pub const SEL_NET: &str = "SEL";

/// Cell kinds understood by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
    Dff,
    /// `MUX2(sel, a, b)` yields `a` when `sel` is 1 and `b` when it is 0.
    Mux2,
}

impl GateKind {
    pub const ALL: [GateKind; 10] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
        GateKind::Dff,
        GateKind::Mux2,
    ];

    /// Case-insensitive lookup. Both `BUF` and `BUFF` name a buffer.
    pub fn from_name(name: &str) -> Option<GateKind> {
        let kind = match name.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            "DFF" => GateKind::Dff,
            "MUX2" | "MUX" => GateKind::Mux2,
            _ => return None,
        };
        Some(kind)
    }

    /// Canonical spelling used by the serializer.
    pub fn name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUFF",
            GateKind::Dff => "DFF",
            GateKind::Mux2 => "MUX2",
        }
    }

    pub fn arity(self) -> Arity {
        match self {
            GateKind::Not | GateKind::Buf | GateKind::Dff => Arity::Exactly(1),
            GateKind::Mux2 => Arity::Exactly(3),
            _ => Arity::AtLeast(2),
        }
    }

    pub fn is_sequential(self) -> bool {
        self == GateKind::Dff
    }

    /// DFF and MUX2 cells implement the save path and always sit in the
    /// non-disruptive zone.
    pub fn forced_zone(self) -> Option<Zone> {
        match self {
            GateKind::Dff | GateKind::Mux2 => Some(Zone::NonDisruptive),
            _ => None,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "exactly {k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

/// Power domain of a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Zone {
    /// Combinational logic whose supply is duty-cycled.
    Disruptive,
    /// Always-powered logic holding state and the save path.
    NonDisruptive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub output: NetId,
    pub kind: GateKind,
    pub inputs: Vec<NetId>,
    pub zone: Zone,
}

/// What drives a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input,
    Gate(GateId),
    /// The derived [`SEL_NET`].
    Sel,
}

/// One diagnostic from parsing or building a netlist.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGateKind { line: usize, kind: String },
    #[error("line {line}: {kind} on `{net}` takes {expected} inputs, found {found}")]
    Arity {
        line: usize,
        net: String,
        kind: GateKind,
        expected: Arity,
        found: usize,
    },
    #[error("line {line}: net `{net}` already has a driver")]
    DuplicateDriver { line: usize, net: String },
    #[error("line {line}: `{net}` declared more than once")]
    DuplicateDeclaration { line: usize, net: String },
    #[error("line {line}: net `{net}` is never driven")]
    DanglingNet { line: usize, net: String },
    #[error("line {line}: `{net}` is reserved for the derived save-select signal")]
    ReservedNet { line: usize, net: String },
    #[error("combinational cycle through {}", .nets.join(", "))]
    CombinationalCycle { nets: Vec<String> },
}

impl NetlistError {
    /// Source line of the diagnostic, when it has one.
    pub fn line(&self) -> Option<usize> {
        match self {
            NetlistError::Syntax { line, .. }
            | NetlistError::UnknownGateKind { line, .. }
            | NetlistError::Arity { line, .. }
            | NetlistError::DuplicateDriver { line, .. }
            | NetlistError::DuplicateDeclaration { line, .. }
            | NetlistError::DanglingNet { line, .. }
            | NetlistError::ReservedNet { line, .. } => Some(*line),
            NetlistError::CombinationalCycle { .. } => None,
        }
    }
}

/// Every diagnostic found in a rejected source, at most one per line.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub diagnostics: Vec<NetlistError>,
}

impl ParseError {
    fn single(e: NetlistError) -> Self {
        ParseError { diagnostics: vec![e] }
    }

    pub fn first(&self) -> &NetlistError {
        &self.diagnostics[0]
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.diagnostics.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Counts reported by [`Netlist::stats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetlistStats {
    /// Combinational gates, MUX2 cells included, DFFs excluded.
    pub gate_count: usize,
    pub dff_count: usize,
    pub input_count: usize,
    pub output_count: usize,
    pub net_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    nets: Vec<String>,
    net_index: HashMap<String, NetId>,
    drivers: Vec<Driver>,
    inputs: Vec<NetId>,
    outputs: Vec<NetId>,
    gates: Vec<Gate>,
    fanout: Vec<Vec<GateId>>,
    topo: Vec<GateId>,
    sel: Option<NetId>,
    warnings: Vec<String>,
}

impl Netlist {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn inputs(&self) -> &[NetId] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[NetId] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: GateId) -> &Gate {
        &self.gates[id]
    }

    pub fn net_count(&self) -> usize {
        self.nets.len()
    }

    pub fn net_name(&self, id: NetId) -> &str {
        &self.nets[id]
    }

    pub fn net_id(&self, name: &str) -> Option<NetId> {
        self.net_index.get(name).copied()
    }

    pub fn driver(&self, net: NetId) -> Driver {
        self.drivers[net]
    }

    /// Gates reading `net`, in gate order. A gate reading the net twice
    /// appears twice.
    pub fn fanout(&self, net: NetId) -> &[GateId] {
        &self.fanout[net]
    }

    /// The derived save-select net, if any gate references it.
    pub fn sel_net(&self) -> Option<NetId> {
        self.sel
    }

    pub fn is_output(&self, net: NetId) -> bool {
        self.outputs.contains(&net)
    }

    /// Zone of the gate driving `net`. Primary inputs and `SEL` are treated
    /// as non-disruptive.
    pub fn net_zone(&self, net: NetId) -> Zone {
        match self.drivers[net] {
            Driver::Gate(g) => self.gates[g].zone,
            Driver::Input | Driver::Sel => Zone::NonDisruptive,
        }
    }

    /// Non-fatal findings, e.g. gate outputs nobody reads.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Combinational gates in evaluation order. DFF outputs, primary inputs
    /// and `SEL` are sources. Ties are broken by gate index, so the order is
    /// deterministic.
    pub fn topo_order(&self) -> &[GateId] {
        &self.topo
    }

    pub fn dffs(&self) -> impl Iterator<Item = GateId> + '_ {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| g.kind.is_sequential())
            .map(|(i, _)| i)
    }

    pub fn stats(&self) -> NetlistStats {
        let dff_count = self.dffs().count();
        NetlistStats {
            gate_count: self.gates.len() - dff_count,
            dff_count,
            input_count: self.inputs.len(),
            output_count: self.outputs.len(),
            net_count: self.nets.len(),
        }
    }

    /// Held copies created by the save path: pairs `(original, saved)` where
    /// `saved = DFF(m)` and `m = MUX2(SEL, original, saved)`.
    pub fn saved_copies(&self) -> Vec<(NetId, NetId)> {
        let Some(sel) = self.sel else {
            return Vec::new();
        };
        let mut pairs = Vec::new();
        for g in &self.gates {
            if g.kind != GateKind::Dff {
                continue;
            }
            if let Driver::Gate(m) = self.drivers[g.inputs[0]] {
                let mux = &self.gates[m];
                if mux.kind == GateKind::Mux2 && mux.inputs[0] == sel && mux.inputs[2] == g.output {
                    pairs.push((mux.inputs[1], g.output));
                }
            }
        }
        pairs
    }

    /// Re-open the netlist for editing.
    pub fn to_builder(&self) -> NetlistBuilder {
        let mut b = NetlistBuilder::new(self.name.clone());
        for &i in &self.inputs {
            b.input(&self.nets[i]);
        }
        for &o in &self.outputs {
            b.output(&self.nets[o]);
        }
        for g in &self.gates {
            let ins: Vec<&str> = g.inputs.iter().map(|&n| self.nets[n].as_str()).collect();
            b.gate(&self.nets[g.output], g.kind, &ins);
            if g.kind.forced_zone().is_none() && g.zone == Zone::NonDisruptive {
                b.zone(&self.nets[g.output], Zone::NonDisruptive);
            }
        }
        b
    }

    /// Canonical `.bench` text: INPUT lines, OUTPUT lines, DFFs, then the
    /// combinational gates in topological order. Gates placed in the
    /// non-disruptive zone by hand are listed in a trailing
    /// `#@nondisruptive` directive.
    pub fn to_bench(&self) -> String {
        let mut out = String::new();
        for &i in &self.inputs {
            out.push_str(&format!("INPUT({})\n", self.nets[i]));
        }
        out.push('\n');
        for &o in &self.outputs {
            out.push_str(&format!("OUTPUT({})\n", self.nets[o]));
        }
        out.push('\n');
        let order = self.dffs().chain(self.topo.iter().copied());
        for g in order {
            let gate = &self.gates[g];
            let ins: Vec<&str> = gate.inputs.iter().map(|&n| self.nets[n].as_str()).collect();
            out.push_str(&format!(
                "{} = {}({})\n",
                self.nets[gate.output],
                gate.kind.name(),
                ins.join(", ")
            ));
        }
        let manual_nd: Vec<&str> = self
            .topo
            .iter()
            .map(|&g| &self.gates[g])
            .filter(|g| g.kind.forced_zone().is_none() && g.zone == Zone::NonDisruptive)
            .map(|g| self.nets[g.output].as_str())
            .collect();
        if !manual_nd.is_empty() {
            out.push_str(&format!("#@nondisruptive {}\n", manual_nd.join(", ")));
        }
        out
    }
}

/// Incremental construction of a [`Netlist`]. Nothing is checked until
/// [`NetlistBuilder::build`].
#[derive(Debug, Clone, Default)]
pub struct NetlistBuilder {
    name: String,
    inputs: Vec<(String, usize)>,
    outputs: Vec<(String, usize)>,
    gates: Vec<GateDecl>,
    zones: Vec<(String, Zone, usize)>,
}

#[derive(Debug, Clone)]
struct GateDecl {
    output: String,
    kind: GateKind,
    inputs: Vec<String>,
    line: usize,
}

impl NetlistBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        NetlistBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn input(&mut self, net: &str) -> &mut Self {
        let line = self.next_line();
        self.inputs.push((net.to_string(), line));
        self
    }

    pub fn output(&mut self, net: &str) -> &mut Self {
        let line = self.next_line();
        self.outputs.push((net.to_string(), line));
        self
    }

    pub fn gate(&mut self, output: &str, kind: GateKind, inputs: &[&str]) -> &mut Self {
        let line = self.next_line();
        self.gates.push(GateDecl {
            output: output.to_string(),
            kind,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            line,
        });
        self
    }

    /// Place the gate driving `net` in `zone`. Ignored for DFF and MUX2.
    pub fn zone(&mut self, net: &str, zone: Zone) -> &mut Self {
        let line = self.next_line();
        self.zones.push((net.to_string(), zone, line));
        self
    }

    /// Builder calls are numbered like source lines so diagnostics stay
    /// meaningful.
    fn next_line(&self) -> usize {
        self.inputs.len() + self.outputs.len() + self.gates.len() + self.zones.len() + 1
    }

    pub fn build(&self) -> Result<Netlist, ParseError> {
        assemble(
            &self.name,
            &self.inputs,
            &self.outputs,
            &self.gates,
            &self.zones,
        )
    }
}

fn assemble(
    name: &str,
    inputs: &[(String, usize)],
    outputs: &[(String, usize)],
    decls: &[GateDecl],
    zones: &[(String, Zone, usize)],
) -> Result<Netlist, ParseError> {
    let mut diags: Vec<NetlistError> = Vec::new();
    let mut nets: Vec<String> = Vec::new();
    let mut net_index: HashMap<String, NetId> = HashMap::new();
    let mut drivers: Vec<Driver> = Vec::new();

    for (net, line) in inputs {
        if net == SEL_NET {
            diags.push(NetlistError::ReservedNet {
                line: *line,
                net: net.clone(),
            });
        } else if net_index.contains_key(net) {
            diags.push(NetlistError::DuplicateDeclaration {
                line: *line,
                net: net.clone(),
            });
        } else {
            net_index.insert(net.clone(), nets.len());
            nets.push(net.clone());
            drivers.push(Driver::Input);
        }
    }

    // Gates whose declaration line was rejected are left out entirely, so
    // their inputs are not checked again.
    let mut kept: Vec<&GateDecl> = Vec::new();
    let mut rejected: BTreeSet<&str> = BTreeSet::new();
    for d in decls {
        if !d.kind.arity().accepts(d.inputs.len()) {
            rejected.insert(&d.output);
            diags.push(NetlistError::Arity {
                line: d.line,
                net: d.output.clone(),
                kind: d.kind,
                expected: d.kind.arity(),
                found: d.inputs.len(),
            });
        } else if d.output == SEL_NET {
            diags.push(NetlistError::ReservedNet {
                line: d.line,
                net: d.output.clone(),
            });
        } else if net_index.contains_key(&d.output) {
            diags.push(NetlistError::DuplicateDriver {
                line: d.line,
                net: d.output.clone(),
            });
        } else {
            net_index.insert(d.output.clone(), nets.len());
            nets.push(d.output.clone());
            drivers.push(Driver::Gate(kept.len()));
            kept.push(d);
        }
    }

    let mut sel: Option<NetId> = None;
    let mut gates: Vec<Gate> = Vec::with_capacity(kept.len());
    for d in &kept {
        let mut ins = Vec::with_capacity(d.inputs.len());
        let mut bad = None;
        for name in &d.inputs {
            match net_index.get(name) {
                Some(&id) => ins.push(id),
                None if name == SEL_NET => {
                    let id = *sel.get_or_insert_with(|| {
                        let id = nets.len();
                        nets.push(SEL_NET.to_string());
                        drivers.push(Driver::Sel);
                        id
                    });
                    net_index.insert(SEL_NET.to_string(), id);
                    ins.push(id);
                }
                None => {
                    bad = Some(name.clone());
                    break;
                }
            }
        }
        if let Some(net) = bad {
            if !rejected.contains(net.as_str()) {
                diags.push(NetlistError::DanglingNet { line: d.line, net });
            }
            continue;
        }
        let output = net_index[&d.output];
        gates.push(Gate {
            output,
            kind: d.kind,
            inputs: ins,
            zone: d.kind.forced_zone().unwrap_or(Zone::Disruptive),
        });
    }

    let mut seen_outputs = BTreeSet::new();
    let mut outs = Vec::with_capacity(outputs.len());
    for (net, line) in outputs {
        match net_index.get(net) {
            Some(&id) if seen_outputs.insert(id) => outs.push(id),
            Some(_) => diags.push(NetlistError::DuplicateDeclaration {
                line: *line,
                net: net.clone(),
            }),
            None if rejected.contains(net.as_str()) => {}
            None => diags.push(NetlistError::DanglingNet {
                line: *line,
                net: net.clone(),
            }),
        }
    }

    for (net, zone, line) in zones {
        match net_index.get(net).map(|&id| drivers[id]) {
            Some(Driver::Gate(g)) => {
                if gates.len() > g && gates[g].kind.forced_zone().is_none() {
                    gates[g].zone = *zone;
                }
            }
            _ => diags.push(NetlistError::DanglingNet {
                line: *line,
                net: net.clone(),
            }),
        }
    }

    if !diags.is_empty() {
        diags.sort_by_key(|d| d.line());
        return Err(ParseError { diagnostics: diags });
    }

    let mut fanout = vec![Vec::new(); nets.len()];
    for (gi, g) in gates.iter().enumerate() {
        for &i in &g.inputs {
            fanout[i].push(gi);
        }
    }

    let topo = kahn(&gates, &drivers, &fanout)
        .map_err(|cyc| ParseError::single(cycle_error(&gates, &drivers, &nets, &cyc)))?;

    let mut warnings = Vec::new();
    for g in &gates {
        if fanout[g.output].is_empty() && !seen_outputs.contains(&g.output) {
            warnings.push(format!("net `{}` is driven but never read", nets[g.output]));
        }
    }

    let input_ids = inputs.iter().map(|(n, _)| net_index[n]).collect();
    Ok(Netlist {
        name: name.to_string(),
        nets,
        net_index,
        drivers,
        inputs: input_ids,
        outputs: outs,
        gates,
        fanout,
        topo,
        sel,
        warnings,
    })
}

/// Kahn's algorithm over the combinational gates. On failure returns the
/// gates that could not be scheduled.
fn kahn(gates: &[Gate], drivers: &[Driver], fanout: &[Vec<GateId>]) -> Result<Vec<GateId>, Vec<GateId>> {
    let is_comb = |g: GateId| !gates[g].kind.is_sequential();
    let mut pending = vec![0usize; gates.len()];
    let mut heap = BinaryHeap::new();
    for (gi, g) in gates.iter().enumerate() {
        if g.kind.is_sequential() {
            continue;
        }
        pending[gi] = g
            .inputs
            .iter()
            .filter(|&&n| matches!(drivers[n], Driver::Gate(d) if is_comb(d)))
            .count();
        if pending[gi] == 0 {
            heap.push(Reverse(gi));
        }
    }
    let comb_total = gates.iter().filter(|g| !g.kind.is_sequential()).count();
    let mut order = Vec::with_capacity(comb_total);
    while let Some(Reverse(gi)) = heap.pop() {
        order.push(gi);
        for &succ in &fanout[gates[gi].output] {
            if is_comb(succ) {
                pending[succ] -= 1;
                if pending[succ] == 0 {
                    heap.push(Reverse(succ));
                }
            }
        }
    }
    if order.len() == comb_total {
        Ok(order)
    } else {
        Err((0..gates.len()).filter(|&g| is_comb(g) && pending[g] > 0).collect())
    }
}

/// Names the nets of the lowest-indexed strongly connected component among
/// the gates Kahn could not schedule.
fn cycle_error(gates: &[Gate], drivers: &[Driver], nets: &[String], stuck: &[GateId]) -> NetlistError {
    let in_stuck: BTreeSet<GateId> = stuck.iter().copied().collect();
    let preds = |g: GateId| -> Vec<GateId> {
        gates[g]
            .inputs
            .iter()
            .filter_map(|&n| match drivers[n] {
                Driver::Gate(d) if in_stuck.contains(&d) => Some(d),
                _ => None,
            })
            .collect()
    };
    let sccs = tarjan(stuck, preds);
    let cyclic = sccs
        .into_iter()
        .filter(|c| c.len() > 1 || gates[c[0]].inputs.contains(&gates[c[0]].output))
        .min_by_key(|c| c[0])
        .unwrap_or_else(|| stuck.to_vec());
    let mut names: Vec<String> = cyclic.iter().map(|&g| nets[gates[g].output].clone()).collect();
    names.sort();
    NetlistError::CombinationalCycle { nets: names }
}

/// Iterative Tarjan. Each returned component is sorted ascending.
fn tarjan(nodes: &[GateId], succ: impl Fn(GateId) -> Vec<GateId>) -> Vec<Vec<GateId>> {
    let mut index: HashMap<GateId, usize> = HashMap::new();
    let mut low: HashMap<GateId, usize> = HashMap::new();
    let mut on_stack: BTreeSet<GateId> = BTreeSet::new();
    let mut stack: Vec<GateId> = Vec::new();
    let mut out = Vec::new();
    let mut next = 0usize;

    for &root in nodes {
        if index.contains_key(&root) {
            continue;
        }
        let mut work: Vec<(GateId, Vec<GateId>, usize)> = vec![(root, succ(root), 0)];
        index.insert(root, next);
        low.insert(root, next);
        next += 1;
        stack.push(root);
        on_stack.insert(root);

        while let Some((v, edges, pos)) = work.last_mut() {
            let v = *v;
            if *pos < edges.len() {
                let w = edges[*pos];
                *pos += 1;
                if let std::collections::hash_map::Entry::Vacant(e) = index.entry(w) {
                    e.insert(next);
                    low.insert(w, next);
                    next += 1;
                    stack.push(w);
                    on_stack.insert(w);
                    let ws = succ(w);
                    work.push((w, ws, 0));
                } else if on_stack.contains(&w) {
                    let lw = index[&w];
                    let lv = low.get_mut(&v).unwrap();
                    *lv = (*lv).min(lw);
                }
                continue;
            }
            work.pop();
            if let Some((parent, _, _)) = work.last() {
                let lv = low[&v];
                let lp = low.get_mut(parent).unwrap();
                *lp = (*lp).min(lv);
            }
            if low[&v] == index[&v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack.remove(&w);
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                out.push(comp);
            }
        }
    }
    out
}

/// Parse `.bench` text. The netlist is named `top`; use
/// [`parse_bench_named`] to pick a name.
pub fn parse_bench(text: &str) -> Result<Netlist, ParseError> {
    parse_bench_named("top", text)
}

pub fn parse_bench_named(name: &str, text: &str) -> Result<Netlist, ParseError> {
    let mut b = NetlistBuilder::new(name);
    let mut diags = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        match parse_line(line, line_no) {
            Ok(Statement::Empty) => {}
            Ok(Statement::Input(n)) => b.inputs.push((n, line_no)),
            Ok(Statement::Output(n)) => b.outputs.push((n, line_no)),
            Ok(Statement::Gate { output, kind, inputs }) => b.gates.push(GateDecl {
                output,
                kind,
                inputs,
                line: line_no,
            }),
            Ok(Statement::Zone(nets, zone)) => {
                for n in nets {
                    b.zones.push((n, zone, line_no));
                }
            }
            Err(e) => diags.push(e),
        }
    }

    if !diags.is_empty() {
        return Err(ParseError { diagnostics: diags });
    }
    b.build()
}

enum Statement {
    Empty,
    Input(String),
    Output(String),
    Gate {
        output: String,
        kind: GateKind,
        inputs: Vec<String>,
    },
    Zone(Vec<String>, Zone),
}

fn is_name_char(c: char) -> bool {
    !(c.is_whitespace() || matches!(c, '(' | ')' | ',' | '=' | '#'))
}

struct Cursor {
    chars: Vec<(usize, char)>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(src: &str, line: usize) -> Self {
        Cursor {
            chars: src.chars().enumerate().collect(),
            pos: 0,
            line,
        }
    }

    fn column(&self) -> usize {
        self.chars.get(self.pos).map(|&(i, _)| i + 1).unwrap_or(self.chars.len() + 1)
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn error(&self, message: impl Into<String>) -> NetlistError {
        NetlistError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn name(&mut self, what: &str) -> Result<String, NetlistError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && is_name_char(self.chars[self.pos].1) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.error(format!("expected {what}")));
        }
        Ok(self.chars[start..self.pos].iter().map(|&(_, c)| c).collect())
    }

    fn expect(&mut self, c: char) -> Result<(), NetlistError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn end(&mut self) -> Result<(), NetlistError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.error("unexpected trailing text")),
        }
    }
}

fn parse_line(line: &str, line_no: usize) -> Result<Statement, NetlistError> {
    let trimmed = line.trim_start();
    if let Some(directive) = trimmed.strip_prefix("#@") {
        return Ok(parse_directive(directive));
    }
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    if code.trim().is_empty() {
        return Ok(Statement::Empty);
    }

    let mut cur = Cursor::new(code, line_no);
    let head = cur.name("a net name or INPUT/OUTPUT")?;
    match cur.peek() {
        Some('(') => {
            let upper = head.to_ascii_uppercase();
            if upper != "INPUT" && upper != "OUTPUT" {
                return Err(NetlistError::Syntax {
                    line: line_no,
                    column: code.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1,
                    message: format!("expected INPUT or OUTPUT, found `{head}`"),
                });
            }
            cur.expect('(')?;
            let net = cur.name("a net name")?;
            cur.expect(')')?;
            cur.end()?;
            Ok(if upper == "INPUT" {
                Statement::Input(net)
            } else {
                Statement::Output(net)
            })
        }
        Some('=') => {
            cur.expect('=')?;
            let kind_name = cur.name("a gate kind")?;
            cur.expect('(')?;
            let mut inputs = vec![cur.name("a net name")?];
            while cur.peek() == Some(',') {
                cur.pos += 1;
                inputs.push(cur.name("a net name")?);
            }
            cur.expect(')')?;
            cur.end()?;
            let kind = GateKind::from_name(&kind_name).ok_or_else(|| NetlistError::UnknownGateKind {
                line: line_no,
                kind: kind_name.clone(),
            })?;
            Ok(Statement::Gate {
                output: head,
                kind,
                inputs,
            })
        }
        _ => Err(cur.error("expected `=` or `(`")),
    }
}

/// `#@nondisruptive a, b` places gates in the always-on zone. Other
/// directives belong to other readers and are skipped here.
fn parse_directive(body: &str) -> Statement {
    let mut parts = body.splitn(2, char::is_whitespace);
    let word = parts.next().unwrap_or("");
    let rest = parts.next().unwrap_or("");
    let zone = match word.to_ascii_lowercase().as_str() {
        "nondisruptive" => Zone::NonDisruptive,
        "disruptive" => Zone::Disruptive,
        _ => return Statement::Empty,
    };
    let nets = rest
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    Statement::Zone(nets, zone)
}

/// Check that `order` lists every combinational gate once, after all of its
/// combinational drivers.
pub fn check_topo_order(n: &Netlist, order: &[GateId]) -> bool {
    let comb: Vec<GateId> = (0..n.gates().len())
        .filter(|&g| !n.gate(g).kind.is_sequential())
        .collect();
    if order.len() != comb.len() {
        return false;
    }
    let mut placed = vec![false; n.gates().len()];
    for &g in order {
        if g >= placed.len() || placed[g] || n.gate(g).kind.is_sequential() {
            return false;
        }
        for &i in &n.gate(g).inputs {
            if let Driver::Gate(d) = n.driver(i) {
                if !n.gate(d).kind.is_sequential() && !placed[d] {
                    return false;
                }
            }
        }
        placed[g] = true;
    }
    true
}
