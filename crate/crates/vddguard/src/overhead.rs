//! λ-based area accounting for the save-path hardware.
//!
//! Areas are in λ². A NAND2 is 40λ × 32λ, a DFF 80λ × 48λ. A MUX2 is taken
//! as four NAND2 equivalents, which is an assumption and is flagged in every
//! report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateKind, Netlist};

pub const NAND_AREA: f64 = 40.0 * 32.0;
pub const DFF_AREA: f64 = 80.0 * 48.0;
/// NAND2 equivalents assumed for one MUX2.
pub const MUX2_NAND_EQUIVALENTS: f64 = 4.0;

/// Note attached to every report.
pub const MUX2_ASSUMPTION: &str = "MUX2 area assumed to be 4 NAND2 equivalents (5120 λ²)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverheadError {
    #[error("unknown cell kind `{0}`")]
    UnknownCell(String),
    #[error("benchmark area must be positive, got {0}")]
    ZeroBenchmarkArea(f64),
    #[error("cell area for {0} must be positive")]
    NonPositiveArea(String),
}

/// Per-cell areas in λ².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellAreaModel {
    pub nand_lambda2: f64,
    pub dff_lambda2: f64,
    /// NAND2 equivalents per combinational kind. Missing kinds count as 1.
    #[serde(default)]
    pub nand_equivalents: BTreeMap<GateKind, f64>,
}

impl Default for CellAreaModel {
    fn default() -> Self {
        CellAreaModel {
            nand_lambda2: NAND_AREA,
            dff_lambda2: DFF_AREA,
            nand_equivalents: BTreeMap::from([(GateKind::Mux2, MUX2_NAND_EQUIVALENTS)]),
        }
    }
}

impl CellAreaModel {
    pub fn validate(&self) -> Result<(), OverheadError> {
        if !(self.nand_lambda2 > 0.0) {
            return Err(OverheadError::NonPositiveArea("NAND".into()));
        }
        if !(self.dff_lambda2 > 0.0) {
            return Err(OverheadError::NonPositiveArea("DFF".into()));
        }
        for (k, &v) in &self.nand_equivalents {
            if !(v > 0.0) {
                return Err(OverheadError::NonPositiveArea(k.name().into()));
            }
        }
        Ok(())
    }

    /// Area of one cell of `kind`.
    pub fn area(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::Dff => self.dff_lambda2,
            k => self.nand_equivalents.get(&k).copied().unwrap_or(1.0) * self.nand_lambda2,
        }
    }
}

/// The save path of the evaluated instance: 2 MUX2 and 7 DFF.
pub fn default_mitigation_cells() -> BTreeMap<String, u64> {
    BTreeMap::from([("MUX2".to_string(), 2), ("DFF".to_string(), 7)])
}

/// Total area of `cells`, keyed by cell kind name.
pub fn mitigation_area(model: &CellAreaModel, cells: &BTreeMap<String, u64>) -> Result<f64, OverheadError> {
    model.validate()?;
    let mut total = 0.0;
    for (name, &count) in cells {
        let kind = GateKind::from_name(name).ok_or_else(|| OverheadError::UnknownCell(name.clone()))?;
        total += count as f64 * model.area(kind);
    }
    Ok(total)
}

/// Area of every cell in `n`.
pub fn benchmark_area(n: &Netlist, model: &CellAreaModel) -> f64 {
    n.gates().iter().map(|g| model.area(g.kind)).sum()
}

/// `100 * mitigation / benchmark`.
pub fn overhead_percent(mitigation_area: f64, benchmark_area: f64) -> Result<f64, OverheadError> {
    if !(benchmark_area > 0.0) {
        return Err(OverheadError::ZeroBenchmarkArea(benchmark_area));
    }
    Ok(100.0 * mitigation_area / benchmark_area)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaSource {
    Computed,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub benchmark: String,
    pub gate_count: Option<usize>,
    pub dff_count: Option<usize>,
    pub mitigation_cells: BTreeMap<String, u64>,
    pub mitigation_area: f64,
    pub benchmark_area: f64,
    pub area_source: AreaSource,
    pub overhead_percent: f64,
    pub notes: Vec<String>,
}

/// Overhead of `cells` on a parsed netlist.
pub fn report_for_netlist(
    n: &Netlist,
    model: &CellAreaModel,
    cells: &BTreeMap<String, u64>,
) -> Result<OverheadReport, OverheadError> {
    let mitigation = mitigation_area(model, cells)?;
    let area = benchmark_area(n, model);
    let stats = n.stats();
    Ok(OverheadReport {
        benchmark: n.name().to_string(),
        gate_count: Some(stats.gate_count),
        dff_count: Some(stats.dff_count),
        mitigation_cells: cells.clone(),
        mitigation_area: mitigation,
        benchmark_area: area,
        area_source: AreaSource::Computed,
        overhead_percent: overhead_percent(mitigation, area)?,
        notes: vec![MUX2_ASSUMPTION.to_string()],
    })
}

/// Overhead from areas supplied by the caller, in any consistent unit.
pub fn report_for_areas(
    benchmark: &str,
    mitigation_area: f64,
    benchmark_area: f64,
    gate_count: Option<usize>,
) -> Result<OverheadReport, OverheadError> {
    Ok(OverheadReport {
        benchmark: benchmark.to_string(),
        gate_count,
        dff_count: None,
        mitigation_cells: BTreeMap::new(),
        mitigation_area,
        benchmark_area,
        area_source: AreaSource::External,
        overhead_percent: overhead_percent(mitigation_area, benchmark_area)?,
        notes: vec!["areas supplied externally".to_string()],
    })
}

/// Aligned text table with the columns Benchmark, Area, Area Overhead (%)
/// and Number of Gates, followed by any notes.
pub fn format_table(reports: &[OverheadReport]) -> String {
    let rows: Vec<[String; 4]> = reports
        .iter()
        .map(|r| {
            [
                r.benchmark.clone(),
                format!("{}", r.benchmark_area),
                format!("{:.2}", r.overhead_percent),
                r.gate_count.map_or("-".to_string(), |g| g.to_string()),
            ]
        })
        .collect();
    let header = ["Benchmark", "Area", "Area Overhead (%)", "Number of Gates"];
    let mut width = header.map(str::len);
    for row in &rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: [&str; 4], out: &mut String| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:>w1$}  {:>w2$}  {:>w3$}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = width[0],
            w1 = width[1],
            w2 = width[2],
            w3 = width[3]
        );
    };
    line(header, &mut out);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3]], &mut out);
    }
    let mut notes: Vec<&str> = reports.iter().flat_map(|r| r.notes.iter().map(String::as_str)).collect();
    notes.sort_unstable();
    notes.dedup();
    for n in notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    #[test]
    fn mitigation_examples() {
        let m = CellAreaModel::default();
        assert_eq!(mitigation_area(&m, &BTreeMap::new()).unwrap(), 0.0);
        assert_eq!(mitigation_area(&m, &default_mitigation_cells()).unwrap(), 37_120.0);
        let one_dff = BTreeMap::from([("DFF".to_string(), 1)]);
        assert_eq!(mitigation_area(&m, &one_dff).unwrap(), 3840.0);
        let bad = BTreeMap::from([("LATCH".to_string(), 1)]);
        assert_eq!(mitigation_area(&m, &bad), Err(OverheadError::UnknownCell("LATCH".into())));
    }

    #[test]
    fn benchmark_examples() {
        let m = CellAreaModel::default();
        let one = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(c)\nc = NAND(a, b)\n").unwrap();
        assert_eq!(benchmark_area(&one, &m), 1280.0);
        let mut src = String::from("INPUT(a)\nOUTPUT(q7)\nq1 = DFF(a)\n");
        for i in 2..=7 {
            src.push_str(&format!("q{i} = DFF(q{})\n", i - 1));
        }
        assert_eq!(benchmark_area(&parse_bench(&src).unwrap(), &m), 26_880.0);
    }

    #[test]
    fn percent_examples() {
        assert_eq!(overhead_percent(5.0, 5.0).unwrap(), 100.0);
        assert!(overhead_percent(1.0, 0.0).is_err());
    }
}
