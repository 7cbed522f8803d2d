//! Reading trace and AVAR CSV files back.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use chronoens::avar::{self, AvarCurve, AvarKind};
use chronoens::sim::{write_trace_row, TRACE_HEADER};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub entity: String,
    pub x1_s: f64,
    pub x2: f64,
    pub u: Option<f64>,
}

pub fn read_rows<R: Read>(r: R) -> CliResult<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != TRACE_HEADER {
        return Err(CliError::Domain(format!("trace header must be {TRACE_HEADER:?}")));
    }
    rdr.deserialize().map(|r| r.map_err(CliError::from)).collect()
}

pub fn write_rows<W: Write>(rows: &[TraceRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for r in rows {
        write_trace_row(&mut w, r.k, &r.entity, r.x1_s, r.x2, r.u)?;
    }
    Ok(())
}

/// Phase series per entity, in order of first appearance.
pub struct Phases {
    pub names: Vec<String>,
    series: BTreeMap<String, Vec<f64>>,
}

impl Phases {
    pub fn from_rows(rows: &[TraceRow]) -> CliResult<Self> {
        let mut names = Vec::new();
        let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in rows {
            let s = series.entry(r.entity.clone()).or_insert_with(|| {
                names.push(r.entity.clone());
                Vec::new()
            });
            if r.k != s.len() {
                return Err(CliError::Domain(format!(
                    "trace rows for {} are not consecutive at k = {}",
                    r.entity, r.k
                )));
            }
            s.push(r.x1_s);
        }
        Ok(Self { names, series })
    }

    pub fn get(&self, entity: &str) -> CliResult<&[f64]> {
        self.series
            .get(entity)
            .map(Vec::as_slice)
            .ok_or_else(|| CliError::Domain(format!("unknown entity {entity:?}")))
    }

    pub fn with_prefix(&self, prefix: &str) -> Vec<String> {
        self.names
            .iter()
            .filter(|n| n.strip_prefix(prefix).is_some_and(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit())))
            .cloned()
            .collect()
    }

    /// Pointwise mean phase of all `gacN` entities.
    pub fn gac_mean(&self) -> CliResult<Vec<f64>> {
        let gacs = self.with_prefix("gac");
        if gacs.is_empty() {
            return Err(CliError::Domain("trace has no gac rows".into()));
        }
        let len = self.get(&gacs[0])?.len();
        let mut m = vec![0.0; len];
        for name in &gacs {
            let s = self.get(name)?;
            if s.len() != len {
                return Err(CliError::Domain("gac series differ in length".into()));
            }
            for (a, b) in m.iter_mut().zip(s) {
                *a += b / gacs.len() as f64;
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Deserialize)]
struct AvarRow {
    tau_s: f64,
    avar: f64,
    entity: String,
    kind: String,
}

/// Parses `tau_s,avar,entity,kind` rows, grouping consecutive rows with the
/// same entity and kind into one curve.
pub fn read_avar_csv<R: Read>(r: R) -> CliResult<Vec<AvarCurve>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != avar::CSV_HEADER {
        return Err(CliError::Domain(format!("AVAR header must be {:?}", avar::CSV_HEADER)));
    }
    let mut curves: Vec<AvarCurve> = Vec::new();
    for row in rdr.deserialize() {
        let row: AvarRow = row?;
        let kind = AvarKind::parse(&row.kind)?;
        match curves.last_mut() {
            Some(c) if c.entity == row.entity && c.kind == kind => c.points.push((row.tau_s, row.avar)),
            _ => curves.push(AvarCurve {
                entity: row.entity,
                kind,
                points: vec![(row.tau_s, row.avar)],
            }),
        }
    }
    Ok(curves)
}
