use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::emit::{CURVES_FILE, METHOD_SEPARATOR, RECORD_FILE, VERDICTS_FILE};
use super::run::ResultRecord;
use crate::diagnostics::{decide, Condition, ConvergenceCurve, Decision, Thresholds};
use crate::error::{Error, Result};

/// A stored verdict next to the one re-derived from the stored curves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub scenario: String,
    pub condition: Condition,
    pub f_id: String,
    pub stored: String,
    pub derived: String,
}

impl ReportRow {
    pub fn agrees(&self) -> bool {
        self.stored == self.derived
    }
}

fn parse_number(s: &str) -> Result<f64> {
    s.parse().map_err(|e| Error::InvalidArgument(format!("bad number '{s}': {e}")))
}

/// Re-derive every verdict in an output directory from its curves file,
/// using the thresholds stored in the record (defaults if it is absent).
pub fn report(dir: &Path) -> Result<Vec<ReportRow>> {
    let record_path = dir.join(RECORD_FILE);
    let thresholds = if record_path.exists() {
        let rec: ResultRecord = serde_json::from_str(&std::fs::read_to_string(record_path)?)?;
        rec.config.thresholds
    } else {
        Thresholds::default()
    };

    // (condition, f_id) -> statistic tag -> curve
    let mut curves: BTreeMap<(String, String), BTreeMap<String, ConvergenceCurve>> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(dir.join(CURVES_FILE))?;
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).ok_or_else(|| Error::InvalidArgument(format!("short curves row: {row:?}")));
        let (tag, method) = field(6)?
            .split_once(METHOD_SEPARATOR)
            .ok_or_else(|| Error::InvalidArgument(format!("method column without a statistic tag: {row:?}")))?;
        let key = (field(1)?.to_string(), field(2)?.to_string());
        let c = curves.entry(key).or_default().entry(tag.to_string()).or_insert_with(|| ConvergenceCurve {
            f_id: row[2].to_string(),
            statistic: tag.to_string(),
            grid: Vec::new(),
            values: Vec::new(),
            stderr: Vec::new(),
            method: method.to_string(),
        });
        c.grid.push(field(3)?.parse().map_err(|e| Error::InvalidArgument(format!("bad index: {e}")))?);
        c.values.push(parse_number(field(4)?)?);
        c.stderr.push(parse_number(field(5)?)?);
    }

    let mut out = Vec::new();
    let mut reader = csv::Reader::from_path(dir.join(VERDICTS_FILE))?;
    for row in reader.records() {
        let row = row?;
        let (scenario, condition, f_id, stored) = (&row[0], &row[1], &row[2], &row[3]);
        let cond = Condition::parse(condition)?;
        let derived = match curves.get(&(condition.to_string(), f_id.to_string())) {
            _ if stored == "error" => "error".to_string(),
            Some(map) => {
                let evidence: Vec<ConvergenceCurve> = map
                    .values()
                    .cloned()
                    .map(|c| ConvergenceCurve::new(&c.f_id, &c.statistic, c.grid, c.values, c.stderr, &c.method))
                    .collect::<Result<_>>()?;
                decide(cond, &evidence, &thresholds).as_str().to_string()
            }
            None => Decision::Inconclusive.as_str().to_string(),
        };
        out.push(ReportRow { scenario: scenario.into(), condition: cond, f_id: f_id.into(), stored: stored.into(), derived });
    }
    Ok(out)
}
