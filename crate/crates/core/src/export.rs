//! Flat row types for CSV and JSON output.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicProb;
use crate::error::Result;
use crate::model::{JointTable, MaxDist, PosDist};

/// One exact probability. Marginal rows leave the unused coordinate empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbRow {
    pub n: u64,
    pub x: Option<u64>,
    pub a: Option<u64>,
    /// Decimal digits; may exceed 64 bits.
    pub numerator: String,
    pub log2_denominator: u64,
    pub float_value: f64,
}

impl ProbRow {
    fn new(n: u64, x: Option<u64>, a: Option<u64>, p: &DyadicProb) -> Self {
        Self {
            n,
            x,
            a,
            numerator: p.numerator().to_string(),
            log2_denominator: p.log2_denominator(),
            float_value: p.to_f64(),
        }
    }
}

pub fn joint_rows(table: &JointTable) -> Vec<ProbRow> {
    table
        .entries()
        .map(|((x, a), p)| ProbRow::new(table.n(), Some(x), Some(a), &p))
        .collect()
}

pub fn position_rows(dist: &PosDist) -> Vec<ProbRow> {
    dist.iter()
        .filter(|(_, p)| !p.is_zero())
        .map(|(x, p)| ProbRow::new(dist.n(), Some(x), None, p))
        .collect()
}

pub fn max_rows(dist: &MaxDist) -> Vec<ProbRow> {
    dist.iter()
        .filter(|(_, p)| !p.is_zero())
        .map(|(a, p)| ProbRow::new(dist.n(), None, Some(a), p))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QRoute {
    Dp,
    Trig,
}

impl std::fmt::Display for QRoute {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QRoute::Dp => "dp",
            QRoute::Trig => "trig",
        })
    }
}

/// `Q_N(a)` from either route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub a: u64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub route: QRoute,
}

pub fn q_rows<P>(dist: &MaxDist<P>, route: QRoute, value: impl Fn(&P) -> f64) -> Vec<QRow> {
    dist.iter()
        .map(|(a, p)| QRow {
            n: dist.n(),
            a,
            q: value(p),
            route,
        })
        .collect()
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer
        .flush()
        .map_err(|e| crate::Error::Serialize(e.to_string()))?;
    Ok(())
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
