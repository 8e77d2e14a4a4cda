//! Flat result rows and their CSV encoding.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::harness::SweepPoint;

pub const CSV_HEADER: &str =
    "policy,n,m,eta,rate,sigma2,ps_dbw,pr_dbw,schedule,seed,messages,outages,p_out,ci_halfwidth";

/// One estimate with the coordinates that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: String,
    pub n: usize,
    /// Empty for SRS.
    pub m: Option<usize>,
    pub eta: f64,
    pub rate: f64,
    pub sigma2: f64,
    pub ps_dbw: f64,
    pub pr_dbw: f64,
    pub schedule: String,
    pub seed: u64,
    pub messages: usize,
    pub outages: usize,
    pub p_out: f64,
    pub ci_halfwidth: f64,
}

impl From<&SweepPoint> for ResultRow {
    fn from(p: &SweepPoint) -> Self {
        let c = &p.config;
        Self {
            policy: c.policy.name().to_string(),
            n: c.n_relays,
            m: c.policy.m(),
            eta: c.eta,
            rate: c.target_rate,
            sigma2: c.noise_var,
            ps_dbw: c.source_power_dbw,
            pr_dbw: c.relay_power_dbw,
            schedule: c.schedule.name().to_string(),
            seed: c.seed,
            messages: p.estimate.messages,
            outages: p.estimate.outages,
            p_out: p.estimate.p_hat,
            ci_halfwidth: p.estimate.ci_halfwidth,
        }
    }
}

pub fn rows<'a>(points: impl IntoIterator<Item = &'a SweepPoint>) -> Vec<ResultRow> {
    points.into_iter().map(ResultRow::from).collect()
}

/// Writes a header and one LF-terminated line per row.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(true).terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}
