//! Visit metadata CSV: `subject_id,side,visit_month,kls` (empty kls allowed).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{check_grade, Side, VisitKey};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitMeta {
    pub subject_id: String,
    pub side: Side,
    pub visit_month: u32,
    pub kls: Option<u8>,
}

impl VisitMeta {
    pub fn key(&self) -> VisitKey {
        VisitKey::new(self.subject_id.clone(), self.side, self.visit_month)
    }
}

#[derive(Deserialize)]
struct RawRow {
    subject_id: String,
    side: String,
    visit_month: u32,
    kls: Option<i64>,
}

pub fn read_metadata<R: Read>(input: R) -> Result<Vec<VisitMeta>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::format("metadata csv", e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["subject_id", "side", "visit_month", "kls"] {
        return Err(Error::format(
            "metadata csv",
            "header must be subject_id,side,visit_month,kls",
        ));
    }
    let mut rows = Vec::new();
    for rec in reader.deserialize::<RawRow>() {
        let raw = rec.map_err(|e| Error::format("metadata csv", e.to_string()))?;
        rows.push(VisitMeta {
            side: raw.side.parse()?,
            subject_id: raw.subject_id,
            visit_month: raw.visit_month,
            kls: raw.kls.map(check_grade).transpose()?,
        });
    }
    Ok(rows)
}

pub fn write_metadata<W: Write>(rows: &[VisitMeta], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(["subject_id", "side", "visit_month", "kls"])
        .map_err(|e| Error::format("metadata csv", e.to_string()))?;
    for r in rows {
        let kls = r.kls.map(|k| k.to_string()).unwrap_or_default();
        writer
            .write_record([
                r.subject_id.as_str(),
                r.side.as_str(),
                &r.visit_month.to_string(),
                &kls,
            ])
            .map_err(|e| Error::format("metadata csv", e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}
