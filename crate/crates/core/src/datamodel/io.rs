//! Line-delimited dataset files.
//!
//! Line 1 is a JSON header:
//! `{"format":"prs-dataset","version":1,"schema":{..},"stats":{..},"records":N}`.
//! Each following line holds one session as a JSON object with the fields, in order,
//! `user` = `[user_id, gender, age]`,
//! `c` = input list as `[[item_id, category, brand, price], ..]`,
//! `v` = exhibited list as 0-based positions into `c`,
//! `y_ctr`, `y_next`, `exposure` = 0/1 arrays of the exhibited length.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, InteractionRecord, ItemProfile, NormStats, Schema, UserProfile};
use crate::error::{PrsError, Result};

pub const DATASET_FORMAT: &str = "prs-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    schema: Schema,
    stats: NormStats,
    records: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    user: (u32, u32, f64),
    c: Vec<(u32, u32, u32, f64)>,
    v: Vec<usize>,
    y_ctr: Vec<u8>,
    y_next: Vec<u8>,
    exposure: Vec<u8>,
}

fn bits(v: &[bool]) -> Vec<u8> {
    v.iter().map(|&b| u8::from(b)).collect()
}

fn unbits(v: &[u8]) -> std::result::Result<Vec<bool>, String> {
    v.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(format!("label value {other} is not 0/1")),
        })
        .collect()
}

impl RecordLine {
    fn from_record(r: &InteractionRecord) -> Result<Self> {
        let v = r.exhibited_positions().map_err(PrsError::Format)?;
        Ok(Self {
            user: (r.user.user_id, r.user.gender, r.user.age),
            c: r.candidates
                .iter()
                .map(|i| (i.item_id, i.category, i.brand, i.price))
                .collect(),
            v,
            y_ctr: bits(&r.y_ctr),
            y_next: bits(&r.y_next),
            exposure: bits(&r.exposure),
        })
    }

    fn into_record(self) -> std::result::Result<InteractionRecord, String> {
        let candidates: Vec<ItemProfile> = self
            .c
            .iter()
            .map(|&(item_id, category, brand, price)| ItemProfile {
                item_id,
                category,
                brand,
                price,
            })
            .collect();
        let exhibited = self
            .v
            .iter()
            .map(|&p| {
                candidates
                    .get(p)
                    .copied()
                    .ok_or_else(|| format!("exhibited position {p} out of range"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(InteractionRecord {
            user: UserProfile {
                user_id: self.user.0,
                gender: self.user.1,
                age: self.user.2,
            },
            candidates,
            exhibited,
            y_ctr: unbits(&self.y_ctr)?,
            y_next: unbits(&self.y_next)?,
            exposure: unbits(&self.exposure)?,
        })
    }
}

pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let header = Header {
        format: DATASET_FORMAT.to_string(),
        version: DATASET_VERSION,
        schema: dataset.schema,
        stats: dataset.stats,
        records: dataset.records.len(),
    };
    serde_json::to_writer(&mut w, &header).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    for r in &dataset.records {
        serde_json::to_writer(&mut w, &RecordLine::from_record(r)?)
            .map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut lines = BufReader::new(reader).lines();
    let parse = |line: usize, message: String| PrsError::Parse { line, message };
    let first = lines
        .next()
        .transpose()?
        .ok_or_else(|| parse(1, "missing header".into()))?;
    let header: Header = serde_json::from_str(&first).map_err(|e| parse(1, e.to_string()))?;
    if header.format != DATASET_FORMAT {
        return Err(PrsError::Format(format!(
            "not a dataset file: `{}`",
            header.format
        )));
    }
    if header.version != DATASET_VERSION {
        return Err(PrsError::Format(format!(
            "dataset version {} unsupported (expected {DATASET_VERSION})",
            header.version
        )));
    }
    let mut records = Vec::with_capacity(header.records);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.is_empty() && records.len() == header.records {
            continue;
        }
        let raw: RecordLine =
            serde_json::from_str(&line).map_err(|e| parse(line_no, e.to_string()))?;
        let record = raw.into_record().map_err(|m| parse(line_no, m))?;
        record
            .check(&header.schema)
            .map_err(|m| parse(line_no, m))?;
        records.push(record);
    }
    if records.len() != header.records {
        return Err(parse(
            records.len() + 2,
            format!(
                "expected {} records, file ends after {}",
                header.records,
                records.len()
            ),
        ));
    }
    Ok(Dataset {
        schema: header.schema,
        stats: header.stats,
        records,
    })
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(dataset, File::create(path)?)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(File::open(path)?)
}
