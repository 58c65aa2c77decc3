//! Bid files: CSV with header `bidder_id,amount,cap`, or a JSON array of
//! `{"id": 1, "bid": "12.5", "cap": 2}`. Amounts are exact decimals.
//! Valuation files use the same layouts.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bid, BidderId, Instance, Valuation};
use crate::money::Money;

#[derive(Debug, Deserialize, Serialize)]
struct CsvRow {
    bidder_id: BidderId,
    amount: String,
    cap: usize,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonRow {
    id: BidderId,
    bid: String,
    cap: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// `.json` means JSON; anything else is read as CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

fn parse_amount(s: &str, id: BidderId) -> Result<Money> {
    s.trim()
        .parse()
        .map_err(|e: Error| Error::input(format!("bidder {id}: {e}")))
}

fn read_rows_csv<R: Read>(reader: R) -> Result<Vec<Bid>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::input(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["bidder_id", "amount", "cap"] {
        return Err(Error::input(format!(
            "expected header bidder_id,amount,cap, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut bids = Vec::new();
    for row in rdr.deserialize::<CsvRow>() {
        let row = row.map_err(|e| Error::input(e.to_string()))?;
        bids.push(Bid::new(row.bidder_id, parse_amount(&row.amount, row.bidder_id)?, row.cap));
    }
    Ok(bids)
}

fn read_rows_json<R: Read>(reader: R) -> Result<Vec<Bid>> {
    let rows: Vec<JsonRow> =
        serde_json::from_reader(reader).map_err(|e| Error::input(e.to_string()))?;
    rows.into_iter()
        .map(|r| Ok(Bid::new(r.id, parse_amount(&r.bid, r.id)?, r.cap)))
        .collect()
}

pub fn read_bids<R: Read>(reader: R, format: Format) -> Result<Instance> {
    let bids = match format {
        Format::Csv => read_rows_csv(reader)?,
        Format::Json => read_rows_json(reader)?,
    };
    if bids.is_empty() {
        return Err(Error::input("no bids in input"));
    }
    Instance::new(bids)
}

pub fn read_bids_path(path: &Path) -> Result<Instance> {
    let file = fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    read_bids(file, Format::from_path(path))
}

pub fn read_valuations<R: Read>(reader: R, format: Format) -> Result<Vec<Valuation>> {
    let inst = read_bids(reader, format)?;
    Ok(inst.bids().iter().map(|b| Valuation::new(b.bidder_id, b.amount, b.cap)).collect())
}

pub fn read_valuations_path(path: &Path) -> Result<Vec<Valuation>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::input(format!("cannot open {}: {e}", path.display())))?;
    read_valuations(file, Format::from_path(path))
}

pub fn write_bids<W: Write>(writer: W, bids: &[Bid], format: Format) -> Result<()> {
    let io_err = |e: std::io::Error| Error::input(e.to_string());
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(writer);
            for b in bids {
                w.serialize(CsvRow { bidder_id: b.bidder_id, amount: b.amount.to_string(), cap: b.cap })
                    .map_err(|e| Error::input(e.to_string()))?;
            }
            w.flush().map_err(io_err)
        }
        Format::Json => {
            let rows: Vec<JsonRow> = bids
                .iter()
                .map(|b| JsonRow { id: b.bidder_id, bid: b.amount.to_string(), cap: b.cap })
                .collect();
            let mut writer = writer;
            serde_json::to_writer_pretty(&mut writer, &rows).map_err(|e| Error::input(e.to_string()))?;
            writeln!(writer).map_err(io_err)
        }
    }
}
