//! Output documents and tables.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use parquet::data_type::{BoolType, ByteArray, ByteArrayType, Int64Type};
use parquet::file::properties::WriterProperties;
use parquet::file::writer::SerializedFileWriter;
use parquet::schema::parser::parse_message_type;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use stepdedup_core::identity::StepOccurrence;

pub const TOOL: &str = "stepdedup";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Columnar,
    Html,
}

impl Format {
    pub const ALL: [Format; 4] = [Format::Json, Format::Csv, Format::Columnar, Format::Html];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderInfo {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub run: u64,
    pub provider: u64,
}

/// Provenance wrapper around every structured document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub config_hash: String,
    pub provider: ProviderInfo,
    pub seeds: Seeds,
    pub data: T,
}

impl<T> Envelope<T> {
    pub fn new(kind: &str, config: &RunConfig, provider_name: &str, data: T) -> Self {
        Envelope {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            kind: kind.to_string(),
            config_hash: config.hash(),
            provider: ProviderInfo {
                name: provider_name.to_string(),
                dim: config.provider.dim,
            },
            seeds: Seeds {
                run: config.seed,
                provider: config.provider.seed,
            },
            data,
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Read a required artifact, naming it if it is missing.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    if !path.is_file() {
        return Err(CliError::Data(format!(
            "missing artifact {}",
            path.display()
        )));
    }
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| CliError::io(path, e))
}

/// One row of the steps table. Field order is the column order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRow {
    pub repo: String,
    pub path: String,
    pub line: u64,
    pub keyword: String,
    pub text: String,
    pub normalized_text: String,
    pub hash: String,
    pub is_background: bool,
    pub is_outline: bool,
    pub license: String,
}

pub const STEP_COLUMNS: [&str; 10] = [
    "repo",
    "path",
    "line",
    "keyword",
    "text",
    "normalized_text",
    "hash",
    "is_background",
    "is_outline",
    "license",
];

impl From<&StepOccurrence> for StepRow {
    fn from(o: &StepOccurrence) -> Self {
        StepRow {
            repo: o.repo_id.clone(),
            path: o.path.clone(),
            line: o.line_no as u64,
            keyword: o.keyword.as_str().to_string(),
            text: o.raw_text.clone(),
            normalized_text: o.normalized_text.clone(),
            hash: o.identity_digest.to_string(),
            is_background: o.is_background,
            is_outline: o.is_outline,
            license: o.license_class.as_str().to_string(),
        }
    }
}

pub fn write_steps_csv(path: &Path, rows: &[StepRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| CliError::io(path, e))?;
    }
    if rows.is_empty() {
        w.write_record(STEP_COLUMNS)
            .map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_steps_csv(path: &Path) -> CliResult<Vec<StepRow>> {
    if !path.is_file() {
        return Err(CliError::Data(format!(
            "missing artifact {}",
            path.display()
        )));
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = r.headers().map_err(|e| CliError::io(path, e))?.clone();
    if headers.iter().ne(STEP_COLUMNS) {
        return Err(CliError::Data(format!(
            "{}: unexpected columns {:?}",
            path.display(),
            headers.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 2)))
        })
        .collect()
}

const STEPS_SCHEMA: &str = "message steps {
    REQUIRED BYTE_ARRAY repo (UTF8);
    REQUIRED BYTE_ARRAY path (UTF8);
    REQUIRED INT64 line;
    REQUIRED BYTE_ARRAY keyword (UTF8);
    REQUIRED BYTE_ARRAY text (UTF8);
    REQUIRED BYTE_ARRAY normalized_text (UTF8);
    REQUIRED BYTE_ARRAY hash (UTF8);
    REQUIRED BOOLEAN is_background;
    REQUIRED BOOLEAN is_outline;
    REQUIRED BYTE_ARRAY license (UTF8);
}";

fn strings(rows: &[StepRow], f: impl Fn(&StepRow) -> &str) -> Vec<ByteArray> {
    rows.iter().map(|r| ByteArray::from(f(r))).collect()
}

pub fn write_steps_parquet(path: &Path, rows: &[StepRow]) -> CliResult<()> {
    let fail = |e: parquet::errors::ParquetError| CliError::io(path, e);
    let schema = Arc::new(parse_message_type(STEPS_SCHEMA).expect("static schema parses"));
    let props = Arc::new(WriterProperties::builder().build());
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut writer = SerializedFileWriter::new(file, schema, props).map_err(fail)?;
    let mut group = writer.next_row_group().map_err(fail)?;
    let mut index = 0;
    while let Some(mut column) = group.next_column().map_err(fail)? {
        match STEP_COLUMNS[index] {
            "line" => {
                let v: Vec<i64> = rows.iter().map(|r| r.line as i64).collect();
                column
                    .typed::<Int64Type>()
                    .write_batch(&v, None, None)
                    .map_err(fail)?;
            }
            name @ ("is_background" | "is_outline") => {
                let v: Vec<bool> = rows
                    .iter()
                    .map(|r| {
                        if name == "is_background" {
                            r.is_background
                        } else {
                            r.is_outline
                        }
                    })
                    .collect();
                column
                    .typed::<BoolType>()
                    .write_batch(&v, None, None)
                    .map_err(fail)?;
            }
            name => {
                let v = strings(rows, |r| match name {
                    "repo" => &r.repo,
                    "path" => &r.path,
                    "keyword" => &r.keyword,
                    "text" => &r.text,
                    "normalized_text" => &r.normalized_text,
                    "hash" => &r.hash,
                    _ => &r.license,
                });
                column
                    .typed::<ByteArrayType>()
                    .write_batch(&v, None, None)
                    .map_err(fail)?;
            }
        }
        column.close().map_err(fail)?;
        index += 1;
    }
    group.close().map_err(fail)?;
    writer.close().map_err(fail)?;
    Ok(())
}

/// Parse a comma-separated list with `FromStr` items.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, T::Err> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(T::from_str)
        .collect()
}
