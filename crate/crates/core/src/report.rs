//! Result containers and artifact writers.
//!
//! Every emitted file embeds the config hash and seed so a result can be
//! traced back to the exact run that produced it. CSV rows are written in a
//! fixed order regardless of worker scheduling, so identical config + seed
//! reproduces byte-identical files.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Where a result came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// One named scalar series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSeries {
    pub name: String,
    pub values: Vec<f64>,
}

/// Named scalar series with full provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub provenance: Provenance,
    pub series: Vec<NamedSeries>,
}

impl ExperimentResult {
    pub fn new(name: impl Into<String>, provenance: Provenance) -> Self {
        Self {
            name: name.into(),
            provenance,
            series: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.series.push(NamedSeries {
            name: name.into(),
            values,
        });
    }
}

/// Hex SHA-256 of the canonical serialized config.
pub fn config_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Serializes a value as pretty JSON with a provenance envelope.
pub fn write_json<T: Serialize>(
    path: &Path,
    provenance: &Provenance,
    value: &T,
) -> io::Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        provenance: &'a Provenance,
        #[serde(flatten)]
        body: Payload<'a, T>,
    }
    #[derive(Serialize)]
    struct Payload<'a, T> {
        result: &'a T,
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let env = Envelope {
        provenance,
        body: Payload { result: value },
    };
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, &env)?;
    f.write_all(b"\n")?;
    f.flush()
}

/// Line-oriented CSV writer with a provenance comment line and fixed column
/// order.
pub struct CsvSink {
    out: BufWriter<File>,
}

impl CsvSink {
    pub fn create(path: &Path, provenance: &Provenance, columns: &[&str]) -> io::Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(
            out,
            "# config_hash={} seed={}",
            provenance.config_hash, provenance.seed
        )?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(Self { out })
    }

    pub fn row<I, S>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                write!(self.out, ",")?;
            }
            write!(self.out, "{}", f.as_ref())?;
            first = false;
        }
        writeln!(self.out)
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}
