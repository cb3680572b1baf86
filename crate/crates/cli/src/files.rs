//! Errors, exit codes and file helpers.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mixwass::analysis::export::write_json;
use mixwass::{MetricSpace, Mixture1D};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Format;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] mixwass::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    /// 2 for validation errors, 3 for numeric failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if !e.is_validation() => 3,
            CliError::Numeric(_) => 3,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

/// Mixtures in point order.
#[derive(Serialize, Deserialize)]
pub struct MixtureFile {
    pub points: Vec<usize>,
    pub mixtures: Vec<Mixture1D>,
}

/// Output directory; every file lands inside it.
pub struct OutDir {
    root: PathBuf,
    pub format: Format,
}

impl OutDir {
    pub fn create(root: &Path, format: Format) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(io_err(root))?;
        Ok(Self { root: root.to_path_buf(), format })
    }

    pub fn sub(&self, name: &str) -> CliResult<Self> {
        Self::create(&self.root.join(name), self.format)
    }

    fn open(&self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.root.join(name);
        Ok(BufWriter::new(File::create(&path).map_err(io_err(&path))?))
    }

    /// Opens `name`, hands the writer to `f` and flushes it.
    pub fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> mixwass::Result<()>) -> CliResult<()> {
        let mut w = self.open(name)?;
        f(&mut w)?;
        w.flush().map_err(io_err(&self.root.join(name)))
    }

    pub fn json<S: Serialize + ?Sized>(&self, name: &str, value: &S) -> CliResult<()> {
        self.write(name, |w| write_json(w, value))
    }

    /// Rows of a table, as `stem.csv` or `stem.json` (array of objects).
    pub fn table<S: Serialize>(&self, stem: &str, rows: &[S]) -> CliResult<()> {
        match self.format {
            Format::Json => self.json(&format!("{stem}.json"), rows),
            Format::Csv => self.write(&format!("{stem}.csv"), |w| {
                let mut out = csv::Writer::from_writer(w);
                for r in rows {
                    out.serialize(r)?;
                }
                out.flush()?;
                Ok(())
            }),
        }
    }
}

pub fn read_space(path: &Path) -> CliResult<MetricSpace> {
    let file = File::open(path).map_err(io_err(path))?;
    let space = if path.extension().is_some_and(|e| e == "json") {
        let s: MetricSpace = serde_json::from_reader(BufReader::new(file)).map_err(|e| CliError::Invalid(e.to_string()))?;
        s.validate()?;
        s
    } else {
        MetricSpace::read_csv(BufReader::new(file))?
    };
    Ok(space)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}
