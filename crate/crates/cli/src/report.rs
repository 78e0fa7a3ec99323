//! Report files. Every CSV opens with a `# seed=<seed> mode=<mode>` comment
//! line; readers skip `#` lines.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::CliError;

pub fn header_line(seed: u64, mode: &str) -> String {
    format!("# seed={seed} mode={mode}")
}

/// Writes `rows` as CSV with the seed header.
pub fn write_csv<T: Serialize>(
    path: &Path,
    seed: u64,
    mode: &str,
    rows: &[T],
) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = File::create(path)?;
    writeln!(f, "{}", header_line(seed, mode))?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)?;
    r.deserialize().map(|x| x.map_err(CliError::from)).collect()
}

/// The seed recorded in a report's header line.
pub fn read_seed(path: &Path) -> Result<Option<u64>, CliError> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# seed="))
        .and_then(|l| l.split_whitespace().next())
        .and_then(|s| s.parse().ok()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Paths of the files a run wrote, in order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Outputs(pub Vec<PathBuf>);

impl Outputs {
    pub fn push(&mut self, p: PathBuf) -> PathBuf {
        self.0.push(p.clone());
        p
    }
}
