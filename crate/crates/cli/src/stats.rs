use std::path::Path;

use parley_core::metrics::SessionLog;

use crate::Format;

pub fn run(data_dir: &Path, format: Format) -> anyhow::Result<bool> {
    let report = SessionLog::new(data_dir).metrics()?;
    match format {
        Format::Table => print!("{}", report.to_table()),
        Format::Tsv => print!("{}", report.to_tsv()),
    }
    Ok(true)
}
