//! Artifact envelopes: every file embeds the format version and the fully
//! resolved configuration, and is written atomically.

use std::path::Path;

use serde::Serialize;

use cbf2d::config::RunConfig;
use cbf2d::io::{self, FORMAT_VERSION};
use cbf2d::Result;

/// JSON envelope: `{ format_version, config, report }`.
#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    format_version: u32,
    config: &'a RunConfig,
    report: T,
}

pub fn write_report<T: Serialize>(path: &Path, config: &RunConfig, report: T) -> Result<()> {
    io::write_json(path, &Artifact { format_version: FORMAT_VERSION, config, report })?;
    log::info!("wrote {}", path.display());
    Ok(())
}

/// Comment block prepended to CSV artifacts; parsers skip `#` lines, so the
/// files remain machine-readable by the library's own readers.
pub fn csv_prelude(config: &RunConfig) -> String {
    let mut out = format!("# format_version: {FORMAT_VERSION}\n# config:\n");
    for line in config.to_ini_string().lines() {
        out.push_str("#   ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, config: &RunConfig, body: &str) -> Result<()> {
    let mut text = csv_prelude(config);
    text.push_str(body);
    io::atomic_write(path, text.as_bytes())?;
    log::info!("wrote {}", path.display());
    Ok(())
}
