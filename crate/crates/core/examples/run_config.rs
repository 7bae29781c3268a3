//! Runs a bundled config through the harness and aggregates the result.
//!
//! `cargo run --example run_config -- configs/z-qubit-db.toml`

use std::path::PathBuf;

use gibbs_nd::harness::{emit_report, run_config_file};

fn main() -> gibbs_nd::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/z-qubit-db.toml")
    });
    let dir = std::env::temp_dir().join("gibbs-nd-example");
    for art in run_config_file(&path, Some(&dir), 4)? {
        println!("wrote {}", art.result.display());
    }
    let pattern = format!("{}/*.result.json", dir.display());
    emit_report(&pattern, std::io::stdout())?;
    Ok(())
}
