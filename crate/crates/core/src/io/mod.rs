//! Files in and out: PLY clouds, binary matrices, configs, selection lists
//! and saved selection states.

pub mod config;
pub mod matrix;
pub mod ply;
pub mod synth;

use std::fs;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::model::SelectionState;

pub use config::{load_config, parse_config, RunConfig};
pub use matrix::{decode_matrix, encode_matrix, load_matrix, save_matrix, Matrix, MatrixData};
pub use ply::{encode_ply, load_ply, parse_ply, save_ply};
pub use synth::{gen_synthetic, SceneSpec};

/// One zero-based index per line, each line LF-terminated.
pub fn encode_selection(indices: &[usize]) -> String {
    let mut out = String::with_capacity(indices.len() * 8);
    for i in indices {
        out.push_str(&i.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_selection(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("selection list line {}: {:?} is not an index", n + 1, l.trim())))
        })
        .collect()
}

pub fn save_selection(indices: &[usize], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_selection(indices))?;
    Ok(())
}

pub fn load_selection(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_selection(&fs::read_to_string(path)?)
}

pub fn save_state(state: &SelectionState, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(state).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<SelectionState> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| invalid(format!("selection state: {e}")))
}
