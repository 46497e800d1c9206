//! Weight directories.
//!
//! A weight directory holds one NPY file per parameter tensor and a
//! `manifest.txt` with one `<parameter name> <file name>` pair per line.
//! Blank lines and lines starting with `#` are ignored. Parameter names are
//! those of [`Upsampler::named_parameters`], e.g. `offset_head.weight`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::npy::{read_npy, write_npy};
use crate::tensor::{Element, Tensor};
use crate::upsampler::Upsampler;

pub const MANIFEST: &str = "manifest.txt";

/// Parses manifest text into `(name, file)` pairs.
pub fn parse_manifest(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('#') {
            let mut parts = trimmed.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(name), Some(file), None) => out.push((name.to_string(), file.to_string())),
                _ => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        offset,
                        message: format!("expected '<name> <file>', got '{trimmed}'"),
                    })
                }
            }
        }
        offset += line.len();
    }
    Ok(out)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = dir.as_ref().join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_manifest(&text, &path)
}

/// Writes every parameter of `op` into `dir`, creating it if needed.
pub fn save_weights<T: Element>(dir: impl AsRef<Path>, op: &Upsampler<T>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for (name, t) in op.named_parameters() {
        let file = format!("{name}.npy");
        write_npy(dir.join(&file), t)?;
        manifest.push_str(&format!("{name} {file}\n"));
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Loads every manifest entry into `op`. Names must exist and shapes must match;
/// parameters not listed keep their current values.
pub fn load_weights<T: Element>(dir: impl AsRef<Path>, op: &mut Upsampler<T>) -> Result<()> {
    let dir = dir.as_ref();
    for (name, file) in read_manifest(dir)? {
        let t: Tensor<T> = read_npy(dir.join(&file))?.cast();
        op.set_parameter(&name, t)?;
    }
    Ok(())
}
