//! Named parameter blocks and their on-disk form (one AXTF tensor per block
//! plus a `model.txt` manifest).

use std::fs;
use std::path::{Path, PathBuf};

use axmag_core::axtf::Tensor;
use axmag_core::{Error, Result};

use crate::real::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock<T> {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<T> {
    pub blocks: Vec<ParamBlock<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore { blocks: Vec::new() }
    }

    pub fn add(&mut self, name: &str, dims: Vec<usize>, data: Vec<T>) -> usize {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "block {name}");
        self.blocks.push(ParamBlock {
            name: name.to_string(),
            dims,
            data,
        });
        self.blocks.len() - 1
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn count(&self) -> usize {
        self.blocks.iter().map(|b| b.data.len()).sum()
    }

    pub fn zeros_like(&self) -> Vec<Vec<T>> {
        self.blocks.iter().map(|b| vec![T::ZERO; b.data.len()]).collect()
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            blocks: self
                .blocks
                .iter()
                .map(|b| ParamBlock {
                    name: b.name.clone(),
                    dims: b.dims.clone(),
                    data: b.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                })
                .collect(),
        }
    }
}

/// Resolve a model location: a manifest path (`*.txt`) or a directory
/// holding `model.txt`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.extension().is_some_and(|e| e == "txt") {
        path.to_path_buf()
    } else {
        path.join("model.txt")
    }
}

/// Write blocks and a manifest; `header` lines go first as `key=value`.
pub fn save_store<T: Real>(store: &ParamStore<T>, header: &[(String, String)], path: &Path) -> Result<PathBuf> {
    let manifest = manifest_path(path);
    let dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    let mut text = String::from("# axmag model\n");
    for (k, v) in header {
        text.push_str(&format!("{k}={v}\n"));
    }
    for b in &store.blocks {
        let file = format!("{}.axtf", b.name);
        let t = Tensor::new(b.dims.clone(), b.data.iter().map(|v| v.to_f64() as f32).collect())?;
        t.save(dir.join(&file))?;
        let dims: Vec<String> = b.dims.iter().map(|d| d.to_string()).collect();
        text.push_str(&format!("block {} {} {}\n", b.name, dims.join("x"), file));
    }
    fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
    Ok(manifest)
}

/// Read a manifest: header pairs and blocks.
pub fn load_store<T: Real>(path: &Path) -> Result<(Vec<(String, String)>, ParamStore<T>)> {
    let manifest = manifest_path(path);
    let dir = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let bad = |line: &str| Error::Format(format!("{}: bad manifest line `{line}`", manifest.display()));
    let mut header = Vec::new();
    let mut store = ParamStore::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("block ") {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            let [name, dims, file] = parts[..] else {
                return Err(bad(line));
            };
            let dims: Vec<usize> = dims
                .split('x')
                .map(|d| d.parse().map_err(|_| bad(line)))
                .collect::<Result<_>>()?;
            let t = Tensor::load(dir.join(file))?;
            if t.dims != dims {
                return Err(Error::Format(format!(
                    "block {name}: manifest says {dims:?}, file holds {:?}",
                    t.dims
                )));
            }
            store.add(name, dims, t.data.iter().map(|&v| T::from_f64(v as f64)).collect());
        } else if let Some((k, v)) = line.split_once('=') {
            header.push((k.trim().to_string(), v.trim().to_string()));
        } else {
            return Err(bad(line));
        }
    }
    Ok((header, store))
}
