//! Weight files: a JSON manifest next to a little-endian blob of doubles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::network::{Network, NetworkSpec};
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"DQNW";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub layer: usize,
    pub kind: String,
    pub name: String,
    pub shape: Vec<usize>,
    pub trainable: bool,
    /// Position of the first value in the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub spec: NetworkSpec,
    /// Blob file name, relative to the manifest.
    pub weights: String,
    pub n_values: usize,
    pub params: Vec<ParamEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Blob path used for a manifest at `path`.
pub fn weights_path(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

impl Network {
    pub fn manifest(&self, weights: String) -> Manifest {
        let mut params = Vec::new();
        let mut offset = 0;
        for (li, layer) in self.layers().iter().enumerate() {
            for (shape, t) in layer.spec().param_shapes().into_iter().zip(layer.params()) {
                params.push(ParamEntry {
                    layer: li,
                    kind: layer.spec().kind().into(),
                    name: shape.name,
                    shape: shape.shape,
                    trainable: shape.trainable,
                    offset,
                });
                offset += t.len();
            }
        }
        Manifest {
            version: FORMAT_VERSION,
            spec: self.spec().clone(),
            weights,
            n_values: offset,
            params,
        }
    }

    /// Writes the manifest to `path` and the weights beside it with a
    /// `.bin` extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let blob = weights_path(path);
        let name = blob
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Invalid(format!("cannot name a weights file for {}", path.display())))?
            .to_string();
        let manifest = self.manifest(name);
        let mut w = BufWriter::new(File::create(&blob).map_err(io_err(&blob))?);
        (|| {
            w.write_all(MAGIC)?;
            w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
            w.write_u64::<LittleEndian>(manifest.n_values as u64)?;
            for layer in self.layers() {
                for t in layer.params() {
                    for &v in t.data() {
                        w.write_f64::<LittleEndian>(v)?;
                    }
                }
            }
            w.flush()
        })()
        .map_err(io_err(&blob))?;
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(path, json + "\n").map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.version != FORMAT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported network format version {}",
                manifest.version
            )));
        }
        let mut net = Network::zeroed(manifest.spec.clone())?;
        let expected = net.manifest(manifest.weights.clone());
        if expected.params != manifest.params {
            return Err(Error::Invalid("parameter table does not match the network spec".into()));
        }
        let blob = path.with_file_name(&manifest.weights);
        let mut r = BufReader::new(File::open(&blob).map_err(io_err(&blob))?);
        let bad = |msg: &str| Error::Invalid(format!("{}: {msg}", blob.display()));
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io_err(&blob))?;
        if &magic != MAGIC {
            return Err(bad("not a network weights file"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io_err(&blob))?;
        let count = r.read_u64::<LittleEndian>().map_err(io_err(&blob))?;
        if version != FORMAT_VERSION || count != expected.n_values as u64 {
            return Err(bad("header does not match the manifest"));
        }
        for layer in net.layers_mut() {
            for t in layer.params_mut() {
                r.read_f64_into::<LittleEndian>(t.data_mut()).map_err(io_err(&blob))?;
                if t.data().iter().any(|v| !v.is_finite()) {
                    return Err(bad("non-finite weight"));
                }
            }
        }
        if r.read(&mut [0u8; 1]).map_err(io_err(&blob))? != 0 {
            return Err(bad("trailing bytes"));
        }
        Ok(net)
    }
}
