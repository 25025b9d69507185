//! On-disk layout, atomic writes and the binary sample files.
//!
//! ```text
//! <dir>/config.json            resolved RunConfig
//! <dir>/config.sha256          hash of config.json at creation
//! <dir>/samples/<point>/sNNNNN.meas   finished sample (bincode)
//! <dir>/samples/<point>/sNNNNN.ckpt   checkpoint of a running sample (bincode)
//! <dir>/observables.csv
//! <dir>/phase_diagram.json
//! <dir>/manifest.json
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ftgauge::analysis::TableKey;
use ftgauge::{MeasurementSet64, RunState64};

pub const CONFIG_FILE: &str = "config.json";
pub const CONFIG_HASH_FILE: &str = "config.sha256";
pub const CSV_FILE: &str = "observables.csv";
pub const PHASE_FILE: &str = "phase_diagram.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_DIR: &str = "samples";

const MEASUREMENT_FORMAT: &str = "ftgauge-measurement";
const CHECKPOINT_FORMAT: &str = "ftgauge-checkpoint";
const FILE_VERSION: u32 = 1;

/// Writes `bytes` to a temporary file beside `path`, syncs it and renames
/// it over `path`, so readers only ever see complete files.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Directory name of one simulated point.
pub fn point_dir(key: &TableKey) -> String {
    format!("{}_L{}_M{}_p{}_q{}", key.family, key.l, key.m, key.p, key.q)
}

pub fn sample_stem(dir: &Path, key: &TableKey, index: u64) -> PathBuf {
    dir.join(SAMPLES_DIR).join(point_dir(key)).join(format!("s{index:05}"))
}

pub fn measurement_path(dir: &Path, key: &TableKey, index: u64) -> PathBuf {
    sample_stem(dir, key, index).with_extension("meas")
}

pub fn checkpoint_path(dir: &Path, key: &TableKey, index: u64) -> PathBuf {
    sample_stem(dir, key, index).with_extension("ckpt")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    config_hash: String,
    key: TableKey,
    sample_index: u64,
    body: T,
}

fn encode<T: Serialize>(format: &str, config_hash: &str, key: &TableKey, index: u64, body: &T) -> Result<Vec<u8>> {
    let env = Envelope {
        format: format.into(),
        version: FILE_VERSION,
        config_hash: config_hash.into(),
        key: *key,
        sample_index: index,
        body,
    };
    Ok(bincode::serialize(&env)?)
}

fn decode<T: DeserializeOwned>(
    path: &Path,
    format: &str,
    config_hash: &str,
    key: &TableKey,
    index: u64,
) -> Result<T> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let env: Envelope<T> = bincode::deserialize(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    if env.format != format || env.version != FILE_VERSION {
        bail!("{}: not a {format} v{FILE_VERSION} file", path.display());
    }
    if env.config_hash != config_hash {
        bail!(
            "{}: written by configuration {} but the run configuration hashes to {}",
            path.display(),
            &env.config_hash[..12.min(env.config_hash.len())],
            &config_hash[..12]
        );
    }
    if env.key != *key || env.sample_index != index {
        bail!("{}: file belongs to a different sample", path.display());
    }
    Ok(env.body)
}

pub fn write_measurement(
    dir: &Path,
    config_hash: &str,
    key: &TableKey,
    index: u64,
    set: &MeasurementSet64,
) -> Result<()> {
    let bytes = encode(MEASUREMENT_FORMAT, config_hash, key, index, set)?;
    write_atomic(&measurement_path(dir, key, index), &bytes)
}

pub fn read_measurement(dir: &Path, config_hash: &str, key: &TableKey, index: u64) -> Result<MeasurementSet64> {
    decode(&measurement_path(dir, key, index), MEASUREMENT_FORMAT, config_hash, key, index)
}

pub fn write_checkpoint(dir: &Path, config_hash: &str, key: &TableKey, index: u64, state: &RunState64) -> Result<()> {
    let bytes = encode(CHECKPOINT_FORMAT, config_hash, key, index, state)?;
    write_atomic(&checkpoint_path(dir, key, index), &bytes)
}

pub fn read_checkpoint(dir: &Path, config_hash: &str, key: &TableKey, index: u64) -> Result<RunState64> {
    decode(&checkpoint_path(dir, key, index), CHECKPOINT_FORMAT, config_hash, key, index)
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    config_hash: String,
}

/// Configuration hash recorded in a measurement or checkpoint file; reads
/// only the envelope header.
pub fn recorded_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let header: Header = bincode::deserialize(&bytes).with_context(|| format!("decoding {}", path.display()))?;
    if !(header.format == CHECKPOINT_FORMAT || header.format == MEASUREMENT_FORMAT) || header.version != FILE_VERSION {
        bail!("{}: not an ftgauge sample file", path.display());
    }
    Ok(header.config_hash)
}

/// Every `.ckpt` file below the samples directory.
pub fn list_checkpoints(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let Ok(points) = fs::read_dir(dir.join(SAMPLES_DIR)) else {
        return out;
    };
    for point in points.flatten() {
        if let Ok(files) = fs::read_dir(point.path()) {
            out.extend(
                files
                    .flatten()
                    .map(|f| f.path())
                    .filter(|p| p.extension().is_some_and(|e| e == "ckpt")),
            );
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ftgauge::Family;

    fn key() -> TableKey {
        TableKey {
            family: Family::Color,
            l: 3,
            m: 2,
            p: 0.04,
            q: 0.02,
        }
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/b.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn paths() {
        let p = measurement_path(Path::new("/r"), &key(), 7);
        assert_eq!(p, PathBuf::from("/r/samples/color_L3_M2_p0.04_q0.02/s00007.meas"));
    }

    #[test]
    fn envelope_checks_hash_and_sample() {
        let dir = tempfile::tempdir().unwrap();
        let bytes = encode(CHECKPOINT_FORMAT, "abcdef0123456789", &key(), 3, &vec![1u8, 2]).unwrap();
        let path = dir.path().join("x.ckpt");
        write_atomic(&path, &bytes).unwrap();
        let ok: Vec<u8> = decode(&path, CHECKPOINT_FORMAT, "abcdef0123456789", &key(), 3).unwrap();
        assert_eq!(ok, vec![1, 2]);
        assert!(decode::<Vec<u8>>(&path, CHECKPOINT_FORMAT, "ffffffffffffffff", &key(), 3).is_err());
        assert!(decode::<Vec<u8>>(&path, CHECKPOINT_FORMAT, "abcdef0123456789", &key(), 4).is_err());
        assert!(decode::<Vec<u8>>(&path, MEASUREMENT_FORMAT, "abcdef0123456789", &key(), 3).is_err());
        assert_eq!(recorded_hash(&path).unwrap(), "abcdef0123456789");
    }
}
