//! Binary tensor files and checkpoint directories.
//!
//! Tensor file layout, all little-endian: magic "MMT1", u32 rank, u32 extent
//! per axis, then the f64 payload in row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"MMT1";
const MAX_RANK: u32 = 8;

fn format_err(path: &Path, msg: impl Into<String>) -> AutodiffError {
    AutodiffError::Format { path: path.display().to_string(), msg: msg.into() }
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(4 + 4 + 4 * t.rank() + 8 * t.numel());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &ext in t.shape() {
        buf.extend_from_slice(&(ext as u32).to_le_bytes());
    }
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut off = 0usize;
    let take = |off: &mut usize, n: usize| -> Result<&[u8]> {
        if *off + n > bytes.len() {
            return Err(format_err(path, "truncated tensor file"));
        }
        let s = &bytes[*off..*off + n];
        *off += n;
        Ok(s)
    };
    if take(&mut off, 4)? != MAGIC {
        return Err(format_err(path, "bad magic, expected MMT1"));
    }
    let rank = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
    if rank == 0 || rank > MAX_RANK {
        return Err(format_err(path, format!("unreasonable rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        let ext = u32::from_le_bytes(take(&mut off, 4)?.try_into().unwrap());
        if ext == 0 {
            return Err(format_err(path, "zero extent"));
        }
        shape.push(ext as usize);
    }
    let numel: usize = shape.iter().product();
    if bytes.len() - off != numel * 8 {
        return Err(format_err(
            path,
            format!("payload holds {} bytes, shape {shape:?} needs {}", bytes.len() - off, numel * 8),
        ));
    }
    let mut data = Vec::with_capacity(numel);
    for _ in 0..numel {
        data.push(f64::from_le_bytes(take(&mut off, 8)?.try_into().unwrap()));
    }
    Tensor::new(shape, data)
}

/// Write every named tensor into `dir` (one file each) plus a
/// `manifest.json` mapping name to file.
pub fn save_checkpoint(dir: &Path, params: &BTreeMap<String, Tensor>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut manifest = BTreeMap::new();
    for (name, tensor) in params {
        let file = format!("{}.mmt", name.replace(['/', '\\'], "_"));
        write_tensor(&dir.join(&file), tensor)?;
        manifest.insert(name.clone(), file);
    }
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| format_err(dir, format!("manifest encode: {e}")))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<BTreeMap<String, Tensor>> {
    let manifest_path = dir.join("manifest.json");
    let json = fs::read_to_string(&manifest_path)?;
    let manifest: BTreeMap<String, String> =
        serde_json::from_str(&json).map_err(|e| format_err(&manifest_path, format!("manifest parse: {e}")))?;
    let mut params = BTreeMap::new();
    for (name, file) in manifest {
        let tensor = read_tensor(&dir.join(&file))?;
        params.insert(name, tensor);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_roundtrip_preserves_bits() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::from_fn(vec![3, 4, 2], |i| (i as f64).sin() * 1e-3 + i as f64);
        let path = dir.path().join("t.mmt");
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back.shape(), t.shape());
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn bad_magic_and_truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mmt");
        fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_tensor(&path), Err(AutodiffError::Format { .. })));

        let t = Tensor::scalar(1.0);
        write_tensor(&path, &t).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_tensor(&path), Err(AutodiffError::Format { .. })));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut params = BTreeMap::new();
        params.insert("layer.w".to_string(), Tensor::from_fn(vec![2, 3], |i| i as f64));
        params.insert("layer.b".to_string(), Tensor::zeros(vec![3]));
        save_checkpoint(dir.path(), &params).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back["layer.w"].data(), params["layer.w"].data());
        assert_eq!(back["layer.b"].shape(), &[3]);
    }
}
