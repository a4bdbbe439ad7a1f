//! Content-hash cache for coefficient tables and dual-weight grids.
//!
//! Keys are FNV-1a 64-bit hashes of canonical key strings, stable across
//! runs and platforms. A hit requires an exact hash match; changing any
//! construction parameter changes the key.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hankel::DualWeight;

pub fn fnv64(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone)]
pub struct CacheDir {
    root: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub kind: String,
    pub file: String,
    pub bytes: u64,
}

impl CacheDir {
    pub fn new(root: impl Into<PathBuf>) -> CacheDir {
        CacheDir { root: root.into() }
    }

    pub fn from_env_or(default: &str) -> CacheDir {
        let root = std::env::var("VERIFY_CACHE_DIR").unwrap_or_else(|_| default.to_string());
        CacheDir::new(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn subdir(&self, kind: &str) -> Result<PathBuf> {
        let d = self.root.join(kind);
        fs::create_dir_all(&d).map_err(|e| {
            Error::Config(format!("cache dir {} not writable: {e}", d.display()))
        })?;
        Ok(d)
    }

    pub fn fourier_path(&self, key: u64) -> Result<PathBuf> {
        Ok(self.subdir("fourier")?.join(format!("{key:016x}.csv")))
    }

    pub fn dual_weight_path(&self, key: u64) -> Result<PathBuf> {
        Ok(self.subdir("dual")?.join(format!("{key:016x}.csv")))
    }

    pub fn store_fourier(&self, key: u64, table: &crate::whittaker::FourierTable) -> Result<()> {
        fs::write(self.fourier_path(key)?, table.to_csv())?;
        Ok(())
    }

    pub fn load_fourier(&self, key: u64) -> Result<Option<crate::whittaker::FourierTable>> {
        let p = self.fourier_path(key)?;
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(crate::whittaker::FourierTable::from_csv(
            &fs::read_to_string(p)?,
        )?))
    }

    /// Dual-weight grid as CSV `y,re,im` with a header comment carrying the
    /// construction hashes and contour metadata.
    pub fn store_dual_weight(&self, dw: &DualWeight) -> Result<u64> {
        let key = dual_weight_key(dw.weight_hash, dw.gamma_hash, dw.sigma_z, dw.t_count);
        let mut out = format!(
            "# dual-weight gamma={:016x} weight={:016x} sigma_z={:?} t_count={} dt={:?}\n",
            dw.gamma_hash, dw.weight_hash, dw.sigma_z, dw.t_count, dw.dt
        );
        out.push_str("y,re,im\n");
        let n = dw.vals_pos.len();
        for i in 0..n {
            let lny = dw.ln_y_min + i as f64 * dw.ln_y_step;
            let y = lny.exp();
            let v = dw.vals_pos[i];
            out.push_str(&format!("{y:?},{:?},{:?}\n", v.re, v.im));
        }
        for i in 0..n {
            let lny = dw.ln_y_min + i as f64 * dw.ln_y_step;
            let y = -(lny.exp());
            let v = dw.vals_neg[i];
            out.push_str(&format!("{y:?},{:?},{:?}\n", v.re, v.im));
        }
        fs::write(self.dual_weight_path(key)?, out)?;
        Ok(key)
    }

    pub fn has_dual_weight(&self, weight_hash: u64, gamma_hash: u64, sigma_z: f64, t_count: usize) -> bool {
        let key = dual_weight_key(weight_hash, gamma_hash, sigma_z, t_count);
        self.dual_weight_path(key).map(|p| p.exists()).unwrap_or(false)
    }

    /// Raw grid samples from a cached dual-weight file: (y, value) pairs.
    pub fn load_dual_weight_samples(&self, key: u64) -> Result<Option<Vec<(f64, Complex64)>>> {
        let p = self.dual_weight_path(key)?;
        if !p.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(p)?;
        let mut out = Vec::new();
        for line in text.lines() {
            if line.starts_with('#') || line.starts_with("y,") || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("bad dual-weight row: {line}")));
            }
            let y: f64 = cols[0].parse().map_err(|_| Error::Parse(line.into()))?;
            let re: f64 = cols[1].parse().map_err(|_| Error::Parse(line.into()))?;
            let im: f64 = cols[2].parse().map_err(|_| Error::Parse(line.into()))?;
            out.push((y, Complex64::new(re, im)));
        }
        Ok(Some(out))
    }

    pub fn inspect(&self) -> Result<Vec<CacheEntry>> {
        let mut entries = Vec::new();
        for kind in ["fourier", "dual"] {
            let d = self.root.join(kind);
            if !d.exists() {
                continue;
            }
            let mut files: Vec<_> = fs::read_dir(&d)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .collect();
            files.sort();
            for f in files {
                let bytes = fs::metadata(&f).map(|m| m.len()).unwrap_or(0);
                entries.push(CacheEntry {
                    kind: kind.to_string(),
                    file: f
                        .file_name()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default(),
                    bytes,
                });
            }
        }
        Ok(entries)
    }

    pub fn clear(&self) -> Result<usize> {
        let mut removed = 0;
        for kind in ["fourier", "dual"] {
            let d = self.root.join(kind);
            if !d.exists() {
                continue;
            }
            for e in fs::read_dir(&d)? {
                let p = e?.path();
                if p.is_file() {
                    fs::remove_file(p)?;
                    removed += 1;
                }
            }
        }
        Ok(removed)
    }
}

pub fn dual_weight_key(weight_hash: u64, gamma_hash: u64, sigma_z: f64, t_count: usize) -> u64 {
    fnv64(format!("dual:{weight_hash:016x}:{gamma_hash:016x}:{sigma_z:?}:{t_count}").as_bytes())
}
