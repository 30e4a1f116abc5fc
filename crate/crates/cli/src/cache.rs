//! Content-addressed cache of per-point results under `<out>/cache`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn new(out: &Path, enabled: bool) -> Self {
        Self {
            dir: enabled.then(|| out.join("cache")),
        }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    /// Key of a point: digest of the configuration digest and the point.
    pub fn key<P: Serialize>(config_digest: &str, kind: &str, point: &P) -> String {
        let json = serde_json::to_string(&(config_digest, kind, point)).expect("serializable");
        sha256_hex(json.as_bytes())
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Option<T> {
        let text = fs::read_to_string(self.path(key)?).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Best-effort write; a failed write only loses the cache entry.
    pub fn put<T: Serialize>(&self, key: &str, value: &T) {
        let Some(path) = self.path(key) else { return };
        if let Some(dir) = path.parent() {
            if fs::create_dir_all(dir).is_err() {
                return;
            }
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        if let Ok(text) = serde_json::to_string(value) {
            if fs::write(&tmp, text).is_ok() {
                let _ = fs::rename(&tmp, &path);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn roundtrip_and_key_sensitivity() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(dir.path(), true);
        let k1 = Cache::key("d1", "phase", &(1.0, 2.0));
        let k2 = Cache::key("d2", "phase", &(1.0, 2.0));
        assert_ne!(k1, k2);
        assert!(c.get::<Vec<f64>>(&k1).is_none());
        c.put(&k1, &vec![1.5, 2.5]);
        assert_eq!(c.get::<Vec<f64>>(&k1), Some(vec![1.5, 2.5]));
        assert!(c.get::<Vec<f64>>(&k2).is_none());
        let off = Cache::disabled();
        off.put(&k1, &1);
        assert!(off.get::<i32>(&k1).is_none());
    }
}
