// SPDX-License-Identifier: Apache-2.0

//! Content-addressed cache of per-`d` results, and the JSONL record writer.

use super::config::CODE_VERSION;
use crate::error::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread::JoinHandle;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256_hex(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

#[derive(Serialize, Deserialize)]
struct Entry {
    version: String,
    key: String,
    payload_sha256: String,
    payload: String,
}

#[derive(Debug, Default)]
pub struct StoreCounters {
    pub hits: AtomicUsize,
    pub misses: AtomicUsize,
    pub stale: AtomicUsize,
    pub corrupt: AtomicUsize,
    pub verified: AtomicUsize,
}

/// Cache rooted at `dir`; without a directory every lookup is a miss and
/// nothing is written.
#[derive(Debug)]
pub struct ResultStore {
    dir: Option<PathBuf>,
    version: String,
    verify: bool,
    pub counters: StoreCounters,
}

impl ResultStore {
    pub fn new(dir: Option<PathBuf>, verify: bool) -> Self {
        Self::with_version(dir, verify, CODE_VERSION)
    }

    pub fn with_version(dir: Option<PathBuf>, verify: bool, version: &str) -> Self {
        ResultStore { dir, version: version.to_string(), verify, counters: StoreCounters::default() }
    }

    pub fn disabled() -> Self {
        Self::new(None, false)
    }

    fn path_for(&self, experiment: &str, hash: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(experiment).join(&hash[..2]).join(format!("{hash}.json")))
    }

    /// Cached value for `key`, or `producer()` stored under it. Entries from
    /// another code version are recomputed; entries whose payload hash does
    /// not match are reported, recomputed and overwritten. With verification
    /// on, about 1% of hits (chosen by key hash) are recomputed and compared.
    pub fn load_or_compute<K, T>(&self, experiment: &str, key: &K, producer: impl FnOnce() -> Result<T>) -> Result<T>
    where
        K: Serialize + ?Sized,
        T: Serialize + DeserializeOwned,
    {
        let key_text = serde_json::to_string(key)?;
        let hash = sha256_hex(&format!("{}\n{experiment}\n{key_text}", self.version));
        let Some(path) = self.path_for(experiment, &hash) else {
            self.counters.misses.fetch_add(1, Ordering::Relaxed);
            return producer();
        };
        match self.read(&path, &key_text) {
            Ok(Some((value, payload))) => {
                self.counters.hits.fetch_add(1, Ordering::Relaxed);
                if self.verify && u16::from_str_radix(&hash[..4], 16).unwrap_or(0) % 100 == 0 {
                    self.counters.verified.fetch_add(1, Ordering::Relaxed);
                    let fresh = serde_json::to_string(&producer()?)?;
                    if fresh != payload {
                        return Err(Error::Cache { path, reason: "cached value differs from a fresh computation".into() });
                    }
                }
                return Ok(value);
            }
            Ok(None) => {
                self.counters.misses.fetch_add(1, Ordering::Relaxed);
            }
            Err(e) => {
                self.counters.corrupt.fetch_add(1, Ordering::Relaxed);
                log::warn!("{e}; recomputing");
            }
        }
        let value = producer()?;
        self.write(&path, &key_text, &serde_json::to_string(&value)?)?;
        Ok(value)
    }

    /// `Ok(None)` for a missing, stale or colliding entry, `Err` for corruption.
    fn read<T: DeserializeOwned>(&self, path: &Path, key_text: &str) -> Result<Option<(T, String)>> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |reason: String| Error::Cache { path: path.to_path_buf(), reason };
        let entry: Entry = serde_json::from_str(&text).map_err(|e| corrupt(format!("unreadable entry: {e}")))?;
        if entry.version != self.version {
            self.counters.stale.fetch_add(1, Ordering::Relaxed);
            return Ok(None);
        }
        if entry.key != key_text {
            return Ok(None);
        }
        if sha256_hex(&entry.payload) != entry.payload_sha256 {
            return Err(corrupt("payload hash mismatch".into()));
        }
        let value = serde_json::from_str(&entry.payload).map_err(|e| corrupt(format!("undecodable payload: {e}")))?;
        Ok(Some((value, entry.payload)))
    }

    fn write(&self, path: &Path, key_text: &str, payload: &str) -> Result<()> {
        let entry = Entry {
            version: self.version.clone(),
            key: key_text.to_string(),
            payload_sha256: sha256_hex(payload),
            payload: payload.to_string(),
        };
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_string(&entry)?)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Write `header` and `body` to `path` through a temporary file.
pub fn write_atomic(path: &Path, header: &str, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("partial");
    let mut f = BufWriter::new(std::fs::File::create(&tmp)?);
    writeln!(f, "{header}")?;
    f.write_all(body.as_bytes())?;
    f.flush()?;
    drop(f);
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Sort key of a JSONL record: the sweep parameter and the discriminant.
pub type RecordKey = (u64, u64);

pub fn record_key(x: f64, d: u64) -> RecordKey {
    (x.to_bits(), d)
}

/// JSONL output with a single writer thread. Producers send serialized
/// records over a bounded channel; the writer appends them to a partial file
/// in arrival order, and [`JsonlWriter::finish`] rewrites it sorted by key
/// under the provenance header.
pub struct JsonlWriter {
    path: PathBuf,
    header: String,
    tx: Option<mpsc::SyncSender<(RecordKey, String)>>,
    handle: Option<JoinHandle<std::io::Result<()>>>,
}

#[derive(Clone)]
pub struct RecordSender(mpsc::SyncSender<(RecordKey, String)>);

impl RecordSender {
    pub fn send<T: Serialize>(&self, key: RecordKey, record: &T) -> Result<()> {
        let line = serde_json::to_string(record)?;
        self.0.send((key, line)).map_err(|_| Error::Io(std::io::Error::other("record writer has stopped")))
    }
}

impl JsonlWriter {
    pub fn create(path: &Path, header: String, bound: usize) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let partial = path.with_extension("jsonl.partial");
        let file = std::fs::File::create(&partial)?;
        let (tx, rx) = mpsc::sync_channel::<(RecordKey, String)>(bound.max(1));
        let handle = std::thread::spawn(move || -> std::io::Result<()> {
            let mut w = BufWriter::new(file);
            for ((a, b), line) in rx {
                writeln!(w, "{a:016x} {b:020} {line}")?;
            }
            w.flush()
        });
        Ok(JsonlWriter { path: path.to_path_buf(), header, tx: Some(tx), handle: Some(handle) })
    }

    pub fn sender(&self) -> RecordSender {
        RecordSender(self.tx.as_ref().expect("writer is open").clone())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        drop(self.tx.take());
        let handle = self.handle.take().expect("writer thread");
        handle.join().map_err(|_| Error::Io(std::io::Error::other("record writer panicked")))??;
        let partial = self.path.with_extension("jsonl.partial");
        let mut lines = Vec::new();
        for line in std::io::BufReader::new(std::fs::File::open(&partial)?).lines() {
            lines.push(line?);
        }
        lines.sort();
        let mut body = String::new();
        for l in &lines {
            // strip the fixed-width sort prefix
            body.push_str(&l[16 + 1 + 20 + 1..]);
            body.push('\n');
        }
        write_atomic(&self.path, &self.header, &body)?;
        std::fs::remove_file(&partial)?;
        Ok(self.path.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::Cell;

    #[test]
    fn cold_then_warm() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::new(Some(dir.path().to_path_buf()), false);
        let calls = Cell::new(0);
        let produce = || {
            calls.set(calls.get() + 1);
            Ok(vec![0.1f64, 1.0 / 3.0, 2e-300])
        };
        let a: Vec<f64> = store.load_or_compute("t", &(8u64, 0.5f64), produce).unwrap();
        assert_eq!(calls.get(), 1);
        let b: Vec<f64> = store.load_or_compute("t", &(8u64, 0.5f64), produce).unwrap();
        assert_eq!(calls.get(), 1);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let _: Vec<f64> = store.load_or_compute("t", &(16u64, 0.5f64), produce).unwrap();
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn version_change_recomputes() {
        let dir = tempfile::tempdir().unwrap();
        let old = ResultStore::with_version(Some(dir.path().to_path_buf()), false, "old");
        let new = ResultStore::with_version(Some(dir.path().to_path_buf()), false, "new");
        let calls = Cell::new(0);
        let produce = || {
            calls.set(calls.get() + 1);
            Ok(1u32)
        };
        let _: u32 = old.load_or_compute("t", "k", produce).unwrap();
        let _: u32 = new.load_or_compute("t", "k", produce).unwrap();
        assert_eq!(calls.get(), 2);
    }

    #[test]
    fn corruption_is_detected_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultStore::new(Some(dir.path().to_path_buf()), false);
        let _: u32 = store.load_or_compute("t", "k", || Ok(41)).unwrap();
        let file = walk(dir.path()).pop().unwrap();
        let text = std::fs::read_to_string(&file).unwrap().replace("\"payload\":\"41\"", "\"payload\":\"42\"");
        std::fs::write(&file, text).unwrap();
        let v: u32 = store.load_or_compute("t", "k", || Ok(41)).unwrap();
        assert_eq!(v, 41);
        assert_eq!(store.counters.corrupt.load(Ordering::Relaxed), 1);
        let v: u32 = store.load_or_compute("t", "k", || panic!("entry was repaired")).unwrap();
        assert_eq!(v, 41);
    }

    fn walk(p: &Path) -> Vec<PathBuf> {
        let mut out = Vec::new();
        for e in std::fs::read_dir(p).unwrap() {
            let e = e.unwrap().path();
            if e.is_dir() {
                out.extend(walk(&e));
            } else {
                out.push(e);
            }
        }
        out
    }

    #[test]
    fn writer_sorts_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let w = JsonlWriter::create(&path, "# head".into(), 4).unwrap();
        let s = w.sender();
        let handles: Vec<_> = (0..4u64)
            .map(|t| {
                let s = s.clone();
                std::thread::spawn(move || {
                    for d in (0..50u64).filter(|d| d % 4 == t) {
                        s.send(record_key(1000.0, 1000 - d), &serde_json::json!({ "d": 1000 - d })).unwrap();
                    }
                })
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
        drop(s);
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# head"));
        let ds: Vec<u64> = lines.map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["d"].as_u64().unwrap()).collect();
        assert_eq!(ds, (951..=1000).collect::<Vec<_>>());
    }
}
