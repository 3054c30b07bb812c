use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::quantum::C64;

/// Version of the CSV column layouts; bumped whenever a column is added, removed or moved.
pub const CSV_FORMAT_VERSION: u32 = 1;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Every float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Pretty JSON writer that prints floats with 17 significant digits.
struct SigFormatter(PrettyFormatter<'static>);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }
    fn begin_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + std::io::Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + std::io::Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory");
    buf.push(b'\n');
    buf
}

pub fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// CSV text with a header row; cells are written as given.
#[derive(Debug, Default)]
pub struct CsvTable {
    text: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[String]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        CsvTable {
            text,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Column names `rho_jk_re, rho_jk_im` in row-major order.
pub fn rho_columns(levels: usize) -> Vec<String> {
    let mut v = Vec::with_capacity(2 * levels * levels);
    for j in 0..levels {
        for k in 0..levels {
            v.push(format!("rho_{j}{k}_re"));
            v.push(format!("rho_{j}{k}_im"));
        }
    }
    v
}

pub fn rho_cells(rho: &[C64]) -> impl Iterator<Item = String> + '_ {
    rho.iter().flat_map(|z| [fmt_f64(z.re), fmt_f64(z.im)])
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// An output directory whose files are recorded with checksums and listed in a manifest
/// written last.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<(String, String, usize)>,
    started: f64,
}

impl OutputDir {
    /// Opens `root`, creating it if needed. A directory holding files from a previous run
    /// (listed in its manifest) is cleared of exactly those files; any other content is an error.
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        let manifest = root.join(MANIFEST_NAME);
        if manifest.exists() {
            let old: Value = serde_json::from_slice(&std::fs::read(&manifest)?)
                .map_err(|e| Error::config(manifest.display().to_string(), format!("unreadable manifest: {e}")))?;
            if let Some(files) = old.get("files").and_then(Value::as_array) {
                for f in files {
                    if let Some(p) = f.get("path").and_then(Value::as_str) {
                        let target = root.join(p);
                        if target.parent() == Some(root) && target.exists() {
                            std::fs::remove_file(target)?;
                        }
                    }
                }
            }
            std::fs::remove_file(&manifest)?;
        }
        let leftovers: Vec<String> = std::fs::read_dir(root)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        if !leftovers.is_empty() {
            return Err(Error::config(
                root.display().to_string(),
                format!("output directory contains files not produced by a previous run: {}", leftovers.join(", ")),
            ));
        }
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
            started: unix_seconds(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name == MANIFEST_NAME || name.contains('/') || self.files.iter().any(|f| f.0 == name) {
            return Err(Error::InvalidArgument(format!("invalid or duplicate output name {name}")));
        }
        let mut f = std::fs::File::create(self.root.join(name))?;
        f.write_all(bytes)?;
        f.sync_all()?;
        self.files.push((name.to_string(), sha256_hex(bytes), bytes.len()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &to_json_bytes(value))
    }

    pub fn file_names(&self) -> BTreeSet<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    /// Writes the manifest; must be the last write.
    pub fn finish(self, command: &str, config_bytes: &[u8], master_seed: Option<u64>, extra: Value) -> Result<PathBuf> {
        let files: Vec<Value> = self
            .files
            .iter()
            .map(|(p, h, n)| json!({"path": p, "sha256": h, "bytes": n}))
            .collect();
        let manifest = json!({
            "command": command,
            "code_version": env!("CARGO_PKG_VERSION"),
            "csv_format_version": CSV_FORMAT_VERSION,
            "config_sha256": sha256_hex(config_bytes),
            "master_seed": master_seed,
            "started_unix_s": self.started,
            "finished_unix_s": unix_seconds(),
            "run": extra,
            "files": files,
        });
        let path = self.root.join(MANIFEST_NAME);
        std::fs::write(&path, to_json_bytes(&manifest))?;
        Ok(path)
    }
}

/// Checks that every file next to `manifest` is listed there with a matching checksum.
pub fn verify_manifest(dir: &Path) -> Result<()> {
    let m: Value = serde_json::from_slice(&std::fs::read(dir.join(MANIFEST_NAME))?)
        .map_err(|e| Error::InvalidState(format!("manifest is not JSON: {e}")))?;
    let listed: Vec<(String, String)> = m["files"]
        .as_array()
        .ok_or_else(|| Error::InvalidState("manifest has no file list".into()))?
        .iter()
        .map(|f| (f["path"].as_str().unwrap_or("").to_string(), f["sha256"].as_str().unwrap_or("").to_string()))
        .collect();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name == MANIFEST_NAME {
            continue;
        }
        let Some((_, h)) = listed.iter().find(|(p, _)| *p == name) else {
            return Err(Error::InvalidState(format!("{name} is not listed in the manifest")));
        };
        if sha256_hex(&std::fs::read(dir.join(&name))?) != *h {
            return Err(Error::InvalidState(format!("checksum mismatch for {name}")));
        }
    }
    for (p, _) in &listed {
        if !dir.join(p).exists() {
            return Err(Error::InvalidState(format!("{p} listed in the manifest is missing")));
        }
    }
    Ok(())
}
