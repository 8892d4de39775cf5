//! Run manifest: one plain-text file per command run, listing the outcome
//! flags, every emitted file with its content checksum, and the full
//! parameter snapshot. The exit status is derivable from the manifest
//! alone (`exit_status` line).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Write-then-rename so partially written files never appear under the
/// final name.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp-write");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Debug, Default)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub wall_time_s: f64,
    pub exit_status: i32,
    pub flags: Vec<(String, String)>,
    pub files: Vec<(PathBuf, String)>,
    pub parameter_snapshot: String,
}

impl RunManifest {
    pub fn new(command: &str, config_digest: &str, snapshot: &str) -> Self {
        Self {
            command: command.to_string(),
            config_digest: config_digest.to_string(),
            parameter_snapshot: snapshot.to_string(),
            ..Default::default()
        }
    }

    pub fn flag(&mut self, key: &str, value: impl ToString) {
        self.flags.push((key.to_string(), value.to_string()));
    }

    /// Record an emitted file together with its checksum.
    pub fn add_file(&mut self, path: &Path, contents: &[u8]) {
        self.files.push((path.to_path_buf(), sha256_hex(contents)));
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command = {}\n", self.command));
        out.push_str(&format!("config_digest = sha256:{}\n", self.config_digest));
        out.push_str(&format!("exit_status = {}\n", self.exit_status));
        out.push_str(&format!("wall_time_s = {:.3}\n", self.wall_time_s));
        for (k, v) in &self.flags {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out.push_str("\n[files]\n");
        for (p, digest) in &self.files {
            out.push_str(&format!("{} sha256:{digest}\n", p.display()));
        }
        out.push_str("\n[parameters]\n");
        for line in self.parameter_snapshot.lines() {
            out.push_str("  ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let path = out_dir.join(format!("manifest_{}.txt", self.command));
        write_atomic(&path, self.to_text().as_bytes())?;
        Ok(path)
    }
}
