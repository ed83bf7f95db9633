//! Plain-text manifest: one `sha256  bytes  name` line per file in an output directory.

use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.txt";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Rewrite the manifest to list every regular file in `dir` except itself.
pub fn write_manifest(dir: &Path) -> io::Result<Vec<String>> {
    let mut names: Vec<String> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| n != MANIFEST)
        .collect();
    names.sort();
    let mut text = String::new();
    for n in &names {
        let bytes = fs::read(dir.join(n))?;
        text.push_str(&format!("{}  {}  {}\n", sha256_hex(&bytes), bytes.len(), n));
    }
    fs::write(dir.join(MANIFEST), text)?;
    Ok(names)
}

/// Files whose checksum no longer matches the manifest, or that it does not list.
pub fn check_manifest(dir: &Path) -> io::Result<Vec<String>> {
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let mut listed = std::collections::BTreeMap::new();
    for line in text.lines() {
        let mut it = line.split("  ");
        if let (Some(h), Some(_), Some(n)) = (it.next(), it.next(), it.next()) {
            listed.insert(n.to_string(), h.to_string());
        }
    }
    let mut bad = Vec::new();
    for e in fs::read_dir(dir)?.filter_map(|e| e.ok()) {
        let Ok(n) = e.file_name().into_string() else { continue };
        if n == MANIFEST || !e.file_type()?.is_file() {
            continue;
        }
        match listed.get(&n) {
            Some(h) if *h == sha256_hex(&fs::read(e.path())?) => {}
            _ => bad.push(n),
        }
    }
    bad.sort();
    Ok(bad)
}
