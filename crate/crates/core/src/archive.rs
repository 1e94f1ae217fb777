//! Reproducible `.tar.gz` bundles of descriptors.
//!
//! Entries are sorted by file name and carry zero timestamps, zero owner ids
//! and mode 0644, so the same set of files always yields the same bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::{Component, Path};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use sha2::{Digest, Sha256};

use crate::error::ArchiveError;
use crate::marshal::VirtualSensorDescriptor;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Archive {
    pub bytes: Vec<u8>,
    /// Lower-case hex SHA-256 of `bytes`.
    pub digest: String,
    pub entries: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn compress(files: &[VirtualSensorDescriptor]) -> Result<Archive, ArchiveError> {
    compress_entries(
        files
            .iter()
            .map(|f| (f.file_name.as_str(), f.content.as_slice())),
    )
}

/// Archives arbitrary `(file name, content)` pairs.
pub fn compress_entries<'a, I>(entries: I) -> Result<Archive, ArchiveError>
where
    I: IntoIterator<Item = (&'a str, &'a [u8])>,
{
    let mut entries: Vec<(&str, &[u8])> = entries.into_iter().collect();
    if entries.is_empty() {
        return Err(ArchiveError::EmptyFileList);
    }
    entries.sort_by(|a, b| a.0.cmp(b.0));
    for (name, _) in &entries {
        check_entry_name(name)?;
    }

    let raw: usize = entries.iter().map(|(_, c)| c.len()).sum();
    let encoder = GzEncoder::new(Vec::with_capacity(raw / 4 + 1024), Compression::fast());
    let mut builder = tar::Builder::new(encoder);
    builder.mode(tar::HeaderMode::Deterministic);
    for (name, content) in &entries {
        let mut header = tar::Header::new_gnu();
        header.set_entry_type(tar::EntryType::Regular);
        header.set_size(content.len() as u64);
        header.set_mode(0o644);
        header.set_mtime(0);
        header.set_uid(0);
        header.set_gid(0);
        builder.append_data(&mut header, name, *content)?;
    }
    let bytes = builder.into_inner()?.finish()?;
    Ok(Archive {
        digest: sha256_hex(&bytes),
        entries: entries.len(),
        bytes,
    })
}

fn check_entry_name(name: &str) -> Result<(), ArchiveError> {
    let mut components = Path::new(name).components();
    match (components.next(), components.next()) {
        (Some(Component::Normal(_)), None) => Ok(()),
        _ => Err(ArchiveError::UnsafeEntry(name.to_string())),
    }
}

/// Decompresses an archive into memory as `(file name, content)` pairs in
/// archive order. Only flat regular-file entries are accepted.
pub fn read_entries(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>, ArchiveError> {
    let mut archive = tar::Archive::new(GzDecoder::new(bytes));
    let mut out = Vec::new();
    for entry in archive.entries()? {
        let mut entry = entry?;
        let name = entry.path()?.to_string_lossy().into_owned();
        if entry.header().entry_type() != tar::EntryType::Regular {
            return Err(ArchiveError::UnsafeEntry(name));
        }
        check_entry_name(&name)?;
        let mut content = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut content)?;
        out.push((name, content));
    }
    Ok(out)
}

/// Extracts every entry directly into `dir` (created if missing) and returns
/// the number of files written.
pub fn unpack_into(bytes: &[u8], dir: &Path) -> Result<usize, ArchiveError> {
    fs::create_dir_all(dir)?;
    let entries = read_entries(bytes)?;
    for (name, content) in &entries {
        let mut f = fs::File::create(dir.join(name))?;
        f.write_all(content)?;
    }
    Ok(entries.len())
}
