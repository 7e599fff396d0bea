//! Client side of the reconstruction service: `POST /reconstruct` with a
//! multipart body of ordered images; the response is a zip archive of a
//! bundle directory.

use std::fs;
use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::time::Duration;

use reqwest::blocking::{multipart, Client};

use super::format::{load_bundle, MANIFEST_FILE};
use super::{BundleError, ReconstructionBundle};

pub const RECONSTRUCT_PATH: &str = "/reconstruct";

pub fn reconstruct_remote(
    image_paths: &[PathBuf],
    endpoint: &str,
    timeout: Duration,
) -> Result<ReconstructionBundle, BundleError> {
    let mut form = multipart::Form::new();
    for path in image_paths {
        let bytes = fs::read(path).map_err(|source| BundleError::Io { path: path.clone(), source })?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        form = form.part("images", multipart::Part::bytes(bytes).file_name(name));
    }
    let client = Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| BundleError::RemoteTransport(e.to_string()))?;
    let url = format!("{}{}", endpoint.trim_end_matches('/'), RECONSTRUCT_PATH);
    let response = client.post(&url).multipart(form).send().map_err(|e| classify(e, timeout))?;
    let status = response.status();
    if !status.is_success() {
        let body = response.text().unwrap_or_default();
        return Err(BundleError::RemoteStatus { status: status.as_u16(), body: truncate(body, 512) });
    }
    let bytes = response.bytes().map_err(|e| classify(e, timeout))?;
    let dir = tempfile::tempdir().map_err(|source| BundleError::Io { path: std::env::temp_dir(), source })?;
    let root = extract_archive(&bytes, dir.path())?;
    load_bundle(&root)
}

fn classify(e: reqwest::Error, timeout: Duration) -> BundleError {
    if e.is_timeout() {
        BundleError::RemoteTimeout(timeout)
    } else {
        BundleError::RemoteTransport(e.to_string())
    }
}

fn truncate(mut s: String, max: usize) -> String {
    if s.len() > max {
        let mut cut = max;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}

/// Unpacks `bytes` into `dest` and returns the directory holding the
/// manifest: either `dest` itself or its single top-level subdirectory.
pub(crate) fn extract_archive(bytes: &[u8], dest: &Path) -> Result<PathBuf, BundleError> {
    let malformed = |m: String| BundleError::MalformedArchive(m);
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(|e| malformed(e.to_string()))?;
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(|e| malformed(e.to_string()))?;
        let Some(rel) = entry.enclosed_name() else {
            return Err(malformed(format!("entry {:?} escapes the archive root", entry.name())));
        };
        let out = dest.join(rel);
        if entry.is_dir() {
            fs::create_dir_all(&out).map_err(|source| BundleError::Io { path: out.clone(), source })?;
            continue;
        }
        if let Some(parent) = out.parent() {
            fs::create_dir_all(parent).map_err(|source| BundleError::Io { path: parent.to_path_buf(), source })?;
        }
        let mut buf = Vec::new();
        entry.read_to_end(&mut buf).map_err(|e| malformed(format!("{}: {e}", entry.name())))?;
        fs::write(&out, buf).map_err(|source| BundleError::Io { path: out.clone(), source })?;
    }
    if dest.join(MANIFEST_FILE).is_file() {
        return Ok(dest.to_path_buf());
    }
    let subdirs: Vec<PathBuf> = fs::read_dir(dest)
        .map_err(|source| BundleError::Io { path: dest.to_path_buf(), source })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    match subdirs.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(malformed(format!("archive has no {MANIFEST_FILE}"))),
    }
}

/// Packs a bundle directory into a zip archive, entries sorted by path.
pub fn archive_bundle_dir(dir: &Path) -> Result<Vec<u8>, BundleError> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut out = Cursor::new(Vec::new());
    let mut zip = zip::ZipWriter::new(&mut out);
    let options = zip::write::SimpleFileOptions::default().compression_method(zip::CompressionMethod::Deflated);
    for rel in files {
        let path = dir.join(&rel);
        let bytes = fs::read(&path).map_err(|source| BundleError::Io { path: path.clone(), source })?;
        let name = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        zip.start_file(name, options).map_err(|e| BundleError::MalformedArchive(e.to_string()))?;
        std::io::Write::write_all(&mut zip, &bytes).map_err(|source| BundleError::Io { path, source })?;
    }
    zip.finish().map_err(|e| BundleError::MalformedArchive(e.to_string()))?;
    Ok(out.into_inner())
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), BundleError> {
    let entries = fs::read_dir(dir).map_err(|source| BundleError::Io { path: dir.to_path_buf(), source })?;
    for entry in entries {
        let path = entry.map_err(|source| BundleError::Io { path: dir.to_path_buf(), source })?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}
