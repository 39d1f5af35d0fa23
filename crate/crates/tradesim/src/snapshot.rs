//! On-disk snapshot store.
//!
//! Layout of a store directory:
//!
//! ```text
//! prices/<name>.jsonl   one file per asset series
//! news/<name>.jsonl     one file per news tag
//! catalog.jsonl         prediction-market catalog
//! ```
//!
//! Every file starts with a header line
//! `{"format":"tradesim-snapshot","version":1,"kind":…,"key":…}` followed by one
//! JSON record per line, sorted (prices by date, news by url, catalog by
//! question). File names are derived from the key; the header carries the exact
//! key. Files are rewritten atomically and only when their content changes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tradesim_core::domain::{AssetId, NewsItem, PricePoint};
use tradesim_core::store::{CatalogEntry, Snapshot, SnapshotStore, StoreError};

pub const SNAPSHOT_FORMAT: &str = "tradesim-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Prices,
    News,
    Catalog,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub format: String,
    pub version: u32,
    pub kind: FileKind,
    pub key: String,
}

impl FileHeader {
    fn new(kind: FileKind, key: &str) -> Self {
        Self {
            format: SNAPSHOT_FORMAT.to_string(),
            version: SNAPSHOT_VERSION,
            kind,
            key: key.to_string(),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SnapshotError + '_ {
    move |source| SnapshotError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Filesystem-safe name for a key: a readable slug plus a short hash when the
/// slug is lossy.
pub fn file_stem(key: &str) -> String {
    let slug: String = key
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .take(60)
        .collect();
    if slug == key && !slug.starts_with('.') {
        return slug;
    }
    let hash = Sha256::digest(key.as_bytes());
    let short: String = hash.iter().take(4).map(|b| format!("{b:02x}")).collect();
    format!("{slug}-{short}")
}

fn render<T: Serialize>(header: &FileHeader, rows: impl IntoIterator<Item = T>) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for row in rows {
        out.push_str(&serde_json::to_string(&row).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Writes `content` to `path` atomically unless the file already holds it.
/// Returns whether the file changed.
pub fn write_if_changed(path: &Path, content: &str) -> Result<bool, SnapshotError> {
    if let Ok(existing) = fs::read_to_string(path) {
        if existing == content {
            return Ok(false);
        }
    }
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(content.as_bytes()).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| SnapshotError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(true)
}

fn parse_file<T: for<'de> Deserialize<'de>>(
    path: &Path,
    kind: FileKind,
) -> Result<(String, Vec<T>), SnapshotError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let corrupt = |line: usize, message: String| SnapshotError::Corrupt {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| corrupt(1, "empty file".into()))?;
    let header: FileHeader =
        serde_json::from_str(first).map_err(|e| corrupt(1, format!("bad header: {e}")))?;
    if header.format != SNAPSHOT_FORMAT {
        return Err(corrupt(1, format!("unknown format `{}`", header.format)));
    }
    if header.version != SNAPSHOT_VERSION {
        return Err(corrupt(1, format!("unsupported version {}", header.version)));
    }
    if header.kind != kind {
        return Err(corrupt(1, "file kind does not match its directory".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(line).map_err(|e| corrupt(i + 1, e.to_string()))?);
    }
    Ok((header.key, rows))
}

fn jsonl_files(dir: &Path) -> Result<Vec<PathBuf>, SnapshotError> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    Ok(files)
}

/// Loads a store directory. A missing directory is an empty store.
pub fn load_store(dir: &Path) -> Result<SnapshotStore, SnapshotError> {
    let mut store = SnapshotStore::new();
    for path in jsonl_files(&dir.join("prices"))? {
        let (key, points): (String, Vec<PricePoint>) = parse_file(&path, FileKind::Prices)?;
        let asset = AssetId::new(key).map_err(|e| SnapshotError::Corrupt {
            path: path.clone(),
            line: 1,
            message: e.to_string(),
        })?;
        store.record(Snapshot::Prices { asset, points })?;
    }
    for path in jsonl_files(&dir.join("news"))? {
        let (tag, items): (String, Vec<NewsItem>) = parse_file(&path, FileKind::News)?;
        if let Some(bad) = items.iter().position(|n| n.tag != tag) {
            return Err(SnapshotError::Corrupt {
                path,
                line: bad + 2,
                message: "news item tag differs from file key".into(),
            });
        }
        store.record(Snapshot::News(items))?;
    }
    let catalog = dir.join("catalog.jsonl");
    if catalog.exists() {
        let (_, entries): (String, Vec<CatalogEntry>) = parse_file(&catalog, FileKind::Catalog)?;
        for e in entries {
            store.record(Snapshot::Market(e))?;
        }
    }
    Ok(store)
}

/// Writes every series of `store` under `dir`. Returns the number of files changed.
pub fn save_store(dir: &Path, store: &SnapshotStore) -> Result<usize, SnapshotError> {
    let mut changed = 0;
    for asset in store.assets() {
        let header = FileHeader::new(FileKind::Prices, asset.as_str());
        let path = dir.join("prices").join(format!("{}.jsonl", file_stem(asset.as_str())));
        changed += write_if_changed(&path, &render(&header, store.series(asset.as_str())))? as usize;
    }
    for tag in store.news_tags() {
        let header = FileHeader::new(FileKind::News, tag);
        let path = dir.join("news").join(format!("{}.jsonl", file_stem(tag)));
        changed += write_if_changed(&path, &render(&header, store.news_for(tag)))? as usize;
    }
    let entries: Vec<&CatalogEntry> = store.catalog().collect();
    if !entries.is_empty() {
        let header = FileHeader::new(FileKind::Catalog, "catalog");
        changed += write_if_changed(&dir.join("catalog.jsonl"), &render(&header, entries))? as usize;
    }
    Ok(changed)
}

/// Records snapshots into the store at `dir`, persisting the result.
/// Conflicting batches are reported and skipped; the others are kept.
pub fn record_into(
    dir: &Path,
    snapshots: Vec<Snapshot>,
) -> Result<(usize, Vec<StoreError>), SnapshotError> {
    let mut store = load_store(dir)?;
    let mut added = 0;
    let mut conflicts = Vec::new();
    for snap in snapshots {
        match store.record(snap) {
            Ok(n) => added += n,
            Err(e) => conflicts.push(e),
        }
    }
    save_store(dir, &store)?;
    Ok((added, conflicts))
}

/// Price series grouped by asset, for fixture authoring.
pub fn store_from_series(
    series: BTreeMap<AssetId, Vec<PricePoint>>,
    news: Vec<NewsItem>,
) -> Result<SnapshotStore, StoreError> {
    let mut store = SnapshotStore::new();
    for (asset, points) in series {
        store.record(Snapshot::Prices { asset, points })?;
    }
    store.record(Snapshot::News(news))?;
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(d: &str, p: f64) -> PricePoint {
        PricePoint::new(d.parse().unwrap(), p)
    }

    #[test]
    fn stems_are_safe_and_distinct() {
        assert_eq!(file_stem("AAPL"), "AAPL");
        let a = file_stem("Will X happen?_Yes");
        let b = file_stem("Will X happen?_No");
        assert_ne!(a, b);
        assert!(a.chars().all(|c| c.is_ascii_alphanumeric() || "-._".contains(c)));
        assert_ne!(file_stem("a/b"), file_stem("a_b"));
    }

    #[test]
    fn round_trip_and_idempotent_save() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = SnapshotStore::new();
        store
            .record(Snapshot::Prices {
                asset: AssetId::new("Q?_Yes").unwrap(),
                points: vec![pt("2025-10-20", 0.4), pt("2025-10-21", 0.45)],
            })
            .unwrap();
        store
            .record(Snapshot::News(vec![NewsItem {
                title: "t".into(),
                snippet: "s".into(),
                source: "x".into(),
                url: "https://e.com/a".into(),
                published_at: 1_761_000_000,
                tag: "Q?".into(),
            }]))
            .unwrap();
        assert_eq!(save_store(dir.path(), &store).unwrap(), 2);
        assert_eq!(save_store(dir.path(), &store).unwrap(), 0);
        let loaded = load_store(dir.path()).unwrap();
        assert_eq!(loaded, store);
    }

    #[test]
    fn record_into_keeps_good_batches() {
        let dir = tempfile::tempdir().unwrap();
        let a = AssetId::new("A").unwrap();
        let b = AssetId::new("B").unwrap();
        record_into(
            dir.path(),
            vec![Snapshot::Prices { asset: a.clone(), points: vec![pt("2025-10-20", 1.0)] }],
        )
        .unwrap();
        let (added, conflicts) = record_into(
            dir.path(),
            vec![
                Snapshot::Prices { asset: a, points: vec![pt("2025-10-20", 2.0)] },
                Snapshot::Prices { asset: b, points: vec![pt("2025-10-20", 3.0)] },
            ],
        )
        .unwrap();
        assert_eq!(added, 1);
        assert_eq!(conflicts.len(), 1);
        let store = load_store(dir.path()).unwrap();
        assert_eq!(store.series("A")[0].price, 1.0);
        assert_eq!(store.series("B")[0].price, 3.0);
    }

    #[test]
    fn corrupt_line_is_located() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prices").join("A.jsonl");
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(
            &path,
            "{\"format\":\"tradesim-snapshot\",\"version\":1,\"kind\":\"prices\",\"key\":\"A\"}\n{\"date\":\"2025-10-20\",\"price\":1.0}\nnot json\n",
        )
        .unwrap();
        match load_store(dir.path()) {
            Err(SnapshotError::Corrupt { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
