use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Label, Split};
use crate::error::{Error, Result};

/// One sample reference. `plan_index` is `None` for an original ROI and the
/// augmentation plan entry otherwise; `split` is `None` until assigned.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
    pub split: Option<Split>,
    pub roi_id: u64,
    pub plan_index: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    path: String,
    label: String,
    split: String,
    roi_id: u64,
    plan_index: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Manifest(format!("{other:?}")),
    }
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == Some(split))
    }

    pub fn count(&self, split: Option<Split>, label: Label) -> usize {
        self.entries.iter().filter(|e| e.split == split && e.label == label).count()
    }

    /// Checks that every sample is assigned and that each split holds equal
    /// class counts within one sample.
    pub fn check_balanced_splits(&self) -> Result<()> {
        let mut counts: BTreeMap<Split, [usize; 2]> = BTreeMap::new();
        for e in &self.entries {
            let split = e.split.ok_or_else(|| Error::Manifest(format!("{} has no split", e.path)))?;
            counts.entry(split).or_default()[e.label.class_index()] += 1;
        }
        for (split, [normal, ad]) in counts {
            if normal.abs_diff(ad) > 1 {
                return Err(Error::Manifest(format!("split {split} unbalanced: {ad} ad vs {normal} normal")));
            }
        }
        Ok(())
    }

    pub fn to_writer<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for e in &self.entries {
            wr.serialize(Row {
                path: e.path.clone(),
                label: e.label.to_string(),
                split: e.split.map(|s| s.to_string()).unwrap_or_default(),
                roi_id: e.roi_id,
                plan_index: e.plan_index.map(|p| p.to_string()).unwrap_or_default(),
            })
            .map_err(csv_err)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn from_reader<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers().map_err(csv_err)?;
        if headers != vec!["path", "label", "split", "roi_id", "plan_index"] {
            return Err(Error::Manifest(format!("unexpected header {headers:?}")));
        }
        let mut entries = Vec::new();
        for row in rd.deserialize::<Row>() {
            let row = row.map_err(csv_err)?;
            entries.push(ManifestEntry {
                path: row.path,
                label: row.label.parse()?,
                split: if row.split.is_empty() { None } else { Some(row.split.parse()?) },
                roi_id: row.roi_id,
                plan_index: if row.plan_index.is_empty() {
                    None
                } else {
                    Some(row.plan_index.parse().map_err(|_| Error::Manifest(format!("bad plan_index {:?}", row.plan_index)))?)
                },
            });
        }
        Ok(Self { entries })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_writer(std::io::BufWriter::new(file))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
