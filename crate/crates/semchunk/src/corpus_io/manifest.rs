//! Corpus manifest: the authoritative page list with image locations,
//! dimensions, and per-file checksums.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::PageGeom;

use super::{json_error, read_utf8};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageEntry {
    pub page_id: String,
    pub image_uri: String,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus_id: String,
    pub pages: Vec<PageEntry>,
    /// file name -> hex SHA-256
    pub checksums: BTreeMap<String, String>,
}

impl Manifest {
    pub fn page_geom(&self, page_id: &str) -> Option<PageGeom> {
        self.pages.iter().find(|p| p.page_id == page_id).map(|p| PageGeom {
            page_id: p.page_id.clone(),
            width: p.width,
            height: p.height,
        })
    }

    pub fn geoms(&self) -> Vec<PageGeom> {
        self.pages
            .iter()
            .map(|p| PageGeom {
                page_id: p.page_id.clone(),
                width: p.width,
                height: p.height,
            })
            .collect()
    }

    /// Verify recorded checksums against files resolved relative to `base`.
    pub fn verify_checksums(&self, base: &Path) -> Result<()> {
        for (name, expected) in &self.checksums {
            let bytes = std::fs::read(base.join(name))?;
            let actual = hex::encode(Sha256::digest(&bytes));
            if &actual != expected {
                return Err(Error::InvalidInput(format!(
                    "checksum mismatch for {name}: expected {expected}, got {actual}"
                )));
            }
        }
        Ok(())
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = read_utf8(path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| json_error(path, None, &e))?;
    let mut seen = std::collections::BTreeSet::new();
    for p in &manifest.pages {
        if !seen.insert(&p.page_id) {
            return Err(Error::DuplicateId(p.page_id.clone()));
        }
        if p.width == 0 || p.height == 0 {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                line: None,
                msg: format!("page {} has zero dimensions", p.page_id),
            });
        }
    }
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    super::write_canonical_json(path, manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn duplicate_page_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        fs::write(
            &path,
            r#"{"corpus_id":"c","pages":[
                {"page_id":"p1","image_uri":"a.png","width":10,"height":10},
                {"page_id":"p1","image_uri":"b.png","width":10,"height":10}],
                "checksums":{}}"#,
        )
        .unwrap();
        assert!(matches!(
            load_manifest(&path).unwrap_err(),
            Error::DuplicateId(_)
        ));
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            corpus_id: "demo".into(),
            pages: vec![PageEntry {
                page_id: "p1".into(),
                image_uri: "p1.png".into(),
                width: 640,
                height: 480,
            }],
            checksums: BTreeMap::new(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        write_manifest(&path, &m).unwrap();
        let loaded = load_manifest(&path).unwrap();
        assert_eq!(loaded, m);
        assert_eq!(loaded.page_geom("p1").unwrap().width, 640);
        assert!(loaded.page_geom("nope").is_none());
    }
}
