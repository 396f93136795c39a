//! Database manifests: which template file holds impression `j` of finger `i`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::TemplateKey;
use crate::template::{parse_xyt, MinutiaeTemplate};

/// FVC-style file naming.
pub const DEFAULT_NAMING: &str = "{finger}_{impression}.xyt";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub finger: u32,
    pub impression: u32,
    pub path: PathBuf,
}

/// `n` fingers by `m` impressions, entries ordered by finger then impression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseManifest {
    pub name: String,
    pub n: u32,
    pub m: u32,
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative entry paths resolve against.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatabaseManifest {
    /// Builds a manifest from explicit entries, checking completeness.
    pub fn from_entries(
        name: impl Into<String>,
        n: u32,
        m: u32,
        root: impl Into<PathBuf>,
        entries: Vec<ManifestEntry>,
    ) -> Result<Self> {
        let manifest = DatabaseManifest {
            name: name.into(),
            n,
            m,
            entries,
            root: root.into(),
        };
        manifest.check_complete()?;
        Ok(manifest)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Verifies there is exactly one entry per `(i, j)` in `1..=n × 1..=m`,
    /// stored in `(i, j)` ascending order.
    pub fn check_complete(&self) -> Result<()> {
        let mut seen = BTreeMap::new();
        for e in &self.entries {
            if e.finger == 0 || e.finger > self.n || e.impression == 0 || e.impression > self.m {
                return Err(Error::Validation(format!(
                    "manifest {}: entry ({}, {}) outside {}x{}",
                    self.name, e.finger, e.impression, self.n, self.m
                )));
            }
            if seen.insert((e.finger, e.impression), ()).is_some() {
                return Err(Error::Validation(format!(
                    "manifest {}: duplicate entry ({}, {})",
                    self.name, e.finger, e.impression
                )));
            }
        }
        let missing = (1..=self.n)
            .flat_map(|i| (1..=self.m).map(move |j| (i, j)))
            .filter(|ij| !seen.contains_key(ij))
            .collect::<Vec<_>>();
        if !missing.is_empty() {
            return Err(Error::Incomplete { missing });
        }
        let ordered = self
            .entries
            .windows(2)
            .all(|w| (w[0].finger, w[0].impression) < (w[1].finger, w[1].impression));
        if !ordered {
            return Err(Error::Validation(format!(
                "manifest {}: entries not in (finger, impression) order",
                self.name
            )));
        }
        Ok(())
    }

    pub fn entry(&self, finger: u32, impression: u32) -> Option<&ManifestEntry> {
        if finger == 0 || finger > self.n || impression == 0 || impression > self.m {
            return None;
        }
        let idx = ((finger - 1) * self.m + (impression - 1)) as usize;
        self.entries.get(idx)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.root.join(&entry.path)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Reads a manifest JSON; relative entry paths resolve against its directory.
    pub fn read_json(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatabaseManifest =
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?;
        manifest.root = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        manifest.check_complete()?;
        Ok(manifest)
    }
}

/// Expands a naming scheme such as `{finger}_{impression}.xyt`.
pub fn expand_naming(scheme: &str, finger: u32, impression: u32) -> String {
    scheme
        .replace("{finger}", &finger.to_string())
        .replace("{impression}", &impression.to_string())
}

/// Scans `root` for the `n × m` template files named by `naming_scheme`.
///
/// Fails with [`Error::Incomplete`] listing every missing `(finger, impression)`.
pub fn load_manifest(root: &Path, naming_scheme: &str, n: u32, m: u32) -> Result<DatabaseManifest> {
    if !naming_scheme.contains("{finger}") || !naming_scheme.contains("{impression}") {
        return Err(Error::Config(format!(
            "naming scheme {naming_scheme:?} needs {{finger}} and {{impression}} placeholders"
        )));
    }
    if n == 0 || m == 0 {
        return Err(Error::Config("n and m must be at least 1".into()));
    }
    let meta = fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::Validation(format!("{} is not a directory", root.display())));
    }
    let mut entries = Vec::with_capacity((n * m) as usize);
    let mut missing = Vec::new();
    for finger in 1..=n {
        for impression in 1..=m {
            let file = expand_naming(naming_scheme, finger, impression);
            if root.join(&file).is_file() {
                entries.push(ManifestEntry {
                    finger,
                    impression,
                    path: PathBuf::from(file),
                });
            } else {
                missing.push((finger, impression));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Incomplete { missing });
    }
    let name = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "db".to_string());
    DatabaseManifest::from_entries(name, n, m, root, entries)
}

/// One template with its identity and on-disk location.
#[derive(Debug, Clone)]
pub struct StoredTemplate {
    pub key: TemplateKey,
    pub path: PathBuf,
    pub template: MinutiaeTemplate,
}

/// A manifest with all of its templates parsed into memory.
#[derive(Debug, Clone)]
pub struct Database {
    pub manifest: DatabaseManifest,
    templates: Vec<StoredTemplate>,
}

impl Database {
    pub fn load(manifest: DatabaseManifest) -> Result<Self> {
        manifest.check_complete()?;
        let mut templates = Vec::with_capacity(manifest.entries.len());
        for entry in &manifest.entries {
            let path = manifest.resolve(entry);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let mut template = parse_xyt(&text, &entry.finger.to_string(), entry.impression)
                .map_err(|e| match e {
                    Error::Parse { line, message } => Error::Parse {
                        line,
                        message: format!("{}: {message}", path.display()),
                    },
                    other => other,
                })?;
            template.source_db = manifest.name.clone();
            for w in template.warnings() {
                log::warn!("{}: {w:?}", path.display());
            }
            templates.push(StoredTemplate {
                key: TemplateKey::new(&manifest.name, entry.finger, entry.impression),
                path,
                template,
            });
        }
        Ok(Database {
            manifest,
            templates,
        })
    }

    /// Builds a database from templates already in memory (ordered by
    /// finger, then impression). Paths are taken from the manifest.
    pub fn from_templates(manifest: DatabaseManifest, templates: Vec<MinutiaeTemplate>) -> Result<Self> {
        manifest.check_complete()?;
        if templates.len() != manifest.entries.len() {
            return Err(Error::Validation(format!(
                "{} templates for {} manifest entries",
                templates.len(),
                manifest.entries.len()
            )));
        }
        let templates = manifest
            .entries
            .iter()
            .zip(templates)
            .map(|(entry, mut template)| {
                template.source_db = manifest.name.clone();
                StoredTemplate {
                    key: TemplateKey::new(&manifest.name, entry.finger, entry.impression),
                    path: manifest.resolve(entry),
                    template,
                }
            })
            .collect();
        Ok(Database {
            manifest,
            templates,
        })
    }

    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    pub fn n(&self) -> u32 {
        self.manifest.n
    }

    pub fn m(&self) -> u32 {
        self.manifest.m
    }

    pub fn get(&self, finger: u32, impression: u32) -> Option<&StoredTemplate> {
        if finger == 0 || finger > self.n() || impression == 0 || impression > self.m() {
            return None;
        }
        self.templates
            .get(((finger - 1) * self.m() + (impression - 1)) as usize)
    }

    pub fn templates(&self) -> &[StoredTemplate] {
        &self.templates
    }
}

/// Resolves template keys across several databases.
#[derive(Debug, Default)]
pub struct TemplateStore<'a> {
    dbs: BTreeMap<&'a str, &'a Database>,
}

impl<'a> TemplateStore<'a> {
    pub fn new() -> Self {
        TemplateStore::default()
    }

    pub fn with(dbs: impl IntoIterator<Item = &'a Database>) -> Self {
        let mut store = TemplateStore::new();
        for db in dbs {
            store.insert(db);
        }
        store
    }

    pub fn insert(&mut self, db: &'a Database) {
        self.dbs.insert(db.name(), db);
    }

    pub fn get(&self, key: &TemplateKey) -> Result<&'a StoredTemplate> {
        self.dbs
            .get(key.db.as_str())
            .and_then(|db| db.get(key.finger, key.impression))
            .ok_or_else(|| Error::UnknownTemplate(key.clone()))
    }
}
