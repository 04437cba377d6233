//! On-disk template database: `index.tsv` plus one `.iristpl` file per id.
//!
//! Index lines are `id<TAB>template path[<TAB>ciphertext path]` with paths
//! relative to the store root. The index is replaced atomically through a
//! temporary file and a rename; a store has one writer at a time.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{io_err, IrisError, Result};
use crate::id::TemplateId;
use crate::template::IrisTemplate;

pub const INDEX_FILE: &str = "index.tsv";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoreEntry {
    pub template: PathBuf,
    pub ciphertext: Option<PathBuf>,
}

#[derive(Debug)]
pub struct TemplateStore {
    root: PathBuf,
    entries: BTreeMap<TemplateId, StoreEntry>,
}

impl TemplateStore {
    /// Opens the store at `root`, creating an empty one when there is no
    /// index yet.
    pub fn open(root: &Path) -> Result<Self> {
        let index = root.join(INDEX_FILE);
        let mut entries = BTreeMap::new();
        if index.exists() {
            let text = fs::read_to_string(&index).map_err(io_err(&index))?;
            for (n, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let fields: Vec<&str> = line.split('\t').collect();
                if !(2..=3).contains(&fields.len()) {
                    return Err(IrisError::Store(format!("{}:{}: expected 2 or 3 fields", index.display(), n + 1)));
                }
                let id: TemplateId = fields[0].parse()?;
                let entry = StoreEntry {
                    template: PathBuf::from(fields[1]),
                    ciphertext: fields.get(2).map(PathBuf::from),
                };
                for p in std::iter::once(&entry.template).chain(&entry.ciphertext) {
                    if !root.join(p).is_file() {
                        return Err(IrisError::Store(format!("{id}: missing file {}", p.display())));
                    }
                }
                if entries.insert(id.clone(), entry).is_some() {
                    return Err(IrisError::Store(format!("duplicate id {id} in index")));
                }
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            entries,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: &TemplateId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &TemplateId> {
        self.entries.keys()
    }

    pub fn entry(&self, id: &TemplateId) -> Option<&StoreEntry> {
        self.entries.get(id)
    }

    /// Relative location used for a new template.
    pub fn template_path(id: &TemplateId) -> PathBuf {
        PathBuf::from("templates")
            .join(&id.subject)
            .join(id.eye.letter().to_string())
            .join(format!("{}.iristpl", id.sample))
    }

    /// Relative location used for a ciphertext under key name `key`.
    pub fn ciphertext_path(id: &TemplateId, key: &str) -> PathBuf {
        PathBuf::from("ciphertexts")
            .join(key)
            .join(&id.subject)
            .join(id.eye.letter().to_string())
            .join(format!("{}.irisct", id.sample))
    }

    /// Adds all templates or none: any id collision (with the store or
    /// within the batch) fails before anything is written. The index is
    /// committed afterwards.
    pub fn insert_all(&mut self, items: &[(TemplateId, IrisTemplate)]) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        let collisions: Vec<String> = items
            .iter()
            .filter(|(id, _)| self.entries.contains_key(id) || !seen.insert(id))
            .map(|(id, _)| id.to_string())
            .collect();
        if !collisions.is_empty() {
            return Err(IrisError::Store(format!("id collision: {}", collisions.join(", "))));
        }
        for (id, t) in items {
            let rel = Self::template_path(id);
            let path = self.root.join(&rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).map_err(io_err(dir))?;
            }
            t.save(&path)?;
            self.entries.insert(
                id.clone(),
                StoreEntry {
                    template: rel,
                    ciphertext: None,
                },
            );
        }
        self.commit()
    }

    pub fn insert(&mut self, id: TemplateId, t: &IrisTemplate) -> Result<()> {
        self.insert_all(&[(id, t.clone())])
    }

    /// Records an existing ciphertext file (relative to the root) for `id`.
    pub fn set_ciphertext(&mut self, id: &TemplateId, rel: PathBuf) -> Result<()> {
        if !self.root.join(&rel).is_file() {
            return Err(IrisError::Store(format!("missing file {}", rel.display())));
        }
        let e = self
            .entries
            .get_mut(id)
            .ok_or_else(|| IrisError::Store(format!("unknown id {id}")))?;
        e.ciphertext = Some(rel);
        self.commit()
    }

    pub fn load(&self, id: &TemplateId) -> Result<IrisTemplate> {
        let e = self
            .entries
            .get(id)
            .ok_or_else(|| IrisError::Store(format!("unknown id {id}")))?;
        IrisTemplate::load(&self.root.join(&e.template))
    }

    /// Every template in id order.
    pub fn load_all(&self) -> Result<Vec<(TemplateId, IrisTemplate)>> {
        self.entries
            .iter()
            .map(|(id, e)| Ok((id.clone(), IrisTemplate::load(&self.root.join(&e.template))?)))
            .collect()
    }

    fn commit(&self) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(io_err(&self.root))?;
        let mut text = String::new();
        for (id, e) in &self.entries {
            text.push_str(&format!("{id}\t{}", e.template.display()));
            if let Some(c) = &e.ciphertext {
                text.push_str(&format!("\t{}", c.display()));
            }
            text.push('\n');
        }
        let tmp = self.root.join(format!(".{INDEX_FILE}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(text.as_bytes()).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
        drop(f);
        let index = self.root.join(INDEX_FILE);
        fs::rename(&tmp, &index).map_err(io_err(&index))
    }
}
