//! On-disk dataset layout.
//!
//! ```text
//! <dir>/dataset.json      counts, seed and versions
//! <dir>/manifest.jsonl    one FunctionSpec per line, in id order
//! <dir>/weights/<id>.json network weights for approximated functions
//! <dir>/tables/<name>.json fact tables used by relation functions
//! <dir>/lexicon.json      probe words per input type
//! <dir>/exemplars.json    ten fixed probe inputs per function
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use findbench_core::blackbox::BoundFunction;
use findbench_core::interpret::relations::Lexicon;
use findbench_core::mlp::Mlp;
use findbench_core::{Category, FactTable, FunctionSpec, ENGINE_VERSION, FORMAT_VERSION};

use crate::data;

pub const META_FILE: &str = "dataset.json";
pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const LEXICON_FILE: &str = "lexicon.json";
pub const EXEMPLARS_FILE: &str = "exemplars.json";

/// Seed and versions stamped into every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub format_version: u32,
    pub engine_version: String,
}

impl Provenance {
    pub fn new(seed: u64) -> Self {
        Provenance { seed, format_version: FORMAT_VERSION, engine_version: ENGINE_VERSION.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub dataset_id: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub total: usize,
    /// Function count per category and subcategory.
    pub counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub tables: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    pub id: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub net: Mlp,
}

pub fn counts(specs: &[FunctionSpec]) -> BTreeMap<String, BTreeMap<String, usize>> {
    let mut out: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for s in specs {
        *out.entry(s.category.name().to_string()).or_default().entry(s.subcategory.name().to_string()).or_default() +=
            1;
    }
    out
}

/// A dataset held in memory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub specs: Vec<FunctionSpec>,
    pub nets: BTreeMap<String, Mlp>,
    pub tables: Vec<FactTable>,
    pub lexicon: Lexicon,
    pub exemplars: BTreeMap<String, Vec<String>>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes JSON lines, one value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for item in items {
        serde_json::to_writer(&mut f, &item)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

/// Reads JSON lines, skipping blank lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), n + 1))?);
    }
    Ok(out)
}

impl Dataset {
    /// Writes the dataset into `dir`, which must be empty or absent unless `force`.
    pub fn write(&self, dir: &Path, force: bool) -> Result<()> {
        if dir.exists() {
            let nonempty = fs::read_dir(dir)?.next().is_some();
            if nonempty && !force {
                bail!("output directory {} is not empty (use --force to overwrite)", dir.display());
            }
            if nonempty {
                for sub in ["weights", "tables"] {
                    let p = dir.join(sub);
                    if p.exists() {
                        fs::remove_dir_all(&p)?;
                    }
                }
            }
        }
        fs::create_dir_all(dir)?;
        write_json(&dir.join(META_FILE), &self.meta)?;
        write_jsonl(&dir.join(MANIFEST_FILE), &self.specs)?;
        for (id, net) in &self.nets {
            let spec = self.spec(id).ok_or_else(|| anyhow!("weights for unknown function {id}"))?;
            let rel = spec.approximation().map(|a| a.weights.clone()).unwrap_or_else(|| format!("weights/{id}.json"));
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let file = WeightFile { id: id.clone(), provenance: self.meta.provenance.clone(), net: net.clone() };
            write_json(&path, &file)?;
        }
        if !self.tables.is_empty() {
            fs::create_dir_all(dir.join("tables"))?;
            for t in &self.tables {
                write_json(&dir.join("tables").join(format!("{}.json", t.name)), t)?;
            }
        }
        write_json(&dir.join(LEXICON_FILE), &self.lexicon)?;
        write_json(&dir.join(EXEMPLARS_FILE), &self.exemplars)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta: DatasetMeta = read_json(&dir.join(META_FILE))?;
        if meta.provenance.format_version != FORMAT_VERSION {
            bail!("{}: format version {} is not supported", dir.display(), meta.provenance.format_version);
        }
        let specs: Vec<FunctionSpec> = read_jsonl(&dir.join(MANIFEST_FILE))?;
        for s in &specs {
            s.validate().with_context(|| format!("manifest record {}", s.id))?;
        }
        let mut nets = BTreeMap::new();
        for s in &specs {
            if let Some(a) = s.approximation() {
                let w: WeightFile = read_json(&dir.join(&a.weights))?;
                w.net.validate().with_context(|| format!("weights of {}", s.id))?;
                nets.insert(s.id.clone(), w.net);
            }
        }
        let tables_dir = dir.join("tables");
        let tables = if tables_dir.is_dir() { data::load_fact_tables(&tables_dir)? } else { Vec::new() };
        let lexicon_path = dir.join(LEXICON_FILE);
        let lexicon = if lexicon_path.exists() { data::load_lexicon(&lexicon_path)? } else { data::shipped_lexicon() };
        let ex_path = dir.join(EXEMPLARS_FILE);
        let exemplars = if ex_path.exists() { read_json(&ex_path)? } else { BTreeMap::new() };
        Ok(Dataset { meta, specs, nets, tables, lexicon, exemplars })
    }

    pub fn spec(&self, id: &str) -> Option<&FunctionSpec> {
        self.specs.iter().find(|s| s.id == id)
    }

    pub fn table(&self, name: &str) -> Option<&FactTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Binds a spec to its network or fact table.
    pub fn bind(&self, spec: &FunctionSpec) -> Result<BoundFunction> {
        let net = self.nets.get(&spec.id).cloned();
        let table = match spec.relation() {
            Some(r) => Some(
                self.table(&r.relation).cloned().ok_or_else(|| anyhow!("{}: missing table {:?}", spec.id, r.relation))?,
            ),
            None => None,
        };
        Ok(BoundFunction::new(spec.clone(), net, table)?)
    }

    pub fn bind_id(&self, id: &str) -> Result<BoundFunction> {
        let spec = self.spec(id).ok_or_else(|| anyhow!("function {id:?} is not in the manifest"))?;
        self.bind(spec)
    }

    pub fn bind_all(&self) -> Result<Vec<BoundFunction>> {
        self.specs.iter().map(|s| self.bind(s)).collect()
    }

    pub fn ids_in(&self, category: Category) -> Vec<&str> {
        self.specs.iter().filter(|s| s.category == category).map(|s| s.id.as_str()).collect()
    }
}

/// SHA-256 over every file under `dir` (relative path and contents, in path order).
pub fn tree_hash(dir: &Path) -> Result<String> {
    fn walk(base: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(base, &p, out)?;
            } else {
                out.push(p.strip_prefix(base)?.to_path_buf());
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    walk(dir, dir, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for rel in files {
        h.update(rel.to_string_lossy().as_bytes());
        h.update([0]);
        h.update(fs::read(dir.join(&rel))?);
        h.update([0]);
    }
    Ok(hex(&h.finalize()))
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
