//! Shipped fact tables and probe lexicon, and loaders for table files.

use std::fs;
use std::path::{Path, PathBuf};

use findbench_core::interpret::relations::Lexicon;
use findbench_core::FactTable;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Schema { path: PathBuf, msg: String },
}

const SHIPPED: [(&str, &str); 10] = [
    ("animal_habitat", include_str!("../data/tables/animal_habitat.json")),
    ("city_country", include_str!("../data/tables/city_country.json")),
    ("country_border", include_str!("../data/tables/country_border.json")),
    ("country_capital", include_str!("../data/tables/country_capital.json")),
    ("country_continent", include_str!("../data/tables/country_continent.json")),
    ("country_flag_colors", include_str!("../data/tables/country_flag_colors.json")),
    ("country_language", include_str!("../data/tables/country_language.json")),
    ("gemstone_color", include_str!("../data/tables/gemstone_color.json")),
    ("river_continent", include_str!("../data/tables/river_continent.json")),
    ("us_city_state", include_str!("../data/tables/us_city_state.json")),
];

const LEXICON: &str = include_str!("../data/lexicon.json");

/// Parses and validates one table from JSON text. `origin` names the source in errors.
pub fn parse_table(text: &str, origin: &Path) -> Result<FactTable, LoadError> {
    let schema = |msg: String| LoadError::Schema { path: origin.to_path_buf(), msg };
    let mut t: FactTable = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    t.validate().map_err(|e| schema(e.to_string()))?;
    Ok(t)
}

/// The tables compiled into the binary, sorted by name.
pub fn shipped_tables() -> Vec<FactTable> {
    SHIPPED
        .iter()
        .map(|(name, text)| parse_table(text, Path::new(name)).expect("shipped table is valid"))
        .collect()
}

/// Word lists per input type covering every shipped table key.
pub fn shipped_lexicon() -> Lexicon {
    serde_json::from_str(LEXICON).expect("shipped lexicon is valid")
}

/// Loads a single table file, or every `*.json` file of a directory in name order.
pub fn load_fact_tables(path: &Path) -> Result<Vec<FactTable>, LoadError> {
    fn io(p: &Path) -> impl FnOnce(std::io::Error) -> LoadError + '_ {
        move |source| LoadError::Io { path: p.to_path_buf(), source }
    }
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in fs::read_dir(path).map_err(io(path))? {
            let p = entry.map_err(io(path))?.path();
            if p.extension().is_some_and(|e| e == "json") {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut tables: Vec<FactTable> = Vec::with_capacity(files.len());
    for f in &files {
        let text = fs::read_to_string(f).map_err(io(f))?;
        let t = parse_table(&text, f)?;
        if tables.iter().any(|o| o.name == t.name) {
            return Err(LoadError::Schema { path: f.clone(), msg: format!("duplicate table name {:?}", t.name) });
        }
        tables.push(t);
    }
    tables.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(tables)
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| LoadError::Schema { path: path.to_path_buf(), msg: e.to_string() })
}
