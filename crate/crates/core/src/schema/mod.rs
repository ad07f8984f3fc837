//! Database schema catalogs and schema-link extraction.
//!
//! Catalogs load from Spider/BIRD-style `tables.json` files: an array of
//! objects with `db_id`, `table_names_original`, `column_names_original`
//! (pairs of `[table index, column name]` where index -1 marks the global `*`
//! entry, which is skipped), `column_types`, `primary_keys` (entries may be a
//! single flat column index or a list for composite keys), and `foreign_keys`
//! (pairs of flat column indices).

pub mod links;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

pub use links::{extract_links, jaccard_similarity, jaccard_with_mode, JaccardMode, LinkError,
                SchemaLinkSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSchema {
    pub name: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    pub name: String,
    pub columns: Vec<ColumnSchema>,
}

/// Position of a column within a catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnId {
    pub table: usize,
    pub column: usize,
}

impl fmt::Display for ColumnId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaCatalog {
    pub db_id: String,
    pub tables: Vec<TableSchema>,
    pub primary_keys: Vec<ColumnId>,
    pub foreign_keys: Vec<(ColumnId, ColumnId)>,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("catalog {db_id}: {detail}")]
    Format { db_id: String, detail: String },
}

impl SchemaCatalog {
    /// Case-insensitive table lookup.
    pub fn table_by_name(&self, name: &str) -> Option<(usize, &TableSchema)> {
        self.tables
            .iter()
            .enumerate()
            .find(|(_, t)| t.name.eq_ignore_ascii_case(name))
    }

    /// Case-insensitive column lookup within one table.
    pub fn column_in_table(&self, table: usize, name: &str) -> Option<usize> {
        self.tables[table]
            .columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column_name(&self, id: ColumnId) -> &str {
        &self.tables[id.table].columns[id.column].name
    }

    /// Lowercase `table.column` identifier for a resolved column.
    pub fn qualified_column(&self, id: ColumnId) -> String {
        format!(
            "{}.{}",
            self.tables[id.table].name.to_lowercase(),
            self.tables[id.table].columns[id.column].name.to_lowercase()
        )
    }
}

#[derive(Deserialize)]
struct RawCatalog {
    db_id: String,
    table_names_original: Vec<String>,
    column_names_original: Vec<(i64, String)>,
    #[serde(default)]
    column_types: Vec<String>,
    #[serde(default)]
    primary_keys: Vec<RawKey>,
    #[serde(default)]
    foreign_keys: Vec<Vec<i64>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawKey {
    Single(i64),
    Composite(Vec<i64>),
}

/// Load every catalog from a `tables.json` file, keyed by `db_id`.
pub fn load_catalogs(path: &Path) -> Result<BTreeMap<String, SchemaCatalog>, CatalogError> {
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: Vec<RawCatalog> =
        serde_json::from_str(&text).map_err(|source| CatalogError::Json {
            path: path.display().to_string(),
            source,
        })?;
    let mut out = BTreeMap::new();
    for entry in raw {
        let catalog = convert_catalog(entry)?;
        out.insert(catalog.db_id.clone(), catalog);
    }
    Ok(out)
}

fn convert_catalog(raw: RawCatalog) -> Result<SchemaCatalog, CatalogError> {
    let db_id = raw.db_id;
    let err = |detail: String| CatalogError::Format {
        db_id: db_id.clone(),
        detail,
    };

    let mut tables: Vec<TableSchema> = raw
        .table_names_original
        .iter()
        .map(|n| TableSchema {
            name: n.clone(),
            columns: Vec::new(),
        })
        .collect();

    // json index (including the leading [-1, "*"] entry) -> catalog position
    let mut json_to_id: Vec<Option<ColumnId>> = Vec::with_capacity(raw.column_names_original.len());
    for (j, (t_idx, col_name)) in raw.column_names_original.iter().enumerate() {
        if *t_idx < 0 {
            json_to_id.push(None);
            continue;
        }
        let t = *t_idx as usize;
        if t >= tables.len() {
            return Err(err(format!(
                "column {j} references table index {t} but only {} tables exist",
                tables.len()
            )));
        }
        let ty = raw
            .column_types
            .get(j)
            .cloned()
            .unwrap_or_else(|| "text".to_string());
        json_to_id.push(Some(ColumnId {
            table: t,
            column: tables[t].columns.len(),
        }));
        tables[t].columns.push(ColumnSchema {
            name: col_name.clone(),
            ty,
        });
    }

    for (i, table) in tables.iter().enumerate() {
        for other in &tables[i + 1..] {
            if table.name.eq_ignore_ascii_case(&other.name) {
                return Err(err(format!("duplicate table name `{}`", table.name)));
            }
        }
        for (c, col) in table.columns.iter().enumerate() {
            for other in &table.columns[c + 1..] {
                if col.name.eq_ignore_ascii_case(&other.name) {
                    return Err(err(format!(
                        "duplicate column `{}` in table `{}`",
                        col.name, table.name
                    )));
                }
            }
        }
    }

    let lookup = |j: i64, what: &str| -> Result<ColumnId, CatalogError> {
        let id = usize::try_from(j)
            .ok()
            .and_then(|j| json_to_id.get(j).copied().flatten());
        id.ok_or_else(|| err(format!("{what} index {j} does not name a column")))
    };

    let mut primary_keys = Vec::new();
    for key in &raw.primary_keys {
        match key {
            RawKey::Single(j) => primary_keys.push(lookup(*j, "primary key")?),
            RawKey::Composite(js) => {
                for j in js {
                    primary_keys.push(lookup(*j, "primary key")?);
                }
            }
        }
    }

    let mut foreign_keys = Vec::new();
    for fk in &raw.foreign_keys {
        if fk.len() != 2 {
            return Err(err(format!("foreign key {fk:?} is not a pair")));
        }
        foreign_keys.push((lookup(fk[0], "foreign key")?, lookup(fk[1], "foreign key")?));
    }

    Ok(SchemaCatalog {
        db_id,
        tables,
        primary_keys,
        foreign_keys,
    })
}
