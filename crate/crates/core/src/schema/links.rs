//! Schema-link extraction from parsed queries and Jaccard similarity over
//! link sets.
//!
//! A link set holds the base tables and qualified columns a query touches.
//! Aliases resolve to their base tables, `SELECT *` expands to every column
//! of every FROM-clause table, columns named only in ON/USING conditions
//! count as used, and references inside subqueries are included. Everything
//! is lowercased; columns are stored as `table.column`.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{ColumnId, SchemaCatalog};
use crate::sql::{AstNode, NodeKind, SqlAst};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SchemaLinkSet {
    /// Lowercase base table names.
    pub tables: BTreeSet<String>,
    /// Lowercase `table.column` identifiers; every prefix appears in `tables`.
    pub columns: BTreeSet<String>,
}

impl SchemaLinkSet {
    /// Tables and columns merged into the single set the similarity uses.
    pub fn combined(&self) -> BTreeSet<&str> {
        self.tables
            .iter()
            .map(String::as_str)
            .chain(self.columns.iter().map(String::as_str))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty() && self.columns.is_empty()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("table `{name}` is not in the catalog")]
    UnknownTable { name: String },
    #[error("cannot resolve `{identifier}`{}", candidates_note(.candidates))]
    UnresolvedReference {
        identifier: String,
        candidates: Vec<String>,
    },
}

fn candidates_note(candidates: &[String]) -> String {
    if candidates.is_empty() {
        String::new()
    } else {
        format!(" (ambiguous between {})", candidates.join(", "))
    }
}

/// How [`jaccard_with_mode`] merges tables and columns.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum JaccardMode {
    /// One combined set of tables and qualified columns.
    #[default]
    Combined,
    /// Mean of a table-set Jaccard and a column-set Jaccard.
    SplitMean,
}

/// Jaccard similarity over the combined table-and-column sets.
///
/// Two empty sets score 1.0: queries touching no schema elements are
/// schema-identically linked.
pub fn jaccard_similarity(a: &SchemaLinkSet, b: &SchemaLinkSet) -> f64 {
    set_jaccard(&a.combined(), &b.combined())
}

pub fn jaccard_with_mode(a: &SchemaLinkSet, b: &SchemaLinkSet, mode: JaccardMode) -> f64 {
    match mode {
        JaccardMode::Combined => jaccard_similarity(a, b),
        JaccardMode::SplitMean => {
            let t = set_jaccard(
                &a.tables.iter().map(String::as_str).collect(),
                &b.tables.iter().map(String::as_str).collect(),
            );
            let c = set_jaccard(
                &a.columns.iter().map(String::as_str).collect(),
                &b.columns.iter().map(String::as_str).collect(),
            );
            (t + c) / 2.0
        }
    }
}

fn set_jaccard(a: &BTreeSet<&str>, b: &BTreeSet<&str>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    inter as f64 / union as f64
}

/// Resolve every table and column reference in `ast` against `catalog`.
pub fn extract_links(ast: &SqlAst, catalog: &SchemaCatalog) -> Result<SchemaLinkSet, LinkError> {
    let mut resolver = Resolver {
        catalog,
        scopes: Vec::new(),
        tables: BTreeSet::new(),
        columns: BTreeSet::new(),
    };
    resolver.process_statement(&ast.root)?;

    let mut links = SchemaLinkSet::default();
    for t in &resolver.tables {
        links.tables.insert(catalog.tables[*t].name.to_lowercase());
    }
    for id in &resolver.columns {
        links.tables.insert(catalog.tables[id.table].name.to_lowercase());
        links.columns.insert(catalog.qualified_column(*id));
    }
    Ok(links)
}

/// One named output of a derived table (`FROM (SELECT ...) alias`).
#[derive(Debug, Clone)]
struct DerivedOutput {
    name: Option<String>,
    source: Option<ColumnId>,
}

enum FromEntry {
    Base {
        table: usize,
        alias: Option<String>,
    },
    Derived {
        alias: Option<String>,
        outputs: Vec<DerivedOutput>,
    },
}

struct Scope {
    entries: Vec<FromEntry>,
    select_aliases: BTreeSet<String>,
}

struct Resolver<'a> {
    catalog: &'a SchemaCatalog,
    scopes: Vec<Scope>,
    tables: BTreeSet<usize>,
    columns: BTreeSet<ColumnId>,
}

impl<'a> Resolver<'a> {
    fn process_statement(&mut self, node: &AstNode) -> Result<Vec<DerivedOutput>, LinkError> {
        match node.kind {
            NodeKind::SetOp => {
                let outputs = self.process_statement(&node.children[0])?;
                self.process_statement(&node.children[1])?;
                // trailing ORDER BY / LIMIT resolve against the left side
                if node.children.len() > 2 {
                    let left_scope = self.build_scope(&node.children[0])?;
                    self.scopes.push(left_scope);
                    for extra in &node.children[2..] {
                        self.walk(extra)?;
                    }
                    self.scopes.pop();
                }
                Ok(outputs)
            }
            NodeKind::SelectStmt => self.process_select(node),
            _ => Ok(Vec::new()),
        }
    }

    fn build_scope(&mut self, select: &AstNode) -> Result<Scope, LinkError> {
        let mut entries = Vec::new();
        if let Some(from) = select.children.iter().find(|c| c.kind == NodeKind::FromClause) {
            for item in &from.children {
                let target = if item.kind == NodeKind::Join {
                    &item.children[0]
                } else {
                    item
                };
                entries.push(self.resolve_from_item(target)?);
            }
        }
        let mut select_aliases = BTreeSet::new();
        if let Some(list) = select.children.first() {
            for item in &list.children {
                if item.kind == NodeKind::Alias {
                    select_aliases.insert(item.label.to_lowercase());
                }
            }
        }
        Ok(Scope {
            entries,
            select_aliases,
        })
    }

    fn process_select(&mut self, select: &AstNode) -> Result<Vec<DerivedOutput>, LinkError> {
        let scope = self.build_scope(select)?;
        self.scopes.push(scope);

        let result = (|| {
            // join conditions, then every clause except FROM
            for clause in &select.children {
                match clause.kind {
                    NodeKind::FromClause => {
                        for item in &clause.children {
                            if item.kind == NodeKind::Join {
                                if let Some(cond) = item.children.get(1) {
                                    self.walk_join_condition(cond)?;
                                }
                            }
                        }
                    }
                    _ => self.walk(clause)?,
                }
            }
            self.outputs_of(select)
        })();

        self.scopes.pop();
        result
    }

    fn resolve_from_item(&mut self, item: &AstNode) -> Result<FromEntry, LinkError> {
        let (alias, inner) = if item.kind == NodeKind::Alias {
            (Some(item.label.to_lowercase()), &item.children[0])
        } else {
            (None, item)
        };
        match inner.kind {
            NodeKind::TableRef => {
                let Some((idx, _)) = self.catalog.table_by_name(&inner.label) else {
                    return Err(LinkError::UnknownTable {
                        name: inner.label.clone(),
                    });
                };
                self.tables.insert(idx);
                Ok(FromEntry::Base { table: idx, alias })
            }
            NodeKind::Subquery => {
                let outputs = self.process_statement(&inner.children[0])?;
                Ok(FromEntry::Derived { alias, outputs })
            }
            _ => Err(LinkError::UnresolvedReference {
                identifier: inner.label.clone(),
                candidates: Vec::new(),
            }),
        }
    }

    fn walk_join_condition(&mut self, cond: &AstNode) -> Result<(), LinkError> {
        if cond.kind == NodeKind::FunctionCall && cond.label == "USING" {
            for col in &cond.children {
                self.resolve_using_column(&col.label)?;
            }
            Ok(())
        } else {
            self.walk(cond)
        }
    }

    /// A USING column names a column present on both sides of the join;
    /// record every FROM entry in the current scope that owns it.
    fn resolve_using_column(&mut self, name: &str) -> Result<(), LinkError> {
        let scope = self.scopes.last().expect("scope pushed");
        let mut found = Vec::new();
        for entry in &scope.entries {
            if let FromEntry::Base { table, .. } = entry {
                if let Some(c) = self.catalog.column_in_table(*table, name) {
                    found.push(ColumnId {
                        table: *table,
                        column: c,
                    });
                }
            }
        }
        if found.is_empty() {
            return Err(LinkError::UnresolvedReference {
                identifier: name.to_string(),
                candidates: Vec::new(),
            });
        }
        self.columns.extend(found);
        Ok(())
    }

    fn walk(&mut self, node: &AstNode) -> Result<(), LinkError> {
        match node.kind {
            NodeKind::ColumnRef => {
                self.resolve_column(&node.label)?;
                Ok(())
            }
            NodeKind::Star => {
                self.resolve_star(&node.label)?;
                Ok(())
            }
            NodeKind::Subquery => {
                self.process_statement(&node.children[0])?;
                Ok(())
            }
            NodeKind::FunctionCall => {
                // COUNT(*) counts rows; its star names no column
                for c in &node.children {
                    if c.kind != NodeKind::Star {
                        self.walk(c)?;
                    }
                }
                Ok(())
            }
            _ => {
                for c in &node.children {
                    self.walk(c)?;
                }
                Ok(())
            }
        }
    }

    fn resolve_star(&mut self, label: &str) -> Result<(), LinkError> {
        let scope_idx = self.scopes.len() - 1;
        if let Some(qualifier) = label.strip_suffix(".*") {
            let cols = self.columns_of_entry_named(scope_idx, qualifier)?;
            self.columns.extend(cols);
            return Ok(());
        }
        // bare *: every column of every FROM entry in the innermost scope
        let mut all = Vec::new();
        for e in 0..self.scopes[scope_idx].entries.len() {
            all.extend(self.columns_of_entry(scope_idx, e));
        }
        self.columns.extend(all);
        Ok(())
    }

    fn columns_of_entry(&self, scope: usize, entry: usize) -> Vec<ColumnId> {
        match &self.scopes[scope].entries[entry] {
            FromEntry::Base { table, .. } => (0..self.catalog.tables[*table].columns.len())
                .map(|c| ColumnId {
                    table: *table,
                    column: c,
                })
                .collect(),
            FromEntry::Derived { outputs, .. } => {
                outputs.iter().filter_map(|o| o.source).collect()
            }
        }
    }

    fn columns_of_entry_named(&self, scope: usize, name: &str) -> Result<Vec<ColumnId>, LinkError> {
        for (e, entry) in self.scopes[scope].entries.iter().enumerate() {
            if entry_matches(entry, name, self.catalog) {
                return Ok(self.columns_of_entry(scope, e));
            }
        }
        Err(LinkError::UnresolvedReference {
            identifier: format!("{name}.*"),
            candidates: Vec::new(),
        })
    }

    fn resolve_column(&mut self, raw: &str) -> Result<(), LinkError> {
        if let Some((qualifier, column)) = raw.split_once('.') {
            return self.resolve_qualified(raw, qualifier, column);
        }
        // unqualified: innermost scope outward; FROM entries first, then the
        // scope's select aliases
        for scope_idx in (0..self.scopes.len()).rev() {
            let mut matches: Vec<(usize, Option<ColumnId>)> = Vec::new();
            for (e, entry) in self.scopes[scope_idx].entries.iter().enumerate() {
                match entry {
                    FromEntry::Base { table, .. } => {
                        if let Some(c) = self.catalog.column_in_table(*table, raw) {
                            matches.push((
                                e,
                                Some(ColumnId {
                                    table: *table,
                                    column: c,
                                }),
                            ));
                        }
                    }
                    FromEntry::Derived { outputs, .. } => {
                        if let Some(o) = outputs
                            .iter()
                            .find(|o| o.name.as_deref().is_some_and(|n| n.eq_ignore_ascii_case(raw)))
                        {
                            matches.push((e, o.source));
                        }
                    }
                }
            }
            match matches.len() {
                0 => {
                    if self.scopes[scope_idx]
                        .select_aliases
                        .contains(&raw.to_lowercase())
                    {
                        return Ok(());
                    }
                }
                1 => {
                    if let Some(id) = matches[0].1 {
                        self.columns.insert(id);
                    }
                    return Ok(());
                }
                _ => {
                    let candidates = matches
                        .iter()
                        .filter_map(|(_, id)| id.map(|id| self.catalog.qualified_column(id)))
                        .collect();
                    return Err(LinkError::UnresolvedReference {
                        identifier: raw.to_string(),
                        candidates,
                    });
                }
            }
        }
        Err(LinkError::UnresolvedReference {
            identifier: raw.to_string(),
            candidates: Vec::new(),
        })
    }

    fn resolve_qualified(
        &mut self,
        raw: &str,
        qualifier: &str,
        column: &str,
    ) -> Result<(), LinkError> {
        for scope_idx in (0..self.scopes.len()).rev() {
            for entry in &self.scopes[scope_idx].entries {
                if !entry_matches(entry, qualifier, self.catalog) {
                    continue;
                }
                match entry {
                    FromEntry::Base { table, .. } => {
                        let Some(c) = self.catalog.column_in_table(*table, column) else {
                            return Err(LinkError::UnresolvedReference {
                                identifier: raw.to_string(),
                                candidates: Vec::new(),
                            });
                        };
                        self.columns.insert(ColumnId {
                            table: *table,
                            column: c,
                        });
                        return Ok(());
                    }
                    FromEntry::Derived { outputs, .. } => {
                        let Some(o) = outputs.iter().find(|o| {
                            o.name.as_deref().is_some_and(|n| n.eq_ignore_ascii_case(column))
                        }) else {
                            return Err(LinkError::UnresolvedReference {
                                identifier: raw.to_string(),
                                candidates: Vec::new(),
                            });
                        };
                        if let Some(id) = o.source {
                            self.columns.insert(id);
                        }
                        return Ok(());
                    }
                }
            }
        }
        Err(LinkError::UnresolvedReference {
            identifier: raw.to_string(),
            candidates: Vec::new(),
        })
    }

    /// Output columns a select exposes when used as a derived table.
    fn outputs_of(&mut self, select: &AstNode) -> Result<Vec<DerivedOutput>, LinkError> {
        let mut outputs = Vec::new();
        let Some(list) = select.children.first() else {
            return Ok(outputs);
        };
        let scope_idx = self.scopes.len() - 1;
        for item in &list.children {
            match item.kind {
                NodeKind::Star => {
                    if let Some(qualifier) = item.label.strip_suffix(".*") {
                        for id in self.columns_of_entry_named(scope_idx, qualifier)? {
                            outputs.push(DerivedOutput {
                                name: Some(
                                    self.catalog.column_name(id).to_lowercase(),
                                ),
                                source: Some(id),
                            });
                        }
                    } else {
                        for e in 0..self.scopes[scope_idx].entries.len() {
                            for id in self.columns_of_entry(scope_idx, e) {
                                outputs.push(DerivedOutput {
                                    name: Some(self.catalog.column_name(id).to_lowercase()),
                                    source: Some(id),
                                });
                            }
                        }
                    }
                }
                NodeKind::Alias => {
                    let inner = &item.children[0];
                    let source = if inner.kind == NodeKind::ColumnRef {
                        self.peek_resolution(&inner.label)
                    } else {
                        None
                    };
                    outputs.push(DerivedOutput {
                        name: Some(item.label.to_lowercase()),
                        source,
                    });
                }
                NodeKind::ColumnRef => {
                    let name = item
                        .label
                        .rsplit('.')
                        .next()
                        .unwrap_or(&item.label)
                        .to_lowercase();
                    outputs.push(DerivedOutput {
                        name: Some(name),
                        source: self.peek_resolution(&item.label),
                    });
                }
                _ => outputs.push(DerivedOutput {
                    name: None,
                    source: None,
                }),
            }
        }
        Ok(outputs)
    }

    /// Best-effort read-only re-resolution of a select-item column for
    /// derived-table outputs; errors were already surfaced by the main walk.
    fn peek_resolution(&self, raw: &str) -> Option<ColumnId> {
        let (qualifier, column) = match raw.split_once('.') {
            Some((q, c)) => (Some(q), c),
            None => (None, raw),
        };
        for scope_idx in (0..self.scopes.len()).rev() {
            for entry in &self.scopes[scope_idx].entries {
                if let Some(q) = qualifier {
                    if !entry_matches(entry, q, self.catalog) {
                        continue;
                    }
                }
                match entry {
                    FromEntry::Base { table, .. } => {
                        if let Some(c) = self.catalog.column_in_table(*table, column) {
                            return Some(ColumnId {
                                table: *table,
                                column: c,
                            });
                        }
                    }
                    FromEntry::Derived { outputs, .. } => {
                        if let Some(o) = outputs.iter().find(|o| {
                            o.name.as_deref().is_some_and(|n| n.eq_ignore_ascii_case(column))
                        }) {
                            return o.source;
                        }
                    }
                }
            }
        }
        None
    }
}

fn entry_matches(entry: &FromEntry, name: &str, catalog: &SchemaCatalog) -> bool {
    match entry {
        FromEntry::Base { table, alias } => {
            alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(name))
                || (alias.is_none()
                    && catalog.tables[*table].name.eq_ignore_ascii_case(name))
        }
        FromEntry::Derived { alias, .. } => {
            alias.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(name))
        }
    }
}
