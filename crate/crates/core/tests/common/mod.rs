//! Shared generators for integration and acceptance tests.
#![allow(dead_code)] // each test target uses a different subset

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use sqlsim_core::schema::SchemaLinkSet;
use sqlsim_core::skeleton::SkeletonNode;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn pick(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    (rng.next_u64() % bound as u64) as usize
}

/// Uniform random ordered labeled tree with 1..=max_nodes nodes.
///
/// Built from a random parent array: node i > 0 attaches under a uniformly
/// chosen earlier node, children keep creation order.
pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize, alphabet: &[&str]) -> SkeletonNode {
    let n = 1 + pick(rng, max_nodes);
    let labels: Vec<&str> = (0..n).map(|_| alphabet[pick(rng, alphabet.len())]).collect();
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 1..n {
        let parent = pick(rng, i);
        children[parent].push(i);
    }
    fn build(i: usize, labels: &[&str], children: &[Vec<usize>]) -> SkeletonNode {
        SkeletonNode::new(
            labels[i],
            children[i]
                .iter()
                .map(|&c| build(c, labels, children))
                .collect(),
        )
    }
    build(0, &labels, &children)
}

/// Random schema-link set over a tiny universe; every column's table prefix
/// is added to the table set, keeping the type invariant.
pub fn random_link_set(rng: &mut ChaCha8Rng) -> SchemaLinkSet {
    let mut tables = BTreeSet::new();
    let mut columns = BTreeSet::new();
    let n_tables = pick(rng, 4);
    for _ in 0..n_tables {
        let t = format!("t{}", pick(rng, 4));
        let n_cols = pick(rng, 4);
        for _ in 0..n_cols {
            columns.insert(format!("{t}.c{}", pick(rng, 5)));
        }
        tables.insert(t);
    }
    SchemaLinkSet { tables, columns }
}

/// Structure of a generated query; instantiating it twice with different
/// draws yields two queries that differ only in identifiers and literals.
#[derive(Debug, Clone)]
pub struct QueryTemplate {
    select_items: Vec<SelectItem>,
    joined: bool,
    where_comparisons: usize,
    group_by: bool,
    having_agg: Option<&'static str>,
    order_desc: Option<bool>,
    limit: bool,
}

#[derive(Debug, Clone, Copy)]
enum SelectItem {
    Column,
    Aggregate(&'static str),
    CountStar,
}

const AGGREGATES: &[&str] = &["COUNT", "SUM", "AVG", "MIN", "MAX"];
const COMPARATORS: &[&str] = &["=", ">", "<", ">=", "<=", "!="];

impl QueryTemplate {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let n_items = 1 + pick(rng, 3);
        let select_items = (0..n_items)
            .map(|_| match pick(rng, 4) {
                0 => SelectItem::Aggregate(AGGREGATES[pick(rng, AGGREGATES.len())]),
                1 => SelectItem::CountStar,
                _ => SelectItem::Column,
            })
            .collect();
        QueryTemplate {
            select_items,
            joined: pick(rng, 3) == 0,
            where_comparisons: pick(rng, 3),
            group_by: pick(rng, 3) == 0,
            having_agg: (pick(rng, 4) == 0).then(|| AGGREGATES[pick(rng, AGGREGATES.len())]),
            order_desc: match pick(rng, 3) {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            },
            limit: pick(rng, 2) == 0,
        }
    }

    /// Fill the template with fresh identifiers and literal values. The
    /// comparison operators are part of the structure, so they are drawn
    /// from a generator seeded only by the template's own shape.
    pub fn instantiate(&self, rng: &mut ChaCha8Rng) -> String {
        let ident = |rng: &mut ChaCha8Rng| {
            let len = 3 + pick(rng, 5);
            let mut s = String::from("x");
            for _ in 0..len {
                s.push((b'a' + pick(rng, 26) as u8) as char);
            }
            s
        };
        let literal = |rng: &mut ChaCha8Rng| {
            if pick(rng, 2) == 0 {
                format!("{}", pick(rng, 1000))
            } else {
                format!("'v{}'", pick(rng, 1000))
            }
        };

        // operators are structural; derive them deterministically
        let mut op_rng = ChaCha8Rng::seed_from_u64(
            self.where_comparisons as u64 * 31 + self.select_items.len() as u64,
        );

        let table = ident(rng);
        let mut sql = String::from("SELECT ");
        for (i, item) in self.select_items.iter().enumerate() {
            if i > 0 {
                sql.push_str(", ");
            }
            match item {
                SelectItem::Column => sql.push_str(&ident(rng)),
                SelectItem::Aggregate(f) => sql.push_str(&format!("{f}({})", ident(rng))),
                SelectItem::CountStar => sql.push_str("COUNT(*)"),
            }
        }
        sql.push_str(&format!(" FROM {table}"));
        if self.joined {
            let other = ident(rng);
            sql.push_str(&format!(
                " JOIN {other} ON {table}.{} = {other}.{}",
                ident(rng),
                ident(rng)
            ));
        }
        if self.where_comparisons > 0 {
            let mut parts = Vec::new();
            for _ in 0..self.where_comparisons {
                let op = COMPARATORS[pick(&mut op_rng, COMPARATORS.len())];
                parts.push(format!("{} {op} {}", ident(rng), literal(rng)));
            }
            sql.push_str(&format!(" WHERE {}", parts.join(" AND ")));
        }
        if self.group_by {
            sql.push_str(&format!(" GROUP BY {}", ident(rng)));
            if let Some(agg) = self.having_agg {
                let op = COMPARATORS[pick(&mut op_rng, COMPARATORS.len())];
                sql.push_str(&format!(" HAVING {agg}({}) {op} {}", ident(rng), literal(rng)));
            }
        }
        if let Some(desc) = self.order_desc {
            sql.push_str(&format!(" ORDER BY {}", ident(rng)));
            if desc {
                sql.push_str(" DESC");
            }
        }
        if self.limit {
            sql.push_str(&format!(" LIMIT {}", 1 + pick(rng, 50)));
        }
        sql
    }
}
