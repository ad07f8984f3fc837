//! Query skeletons: schema-masked, literal-masked trees of a SQL query.
//!
//! A skeleton keeps keywords, operators, and function names but replaces
//! every table reference with `TAB`, every column reference with `COL`, and
//! every literal with `VAL`. `*` stays its own label and aliases disappear
//! entirely, so two queries that differ only in identifiers and constants
//! produce identical trees.
//!
//! The canonical rendering is `LABEL` for a leaf and `LABEL(child,...)`
//! otherwise, e.g. `SELECT-STMT(SELECT(COL),FROM(TAB))`. Two skeletons are
//! equal iff their renderings are equal.

use crate::sql::{AstNode, NodeKind, SqlAst};

pub const PLACEHOLDER_TABLE: &str = "TAB";
pub const PLACEHOLDER_COLUMN: &str = "COL";
pub const PLACEHOLDER_VALUE: &str = "VAL";

/// Root label for a statement and for a nested subquery. These two plus the
/// placeholders, keyword phrases, operator symbols, and uppercased function
/// names form the entire closed label alphabet.
pub const LABEL_STMT: &str = "SELECT-STMT";
pub const LABEL_SUBQUERY: &str = "SUBQUERY";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SkeletonNode {
    pub label: String,
    pub children: Vec<SkeletonNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SkeletonTree {
    pub root: SkeletonNode,
}

impl SkeletonNode {
    pub fn new(label: impl Into<String>, children: Vec<SkeletonNode>) -> Self {
        SkeletonNode {
            label: label.into(),
            children,
        }
    }

    pub fn leaf(label: impl Into<String>) -> Self {
        SkeletonNode::new(label, Vec::new())
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(SkeletonNode::size).sum::<usize>()
    }

    fn postorder_into<'a>(&'a self, out: &mut Vec<&'a str>) {
        for c in &self.children {
            c.postorder_into(out);
        }
        out.push(&self.label);
    }
}

impl SkeletonTree {
    pub fn size(&self) -> usize {
        self.root.size()
    }

    /// Node labels in postorder (children left to right, then the node).
    pub fn postorder_labels(&self) -> Vec<&str> {
        let mut out = Vec::with_capacity(self.size());
        self.root.postorder_into(&mut out);
        out
    }
}

/// Mask an AST into its skeleton.
pub fn build_skeleton(ast: &SqlAst) -> SkeletonTree {
    SkeletonTree {
        root: mask(&ast.root),
    }
}

fn mask(node: &AstNode) -> SkeletonNode {
    match node.kind {
        NodeKind::Alias => mask(&node.children[0]),
        NodeKind::TableRef => SkeletonNode::leaf(PLACEHOLDER_TABLE),
        NodeKind::ColumnRef => SkeletonNode::leaf(PLACEHOLDER_COLUMN),
        NodeKind::Literal => SkeletonNode::leaf(PLACEHOLDER_VALUE),
        NodeKind::Star => SkeletonNode::leaf("*"),
        _ => {
            let label = match node.kind {
                NodeKind::SelectStmt => LABEL_STMT.to_string(),
                NodeKind::Subquery => LABEL_SUBQUERY.to_string(),
                NodeKind::FunctionCall => node.label.to_ascii_uppercase(),
                _ => node.label.clone(),
            };
            SkeletonNode::new(label, node.children.iter().map(mask).collect())
        }
    }
}

/// Canonical parenthesized rendering; injective over skeleton trees.
pub fn render_skeleton(tree: &SkeletonTree) -> String {
    let mut out = String::new();
    render_node(&tree.root, &mut out);
    out
}

fn render_node(node: &SkeletonNode, out: &mut String) {
    out.push_str(&node.label);
    if !node.children.is_empty() {
        out.push('(');
        for (i, c) in node.children.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            render_node(c, out);
        }
        out.push(')');
    }
}

/// Indented one-node-per-line rendering for human inspection.
pub fn render_skeleton_indented(tree: &SkeletonTree) -> String {
    let mut out = String::new();
    fn rec(node: &SkeletonNode, depth: usize, out: &mut String) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push_str(&node.label);
        out.push('\n');
        for c in &node.children {
            rec(c, depth + 1, out);
        }
    }
    rec(&tree.root, 0, &mut out);
    out
}

/// Membership test for the closed skeleton label alphabet.
pub fn is_valid_skeleton_label(label: &str) -> bool {
    const KEYWORDS: &[&str] = &[
        "SELECT", "SELECT DISTINCT", "FROM", "WHERE", "GROUP BY", "HAVING", "ORDER BY",
        "LIMIT", "OFFSET", "JOIN", "LEFT JOIN", "RIGHT JOIN", "CROSS JOIN", "UNION",
        "UNION ALL", "INTERSECT", "EXCEPT", "ON", "USING", "ASC", "DESC", "DISTINCT",
        "EXISTS", "NOT", "AND", "OR", "IN", "NOT IN", "LIKE", "NOT LIKE", "BETWEEN",
        "NOT BETWEEN", "IS NULL", "IS NOT NULL", "WHEN", "ELSE",
    ];
    const OPERATORS: &[&str] = &[
        "=", "==", "!=", "<>", "<", "<=", ">", ">=", "+", "-", "*", "/", "%", "||",
    ];
    if matches!(
        label,
        PLACEHOLDER_TABLE | PLACEHOLDER_COLUMN | PLACEHOLDER_VALUE | LABEL_STMT | LABEL_SUBQUERY
    ) {
        return true;
    }
    if KEYWORDS.contains(&label) || OPERATORS.contains(&label) {
        return true;
    }
    // uppercased function name
    !label.is_empty()
        && label == label.to_ascii_uppercase()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || !c.is_ascii())
}
