//! AST for the supported SQL subset.
//!
//! Every node is a `(kind, label, children)` triple; children keep source
//! order. Clause nodes store their canonical uppercase keyword as the label
//! (`FROM`, `GROUP BY`, ...), identifier and literal nodes store the raw
//! source text, and the two purely structural kinds (`SelectStmt`,
//! `Subquery`) carry an empty label.
//!
//! `to_sql` regenerates SQL text from a tree. Whitespace, identifier quoting,
//! keyword case, redundant grouping parentheses, and keyword sugar (optional
//! `AS`, `SELECT ALL`, `INNER`/`OUTER` join modifiers) are normalized away by
//! the parse/unparse cycle; everything else round-trips.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    SelectStmt,
    SelectList,
    FromClause,
    Join,
    WhereClause,
    GroupBy,
    Having,
    OrderBy,
    Limit,
    SetOp,
    Subquery,
    FunctionCall,
    BinaryOp,
    UnaryOp,
    ColumnRef,
    TableRef,
    Literal,
    Star,
    Alias,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::SelectStmt => "select-stmt",
            NodeKind::SelectList => "select-list",
            NodeKind::FromClause => "from-clause",
            NodeKind::Join => "join",
            NodeKind::WhereClause => "where-clause",
            NodeKind::GroupBy => "group-by",
            NodeKind::Having => "having",
            NodeKind::OrderBy => "order-by",
            NodeKind::Limit => "limit",
            NodeKind::SetOp => "set-op",
            NodeKind::Subquery => "subquery",
            NodeKind::FunctionCall => "function-call",
            NodeKind::BinaryOp => "binary-op",
            NodeKind::UnaryOp => "unary-op",
            NodeKind::ColumnRef => "column-ref",
            NodeKind::TableRef => "table-ref",
            NodeKind::Literal => "literal",
            NodeKind::Star => "star",
            NodeKind::Alias => "alias",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub kind: NodeKind,
    pub label: String,
    pub children: Vec<AstNode>,
}

/// A parsed statement; the root is always a `SelectStmt` or `SetOp`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlAst {
    pub root: AstNode,
}

impl AstNode {
    pub fn new(kind: NodeKind, label: impl Into<String>, children: Vec<AstNode>) -> Self {
        AstNode {
            kind,
            label: label.into(),
            children,
        }
    }

    pub fn leaf(kind: NodeKind, label: impl Into<String>) -> Self {
        AstNode::new(kind, label, Vec::new())
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(AstNode::node_count).sum::<usize>()
    }

    /// Depth-first search for nodes of a given kind.
    pub fn find_all(&self, kind: NodeKind) -> Vec<&AstNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            if n.kind == kind {
                out.push(n);
            }
            for c in n.children.iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn to_sql(&self) -> String {
        let mut toks = Vec::new();
        self.emit(&mut toks);
        join_tokens(&toks)
    }

    fn emit(&self, out: &mut Vec<String>) {
        match self.kind {
            NodeKind::SelectStmt => {
                for c in &self.children {
                    c.emit(out);
                }
            }
            NodeKind::SelectList => {
                push_words(out, &self.label);
                emit_comma_list(&self.children, out);
            }
            NodeKind::FromClause => {
                out.push("FROM".into());
                for (i, c) in self.children.iter().enumerate() {
                    if i > 0 && c.kind != NodeKind::Join {
                        out.push(",".into());
                    }
                    c.emit(out);
                }
            }
            NodeKind::Join => {
                push_words(out, &self.label);
                self.children[0].emit(out);
                if let Some(cond) = self.children.get(1) {
                    cond.emit(out);
                }
            }
            NodeKind::WhereClause | NodeKind::Having => {
                push_words(out, &self.label);
                self.children[0].emit_expr(out, 0);
            }
            NodeKind::GroupBy | NodeKind::OrderBy => {
                push_words(out, &self.label);
                emit_comma_list(&self.children, out);
            }
            NodeKind::Limit => {
                out.push("LIMIT".into());
                self.children[0].emit_expr(out, 0);
                if let Some(off) = self.children.get(1) {
                    off.emit(out);
                }
            }
            NodeKind::SetOp => {
                self.children[0].emit(out);
                push_words(out, &self.label);
                self.children[1].emit(out);
                for extra in &self.children[2..] {
                    extra.emit(out);
                }
            }
            NodeKind::Subquery => {
                out.push("(".into());
                self.children[0].emit(out);
                out.push(")".into());
            }
            NodeKind::Alias => {
                self.children[0].emit(out);
                out.push("AS".into());
                push_ident(out, &self.label);
            }
            _ => self.emit_expr(out, 0),
        }
    }

    fn emit_expr(&self, out: &mut Vec<String>, min_prec: u8) {
        match self.kind {
            NodeKind::BinaryOp => {
                let p = binary_prec(&self.label);
                let parens = p < min_prec;
                if parens {
                    out.push("(".into());
                }
                match self.label.as_str() {
                    "BETWEEN" | "NOT BETWEEN" => {
                        // children: [lhs, AND(lo, hi)]
                        self.children[0].emit_expr(out, p + 1);
                        push_words(out, &self.label);
                        let range = &self.children[1];
                        range.children[0].emit_expr(out, binary_prec("AND") + 1);
                        out.push("AND".into());
                        range.children[1].emit_expr(out, binary_prec("AND") + 1);
                    }
                    "IN" | "NOT IN" => {
                        self.children[0].emit_expr(out, p + 1);
                        push_words(out, &self.label);
                        if self.children.len() == 2 && self.children[1].kind == NodeKind::Subquery
                        {
                            self.children[1].emit(out);
                        } else {
                            out.push("(".into());
                            emit_comma_list(&self.children[1..], out);
                            out.push(")".into());
                        }
                    }
                    _ => {
                        self.children[0].emit_expr(out, p);
                        push_words(out, &self.label);
                        self.children[1].emit_expr(out, p + 1);
                    }
                }
                if parens {
                    out.push(")".into());
                }
            }
            NodeKind::UnaryOp => match self.label.as_str() {
                "IS NULL" | "IS NOT NULL" | "ASC" | "DESC" => {
                    let p = unary_prec(&self.label);
                    let parens = p < min_prec;
                    if parens {
                        out.push("(".into());
                    }
                    self.children[0].emit_expr(out, p + 1);
                    push_words(out, &self.label);
                    if parens {
                        out.push(")".into());
                    }
                }
                "ON" | "OFFSET" | "ELSE" | "DISTINCT" => {
                    push_words(out, &self.label);
                    self.children[0].emit_expr(out, 0);
                }
                "EXISTS" => {
                    out.push("EXISTS".into());
                    self.children[0].emit(out);
                }
                _ => {
                    // prefix NOT, -, +
                    let p = unary_prec(&self.label);
                    let parens = p < min_prec;
                    if parens {
                        out.push("(".into());
                    }
                    push_words(out, &self.label);
                    self.children[0].emit_expr(out, p);
                    if parens {
                        out.push(")".into());
                    }
                }
            },
            NodeKind::FunctionCall => match self.label.as_str() {
                "CASE" => {
                    out.push("CASE".into());
                    for c in &self.children {
                        if c.kind == NodeKind::BinaryOp && c.label == "WHEN" {
                            out.push("WHEN".into());
                            c.children[0].emit_expr(out, 0);
                            out.push("THEN".into());
                            c.children[1].emit_expr(out, 0);
                        } else {
                            // the ELSE arm or a leading operand
                            c.emit_expr(out, 0);
                        }
                    }
                    out.push("END".into());
                }
                "CAST" => {
                    out.push("CAST".into());
                    out.push("(".into());
                    self.children[0].emit_expr(out, 0);
                    out.push("AS".into());
                    out.push(self.children[1].label.clone());
                    out.push(")".into());
                }
                _ => {
                    out.push(self.label.clone());
                    out.push("(".into());
                    emit_comma_list(&self.children, out);
                    out.push(")".into());
                }
            },
            NodeKind::ColumnRef | NodeKind::TableRef | NodeKind::Star => {
                push_ident(out, &self.label);
            }
            NodeKind::Literal => out.push(self.label.clone()),
            NodeKind::Subquery => self.emit(out),
            NodeKind::Alias => self.emit(out),
            _ => self.emit(out),
        }
    }
}

impl SqlAst {
    pub fn to_sql(&self) -> String {
        self.root.to_sql()
    }
}

fn emit_comma_list(items: &[AstNode], out: &mut Vec<String>) {
    for (i, c) in items.iter().enumerate() {
        if i > 0 {
            out.push(",".into());
        }
        c.emit_expr(out, 0);
    }
}

fn push_words(out: &mut Vec<String>, phrase: &str) {
    for w in phrase.split(' ') {
        out.push(w.to_string());
    }
}

/// Emit a possibly dotted identifier, re-quoting segments that are not bare-safe.
fn push_ident(out: &mut Vec<String>, label: &str) {
    for (i, seg) in label.split('.').enumerate() {
        if i > 0 {
            out.push(".".into());
        }
        if seg == "*" || is_bare_safe(seg) {
            out.push(seg.to_string());
        } else {
            out.push(format!("`{seg}`"));
        }
    }
}

fn is_bare_safe(seg: &str) -> bool {
    let mut chars = seg.chars();
    let head_ok = matches!(chars.next(), Some(c) if c == '_' || c.is_ascii_alphabetic());
    head_ok
        && chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
        && !is_reserved_word(seg)
}

pub(crate) fn is_reserved_word(word: &str) -> bool {
    const RESERVED: &[&str] = &[
        "select", "distinct", "all", "from", "where", "group", "having", "order", "by",
        "limit", "offset", "union", "intersect", "except", "join", "inner", "left", "right",
        "cross", "outer", "on", "using", "as", "and", "or", "not", "in", "exists", "between",
        "like", "is", "null", "case", "when", "then", "else", "end", "cast", "asc", "desc",
    ];
    RESERVED.iter().any(|r| word.eq_ignore_ascii_case(r))
}

pub(crate) fn binary_prec(label: &str) -> u8 {
    match label {
        "OR" => 1,
        "AND" | "WHEN" => 2,
        "=" | "==" | "!=" | "<>" | "<" | "<=" | ">" | ">=" | "LIKE" | "NOT LIKE" | "IN"
        | "NOT IN" | "BETWEEN" | "NOT BETWEEN" => 4,
        "||" => 5,
        "+" | "-" => 6,
        "*" | "/" | "%" => 7,
        _ => 9,
    }
}

pub(crate) fn unary_prec(label: &str) -> u8 {
    match label {
        "NOT" => 3,
        "IS NULL" | "IS NOT NULL" => 4,
        "-" | "+" => 8,
        _ => 9,
    }
}

fn join_tokens(toks: &[String]) -> String {
    let mut s = String::new();
    for t in toks {
        let no_space_before = matches!(t.as_str(), "," | ")" | ".");
        let no_space_after_prev = matches!(s.chars().last(), Some('(') | Some('.'));
        if !s.is_empty() && !no_space_before && !no_space_after_prev {
            s.push(' ');
        }
        s.push_str(t);
    }
    s
}
