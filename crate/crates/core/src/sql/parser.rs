//! Recursive descent parser for the supported SELECT subset.
//!
//! Supported: SELECT with DISTINCT, arithmetic/comparison/logical expressions,
//! aggregate and scalar functions, aliases, JOIN (inner/left/right/cross) with
//! ON/USING, WHERE, GROUP BY, HAVING, ORDER BY with ASC/DESC, LIMIT/OFFSET,
//! IN/EXISTS/scalar subqueries, UNION/INTERSECT/EXCEPT, CASE, BETWEEN, LIKE,
//! IS NULL, and CAST. Anything else is rejected with a [`ParseError`]; the
//! parser never panics on arbitrary input.

use std::fmt;

use super::ast::{binary_prec, is_reserved_word, AstNode, NodeKind, SqlAst};
use super::lexer::{tokenize, Token, TokenKind};

const MAX_DEPTH: u32 = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input where the error was detected.
    pub offset: usize,
    /// Description of the token found at `offset`.
    pub found: String,
    /// What the parser would have accepted instead (sorted, deduplicated).
    pub expected: Vec<String>,
    /// Non-expectation diagnostics (unsupported construct, lexer failure).
    pub message: Option<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: ", self.offset)?;
        if let Some(msg) = &self.message {
            write!(f, "{msg}")?;
            if !self.expected.is_empty() {
                write!(f, "; expected {}", self.expected.join(" | "))?;
            }
        } else {
            write!(f, "expected {}, found {}", self.expected.join(" | "), self.found)?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Parse a single SELECT statement into an AST.
pub fn parse_sql(sql: &str) -> Result<SqlAst, ParseError> {
    let tokens = tokenize(sql).map_err(|e| ParseError {
        offset: e.offset,
        found: String::new(),
        expected: Vec::new(),
        message: Some(e.message),
    })?;
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
    };
    let root = p.parse_statement()?;
    p.eat_symbol(";");
    if !p.at_eof() {
        return Err(p.err(&["end of input"]));
    }
    Ok(SqlAst { root })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: u32,
}

impl Parser {
    fn cur(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn at_eof(&self) -> bool {
        self.cur().kind == TokenKind::Eof
    }

    fn advance(&mut self) -> Token {
        let t = self.cur().clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn peek_word(&self, kw: &str) -> bool {
        self.cur().is_word(kw)
    }

    fn peek_word_nth(&self, n: usize, kw: &str) -> bool {
        self.tokens
            .get(self.pos + n)
            .is_some_and(|t| t.is_word(kw))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.peek_word(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_symbol(&mut self, sym: &str) -> bool {
        if self.cur().is_symbol(sym) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            Err(self.err(&[kw]))
        }
    }

    fn expect_symbol(&mut self, sym: &str) -> Result<(), ParseError> {
        if self.eat_symbol(sym) {
            Ok(())
        } else {
            Err(self.err(&[sym]))
        }
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        let mut expected: Vec<String> = expected.iter().map(|s| s.to_string()).collect();
        expected.sort();
        expected.dedup();
        ParseError {
            offset: self.cur().offset,
            found: self.cur().to_string(),
            expected,
            message: None,
        }
    }

    fn unsupported(&self, what: &str) -> ParseError {
        ParseError {
            offset: self.cur().offset,
            found: self.cur().to_string(),
            expected: Vec::new(),
            message: Some(format!("{what} is not supported")),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError {
                offset: self.cur().offset,
                found: self.cur().to_string(),
                expected: Vec::new(),
                message: Some("nesting too deep".into()),
            });
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    // ── statements ──────────────────────────────────────────────────────

    fn parse_statement(&mut self) -> Result<AstNode, ParseError> {
        self.enter()?;
        let result = self.parse_statement_inner();
        self.leave();
        result
    }

    fn parse_statement_inner(&mut self) -> Result<AstNode, ParseError> {
        let mut node = self.parse_select_core()?;
        loop {
            let op = if self.peek_word("UNION") {
                self.advance();
                if self.eat_word("ALL") {
                    "UNION ALL"
                } else {
                    "UNION"
                }
            } else if self.peek_word("INTERSECT") {
                self.advance();
                "INTERSECT"
            } else if self.peek_word("EXCEPT") {
                self.advance();
                "EXCEPT"
            } else {
                break;
            };
            let rhs = self.parse_select_core()?;
            node = AstNode::new(NodeKind::SetOp, op, vec![node, rhs]);
        }
        let mut trailing = Vec::new();
        if self.peek_word("ORDER") {
            trailing.push(self.parse_order_by()?);
        }
        if self.peek_word("LIMIT") {
            trailing.push(self.parse_limit()?);
        }
        node.children.extend(trailing);
        Ok(node)
    }

    fn parse_select_core(&mut self) -> Result<AstNode, ParseError> {
        if self.peek_word("WITH") {
            return Err(self.unsupported("WITH (common table expressions)"));
        }
        self.expect_word("SELECT")?;
        let distinct = self.eat_word("DISTINCT");
        if !distinct {
            self.eat_word("ALL");
        }
        let list_label = if distinct { "SELECT DISTINCT" } else { "SELECT" };

        let mut items = vec![self.parse_select_item()?];
        while self.eat_symbol(",") {
            items.push(self.parse_select_item()?);
        }
        let mut children = vec![AstNode::new(NodeKind::SelectList, list_label, items)];

        if self.peek_word("FROM") {
            children.push(self.parse_from_clause()?);
        }
        if self.eat_word("WHERE") {
            let expr = self.parse_expr(0)?;
            children.push(AstNode::new(NodeKind::WhereClause, "WHERE", vec![expr]));
        }
        if self.peek_word("GROUP") {
            self.advance();
            self.expect_word("BY")?;
            let mut keys = vec![self.parse_expr(0)?];
            while self.eat_symbol(",") {
                keys.push(self.parse_expr(0)?);
            }
            children.push(AstNode::new(NodeKind::GroupBy, "GROUP BY", keys));
        }
        if self.eat_word("HAVING") {
            let expr = self.parse_expr(0)?;
            children.push(AstNode::new(NodeKind::Having, "HAVING", vec![expr]));
        }
        Ok(AstNode::new(NodeKind::SelectStmt, "", children))
    }

    fn parse_select_item(&mut self) -> Result<AstNode, ParseError> {
        if self.cur().is_symbol("*") {
            self.advance();
            return Ok(AstNode::leaf(NodeKind::Star, "*"));
        }
        // qualified star: ident `.` `*`
        if matches!(self.cur().kind, TokenKind::Word | TokenKind::QuotedIdent)
            && !self.word_is_reserved_here()
            && self.tokens.get(self.pos + 1).is_some_and(|t| t.is_symbol("."))
            && self.tokens.get(self.pos + 2).is_some_and(|t| t.is_symbol("*"))
        {
            let q = self.advance().text;
            self.advance();
            self.advance();
            return Ok(AstNode::leaf(NodeKind::Star, format!("{q}.*")));
        }
        let expr = self.parse_expr(0)?;
        self.maybe_alias(expr)
    }

    fn maybe_alias(&mut self, inner: AstNode) -> Result<AstNode, ParseError> {
        if self.eat_word("AS") {
            let name = self.expect_ident_any()?;
            return Ok(AstNode::new(NodeKind::Alias, name, vec![inner]));
        }
        if matches!(self.cur().kind, TokenKind::Word | TokenKind::QuotedIdent)
            && !self.word_is_reserved_here()
        {
            let name = self.advance().text;
            return Ok(AstNode::new(NodeKind::Alias, name, vec![inner]));
        }
        Ok(inner)
    }

    /// True when the current token is a `Word` that must act as a keyword.
    fn word_is_reserved_here(&self) -> bool {
        self.cur().kind == TokenKind::Word && is_reserved_word(&self.cur().text)
    }

    /// Any identifier token; after `AS` even reserved words are allowed.
    fn expect_ident_any(&mut self) -> Result<String, ParseError> {
        match self.cur().kind {
            TokenKind::Word | TokenKind::QuotedIdent => Ok(self.advance().text),
            _ => Err(self.err(&["identifier"])),
        }
    }

    fn expect_ident(&mut self) -> Result<String, ParseError> {
        if matches!(self.cur().kind, TokenKind::Word | TokenKind::QuotedIdent)
            && !self.word_is_reserved_here()
        {
            Ok(self.advance().text)
        } else {
            Err(self.err(&["identifier"]))
        }
    }

    // ── FROM / JOIN ─────────────────────────────────────────────────────

    fn parse_from_clause(&mut self) -> Result<AstNode, ParseError> {
        self.expect_word("FROM")?;
        let mut children = vec![self.parse_table_or_subquery()?];
        loop {
            if self.eat_symbol(",") {
                children.push(self.parse_table_or_subquery()?);
                continue;
            }
            let label = if self.peek_word("JOIN") {
                self.advance();
                "JOIN"
            } else if self.peek_word("INNER") {
                self.advance();
                self.expect_word("JOIN")?;
                "JOIN"
            } else if self.peek_word("LEFT") {
                self.advance();
                self.eat_word("OUTER");
                self.expect_word("JOIN")?;
                "LEFT JOIN"
            } else if self.peek_word("RIGHT") {
                self.advance();
                self.eat_word("OUTER");
                self.expect_word("JOIN")?;
                "RIGHT JOIN"
            } else if self.peek_word("CROSS") {
                self.advance();
                self.expect_word("JOIN")?;
                "CROSS JOIN"
            } else if self.peek_word("FULL") || self.peek_word("NATURAL") {
                return Err(self.unsupported("this join type"));
            } else {
                break;
            };
            let table = self.parse_table_or_subquery()?;
            let mut join_children = vec![table];
            if self.eat_word("ON") {
                let cond = self.parse_expr(0)?;
                join_children.push(AstNode::new(NodeKind::UnaryOp, "ON", vec![cond]));
            } else if self.eat_word("USING") {
                self.expect_symbol("(")?;
                let mut cols = vec![AstNode::leaf(NodeKind::ColumnRef, self.expect_ident()?)];
                while self.eat_symbol(",") {
                    cols.push(AstNode::leaf(NodeKind::ColumnRef, self.expect_ident()?));
                }
                self.expect_symbol(")")?;
                join_children.push(AstNode::new(NodeKind::FunctionCall, "USING", cols));
            }
            children.push(AstNode::new(NodeKind::Join, label, join_children));
        }
        Ok(AstNode::new(NodeKind::FromClause, "FROM", children))
    }

    fn parse_table_or_subquery(&mut self) -> Result<AstNode, ParseError> {
        if self.cur().is_symbol("(") {
            self.advance();
            if !self.peek_word("SELECT") {
                return Err(self.err(&["SELECT"]));
            }
            let stmt = self.parse_statement()?;
            self.expect_symbol(")")?;
            let sub = AstNode::new(NodeKind::Subquery, "", vec![stmt]);
            return self.maybe_alias(sub);
        }
        let name = self.expect_ident()?;
        let table = AstNode::leaf(NodeKind::TableRef, name);
        self.maybe_alias(table)
    }

    // ── ORDER BY / LIMIT ────────────────────────────────────────────────

    fn parse_order_by(&mut self) -> Result<AstNode, ParseError> {
        self.expect_word("ORDER")?;
        self.expect_word("BY")?;
        let mut items = vec![self.parse_order_item()?];
        while self.eat_symbol(",") {
            items.push(self.parse_order_item()?);
        }
        Ok(AstNode::new(NodeKind::OrderBy, "ORDER BY", items))
    }

    fn parse_order_item(&mut self) -> Result<AstNode, ParseError> {
        let expr = self.parse_expr(0)?;
        if self.eat_word("ASC") {
            Ok(AstNode::new(NodeKind::UnaryOp, "ASC", vec![expr]))
        } else if self.eat_word("DESC") {
            Ok(AstNode::new(NodeKind::UnaryOp, "DESC", vec![expr]))
        } else {
            Ok(expr)
        }
    }

    fn parse_limit(&mut self) -> Result<AstNode, ParseError> {
        self.expect_word("LIMIT")?;
        let count = self.parse_expr(0)?;
        let mut children = vec![count];
        if self.eat_word("OFFSET") {
            let off = self.parse_expr(0)?;
            children.push(AstNode::new(NodeKind::UnaryOp, "OFFSET", vec![off]));
        }
        Ok(AstNode::new(NodeKind::Limit, "LIMIT", children))
    }

    // ── expressions (Pratt) ─────────────────────────────────────────────

    fn parse_expr(&mut self, min_prec: u8) -> Result<AstNode, ParseError> {
        self.enter()?;
        let result = self.parse_expr_inner(min_prec);
        self.leave();
        result
    }

    fn parse_expr_inner(&mut self, min_prec: u8) -> Result<AstNode, ParseError> {
        let mut lhs = self.parse_primary()?;
        while let Some((op, prec)) = self.peek_infix() {
            if prec < min_prec {
                break;
            }
            lhs = self.parse_infix(lhs, &op, prec)?;
        }
        Ok(lhs)
    }

    /// Look at the upcoming token(s) and report an infix operator with its
    /// precedence, without consuming anything.
    fn peek_infix(&self) -> Option<(String, u8)> {
        let t = self.cur();
        if t.kind == TokenKind::Symbol {
            let op = t.text.as_str();
            return match op {
                "=" | "==" | "!=" | "<>" | "<" | "<=" | ">" | ">=" | "||" | "+" | "-" | "*"
                | "/" | "%" => Some((op.to_string(), binary_prec(op))),
                _ => None,
            };
        }
        if t.kind == TokenKind::Word {
            let w = t.text.to_ascii_uppercase();
            return match w.as_str() {
                "AND" | "OR" | "LIKE" | "IN" | "BETWEEN" => Some((w.clone(), binary_prec(&w))),
                "IS" => Some(("IS".into(), 4)),
                "NOT" if self.peek_word_nth(1, "LIKE")
                    || self.peek_word_nth(1, "IN")
                    || self.peek_word_nth(1, "BETWEEN") =>
                {
                    Some(("NOT".into(), 4))
                }
                _ => None,
            };
        }
        None
    }

    fn parse_infix(&mut self, lhs: AstNode, op: &str, prec: u8) -> Result<AstNode, ParseError> {
        match op {
            "IS" => {
                self.advance();
                let negated = self.eat_word("NOT");
                self.expect_word("NULL")?;
                let label = if negated { "IS NOT NULL" } else { "IS NULL" };
                Ok(AstNode::new(NodeKind::UnaryOp, label, vec![lhs]))
            }
            "NOT" => {
                self.advance();
                if self.eat_word("LIKE") {
                    let rhs = self.parse_expr(prec + 1)?;
                    Ok(AstNode::new(NodeKind::BinaryOp, "NOT LIKE", vec![lhs, rhs]))
                } else if self.peek_word("IN") {
                    self.advance();
                    self.parse_in_tail(lhs, "NOT IN")
                } else {
                    self.expect_word("BETWEEN")?;
                    self.parse_between_tail(lhs, "NOT BETWEEN")
                }
            }
            "IN" => {
                self.advance();
                self.parse_in_tail(lhs, "IN")
            }
            "BETWEEN" => {
                self.advance();
                self.parse_between_tail(lhs, "BETWEEN")
            }
            _ => {
                self.advance();
                let rhs = self.parse_expr(prec + 1)?;
                Ok(AstNode::new(NodeKind::BinaryOp, op, vec![lhs, rhs]))
            }
        }
    }

    fn parse_in_tail(&mut self, lhs: AstNode, label: &str) -> Result<AstNode, ParseError> {
        self.expect_symbol("(")?;
        if self.peek_word("SELECT") {
            let stmt = self.parse_statement()?;
            self.expect_symbol(")")?;
            let sub = AstNode::new(NodeKind::Subquery, "", vec![stmt]);
            return Ok(AstNode::new(NodeKind::BinaryOp, label, vec![lhs, sub]));
        }
        let mut children = vec![lhs, self.parse_expr(0)?];
        while self.eat_symbol(",") {
            children.push(self.parse_expr(0)?);
        }
        self.expect_symbol(")")?;
        Ok(AstNode::new(NodeKind::BinaryOp, label, children))
    }

    fn parse_between_tail(&mut self, lhs: AstNode, label: &str) -> Result<AstNode, ParseError> {
        // both bounds bind tighter than AND
        let lo = self.parse_expr(binary_prec("AND") + 1)?;
        self.expect_word("AND")?;
        let hi = self.parse_expr(binary_prec("AND") + 1)?;
        let range = AstNode::new(NodeKind::BinaryOp, "AND", vec![lo, hi]);
        Ok(AstNode::new(NodeKind::BinaryOp, label, vec![lhs, range]))
    }

    fn parse_primary(&mut self) -> Result<AstNode, ParseError> {
        let t = self.cur().clone();
        match t.kind {
            TokenKind::Number => {
                self.advance();
                Ok(AstNode::leaf(NodeKind::Literal, t.text))
            }
            TokenKind::String => {
                self.advance();
                Ok(AstNode::leaf(NodeKind::Literal, t.text))
            }
            TokenKind::Symbol => match t.text.as_str() {
                "(" => {
                    self.advance();
                    if self.peek_word("SELECT") {
                        let stmt = self.parse_statement()?;
                        self.expect_symbol(")")?;
                        Ok(AstNode::new(NodeKind::Subquery, "", vec![stmt]))
                    } else {
                        let inner = self.parse_expr(0)?;
                        self.expect_symbol(")")?;
                        Ok(inner)
                    }
                }
                "-" | "+" => {
                    self.advance();
                    let operand = self.parse_expr(8)?;
                    Ok(AstNode::new(NodeKind::UnaryOp, t.text, vec![operand]))
                }
                _ => Err(self.err(&["expression"])),
            },
            TokenKind::Word | TokenKind::QuotedIdent => self.parse_word_primary(),
            TokenKind::Eof => Err(self.err(&["expression"])),
        }
    }

    fn parse_word_primary(&mut self) -> Result<AstNode, ParseError> {
        let t = self.cur().clone();
        if t.kind == TokenKind::Word {
            let upper = t.text.to_ascii_uppercase();
            match upper.as_str() {
                "NULL" | "TRUE" | "FALSE" => {
                    self.advance();
                    return Ok(AstNode::leaf(NodeKind::Literal, t.text));
                }
                "NOT" => {
                    self.advance();
                    let operand = self.parse_expr(3)?;
                    return Ok(AstNode::new(NodeKind::UnaryOp, "NOT", vec![operand]));
                }
                "EXISTS" => {
                    self.advance();
                    self.expect_symbol("(")?;
                    if !self.peek_word("SELECT") {
                        return Err(self.err(&["SELECT"]));
                    }
                    let stmt = self.parse_statement()?;
                    self.expect_symbol(")")?;
                    let sub = AstNode::new(NodeKind::Subquery, "", vec![stmt]);
                    return Ok(AstNode::new(NodeKind::UnaryOp, "EXISTS", vec![sub]));
                }
                "CASE" => return self.parse_case(),
                "CAST" => return self.parse_cast(),
                "SELECT" => return Err(self.err(&["expression"])),
                _ if is_reserved_word(&t.text) => return Err(self.err(&["expression"])),
                _ => {}
            }
        }
        // function call?
        if self.tokens.get(self.pos + 1).is_some_and(|n| n.is_symbol("(")) {
            let name = self.advance().text;
            self.advance(); // (
            let mut args = Vec::new();
            if !self.cur().is_symbol(")") {
                args.push(self.parse_function_arg()?);
                while self.eat_symbol(",") {
                    args.push(self.parse_function_arg()?);
                }
            }
            self.expect_symbol(")")?;
            if self.peek_word("OVER") || self.peek_word("FILTER") {
                return Err(self.unsupported("window functions"));
            }
            return Ok(AstNode::new(NodeKind::FunctionCall, name, args));
        }
        // dotted column reference
        let mut parts = vec![self.advance().text];
        while self.cur().is_symbol(".")
            && self
                .tokens
                .get(self.pos + 1)
                .is_some_and(|n| matches!(n.kind, TokenKind::Word | TokenKind::QuotedIdent))
        {
            self.advance();
            parts.push(self.advance().text);
        }
        Ok(AstNode::leaf(NodeKind::ColumnRef, parts.join(".")))
    }

    fn parse_function_arg(&mut self) -> Result<AstNode, ParseError> {
        if self.cur().is_symbol("*") {
            self.advance();
            return Ok(AstNode::leaf(NodeKind::Star, "*"));
        }
        if self.peek_word("DISTINCT") {
            self.advance();
            let inner = self.parse_expr(0)?;
            return Ok(AstNode::new(NodeKind::UnaryOp, "DISTINCT", vec![inner]));
        }
        self.parse_expr(0)
    }

    fn parse_case(&mut self) -> Result<AstNode, ParseError> {
        self.expect_word("CASE")?;
        let mut children = Vec::new();
        if !self.peek_word("WHEN") {
            children.push(self.parse_expr(0)?);
        }
        if !self.peek_word("WHEN") {
            return Err(self.err(&["WHEN"]));
        }
        while self.eat_word("WHEN") {
            let cond = self.parse_expr(0)?;
            self.expect_word("THEN")?;
            let result = self.parse_expr(0)?;
            children.push(AstNode::new(NodeKind::BinaryOp, "WHEN", vec![cond, result]));
        }
        if self.eat_word("ELSE") {
            let result = self.parse_expr(0)?;
            children.push(AstNode::new(NodeKind::UnaryOp, "ELSE", vec![result]));
        }
        self.expect_word("END")?;
        Ok(AstNode::new(NodeKind::FunctionCall, "CASE", children))
    }

    fn parse_cast(&mut self) -> Result<AstNode, ParseError> {
        self.expect_word("CAST")?;
        self.expect_symbol("(")?;
        let expr = self.parse_expr(0)?;
        self.expect_word("AS")?;
        let ty = self.parse_type_name()?;
        self.expect_symbol(")")?;
        Ok(AstNode::new(
            NodeKind::FunctionCall,
            "CAST",
            vec![expr, AstNode::leaf(NodeKind::Literal, ty)],
        ))
    }

    fn parse_type_name(&mut self) -> Result<String, ParseError> {
        let mut words = vec![self.expect_ident_any()?];
        // multi-word types like DOUBLE PRECISION
        while matches!(self.cur().kind, TokenKind::Word) && !is_reserved_word(&self.cur().text) {
            words.push(self.advance().text);
        }
        let mut ty = words.join(" ").to_ascii_uppercase();
        if self.eat_symbol("(") {
            let mut nums = Vec::new();
            loop {
                if self.cur().kind != TokenKind::Number {
                    return Err(self.err(&["number"]));
                }
                nums.push(self.advance().text);
                if !self.eat_symbol(",") {
                    break;
                }
            }
            self.expect_symbol(")")?;
            ty.push('(');
            ty.push_str(&nums.join(","));
            ty.push(')');
        }
        Ok(ty)
    }
}
