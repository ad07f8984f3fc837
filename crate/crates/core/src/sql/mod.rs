//! SQL parsing, skeletonization, and rendering.

pub mod ast;
pub mod lexer;
pub mod parser;

pub use ast::{AstNode, NodeKind, SqlAst};
pub use parser::{parse_sql, ParseError};
