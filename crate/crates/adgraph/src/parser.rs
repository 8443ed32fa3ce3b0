//! Source language for describing computations.
//!
//! A program is a sequence of assignments separated by newlines or
//! semicolons:
//!
//! ```text
//! Z := A*B + C
//! W := Z + 4
//! Y := Z^2 - (3*Z + B)
//! ```
//!
//! Every assigned name becomes an output, in statement order. A name
//! that is referenced but never assigned is a free variable (an input).
//! Names are single-assignment, and a reference may not precede the
//! assignment it refers to. A program may also be a bare expression,
//! which is treated as an assignment to `y`.
//!
//! Operators in increasing binding strength: `+ -`, `* /`, unary `-`,
//! `^` (right-associative). `ln`, `sin`, `cos`, `exp` are function
//! names, always called with parentheses, and cannot be used as
//! variables. There is no implicit multiplication; `2 x` is an error
//! that says so.
//!
//! [`lower`] translates a parsed program to a [`Graph`] with one `Var`
//! node per free variable, one `Const` node per literal occurrence and
//! one operation node per source operation. No subexpressions are
//! merged: `sin(x) + sin(x)` produces two `Sin` nodes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::graph::{Graph, GraphBuilder, NodeId};
use crate::op::OpKind;

/// Where in the source an error was detected, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

/// What stage of processing rejected the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceErrorKind {
    Lex,
    Syntax,
    Scope,
}

/// A rejected program, with position and a human-readable reason.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceError {
    pub kind: SourceErrorKind,
    pub pos: Pos,
    pub message: String,
}

impl fmt::Display for SourceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.pos.line, self.pos.col, self.message)
    }
}

impl std::error::Error for SourceError {}

/// The built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Ln,
    Sin,
    Cos,
    Exp,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "ln" => Some(Func::Ln),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
        }
    }

    fn op(self) -> OpKind {
        match self {
            Func::Ln => OpKind::Ln,
            Func::Sin => OpKind::Sin,
            Func::Cos => OpKind::Cos,
            Func::Exp => OpKind::Exp,
        }
    }
}

/// The binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn op(self) -> OpKind {
        match self {
            BinOp::Add => OpKind::Add,
            BinOp::Sub => OpKind::Sub,
            BinOp::Mul => OpKind::Mul,
            BinOp::Div => OpKind::Div,
            BinOp::Pow => OpKind::Pow,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

/// An expression tree, exactly as written.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Ident(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// One assignment. Bare expressions parse as an assignment to `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Statement {
    pub target: String,
    pub expr: Expr,
}

/// A whole parsed program.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub statements: Vec<Statement>,
    /// Referenced-but-never-assigned names, in first-use order.
    pub free_vars: Vec<String>,
    /// Assigned names, in statement order.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Assign,
    Sep,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Number(n) => write!(f, "'{n}'"),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Slash => write!(f, "'/'"),
            Tok::Caret => write!(f, "'^'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
            Tok::Assign => write!(f, "':='"),
            Tok::Sep => write!(f, "end of line"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: Pos,
}

fn lex(src: &str) -> Result<Vec<Token>, SourceError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    let mut col = 1;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let mut push = |tok: Tok| out.push(Token { tok, pos });
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                push(Tok::Sep);
                i += 1;
                line += 1;
                col = 1;
            }
            ';' => {
                push(Tok::Sep);
                i += 1;
                col += 1;
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                push(match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                });
                i += 1;
                col += 1;
            }
            ':' => {
                if chars.get(i + 1) == Some(&'=') {
                    push(Tok::Assign);
                    i += 2;
                    col += 2;
                } else {
                    return Err(SourceError {
                        kind: SourceErrorKind::Lex,
                        pos,
                        message: "expected '=' after ':'".to_string(),
                    });
                }
            }
            'A'..='Z' | 'a'..='z' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                let name: String = chars[start..i].iter().collect();
                col += i - start;
                push(Tok::Ident(name));
            }
            '0'..='9' => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    if chars.get(i + 1).is_some_and(|c| c.is_ascii_digit()) {
                        i += 1;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        return Err(SourceError {
                            kind: SourceErrorKind::Lex,
                            pos: Pos { line, col: col + (i - start) },
                            message: "expected a digit after '.'".to_string(),
                        });
                    }
                }
                // 'e' only starts an exponent when a digit actually
                // follows, so "2exp(x)" lexes as a number and an ident.
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if chars.get(j) == Some(&'+') || chars.get(j) == Some(&'-') {
                        j += 1;
                    }
                    if chars.get(j).is_some_and(|c| c.is_ascii_digit()) {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                col += i - start;
                let value = text.parse::<f64>().expect("scanned a valid float literal");
                push(Tok::Number(value));
            }
            other => {
                return Err(SourceError {
                    kind: SourceErrorKind::Lex,
                    pos,
                    message: format!("unexpected character '{other}'"),
                });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

fn is_operand_start(tok: &Tok) -> bool {
    matches!(tok, Tok::Ident(_) | Tok::Number(_) | Tok::LParen)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    /// Every name assigned anywhere, found by a pre-scan; lets a
    /// reference that precedes its assignment be reported as such
    /// instead of silently becoming a free variable.
    all_targets: BTreeSet<String>,
    assigned: BTreeSet<String>,
    free_vars: Vec<String>,
}

impl Parser {
    fn new(tokens: Vec<Token>) -> Self {
        let mut all_targets = BTreeSet::new();
        let mut at_start = true;
        for pair in tokens.windows(2) {
            if at_start {
                if let (Tok::Ident(name), Tok::Assign) = (&pair[0].tok, &pair[1].tok) {
                    all_targets.insert(name.clone());
                }
            }
            at_start = pair[0].tok == Tok::Sep;
        }
        Parser { tokens, pos: 0, all_targets, assigned: BTreeSet::new(), free_vars: Vec::new() }
    }

    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek2(&self) -> &Tok {
        &self.tokens[(self.pos + 1).min(self.tokens.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error(&self, kind: SourceErrorKind, pos: Pos, message: String) -> SourceError {
        SourceError { kind, pos, message }
    }

    fn skip_seps(&mut self) {
        while self.peek().tok == Tok::Sep {
            self.bump();
        }
    }

    fn parse_program(mut self) -> Result<Program, SourceError> {
        self.skip_seps();
        if self.peek().tok == Tok::Eof {
            return Err(self.error(
                SourceErrorKind::Syntax,
                self.peek().pos,
                "empty program".to_string(),
            ));
        }
        let mut statements = Vec::new();
        loop {
            statements.push(self.parse_statement()?);
            match &self.peek().tok {
                Tok::Eof => break,
                Tok::Sep => {
                    self.skip_seps();
                    if self.peek().tok == Tok::Eof {
                        break;
                    }
                }
                t if is_operand_start(t) => {
                    return Err(self.implicit_mul_error());
                }
                t => {
                    let msg = format!("expected end of statement, found {t}");
                    return Err(self.error(SourceErrorKind::Syntax, self.peek().pos, msg));
                }
            }
        }
        let outputs = statements.iter().map(|s| s.target.clone()).collect();
        Ok(Program { statements, free_vars: self.free_vars, outputs })
    }

    fn parse_statement(&mut self) -> Result<Statement, SourceError> {
        let start = self.peek().clone();
        let target = if matches!(&start.tok, Tok::Ident(_)) && *self.peek2() == Tok::Assign {
            let name = match self.bump().tok {
                Tok::Ident(name) => name,
                _ => unreachable!("peeked an ident"),
            };
            self.bump();
            Some(name)
        } else {
            None
        };
        if let Some(name) = &target {
            if Func::from_name(name).is_some() {
                return Err(self.error(
                    SourceErrorKind::Scope,
                    start.pos,
                    format!("'{name}' is a function name and cannot be assigned"),
                ));
            }
            if self.assigned.contains(name) {
                return Err(self.error(
                    SourceErrorKind::Scope,
                    start.pos,
                    format!("'{name}' is assigned more than once"),
                ));
            }
        }
        let expr = self.parse_sum()?;
        let name = target.unwrap_or_else(|| "y".to_string());
        if self.assigned.contains(&name) {
            // Only reachable for the synthetic target: an explicit
            // duplicate is caught before its expression is parsed.
            return Err(self.error(
                SourceErrorKind::Scope,
                start.pos,
                "output 'y' is already defined (a bare expression is named y)".to_string(),
            ));
        }
        if self.free_vars.contains(&name) {
            return Err(self.error(
                SourceErrorKind::Scope,
                start.pos,
                format!("'{name}' is already used as an input and cannot be assigned"),
            ));
        }
        self.assigned.insert(name.clone());
        Ok(Statement { target: name, expr })
    }

    fn parse_sum(&mut self) -> Result<Expr, SourceError> {
        let mut lhs = self.parse_term()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_term(&mut self) -> Result<Expr, SourceError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match &self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, SourceError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, SourceError> {
        let base = self.parse_atom()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            // Right-associative, and the exponent may carry its own
            // sign: x ^ -2 and a ^ b ^ c both parse.
            let exponent = self.parse_unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Expr, SourceError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Number(n) => {
                self.bump();
                Ok(Expr::Number(n))
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(func) = Func::from_name(&name) {
                    if self.peek().tok != Tok::LParen {
                        return Err(self.error(
                            SourceErrorKind::Syntax,
                            token.pos,
                            format!("'{name}' is a function; write {name}(...)"),
                        ));
                    }
                    self.bump();
                    let arg = self.parse_sum()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call(func, Box::new(arg)))
                } else {
                    if !self.assigned.contains(&name) {
                        if self.all_targets.contains(&name) {
                            return Err(self.error(
                                SourceErrorKind::Scope,
                                token.pos,
                                format!("'{name}' is used before it is assigned"),
                            ));
                        }
                        if !self.free_vars.contains(&name) {
                            self.free_vars.push(name.clone());
                        }
                    }
                    Ok(Expr::Ident(name))
                }
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            ref t => {
                let msg = format!("expected an expression, found {t}");
                Err(self.error(SourceErrorKind::Syntax, token.pos, msg))
            }
        }
    }

    fn expect_rparen(&mut self) -> Result<(), SourceError> {
        match &self.peek().tok {
            Tok::RParen => {
                self.bump();
                Ok(())
            }
            t if is_operand_start(t) => Err(self.implicit_mul_error()),
            t => {
                let msg = format!("expected ')', found {t}");
                Err(self.error(SourceErrorKind::Syntax, self.peek().pos, msg))
            }
        }
    }

    fn implicit_mul_error(&self) -> SourceError {
        let token = self.peek();
        self.error(
            SourceErrorKind::Syntax,
            token.pos,
            format!(
                "missing operator before {} (implicit multiplication is not supported)",
                token.tok
            ),
        )
    }
}

/// Parses a program, applying every lexical, grammatical and scoping
/// check. The first offending position is reported.
pub fn parse(src: &str) -> Result<Program, SourceError> {
    Parser::new(lex(src)?).parse_program()
}

/// Renders a program back to source with only the parentheses required
/// to preserve the tree. `parse(&render(p))` reproduces `p`'s
/// statements exactly.
pub fn render(program: &Program) -> String {
    let mut out = String::new();
    for (i, stmt) in program.statements.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&stmt.target);
        out.push_str(" := ");
        render_expr(&stmt.expr, &mut out);
    }
    out
}

// Binding strength used for parenthesization; atoms are 5.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(BinOp::Add | BinOp::Sub, _, _) => 1,
        Expr::Binary(BinOp::Mul | BinOp::Div, _, _) => 2,
        Expr::Neg(_) => 3,
        Expr::Binary(BinOp::Pow, _, _) => 4,
        Expr::Number(_) | Expr::Ident(_) | Expr::Call(_, _) => 5,
    }
}

fn render_child(e: &Expr, wrap: bool, out: &mut String) {
    if wrap {
        out.push('(');
        render_expr(e, out);
        out.push(')');
    } else {
        render_expr(e, out);
    }
}

fn render_expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Number(n) => out.push_str(&n.to_string()),
        Expr::Ident(name) => out.push_str(name),
        Expr::Neg(inner) => {
            out.push('-');
            render_child(inner, prec(inner) < 3, out);
        }
        Expr::Binary(op, lhs, rhs) => {
            let (lhs_wrap, rhs_wrap) = match op {
                // Left-associative: an equal-strength right child needs
                // parens to survive a round trip.
                BinOp::Add | BinOp::Sub => (prec(lhs) < 1, prec(rhs) <= 1),
                BinOp::Mul | BinOp::Div => (prec(lhs) < 2, prec(rhs) <= 2),
                // The base is an atom in the grammar; the exponent is a
                // unary, so negations and powers stay bare.
                BinOp::Pow => (prec(lhs) < 5, prec(rhs) < 3),
            };
            render_child(lhs, lhs_wrap, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            render_child(rhs, rhs_wrap, out);
        }
        Expr::Call(func, arg) => {
            out.push_str(func.name());
            out.push('(');
            render_expr(arg, out);
            out.push(')');
        }
    }
}

/// How source names map onto graph nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NameMap {
    vars: Vec<(String, NodeId)>,
    targets: Vec<(String, NodeId)>,
}

impl NameMap {
    /// Free variables with their `Var` nodes, in first-use order.
    pub fn vars(&self) -> &[(String, NodeId)] {
        &self.vars
    }

    /// Assigned names with their defining nodes, in statement order.
    pub fn targets(&self) -> &[(String, NodeId)] {
        &self.targets
    }

    pub fn var_node(&self, name: &str) -> Option<NodeId> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, id)| *id)
    }

    pub fn target_node(&self, name: &str) -> Option<NodeId> {
        self.targets.iter().find(|(n, _)| n == name).map(|(_, id)| *id)
    }
}

/// Translates a parsed program to a graph, post-order per statement.
/// Each free variable gets a single `Var` node at its first use; each
/// assigned name refers back to the node that computed it.
pub fn lower(program: &Program) -> (Graph, NameMap) {
    let mut builder = GraphBuilder::new();
    let mut env: BTreeMap<String, NodeId> = BTreeMap::new();
    let mut vars = Vec::new();
    let mut targets = Vec::new();
    for stmt in &program.statements {
        let id = lower_expr(&stmt.expr, &mut builder, &mut env, &mut vars);
        env.insert(stmt.target.clone(), id);
        targets.push((stmt.target.clone(), id));
    }
    let outputs = targets.iter().map(|(_, id)| *id).collect();
    let graph = builder.finish(outputs).expect("parsed programs have at least one statement");
    (graph, NameMap { vars, targets })
}

fn lower_expr(
    e: &Expr,
    builder: &mut GraphBuilder,
    env: &mut BTreeMap<String, NodeId>,
    vars: &mut Vec<(String, NodeId)>,
) -> NodeId {
    match e {
        Expr::Number(n) => builder.constant(*n),
        Expr::Ident(name) => {
            if let Some(&id) = env.get(name) {
                id
            } else {
                let id = builder.var(name);
                env.insert(name.clone(), id);
                vars.push((name.clone(), id));
                id
            }
        }
        Expr::Neg(inner) => {
            let inner = lower_expr(inner, builder, env, vars);
            builder.unary(OpKind::Neg, inner).expect("lowering emits well-formed nodes")
        }
        Expr::Binary(op, lhs, rhs) => {
            let lhs = lower_expr(lhs, builder, env, vars);
            let rhs = lower_expr(rhs, builder, env, vars);
            builder.binary(op.op(), lhs, rhs).expect("lowering emits well-formed nodes")
        }
        Expr::Call(func, arg) => {
            let arg = lower_expr(arg, builder, env, vars);
            builder.unary(func.op(), arg).expect("lowering emits well-formed nodes")
        }
    }
}

/// Parses and lowers in one step.
pub fn compile(src: &str) -> Result<(Graph, NameMap), SourceError> {
    let program = parse(src)?;
    Ok(lower(&program))
}
