use std::collections::HashMap;
use std::sync::Arc;

use super::verify::check_signature;
use super::{Attr, Attribute, InsertPoint, IrError, Module, OpId, RegionKind, Registry, Type, ValueId};
use crate::symbol::Symbol;

#[derive(Copy, Clone, Debug)]
pub struct ParseOptions {
    /// Reject operations missing from the registry.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { strict: true }
    }
}

/// Parses textual IR in strict mode.
pub fn parse_ir(text: &str, registry: Arc<Registry>) -> Result<Module, IrError> {
    parse_ir_with(text, registry, ParseOptions::default())
}

pub fn parse_ir_with(text: &str, registry: Arc<Registry>, opts: ParseOptions) -> Result<Module, IrError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let mut ops = Vec::new();
    while !p.at_eof() {
        ops.push(p.op()?);
    }
    if ops.len() == 1 && ops[0].name == "builtin.module" && ops[0].results.is_empty() {
        let top = ops.pop().unwrap();
        ops = top
            .regions
            .into_iter()
            .flat_map(|r| r.blocks)
            .flat_map(|b| b.ops)
            .collect();
    }
    Builder::new(registry, opts).build(ops)
}

// ---- lexer ------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Value(String),
    Sym(String),
    Label(String),
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Punct(char),
    Arrow,
    Eof,
}

#[derive(Copy, Clone, Debug, Default)]
struct Pos {
    line: usize,
    col: usize,
}

fn err(pos: Pos, msg: impl Into<String>) -> IrError {
    IrError::Parse {
        line: pos.line,
        col: pos.col,
        msg: msg.into(),
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '$'
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, IrError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let take_word = |start: usize| -> usize {
            let mut j = start;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            j
        };
        match c {
            '%' | '@' | '^' => {
                let end = take_word(i + 1);
                if end == i + 1 {
                    return Err(err(pos, format!("expected a name after `{c}`")));
                }
                let word: String = chars[i + 1..end].iter().collect();
                while i < end {
                    bump!();
                }
                out.push((
                    match c {
                        '%' => Tok::Value(word),
                        '@' => Tok::Sym(word),
                        _ => Tok::Label(word),
                    },
                    pos,
                ));
            }
            '"' => {
                bump!();
                let mut s = String::new();
                loop {
                    let Some(&ch) = chars.get(i) else {
                        return Err(err(pos, "unterminated string"));
                    };
                    bump!();
                    match ch {
                        '"' => break,
                        '\\' => {
                            let Some(&e) = chars.get(i) else {
                                return Err(err(pos, "unterminated string"));
                            };
                            bump!();
                            s.push(match e {
                                'n' => '\n',
                                't' => '\t',
                                other => other,
                            });
                        }
                        other => s.push(other),
                    }
                }
                out.push((Tok::Str(s), pos));
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                bump!();
                bump!();
                out.push((Tok::Arrow, pos));
            }
            '-' | '+' | '0'..='9' => {
                let start = i;
                bump!();
                while i < chars.len() {
                    let ch = chars[i];
                    let prev = chars[i - 1];
                    if ch.is_ascii_alphanumeric() || ch == '.' || ((ch == '-' || ch == '+') && (prev == 'e' || prev == 'E')) {
                        bump!();
                    } else {
                        break;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                out.push((number(&s).ok_or_else(|| err(pos, format!("malformed number `{s}`")))?, pos));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let end = take_word(i);
                let word: String = chars[i..end].iter().collect();
                while i < end {
                    bump!();
                }
                out.push((Tok::Ident(word), pos));
            }
            '=' | ',' | '(' | ')' | '{' | '}' | '[' | ']' | ':' => {
                bump!();
                out.push((Tok::Punct(c), pos));
            }
            other => return Err(err(pos, format!("unexpected character `{other}`"))),
        }
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

fn number(s: &str) -> Option<Tok> {
    let body = s.trim_start_matches(['-', '+']);
    match body {
        "inf" => return Some(Tok::Float(if s.starts_with('-') { f64::NEG_INFINITY } else { f64::INFINITY })),
        "nan" => return Some(Tok::Float(f64::NAN)),
        _ => {}
    }
    if body.contains(['.', 'e', 'E']) {
        s.parse::<f64>().ok().map(Tok::Float)
    } else {
        s.parse::<i64>().ok().map(Tok::Int)
    }
}

// ---- syntax tree --------------------------------------------------------------

#[derive(Debug)]
struct OpAst {
    pos: Pos,
    results: Vec<(String, Pos)>,
    name: String,
    sym: Option<String>,
    operands: Vec<(String, Pos)>,
    attrs: Vec<(String, Attr)>,
    arrow_types: Option<Vec<Type>>,
    colon_types: Option<Vec<Type>>,
    regions: Vec<RegionAst>,
    func_args: Option<Vec<(String, Type, Pos)>>,
}

#[derive(Debug)]
struct RegionAst {
    blocks: Vec<BlockAst>,
}

#[derive(Debug)]
struct BlockAst {
    args: Vec<(String, Type, Pos)>,
    ops: Vec<OpAst>,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn here(&self) -> Pos {
        self.toks[self.pos].1
    }

    fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.is_punct(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), IrError> {
        if self.eat_punct(c) {
            Ok(())
        } else {
            Err(err(self.here(), format!("expected `{c}`, found {}", describe(self.peek()))))
        }
    }

    fn op(&mut self) -> Result<OpAst, IrError> {
        let start = self.here();
        let mut results = Vec::new();
        if matches!(self.peek(), Tok::Value(_)) {
            loop {
                let (t, pos) = self.next();
                let Tok::Value(name) = t else {
                    return Err(err(pos, "expected a result name"));
                };
                results.push((name, pos));
                if !self.eat_punct(',') {
                    break;
                }
            }
            self.expect_punct('=')?;
        }
        let (t, name_pos) = self.next();
        let name = match t {
            Tok::Ident(n) if n.contains('.') => n,
            other => return Err(err(name_pos, format!("expected an operation name, found {}", describe(&other)))),
        };
        let mut op = OpAst {
            pos: if results.is_empty() { name_pos } else { start },
            results,
            name,
            sym: None,
            operands: Vec::new(),
            attrs: Vec::new(),
            arrow_types: None,
            colon_types: None,
            regions: Vec::new(),
            func_args: None,
        };
        if let Tok::Sym(s) = self.peek().clone() {
            self.next();
            op.sym = Some(s);
        }
        if op.name == "func.func" {
            return self.func_rest(op);
        }

        // Operands: a bare list starting on the op's line, or parenthesized.
        if matches!(self.peek(), Tok::Value(_)) && self.here().line == name_pos.line {
            op.operands = self.value_list()?;
        } else if self.is_punct('(') && matches!(self.peek_at(1), Tok::Value(_)) {
            self.next();
            op.operands = self.value_list()?;
            self.expect_punct(')')?;
        } else if self.is_punct('(') && *self.peek_at(1) == Tok::Punct(')') {
            self.next();
            self.next();
        }

        let dict_ahead = matches!(self.peek_at(1), Tok::Ident(_)) && *self.peek_at(2) == Tok::Punct('=');
        if self.is_punct('{') && dict_ahead {
            op.attrs = self.attr_dict('{', '}')?;
        } else if self.is_punct('(') && dict_ahead {
            op.attrs = self.attr_dict('(', ')')?;
        }

        if *self.peek() == Tok::Arrow {
            self.next();
            op.arrow_types = Some(self.arrow_types()?);
        }
        while self.is_punct('{') {
            op.regions.push(self.region()?);
        }
        if self.eat_punct(':') {
            op.colon_types = Some(self.type_list()?);
        }
        Ok(op)
    }

    fn func_rest(&mut self, mut op: OpAst) -> Result<OpAst, IrError> {
        if op.sym.is_none() {
            return Err(err(self.here(), "expected `@name` after func.func"));
        }
        self.expect_punct('(')?;
        let mut args = Vec::new();
        if !self.is_punct(')') {
            loop {
                args.push(self.typed_arg()?);
                if !self.eat_punct(',') {
                    break;
                }
            }
        }
        self.expect_punct(')')?;
        op.func_args = Some(args);
        if *self.peek() == Tok::Arrow {
            self.next();
            op.arrow_types = Some(self.arrow_types()?);
        }
        if *self.peek() == Tok::Ident("attributes".into()) {
            self.next();
            op.attrs = self.attr_dict('{', '}')?;
        }
        if !self.is_punct('{') {
            return Err(err(self.here(), "expected function body"));
        }
        op.regions.push(self.region()?);
        Ok(op)
    }

    fn typed_arg(&mut self) -> Result<(String, Type, Pos), IrError> {
        let (t, pos) = self.next();
        let Tok::Value(name) = t else {
            return Err(err(pos, format!("expected an argument name, found {}", describe(&t))));
        };
        self.expect_punct(':')?;
        let ty = self.ty()?;
        Ok((name, ty, pos))
    }

    fn value_list(&mut self) -> Result<Vec<(String, Pos)>, IrError> {
        let mut out = Vec::new();
        loop {
            let (t, pos) = self.next();
            let Tok::Value(name) = t else {
                return Err(err(pos, format!("expected a value, found {}", describe(&t))));
            };
            out.push((name, pos));
            if !self.eat_punct(',') {
                return Ok(out);
            }
        }
    }

    fn ty(&mut self) -> Result<Type, IrError> {
        let (t, pos) = self.next();
        match t {
            Tok::Ident(s) => s.parse::<Type>().map_err(|e| err(pos, e)),
            other => Err(err(pos, format!("expected a type, found {}", describe(&other)))),
        }
    }

    fn type_list(&mut self) -> Result<Vec<Type>, IrError> {
        let mut out = vec![self.ty()?];
        while self.eat_punct(',') {
            out.push(self.ty()?);
        }
        Ok(out)
    }

    fn arrow_types(&mut self) -> Result<Vec<Type>, IrError> {
        if self.eat_punct('(') {
            let mut out = Vec::new();
            if !self.is_punct(')') {
                out = self.type_list()?;
            }
            self.expect_punct(')')?;
            Ok(out)
        } else {
            Ok(vec![self.ty()?])
        }
    }

    fn attr_dict(&mut self, open: char, close: char) -> Result<Vec<(String, Attr)>, IrError> {
        self.expect_punct(open)?;
        let mut out = Vec::new();
        if self.eat_punct(close) {
            return Ok(out);
        }
        loop {
            let (t, pos) = self.next();
            let Tok::Ident(key) = t else {
                return Err(err(pos, format!("expected an attribute name, found {}", describe(&t))));
            };
            self.expect_punct('=')?;
            out.push((key, self.attr_value()?));
            if self.eat_punct(close) {
                return Ok(out);
            }
            self.expect_punct(',')?;
        }
    }

    fn attr_value(&mut self) -> Result<Attr, IrError> {
        let (t, pos) = self.next();
        match t {
            Tok::Int(v) => {
                if self.eat_punct(':') {
                    let width = match self.ty()? {
                        Type::I1 => 1,
                        Type::I64 => 64,
                        other => return Err(err(pos, format!("integer attribute cannot have type {other}"))),
                    };
                    Ok(Attr::int(v, width))
                } else {
                    Ok(Attr::i64(v))
                }
            }
            Tok::Float(v) => Ok(Attr::f64(v)),
            Tok::Str(s) => Ok(Attr::string(&s)),
            Tok::Ident(s) => match s.as_str() {
                "nan" => Ok(Attr::f64(f64::NAN)),
                "inf" => Ok(Attr::f64(f64::INFINITY)),
                "true" => Ok(Attr::int(1, 1)),
                "false" => Ok(Attr::int(0, 1)),
                _ => s.parse::<Type>().map(Attr::ty).map_err(|e| err(pos, e)),
            },
            Tok::Punct('[') => {
                let mut items = Vec::new();
                if !self.eat_punct(']') {
                    loop {
                        items.push(self.attr_value()?);
                        if self.eat_punct(']') {
                            break;
                        }
                        self.expect_punct(',')?;
                    }
                }
                Ok(Attr::new(Attribute::Array(items)))
            }
            other => Err(err(pos, format!("expected an attribute value, found {}", describe(&other)))),
        }
    }

    fn region(&mut self) -> Result<RegionAst, IrError> {
        self.expect_punct('{')?;
        let mut blocks = Vec::new();
        let mut current: Option<BlockAst> = None;
        loop {
            match self.peek().clone() {
                Tok::Punct('}') => {
                    self.next();
                    break;
                }
                Tok::Eof => return Err(err(self.here(), "unterminated region")),
                Tok::Label(_) => {
                    self.next();
                    let mut args = Vec::new();
                    if self.eat_punct('(') {
                        if !self.is_punct(')') {
                            loop {
                                args.push(self.typed_arg()?);
                                if !self.eat_punct(',') {
                                    break;
                                }
                            }
                        }
                        self.expect_punct(')')?;
                    }
                    self.expect_punct(':')?;
                    if let Some(b) = current.take() {
                        blocks.push(b);
                    }
                    current = Some(BlockAst { args, ops: Vec::new() });
                }
                _ => {
                    let op = self.op()?;
                    current.get_or_insert_with(|| BlockAst { args: Vec::new(), ops: Vec::new() }).ops.push(op);
                }
            }
        }
        blocks.push(current.unwrap_or(BlockAst {
            args: Vec::new(),
            ops: Vec::new(),
        }));
        Ok(RegionAst { blocks })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Value(v) => format!("`%{v}`"),
        Tok::Sym(s) => format!("`@{s}`"),
        Tok::Label(l) => format!("`^{l}`"),
        Tok::Ident(i) => format!("`{i}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Float(v) => format!("`{v}`"),
        Tok::Str(s) => format!("{s:?}"),
        Tok::Punct(c) => format!("`{c}`"),
        Tok::Arrow => "`->`".into(),
        Tok::Eof => "end of input".into(),
    }
}

// ---- construction -----------------------------------------------------------

struct Pending<'a> {
    op: OpId,
    ast: &'a OpAst,
    scope: usize,
}

struct Builder {
    m: Module,
    opts: ParseOptions,
    globals: HashMap<String, ValueId>,
    scopes: Vec<HashMap<String, ValueId>>,
}

impl Builder {
    fn new(registry: Arc<Registry>, opts: ParseOptions) -> Builder {
        Builder {
            m: Module::new(registry),
            opts,
            globals: HashMap::new(),
            scopes: Vec::new(),
        }
    }

    fn build(mut self, ops: Vec<OpAst>) -> Result<Module, IrError> {
        let mut pending = Vec::new();
        let body = self.m.body();
        for ast in &ops {
            self.scopes.push(HashMap::new());
            let scope = self.scopes.len() - 1;
            self.create(ast, body, scope, true, &mut pending)?;
        }
        for p in &pending {
            let mut operands = Vec::with_capacity(p.ast.operands.len());
            for (name, pos) in &p.ast.operands {
                let v = self.scopes[p.scope]
                    .get(name)
                    .or_else(|| self.globals.get(name))
                    .copied()
                    .ok_or_else(|| err(*pos, format!("use of undefined value `%{name}`")))?;
                operands.push(v);
            }
            self.m.set_operands(p.op, &operands);
        }
        for p in &pending {
            let ast = p.ast;
            if ast.results.is_empty() && ast.func_args.is_none() {
                if let Some(types) = &ast.colon_types {
                    let actual: Vec<Type> = self.m.operands(p.op).iter().map(|&v| self.m.value_type(v)).collect();
                    if *types != actual {
                        return Err(err(ast.pos, format!("`{}` operand types do not match the signature", ast.name)));
                    }
                }
            }
            let name = Symbol::new(&ast.name);
            if self.m.registry().get(name).is_none() {
                if self.opts.strict {
                    return Err(err(ast.pos, format!("unknown operation `{}`", ast.name)));
                }
                continue;
            }
            check_signature(&self.m, p.op).map_err(|msg| err(ast.pos, msg))?;
        }
        Ok(self.m)
    }

    fn define(&mut self, scope: usize, global: bool, name: &str, pos: Pos, v: ValueId) -> Result<(), IrError> {
        let table = if global { &mut self.globals } else { &mut self.scopes[scope] };
        if table.insert(name.to_owned(), v).is_some() {
            return Err(err(pos, format!("redefinition of `%{name}`")));
        }
        self.m.set_value_name(v, name);
        Ok(())
    }

    fn create<'a>(
        &mut self,
        ast: &'a OpAst,
        block: super::BlockId,
        scope: usize,
        top_level: bool,
        pending: &mut Vec<Pending<'a>>,
    ) -> Result<(), IrError> {
        let name = Symbol::new(&ast.name);
        let def_kinds = self.m.registry().get(name).map(|d| d.regions.clone());

        let result_types: Vec<Type> = if ast.func_args.is_some() {
            Vec::new()
        } else if ast.results.is_empty() {
            if ast.arrow_types.as_ref().is_some_and(|t| !t.is_empty()) {
                return Err(err(ast.pos, "result types given for an operation without results"));
            }
            Vec::new()
        } else {
            let types = ast
                .arrow_types
                .clone()
                .or_else(|| ast.colon_types.clone())
                .ok_or_else(|| err(ast.pos, format!("`{}` is missing its result types", ast.name)))?;
            if types.len() != ast.results.len() {
                return Err(err(
                    ast.pos,
                    format!("{} result name(s) but {} result type(s)", ast.results.len(), types.len()),
                ));
            }
            types
        };

        let mut attrs: Vec<(Symbol, Attr)> = ast.attrs.iter().map(|(k, v)| (Symbol::new(k), *v)).collect();
        if let Some(s) = &ast.sym {
            attrs.push((Symbol::new("sym_name"), Attr::string(s)));
        }
        if ast.func_args.is_some() {
            let rt = ast.arrow_types.clone().unwrap_or_default();
            attrs.push((
                Symbol::new("result_types"),
                Attr::new(Attribute::Array(rt.into_iter().map(Attr::ty).collect())),
            ));
        }

        let mut regions = Vec::new();
        let mut region_blocks = Vec::new();
        for (ri, r) in ast.regions.iter().enumerate() {
            let kind = def_kinds
                .as_ref()
                .and_then(|k| k.get(ri).copied())
                .unwrap_or(RegionKind::Cfg);
            let region = self.m.new_region(kind);
            let mut blocks = Vec::new();
            for (bi, b) in r.blocks.iter().enumerate() {
                let mut args: Vec<(String, Type, Pos)> = b.args.clone();
                if ri == 0 && bi == 0 {
                    if let Some(fa) = &ast.func_args {
                        args = fa.clone();
                    }
                }
                let types: Vec<Type> = args.iter().map(|a| a.1).collect();
                let bid = self.m.add_block(region, &types);
                for (k, (n, _, pos)) in args.iter().enumerate() {
                    let v = self.m.block_args(bid)[k];
                    self.define(scope, false, n, *pos, v)?;
                }
                blocks.push((bid, b));
            }
            regions.push(region);
            region_blocks.push(blocks);
        }

        let op = self.m.create_op_unchecked(name, &[], attrs, &result_types, regions);
        self.m.insert_op(op, InsertPoint::End(block));
        for (k, (n, pos)) in ast.results.iter().enumerate() {
            let v = self.m.result(op, k);
            self.define(scope, top_level, n, *pos, v)?;
        }
        pending.push(Pending { op, ast, scope });
        for blocks in region_blocks {
            for (bid, b) in blocks {
                for child in &b.ops {
                    self.create(child, bid, scope, false, pending)?;
                }
            }
        }
        Ok(())
    }
}
