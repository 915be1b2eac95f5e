//! Minimal s-expression reader shared by the rule and FPCore front ends.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Sexp {
    Atom(String, Loc),
    List(Vec<Sexp>, Loc),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{loc}: {msg}")]
pub struct SexpError {
    pub loc: Loc,
    pub msg: String,
}

impl SexpError {
    pub fn new(loc: Loc, msg: impl Into<String>) -> Self {
        SexpError { loc, msg: msg.into() }
    }
}

impl Sexp {
    pub fn loc(&self) -> Loc {
        match self {
            Sexp::Atom(_, l) | Sexp::List(_, l) => *l,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(items, _) => Some(items),
            Sexp::Atom(..) => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(s, _) => f.write_str(s),
            Sexp::List(items, _) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Reads every top-level form. `;` starts a line comment.
pub fn read_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut stack: Vec<(Vec<Sexp>, Loc)> = Vec::new();
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    let mut atom = String::new();
    let mut atom_loc = Loc::default();

    fn flush(atom: &mut String, loc: Loc, stack: &mut [(Vec<Sexp>, Loc)], out: &mut Vec<Sexp>) {
        if atom.is_empty() {
            return;
        }
        let a = Sexp::Atom(std::mem::take(atom), loc);
        match stack.last_mut() {
            Some((items, _)) => items.push(a),
            None => out.push(a),
        }
    }

    while let Some(c) = chars.next() {
        let here = Loc { line, col };
        if c == '\n' {
            line += 1;
            col = 1;
        } else {
            col += 1;
        }
        match c {
            ';' => {
                flush(&mut atom, atom_loc, &mut stack, &mut out);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' | '[' => {
                flush(&mut atom, atom_loc, &mut stack, &mut out);
                stack.push((Vec::new(), here));
            }
            ')' | ']' => {
                flush(&mut atom, atom_loc, &mut stack, &mut out);
                let (items, loc) = stack.pop().ok_or_else(|| SexpError::new(here, "unbalanced `)`"))?;
                let l = Sexp::List(items, loc);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(l),
                    None => out.push(l),
                }
            }
            '"' if atom.is_empty() => {
                // String atoms keep their quotes so they never read as symbols.
                atom_loc = here;
                atom.push('"');
                loop {
                    let n = chars.next().ok_or_else(|| SexpError::new(here, "unterminated string"))?;
                    if n == '\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                    atom.push(n);
                    if n == '\\' {
                        if let Some(e) = chars.next() {
                            col += 1;
                            atom.push(e);
                        }
                    } else if n == '"' {
                        break;
                    }
                }
                flush(&mut atom, atom_loc, &mut stack, &mut out);
            }
            c if c.is_whitespace() => flush(&mut atom, atom_loc, &mut stack, &mut out),
            c => {
                if atom.is_empty() {
                    atom_loc = here;
                }
                atom.push(c);
            }
        }
    }
    flush(&mut atom, atom_loc, &mut stack, &mut out);
    if let Some((_, loc)) = stack.last() {
        return Err(SexpError::new(*loc, "unclosed `(`"));
    }
    Ok(out)
}
