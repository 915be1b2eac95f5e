use std::collections::HashSet;
use std::hash::{Hash, Hasher};
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

/// Semantic type tag carried by every SSA value.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    I1,
    I64,
    F64,
    /// Opaque complex number, used by the `cplx` toy dialect.
    Cplx,
}

impl Type {
    pub fn is_integer(self) -> bool {
        matches!(self, Type::I1 | Type::I64)
    }

    pub fn is_float(self) -> bool {
        self == Type::F64
    }

    pub fn bitwidth(self) -> u32 {
        match self {
            Type::I1 => 1,
            Type::I64 | Type::F64 => 64,
            Type::Cplx => 128,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Type::I1 => "i1",
            Type::I64 => "i64",
            Type::F64 => "f64",
            Type::Cplx => "cplx",
        })
    }
}

impl FromStr for Type {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i1" => Ok(Type::I1),
            "i64" => Ok(Type::I64),
            "f64" => Ok(Type::F64),
            "cplx" => Ok(Type::Cplx),
            _ => Err(format!("unknown type `{s}`")),
        }
    }
}

/// Compile-time constant data attached to operations.
///
/// Floats are stored by bit pattern so that attributes are hashable and
/// structural equality distinguishes `-0.0` from `0.0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Attribute {
    Int { value: i64, width: u32 },
    Float { bits: u64, width: u32 },
    Str(String),
    Type(Type),
    Array(Vec<Attr>),
}

/// Interned, immutable handle to an [`Attribute`]. Equality and hashing
/// are by address, which coincides with structural equality.
#[derive(Copy, Clone)]
pub struct Attr(&'static Attribute);

fn table() -> &'static Mutex<HashSet<&'static Attribute>> {
    static TABLE: OnceLock<Mutex<HashSet<&'static Attribute>>> = OnceLock::new();
    TABLE.get_or_init(|| Mutex::new(HashSet::new()))
}

impl PartialEq for Attr {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.0, other.0)
    }
}

impl Eq for Attr {}

impl Hash for Attr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        (self.0 as *const Attribute as usize).hash(state)
    }
}

impl Attr {
    pub fn new(attr: Attribute) -> Attr {
        let mut t = table().lock().unwrap();
        if let Some(&interned) = t.get(&attr) {
            return Attr(interned);
        }
        let leaked: &'static Attribute = Box::leak(Box::new(attr));
        t.insert(leaked);
        Attr(leaked)
    }

    pub fn get(self) -> &'static Attribute {
        self.0
    }

    pub fn int(value: i64, width: u32) -> Attr {
        Attr::new(Attribute::Int { value, width })
    }

    pub fn i64(value: i64) -> Attr {
        Attr::int(value, 64)
    }

    pub fn f64(value: f64) -> Attr {
        Attr::new(Attribute::Float {
            bits: value.to_bits(),
            width: 64,
        })
    }

    pub fn string(s: &str) -> Attr {
        Attr::new(Attribute::Str(s.to_owned()))
    }

    pub fn ty(t: Type) -> Attr {
        Attr::new(Attribute::Type(t))
    }

    pub fn as_int(self) -> Option<i64> {
        match self.get() {
            Attribute::Int { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn as_f64(self) -> Option<f64> {
        match self.get() {
            Attribute::Float { bits, .. } => Some(f64::from_bits(*bits)),
            _ => None,
        }
    }

    pub fn as_str(self) -> Option<&'static str> {
        match self.get() {
            Attribute::Str(s) => Some(s.as_str()),
            _ => None,
        }
    }

    /// Numeric value of an integer or float attribute.
    pub fn as_number(self) -> Option<f64> {
        match self.get() {
            Attribute::Int { value, .. } => Some(*value as f64),
            Attribute::Float { bits, .. } => Some(f64::from_bits(*bits)),
            _ => None,
        }
    }

    /// The value type a constant carrying this attribute produces.
    pub fn value_type(self) -> Option<Type> {
        match self.get() {
            Attribute::Int { width: 1, .. } => Some(Type::I1),
            Attribute::Int { .. } => Some(Type::I64),
            Attribute::Float { .. } => Some(Type::F64),
            _ => None,
        }
    }
}

impl fmt::Debug for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Shortest decimal text that reads back to the same bits.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // `{:?}` is the shortest representation that round-trips.
        format!("{v:?}")
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.get() {
            Attribute::Int { value, width: 64 } => write!(f, "{value}"),
            Attribute::Int { value, width } => write!(f, "{value} : i{width}"),
            Attribute::Float { bits, .. } => f.write_str(&format_f64(f64::from_bits(*bits))),
            Attribute::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Attribute::Type(t) => write!(f, "{t}"),
            Attribute::Array(items) => {
                f.write_str("[")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str("]")
            }
        }
    }
}
