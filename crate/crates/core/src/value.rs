//! Parameter and state values.
//!
//! Every in-parameter, out-parameter and object state is a [`Value`]. Numbers
//! are exact rationals with arbitrary-precision components, so undoing a
//! `MULTIPLY` with a `DIVIDE` restores the original state bit for bit.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::ParseValueError;

/// An opaque item token. Only equality matters to the framework; the ordering
/// exists so states can be serialized canonically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Item(Arc<str>);

impl Item {
    pub fn new(token: impl AsRef<str>) -> Self {
        Item(Arc::from(token.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Report symbols returned by the built-in ADTs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Report {
    Ok,
    AlreadyIn,
    NotFound,
    EmptyStack,
    AlreadyEmpty,
}

impl Report {
    pub const ALL: [Report; 5] = [
        Report::Ok,
        Report::AlreadyIn,
        Report::NotFound,
        Report::EmptyStack,
        Report::AlreadyEmpty,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Report::Ok => "Ok",
            Report::AlreadyIn => "AlreadyIn",
            Report::NotFound => "NotFound",
            Report::EmptyStack => "EmptyStack",
            Report::AlreadyEmpty => "AlreadyEmpty",
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Type tag of a [`Value`], used to check call signatures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Tag {
    Item,
    Rational,
    Boolean,
    Report,
    Nat,
    Items,
    Unit,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::Item => "item",
            Tag::Rational => "rational",
            Tag::Boolean => "boolean",
            Tag::Report => "report",
            Tag::Nat => "natural",
            Tag::Items => "item sequence",
            Tag::Unit => "unit",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Item(Item),
    Rational(BigRational),
    Boolean(bool),
    Report(Report),
    Nat(u64),
    /// An ordered item sequence: stack contents, canonical set contents, or a
    /// hidden out-parameter carrying removed elements.
    Items(Vec<Item>),
    /// The absent value, rendered `⊥`.
    Unit,
}

impl Value {
    pub fn tag(&self) -> Tag {
        match self {
            Value::Item(_) => Tag::Item,
            Value::Rational(_) => Tag::Rational,
            Value::Boolean(_) => Tag::Boolean,
            Value::Report(_) => Tag::Report,
            Value::Nat(_) => Tag::Nat,
            Value::Items(_) => Tag::Items,
            Value::Unit => Tag::Unit,
        }
    }

    pub fn item(token: impl AsRef<str>) -> Self {
        Value::Item(Item::new(token))
    }

    pub fn int(n: i64) -> Self {
        Value::Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(numer: i64, denom: i64) -> Self {
        Value::Rational(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn items<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Value::Items(tokens.into_iter().map(Item::new).collect())
    }

    pub fn as_item(&self) -> Option<&Item> {
        match self {
            Value::Item(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Value::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_report(&self) -> Option<Report> {
        match self {
            Value::Report(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_items(&self) -> Option<&[Item]> {
        match self {
            Value::Items(v) => Some(v),
            _ => None,
        }
    }

    /// Parses a workload argument token against the expected tag.
    pub fn parse_as(tag: Tag, token: &str) -> Result<Value, ParseValueError> {
        match tag {
            Tag::Item => {
                if token.is_empty() || token.contains(|c: char| c.is_whitespace() || "[]{},".contains(c)) {
                    Err(ParseValueError::new(tag, token))
                } else {
                    Ok(Value::item(token))
                }
            }
            Tag::Rational => parse_rational(token).map(Value::Rational),
            Tag::Boolean => match token {
                "true" => Ok(Value::Boolean(true)),
                "false" => Ok(Value::Boolean(false)),
                _ => Err(ParseValueError::new(tag, token)),
            },
            Tag::Report => Report::ALL
                .iter()
                .find(|r| r.as_str() == token)
                .map(|r| Value::Report(*r))
                .ok_or_else(|| ParseValueError::new(tag, token)),
            Tag::Nat => token
                .parse()
                .map(Value::Nat)
                .map_err(|_| ParseValueError::new(tag, token)),
            Tag::Items => parse_item_list(token, '[', ']').map(Value::Items),
            Tag::Unit => match token {
                "⊥" | "_" => Ok(Value::Unit),
                _ => Err(ParseValueError::new(tag, token)),
            },
        }
    }
}

/// Parses `p/q` or an integer into a reduced rational.
pub fn parse_rational(token: &str) -> Result<BigRational, ParseValueError> {
    let err = || ParseValueError::new(Tag::Rational, token);
    match token.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p).map_err(|_| err())?;
            let q = BigInt::from_str(q).map_err(|_| err())?;
            if q.is_zero() {
                return Err(err());
            }
            Ok(BigRational::new(p, q))
        }
        None => BigInt::from_str(token)
            .map(BigRational::from_integer)
            .map_err(|_| err()),
    }
}

/// Parses `[a,b,c]`-style item lists (with the given delimiters).
pub fn parse_item_list(token: &str, open: char, close: char) -> Result<Vec<Item>, ParseValueError> {
    let err = || ParseValueError::new(Tag::Items, token);
    let inner = token
        .strip_prefix(open)
        .and_then(|t| t.strip_suffix(close))
        .ok_or_else(err)?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|t| match Value::parse_as(Tag::Item, t.trim()) {
            Ok(Value::Item(i)) => Ok(i),
            _ => Err(err()),
        })
        .collect()
}

pub(crate) fn fmt_rational(r: &BigRational, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if r.denom().is_one() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Item(i) => write!(f, "{i}"),
            Value::Rational(r) => fmt_rational(r, f),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::Report(r) => write!(f, "{r}"),
            Value::Nat(n) => write!(f, "{n}"),
            Value::Items(items) => {
                f.write_str("[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str("]")
            }
            Value::Unit => f.write_str("⊥"),
        }
    }
}

/// Renders a parameter list as `[v1,v2,...]`.
pub fn render_params(values: &[Value]) -> String {
    let mut s = String::from("[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        s.push_str(&v.to_string());
    }
    s.push(']');
    s
}

pub(crate) fn abs_ge_one(r: &BigRational) -> bool {
    r.abs() >= BigRational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_are_reduced() {
        assert_eq!(Value::ratio(2, 4), Value::ratio(1, 2));
        assert_eq!(Value::ratio(-3, -6).to_string(), "1/2");
        assert_eq!(Value::int(7).to_string(), "7");
        assert_eq!(Value::parse_as(Tag::Rational, "-4/6").unwrap(), Value::ratio(-2, 3));
    }

    #[test]
    fn zero_denominator_rejected() {
        assert!(Value::parse_as(Tag::Rational, "1/0").is_err());
        assert!(Value::parse_as(Tag::Rational, "x").is_err());
    }

    #[test]
    fn item_lists() {
        assert_eq!(parse_item_list("[]", '[', ']').unwrap(), vec![]);
        assert_eq!(
            parse_item_list("{a, b}", '{', '}').unwrap(),
            vec![Item::new("a"), Item::new("b")]
        );
        assert!(parse_item_list("[a,,b]", '[', ']').is_err());
        assert_eq!(Value::items(["a", "b"]).to_string(), "[a,b]");
    }

    #[test]
    fn tags_checked() {
        assert!(Value::parse_as(Tag::Boolean, "yes").is_err());
        assert_eq!(Value::parse_as(Tag::Boolean, "true").unwrap(), Value::Boolean(true));
        assert!(Value::parse_as(Tag::Item, "a b").is_err());
        assert_eq!(render_params(&[Value::Unit, Value::Report(Report::EmptyStack)]), "[⊥,EmptyStack]");
    }

    proptest::proptest! {
        #[test]
        fn rational_render_parse_roundtrip(p in -10_000i64..10_000, q in 1i64..500) {
            let v = Value::ratio(p, q);
            let back = Value::parse_as(Tag::Rational, &v.to_string()).unwrap();
            proptest::prop_assert_eq!(back, v);
        }
    }
}
