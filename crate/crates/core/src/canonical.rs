//! Canonical byte encoding used for every persisted or hashed document.
//!
//! The concrete syntax is a restricted JSON: map keys sorted bytewise, no
//! insignificant whitespace, minimal string escapes, integers and floats as
//! distinct kinds (a float always carries `.` or an exponent). Reading is
//! lenient about spacing and key order; writing is strict.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// A value in the canonical data model.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CanonicalError {
    #[error("NON_FINITE_FLOAT: floats must be finite")]
    NonFiniteFloat,
    #[error("DUPLICATE_KEY: key {key:?} appears more than once")]
    DuplicateKey { key: String },
    #[error("SYNTAX_ERROR at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("SCHEMA_ERROR: {0}")]
    Schema(String),
}

impl CanonicalError {
    pub fn code(&self) -> &'static str {
        match self {
            CanonicalError::NonFiniteFloat => "NON_FINITE_FLOAT",
            CanonicalError::DuplicateKey { .. } => "DUPLICATE_KEY",
            CanonicalError::Syntax { .. } => "SYNTAX_ERROR",
            CanonicalError::Schema(_) => "SCHEMA_ERROR",
        }
    }
}

impl Value {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Numeric view: integers widen to f64.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&BTreeMap<String, Value>> {
        match self {
            Value::Map(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Null => "null",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Map(_) => "map",
        }
    }

    pub fn map<I, K>(entries: I) -> Value
    where
        I: IntoIterator<Item = (K, Value)>,
        K: Into<String>,
    {
        Value::Map(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

static NULL: Value = Value::Null;

/// Lookup that yields `Null` for a missing key or a non-map.
impl std::ops::Index<&str> for Value {
    type Output = Value;
    fn index(&self, key: &str) -> &Value {
        self.as_map().and_then(|m| m.get(key)).unwrap_or(&NULL)
    }
}

/// Lookup that yields `Null` out of range or for a non-list.
impl std::ops::Index<usize> for Value {
    type Output = Value;
    fn index(&self, i: usize) -> &Value {
        self.as_list().and_then(|l| l.get(i)).unwrap_or(&NULL)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(f: f64) -> Self {
        Value::Float(f)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

/// Encode a value into its canonical bytes.
pub fn canonicalize(value: &Value) -> Result<Vec<u8>, CanonicalError> {
    let mut out = String::new();
    write_value(value, &mut out)?;
    Ok(out.into_bytes())
}

fn write_value(value: &Value, out: &mut String) -> Result<(), CanonicalError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(true) => out.push_str("true"),
        Value::Bool(false) => out.push_str("false"),
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Float(f) => out.push_str(&format_float(*f)?),
        Value::Str(s) => write_string(s, out),
        Value::List(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out)?;
            }
            out.push(']');
        }
        Value::Map(entries) => {
            // BTreeMap<String, _> iterates in bytewise key order.
            out.push('{');
            for (i, (k, v)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_string(k, out);
                out.push(':');
                write_value(v, out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

/// Shortest round-trip decimal; always contains `.` or an exponent.
pub fn format_float(f: f64) -> Result<String, CanonicalError> {
    if !f.is_finite() {
        return Err(CanonicalError::NonFiniteFloat);
    }
    let s = format!("{f:?}");
    debug_assert!(s.contains(['.', 'e', 'E']));
    Ok(s)
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                out.push_str(&format!("\\u{:04x}", c as u32));
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Parse canonical (or non-canonically spaced) bytes into a value.
pub fn parse_canonical(bytes: &[u8]) -> Result<Value, CanonicalError> {
    let text = std::str::from_utf8(bytes).map_err(|e| CanonicalError::Syntax {
        offset: e.valid_up_to(),
        message: "input is not valid UTF-8".into(),
    })?;
    let mut p = Parser {
        src: text.as_bytes(),
        text,
        pos: 0,
        depth: 0,
    };
    p.skip_ws();
    let v = p.value()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("trailing characters after value"));
    }
    Ok(v)
}

const MAX_DEPTH: usize = 256;

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    depth: usize,
}

impl Parser<'_> {
    fn err(&self, message: &str) -> CanonicalError {
        CanonicalError::Syntax {
            offset: self.pos,
            message: message.to_owned(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while let Some(b' ' | b'\n' | b'\r' | b'\t') = self.peek() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), CanonicalError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    fn literal(&mut self, word: &str, v: Value) -> Result<Value, CanonicalError> {
        if self.src[self.pos..].starts_with(word.as_bytes()) {
            self.pos += word.len();
            Ok(v)
        } else {
            Err(self.err("invalid literal"))
        }
    }

    fn value(&mut self) -> Result<Value, CanonicalError> {
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'n') => self.literal("null", Value::Null),
            Some(b't') => self.literal("true", Value::Bool(true)),
            Some(b'f') => self.literal("false", Value::Bool(false)),
            Some(b'"') => Ok(Value::Str(self.string()?)),
            Some(b'[') => self.list(),
            Some(b'{') => self.object(),
            Some(b'-' | b'0'..=b'9') => self.number(),
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    fn enter(&mut self) -> Result<(), CanonicalError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.err("nesting too deep"));
        }
        Ok(())
    }

    fn list(&mut self) -> Result<Value, CanonicalError> {
        self.enter()?;
        self.pos += 1;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(b']') {
            self.pos += 1;
            self.depth -= 1;
            return Ok(Value::List(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value()?);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b']') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected ',' or ']'")),
            }
        }
        self.depth -= 1;
        Ok(Value::List(items))
    }

    fn object(&mut self) -> Result<Value, CanonicalError> {
        self.enter()?;
        self.pos += 1;
        let mut map = BTreeMap::new();
        self.skip_ws();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            self.depth -= 1;
            return Ok(Value::Map(map));
        }
        loop {
            self.skip_ws();
            if self.peek() != Some(b'"') {
                return Err(self.err("expected string key"));
            }
            let key = self.string()?;
            self.skip_ws();
            self.expect(b':')?;
            self.skip_ws();
            let v = self.value()?;
            if map.contains_key(&key) {
                return Err(CanonicalError::DuplicateKey { key });
            }
            map.insert(key, v);
            self.skip_ws();
            match self.peek() {
                Some(b',') => self.pos += 1,
                Some(b'}') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected ',' or '}'")),
            }
        }
        self.depth -= 1;
        Ok(Value::Map(map))
    }

    fn hex4(&mut self) -> Result<u32, CanonicalError> {
        let end = self.pos + 4;
        let digits = self
            .text
            .get(self.pos..end)
            .ok_or_else(|| self.err("truncated \\u escape"))?;
        let v = u32::from_str_radix(digits, 16).map_err(|_| self.err("bad \\u escape"))?;
        self.pos = end;
        Ok(v)
    }

    fn string(&mut self) -> Result<String, CanonicalError> {
        self.pos += 1;
        let mut out = String::new();
        loop {
            let start = self.pos;
            while let Some(b) = self.peek() {
                if b == b'"' || b == b'\\' || b < 0x20 {
                    break;
                }
                self.pos += 1;
            }
            out.push_str(&self.text[start..self.pos]);
            match self.peek() {
                None => return Err(self.err("unterminated string")),
                Some(b'"') => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some(b'\\') => {
                    self.pos += 1;
                    let esc = self.peek().ok_or_else(|| self.err("truncated escape"))?;
                    self.pos += 1;
                    match esc {
                        b'"' => out.push('"'),
                        b'\\' => out.push('\\'),
                        b'/' => out.push('/'),
                        b'n' => out.push('\n'),
                        b't' => out.push('\t'),
                        b'r' => out.push('\r'),
                        b'b' => out.push('\u{8}'),
                        b'f' => out.push('\u{c}'),
                        b'u' => {
                            let hi = self.hex4()?;
                            let c = if (0xD800..0xDC00).contains(&hi) {
                                if !self.src[self.pos..].starts_with(b"\\u") {
                                    return Err(self.err("unpaired surrogate"));
                                }
                                self.pos += 2;
                                let lo = self.hex4()?;
                                if !(0xDC00..0xE000).contains(&lo) {
                                    return Err(self.err("unpaired surrogate"));
                                }
                                0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
                            } else {
                                hi
                            };
                            out.push(char::from_u32(c).ok_or_else(|| self.err("invalid code point"))?);
                        }
                        _ => {
                            self.pos -= 1;
                            return Err(self.err("invalid escape"));
                        }
                    }
                }
                Some(_) => return Err(self.err("control character in string")),
            }
        }
    }

    fn number(&mut self) -> Result<Value, CanonicalError> {
        let start = self.pos;
        if self.peek() == Some(b'-') {
            self.pos += 1;
        }
        let int_start = self.pos;
        while let Some(b'0'..=b'9') = self.peek() {
            self.pos += 1;
        }
        if self.pos == int_start {
            return Err(self.err("expected digit"));
        }
        if self.src[int_start] == b'0' && self.pos - int_start > 1 {
            self.pos = int_start;
            return Err(self.err("leading zero"));
        }
        let mut is_float = false;
        if self.peek() == Some(b'.') {
            is_float = true;
            self.pos += 1;
            let frac = self.pos;
            while let Some(b'0'..=b'9') = self.peek() {
                self.pos += 1;
            }
            if self.pos == frac {
                return Err(self.err("expected fraction digits"));
            }
        }
        if let Some(b'e' | b'E') = self.peek() {
            is_float = true;
            self.pos += 1;
            if let Some(b'+' | b'-') = self.peek() {
                self.pos += 1;
            }
            let exp = self.pos;
            while let Some(b'0'..=b'9') = self.peek() {
                self.pos += 1;
            }
            if self.pos == exp {
                return Err(self.err("expected exponent digits"));
            }
        }
        let token = &self.text[start..self.pos];
        if is_float {
            let f = f64::from_str(token).map_err(|_| CanonicalError::Syntax {
                offset: start,
                message: "invalid float".into(),
            })?;
            if !f.is_finite() {
                return Err(CanonicalError::Syntax {
                    offset: start,
                    message: "float out of range".into(),
                });
            }
            Ok(Value::Float(f))
        } else {
            i64::from_str(token).map(Value::Int).map_err(|_| CanonicalError::Syntax {
                offset: start,
                message: "integer out of 64-bit signed range".into(),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// SHA-256 digest rendered as 64 lowercase hex characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentHash(String);

impl ContentHash {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        ContentHash(hex::encode(Sha256::digest(bytes)))
    }

    pub fn parse(s: &str) -> Option<Self> {
        is_hex64(s).then(|| ContentHash(s.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn is_hex64(s: &str) -> bool {
    s.len() == 64 && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

impl fmt::Display for ContentHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for ContentHash {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ContentHash {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ContentHash::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("not a 64-char lowercase hex hash: {s:?}")))
    }
}

/// SHA-256 over the canonical encoding of `value`.
pub fn content_hash(value: &Value) -> Result<ContentHash, CanonicalError> {
    Ok(ContentHash::of_bytes(&canonicalize(value)?))
}

// ---------------------------------------------------------------------------
// serde bridge
// ---------------------------------------------------------------------------

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::{SerializeMap, SerializeSeq};
        match self {
            Value::Null => s.serialize_unit(),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Float(f) => s.serialize_f64(*f),
            Value::Str(v) => s.serialize_str(v),
            Value::List(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            Value::Map(entries) => {
                let mut map = s.serialize_map(Some(entries.len()))?;
                for (k, v) in entries {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let json = serde_json::Value::deserialize(d)?;
        from_json(json).map_err(serde::de::Error::custom)
    }
}

fn from_json(json: serde_json::Value) -> Result<Value, CanonicalError> {
    Ok(match json {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Bool(b),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                if n.is_f64() {
                    Value::Float(i as f64)
                } else {
                    Value::Int(i)
                }
            } else if n.is_u64() {
                return Err(CanonicalError::Schema(format!(
                    "integer {n} exceeds the 64-bit signed range"
                )));
            } else {
                let f = n.as_f64().ok_or(CanonicalError::NonFiniteFloat)?;
                Value::Float(f)
            }
        }
        serde_json::Value::String(s) => Value::Str(s),
        serde_json::Value::Array(items) => {
            Value::List(items.into_iter().map(from_json).collect::<Result<_, _>>()?)
        }
        serde_json::Value::Object(entries) => Value::Map(
            entries
                .into_iter()
                .map(|(k, v)| Ok((k, from_json(v)?)))
                .collect::<Result<_, CanonicalError>>()?,
        ),
    })
}

fn to_json(value: &Value) -> Result<serde_json::Value, CanonicalError> {
    Ok(match value {
        Value::Null => serde_json::Value::Null,
        Value::Bool(b) => serde_json::Value::Bool(*b),
        Value::Int(i) => serde_json::Value::Number((*i).into()),
        Value::Float(f) => serde_json::Value::Number(
            serde_json::Number::from_f64(*f).ok_or(CanonicalError::NonFiniteFloat)?,
        ),
        Value::Str(s) => serde_json::Value::String(s.clone()),
        Value::List(items) => {
            serde_json::Value::Array(items.iter().map(to_json).collect::<Result<_, _>>()?)
        }
        Value::Map(entries) => serde_json::Value::Object(
            entries
                .iter()
                .map(|(k, v)| Ok((k.clone(), to_json(v)?)))
                .collect::<Result<_, CanonicalError>>()?,
        ),
    })
}

/// Convert any serializable type into the canonical data model.
pub fn to_value<T: Serialize + ?Sized>(t: &T) -> Result<Value, CanonicalError> {
    let json = serde_json::to_value(t).map_err(|e| CanonicalError::Schema(e.to_string()))?;
    from_json(json)
}

pub fn from_value<T: DeserializeOwned>(v: &Value) -> Result<T, CanonicalError> {
    serde_json::from_value(to_json(v)?).map_err(|e| CanonicalError::Schema(e.to_string()))
}

/// Serialize straight to canonical bytes.
pub fn encode<T: Serialize + ?Sized>(t: &T) -> Result<Vec<u8>, CanonicalError> {
    canonicalize(&to_value(t)?)
}

pub fn encode_string<T: Serialize + ?Sized>(t: &T) -> Result<String, CanonicalError> {
    // Writer only produces UTF-8.
    Ok(String::from_utf8(encode(t)?).expect("canonical writer emits UTF-8"))
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, CanonicalError> {
    from_value(&parse_canonical(bytes)?)
}

pub fn hash_of<T: Serialize + ?Sized>(t: &T) -> Result<ContentHash, CanonicalError> {
    content_hash(&to_value(t)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enc(v: &Value) -> String {
        String::from_utf8(canonicalize(v).unwrap()).unwrap()
    }

    #[test]
    fn empty_map_and_key_order() {
        assert_eq!(enc(&Value::Map(BTreeMap::new())), "{}");
        let v = Value::map([("b", Value::Int(1)), ("a", Value::Int(2))]);
        assert_eq!(enc(&v), r#"{"a":2,"b":1}"#);
    }

    #[test]
    fn float_forms() {
        assert_eq!(enc(&Value::Float(1.50)), "1.5");
        assert_eq!(enc(&Value::Float(1.0)), "1.0");
        assert_eq!(enc(&Value::Float(-0.0)), "-0.0");
        assert_eq!(enc(&Value::Float(1e300)), "1e300");
        assert_eq!(enc(&Value::Float(0.1)), "0.1");
        assert_eq!(canonicalize(&Value::Float(f64::NAN)), Err(CanonicalError::NonFiniteFloat));
        assert_eq!(
            canonicalize(&Value::List(vec![Value::Float(f64::INFINITY)])),
            Err(CanonicalError::NonFiniteFloat)
        );
    }

    #[test]
    fn ints_and_floats_are_distinct() {
        assert_eq!(parse_canonical(b"1").unwrap(), Value::Int(1));
        assert_eq!(parse_canonical(b"1.0").unwrap(), Value::Float(1.0));
        assert_eq!(parse_canonical(b"1e2").unwrap(), Value::Float(100.0));
        assert_ne!(enc(&Value::Int(1)), enc(&Value::Float(1.0)));
    }

    #[test]
    fn string_escapes() {
        let v = Value::Str("q\"\\\n\t\r\u{1}é/".into());
        assert_eq!(enc(&v), "\"q\\\"\\\\\\n\\t\\r\\u0001é/\"");
        assert_eq!(parse_canonical(enc(&v).as_bytes()).unwrap(), v);
        assert_eq!(
            parse_canonical(r#""😀\/""#.as_bytes()).unwrap(),
            Value::Str("😀/".into())
        );
    }

    #[test]
    fn lenient_read() {
        let v = parse_canonical(b"{ \"a\" : 1 }").unwrap();
        assert_eq!(v, Value::map([("a", Value::Int(1))]));
    }

    #[test]
    fn duplicate_key_rejected() {
        assert_eq!(
            parse_canonical(br#"{"a":1,"a":2}"#),
            Err(CanonicalError::DuplicateKey { key: "a".into() })
        );
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse_canonical(br#"{"a":}"#) {
            Err(CanonicalError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_canonical(b"[1,]"), Err(CanonicalError::Syntax { .. })));
        assert!(matches!(parse_canonical(b"01"), Err(CanonicalError::Syntax { .. })));
        assert!(matches!(parse_canonical(b"1 2"), Err(CanonicalError::Syntax { .. })));
        assert!(matches!(
            parse_canonical(b"99999999999999999999"),
            Err(CanonicalError::Syntax { .. })
        ));
        assert!(matches!(parse_canonical(b"1e999"), Err(CanonicalError::Syntax { .. })));
    }

    #[test]
    fn nested_round_trip() {
        let v = Value::map([
            ("list", Value::List(vec![Value::Null, Value::Bool(true), Value::Int(-5)])),
            ("nested", Value::map([("x", Value::Float(2.25)), ("y", Value::Str("z".into()))])),
        ]);
        assert_eq!(parse_canonical(&canonicalize(&v).unwrap()).unwrap(), v);
    }

    #[test]
    fn empty_map_hash_vector() {
        let h = content_hash(&Value::Map(BTreeMap::new())).unwrap();
        assert_eq!(h.as_str(), "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a");
    }

    #[test]
    fn hash_changes_with_leaf() {
        let a = Value::map([("k", Value::Int(1))]);
        let b = Value::map([("k", Value::Int(2))]);
        assert_ne!(content_hash(&a).unwrap(), content_hash(&b).unwrap());
    }

    #[test]
    fn serde_bridge_keeps_kinds() {
        #[derive(Serialize, serde::Deserialize, Debug, PartialEq)]
        struct S {
            f: f64,
            i: i64,
        }
        let s = S { f: 1.0, i: 1 };
        assert_eq!(String::from_utf8(encode(&s).unwrap()).unwrap(), r#"{"f":1.0,"i":1}"#);
        assert_eq!(decode::<S>(br#"{"i":1,"f":1}"#).unwrap(), s);
        assert!(matches!(to_value(&u64::MAX), Err(CanonicalError::Schema(_))));
    }
}
