use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::CodecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Primitive {
    Bool,
    Int8,
    UInt8,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Int64,
    UInt64,
    Float32,
    Float64,
}

impl Primitive {
    pub fn width(self) -> usize {
        match self {
            Primitive::Bool | Primitive::Int8 | Primitive::UInt8 => 1,
            Primitive::Int16 | Primitive::UInt16 => 2,
            Primitive::Int32 | Primitive::UInt32 | Primitive::Float32 => 4,
            Primitive::Int64 | Primitive::UInt64 | Primitive::Float64 => 8,
        }
    }

    fn from_name(name: &str) -> Option<Primitive> {
        Some(match name {
            "bool" => Primitive::Bool,
            "int8" | "byte" => Primitive::Int8,
            "uint8" | "char" => Primitive::UInt8,
            "int16" => Primitive::Int16,
            "uint16" => Primitive::UInt16,
            "int32" => Primitive::Int32,
            "uint32" => Primitive::UInt32,
            "int64" => Primitive::Int64,
            "uint64" => Primitive::UInt64,
            "float32" => Primitive::Float32,
            "float64" => Primitive::Float64,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FieldType {
    Primitive(Primitive),
    Text,
    Time,
    Duration,
    FixedArray(Box<FieldType>, usize),
    VarArray(Box<FieldType>),
    /// Fully qualified `pkg/Type` name, resolvable in the root schema's
    /// `nested_types`.
    Nested(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Field {
    pub name: String,
    pub field_type: FieldType,
}

/// A parsed message type.
///
/// The root schema returned by [`parse_schema`] carries every dependency in
/// `nested_types` (flattened, keyed by full name); the nested entries
/// themselves have an empty map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MessageSchema {
    pub type_name: String,
    pub fields: Vec<Field>,
    pub nested_types: BTreeMap<String, MessageSchema>,
}

impl MessageSchema {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub(crate) fn lookup<'a>(&'a self, name: &str) -> Option<&'a MessageSchema> {
        if name == self.type_name {
            Some(self)
        } else {
            self.nested_types.get(name)
        }
    }
}

struct Section {
    type_name: String,
    first_line: usize,
    lines: Vec<String>,
}

fn is_separator(line: &str) -> bool {
    let t = line.trim();
    t.len() >= 3 && t.bytes().all(|b| b == b'=')
}

fn split_sections(text: &str, root: &str) -> Result<Vec<Section>, CodecError> {
    let mut sections = vec![Section {
        type_name: root.to_string(),
        first_line: 1,
        lines: Vec::new(),
    }];
    let mut expect_msg = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if is_separator(line) {
            expect_msg = true;
            continue;
        }
        if expect_msg {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let name = t.strip_prefix("MSG:").ok_or_else(|| CodecError::SyntaxError {
                line: lineno,
                message: "expected 'MSG: <type>' after separator".into(),
            })?;
            sections.push(Section {
                type_name: name.trim().to_string(),
                first_line: lineno + 1,
                lines: Vec::new(),
            });
            expect_msg = false;
            continue;
        }
        sections.last_mut().unwrap().lines.push(line.to_string());
    }
    Ok(sections)
}

fn valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn valid_type_name(s: &str) -> bool {
    match s.split_once('/') {
        Some((pkg, name)) => valid_ident(pkg) && valid_ident(name),
        None => valid_ident(s),
    }
}

/// Parses a type token such as `uint8[]`, `float64[9]` or `Header`. Nested
/// names are returned as written and resolved later.
fn parse_type(token: &str, line: usize) -> Result<FieldType, CodecError> {
    let err = |message: String| CodecError::SyntaxError { line, message };
    if let Some(open) = token.find('[') {
        let inner = token[open + 1..]
            .strip_suffix(']')
            .ok_or_else(|| err(format!("malformed array type '{token}'")))?;
        let elem = parse_type(&token[..open], line)?;
        if matches!(elem, FieldType::FixedArray(..) | FieldType::VarArray(_)) {
            return Err(err("nested arrays are not allowed".into()));
        }
        return if inner.is_empty() {
            Ok(FieldType::VarArray(Box::new(elem)))
        } else {
            let n = inner
                .parse::<usize>()
                .map_err(|_| err(format!("bad array length '{inner}'")))?;
            Ok(FieldType::FixedArray(Box::new(elem), n))
        };
    }
    if let Some(p) = Primitive::from_name(token) {
        return Ok(FieldType::Primitive(p));
    }
    match token {
        "string" => Ok(FieldType::Text),
        "time" => Ok(FieldType::Time),
        "duration" => Ok(FieldType::Duration),
        "Header" => Ok(FieldType::Nested("std_msgs/Header".into())),
        t if valid_type_name(t) => Ok(FieldType::Nested(t.to_string())),
        t => Err(err(format!("bad type '{t}'"))),
    }
}

fn parse_fields(section: &Section) -> Result<Vec<Field>, CodecError> {
    let mut fields: Vec<Field> = Vec::new();
    let mut seen = BTreeSet::new();
    for (offset, raw) in section.lines.iter().enumerate() {
        let lineno = section.first_line + offset;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (type_token, rest) = trimmed
            .split_once(char::is_whitespace)
            .ok_or_else(|| CodecError::SyntaxError {
                line: lineno,
                message: format!("expected '<type> <name>', got '{trimmed}'"),
            })?;
        // Constants ("type NAME=value") have no wire presence. String
        // constant values may legally contain '#', so test for '=' first.
        let name_part = rest.split('#').next().unwrap_or("");
        if name_part.contains('=') {
            continue;
        }
        let mut words = name_part.split_whitespace();
        let name = words.next().ok_or_else(|| CodecError::SyntaxError {
            line: lineno,
            message: "missing field name".into(),
        })?;
        if words.next().is_some() || !valid_ident(name) {
            return Err(CodecError::SyntaxError {
                line: lineno,
                message: format!("bad field declaration '{trimmed}'"),
            });
        }
        if !seen.insert(name.to_string()) {
            return Err(CodecError::SyntaxError {
                line: lineno,
                message: format!("duplicate field '{name}'"),
            });
        }
        fields.push(Field {
            name: name.to_string(),
            field_type: parse_type(type_token, lineno)?,
        });
    }
    Ok(fields)
}

fn package_of(type_name: &str) -> Option<&str> {
    type_name.split_once('/').map(|(pkg, _)| pkg)
}

fn resolve_name(written: &str, context: &str, known: &BTreeSet<String>) -> Option<String> {
    if known.contains(written) {
        return Some(written.to_string());
    }
    if !written.contains('/') {
        if let Some(pkg) = package_of(context) {
            let qualified = format!("{pkg}/{written}");
            if known.contains(&qualified) {
                return Some(qualified);
            }
        }
        let suffix = format!("/{written}");
        let mut candidates = known.iter().filter(|k| k.ends_with(&suffix));
        if let (Some(only), None) = (candidates.next(), candidates.next()) {
            return Some(only.clone());
        }
    }
    None
}

fn resolve_type(ft: &mut FieldType, context: &str, known: &BTreeSet<String>) -> Result<(), CodecError> {
    match ft {
        FieldType::Nested(name) => {
            *name = resolve_name(name, context, known).ok_or_else(|| CodecError::UnknownNestedType(name.clone()))?;
            Ok(())
        }
        FieldType::FixedArray(elem, _) | FieldType::VarArray(elem) => resolve_type(elem, context, known),
        _ => Ok(()),
    }
}

fn nested_name(ft: &FieldType) -> Option<&str> {
    match ft {
        FieldType::Nested(n) => Some(n),
        FieldType::FixedArray(e, _) | FieldType::VarArray(e) => nested_name(e),
        _ => None,
    }
}

fn check_acyclic(
    name: &str,
    all: &BTreeMap<String, Vec<Field>>,
    stack: &mut Vec<String>,
    done: &mut BTreeSet<String>,
) -> Result<(), CodecError> {
    if done.contains(name) {
        return Ok(());
    }
    if stack.iter().any(|s| s == name) {
        return Err(CodecError::RecursiveType(name.to_string()));
    }
    stack.push(name.to_string());
    for f in all.get(name).into_iter().flatten() {
        if let Some(n) = nested_name(&f.field_type) {
            check_acyclic(n, all, stack, done)?;
        }
    }
    stack.pop();
    done.insert(name.to_string());
    Ok(())
}

/// Parses a `.msg` body, possibly followed by dependency definitions in
/// rosbag's concatenated layout (80 `=` separator, then `MSG: pkg/Type`).
pub fn parse_schema(definition_text: &str, type_name: &str) -> Result<MessageSchema, CodecError> {
    let sections = split_sections(definition_text, type_name)?;
    let known: BTreeSet<String> = sections.iter().map(|s| s.type_name.clone()).collect();

    let mut parsed: BTreeMap<String, Vec<Field>> = BTreeMap::new();
    for section in &sections {
        let mut fields = parse_fields(section)?;
        for f in &mut fields {
            resolve_type(&mut f.field_type, &section.type_name, &known)?;
        }
        parsed.entry(section.type_name.clone()).or_insert(fields);
    }
    check_acyclic(type_name, &parsed, &mut Vec::new(), &mut BTreeSet::new())?;

    let root_fields = parsed.remove(type_name).unwrap_or_default();
    let nested_types = parsed
        .into_iter()
        .map(|(name, fields)| {
            let schema = MessageSchema {
                type_name: name.clone(),
                fields,
                nested_types: BTreeMap::new(),
            };
            (name, schema)
        })
        .collect();
    Ok(MessageSchema {
        type_name: type_name.to_string(),
        fields: root_fields,
        nested_types,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_primitive_fields() {
        let s = parse_schema("uint32 height\nuint32 width", "pkg/Size").unwrap();
        assert_eq!(s.fields.len(), 2);
        assert_eq!(s.fields[0].field_type, FieldType::Primitive(Primitive::UInt32));
        assert_eq!(s.fields[1].name, "width");
    }

    #[test]
    fn unknown_nested_type() {
        assert_eq!(
            parse_schema("Foo bar", "pkg/Msg"),
            Err(CodecError::UnknownNestedType("Foo".into()))
        );
    }

    #[test]
    fn constants_and_comments_are_skipped() {
        let text = "# leading comment\nint32 X=3\nstring S=has # hash and = sign\nfloat64 value # trailing\n";
        let s = parse_schema(text, "pkg/C").unwrap();
        assert_eq!(s.fields.len(), 1);
        assert_eq!(s.fields[0].name, "value");
    }

    #[test]
    fn arrays_and_aliases() {
        let s = parse_schema("char[4] tag\nbyte[] raw\nfloat64[9] k", "pkg/A").unwrap();
        assert_eq!(
            s.fields[0].field_type,
            FieldType::FixedArray(Box::new(FieldType::Primitive(Primitive::UInt8)), 4)
        );
        assert_eq!(
            s.fields[1].field_type,
            FieldType::VarArray(Box::new(FieldType::Primitive(Primitive::Int8)))
        );
    }

    #[test]
    fn duplicate_field_reports_line() {
        let err = parse_schema("int32 a\n\nint32 a", "pkg/D").unwrap_err();
        assert!(matches!(err, CodecError::SyntaxError { line: 3, .. }));
    }

    #[test]
    fn garbage_line_is_syntax_error() {
        let err = parse_schema("int32", "pkg/D").unwrap_err();
        assert!(matches!(err, CodecError::SyntaxError { line: 1, .. }));
        let err = parse_schema("int32 a b", "pkg/D").unwrap_err();
        assert!(matches!(err, CodecError::SyntaxError { line: 1, .. }));
        let err = parse_schema("uint8[x] a", "pkg/D").unwrap_err();
        assert!(matches!(err, CodecError::SyntaxError { line: 1, .. }));
    }

    #[test]
    fn package_relative_names_resolve() {
        let text = "Point p\nPoint[] ps\n\
            ================================================================================\n\
            MSG: geometry_msgs/Point\nfloat64 x\nfloat64 y\nfloat64 z\n";
        let s = parse_schema(text, "geometry_msgs/Polygon").unwrap();
        assert_eq!(s.fields[0].field_type, FieldType::Nested("geometry_msgs/Point".into()));
        assert_eq!(s.nested_types["geometry_msgs/Point"].fields.len(), 3);
    }

    #[test]
    fn self_reference_is_rejected() {
        let text = "Node child\n";
        assert_eq!(
            parse_schema(text, "pkg/Node"),
            Err(CodecError::RecursiveType("pkg/Node".into()))
        );
    }
}
