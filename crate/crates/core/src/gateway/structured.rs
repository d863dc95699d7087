//! Extraction of structured objects from free-form model text.
//!
//! Models wrap JSON in prose, code fences, or restate it after their
//! reasoning. The scanner walks the text for balanced `{...}` spans that
//! parse as JSON objects and keeps the last one; nested objects inside an
//! already-parsed span are not revisited.

use serde_json::{Map, Value};

/// Declared type of a required field in a structured reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Number,
    Integer,
    String,
    Array,
    Any,
}

impl FieldKind {
    fn matches(&self, value: &Value) -> bool {
        match self {
            FieldKind::Number => value.is_number(),
            FieldKind::Integer => value.is_i64() || value.is_u64(),
            FieldKind::String => value.is_string(),
            FieldKind::Array => value.is_array(),
            FieldKind::Any => true,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            FieldKind::Number => "number",
            FieldKind::Integer => "integer",
            FieldKind::String => "string",
            FieldKind::Array => "array",
            FieldKind::Any => "any",
        }
    }
}

/// A required field: name plus expected JSON type.
#[derive(Debug, Clone, Copy)]
pub struct FieldSpec {
    pub name: &'static str,
    pub kind: FieldKind,
}

impl FieldSpec {
    pub const fn new(name: &'static str, kind: FieldKind) -> Self {
        FieldSpec { name, kind }
    }

    pub const fn number(name: &'static str) -> Self {
        Self::new(name, FieldKind::Number)
    }

    pub const fn integer(name: &'static str) -> Self {
        Self::new(name, FieldKind::Integer)
    }

    pub const fn string(name: &'static str) -> Self {
        Self::new(name, FieldKind::String)
    }

    pub const fn array(name: &'static str) -> Self {
        Self::new(name, FieldKind::Array)
    }
}

/// Find the last well-formed JSON object in `text`, if any.
pub fn extract_last_object(text: &str) -> Option<Map<String, Value>> {
    let bytes = text.as_bytes();
    let mut last = None;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = balanced_object_end(bytes, i) {
                if let Ok(Value::Object(map)) = serde_json::from_str(&text[i..=end]) {
                    last = Some(map);
                    i = end + 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    last
}

/// Index of the `}` closing the object that opens at `start`, honoring
/// string literals and escapes. `None` when the braces never balance.
fn balanced_object_end(bytes: &[u8], start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset);
                }
            }
            _ => {}
        }
    }
    None
}

/// Check the extracted object against the field specs. Returns the first
/// problem as a human-readable reason, for use in repair prompts.
pub fn check_fields(map: &Map<String, Value>, fields: &[FieldSpec]) -> std::result::Result<(), String> {
    for field in fields {
        match map.get(field.name) {
            None => return Err(format!("missing required field `{}`", field.name)),
            Some(value) => {
                if !field.kind.matches(value) {
                    return Err(format!(
                        "field `{}` must be a {}, got {}",
                        field.name,
                        field.kind.name(),
                        type_name(value)
                    ));
                }
            }
        }
    }
    Ok(())
}

fn type_name(value: &Value) -> &'static str {
    match value {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
