//! Prompt templates: named text files with `{{placeholder}}` syntax.
//!
//! A built-in set ships with the crate; a config-supplied directory can
//! override any of them file-by-file.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Template names the pipeline expects to resolve.
pub const TEMPLATE_NAMES: [&str; 13] = [
    "first_order",
    "hybrid",
    "adapt",
    "suggest",
    "revise",
    "judge_direct",
    "judge_pairwise",
    "persona_enthusiastic_fan",
    "persona_critical_critic",
    "persona_academic_analyst",
    "hucot_generic",
    "hucot_indian",
    "hucot_genz_indian",
];

const BUILTIN: [(&str, &str); 13] = [
    ("first_order", include_str!("../templates/first_order.txt")),
    ("hybrid", include_str!("../templates/hybrid.txt")),
    ("adapt", include_str!("../templates/adapt.txt")),
    ("suggest", include_str!("../templates/suggest.txt")),
    ("revise", include_str!("../templates/revise.txt")),
    ("judge_direct", include_str!("../templates/judge_direct.txt")),
    ("judge_pairwise", include_str!("../templates/judge_pairwise.txt")),
    (
        "persona_enthusiastic_fan",
        include_str!("../templates/persona_enthusiastic_fan.txt"),
    ),
    (
        "persona_critical_critic",
        include_str!("../templates/persona_critical_critic.txt"),
    ),
    (
        "persona_academic_analyst",
        include_str!("../templates/persona_academic_analyst.txt"),
    ),
    ("hucot_generic", include_str!("../templates/hucot_generic.txt")),
    ("hucot_indian", include_str!("../templates/hucot_indian.txt")),
    (
        "hucot_genz_indian",
        include_str!("../templates/hucot_genz_indian.txt"),
    ),
];

/// Immutable, name-addressed template set.
#[derive(Debug, Clone)]
pub struct TemplateStore {
    templates: BTreeMap<String, String>,
}

impl TemplateStore {
    /// The templates compiled into the crate.
    pub fn builtin() -> Self {
        let templates = BUILTIN
            .iter()
            .map(|(name, body)| (name.to_string(), body.to_string()))
            .collect();
        TemplateStore { templates }
    }

    /// Builtin templates with `dir`'s `<name>.txt` files layered on top.
    pub fn load(dir: &Path) -> Result<Self> {
        let mut store = Self::builtin();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(name) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            store.templates.insert(name.to_string(), body);
        }
        Ok(store)
    }

    /// Builtin set, or `load(dir)` when `dir` is non-empty.
    pub fn from_config(template_dir: &str) -> Result<Self> {
        if template_dir.is_empty() {
            Ok(Self::builtin())
        } else {
            Self::load(Path::new(template_dir))
        }
    }

    pub fn raw(&self, name: &str) -> Result<&str> {
        self.templates
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownTemplate(name.to_string()))
    }

    /// Substitute `{{key}}` placeholders. Any placeholder left unresolved
    /// after substitution is an error.
    pub fn render(&self, name: &str, vars: &[(&str, &str)]) -> Result<String> {
        let rendered = fill(self.raw(name)?, vars);
        if let Some(placeholder) = first_placeholder(&rendered) {
            return Err(Error::UnresolvedPlaceholder {
                name: name.to_string(),
                placeholder,
            });
        }
        Ok(rendered)
    }
}

/// Replace each `{{key}}` with its value; unknown keys are left in place.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    out
}

/// Find the first remaining `{{identifier}}` marker, if any.
pub fn first_placeholder(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i + 3 < bytes.len() {
        if bytes[i] == b'{' && bytes[i + 1] == b'{' {
            let start = i + 2;
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > start && j + 1 < bytes.len() && bytes[j] == b'}' && bytes[j + 1] == b'}' {
                return Some(text[start..j].to_string());
            }
        }
        i += 1;
    }
    None
}
