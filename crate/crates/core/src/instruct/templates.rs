use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SynthError;

const BUNDLED: &str = include_str!("../../templates/instruction_templates.json");

/// Slots each question type may reference.
pub(crate) const SLOTS: [(&str, &[&str]); 13] = [
    ("poi_category", &["poi"]),
    ("poi_address", &["poi"]),
    ("poi_coordinates", &["poi"]),
    ("poi_nearby", &["poi"]),
    ("aoi_location", &["aoi"]),
    ("aoi_nearby", &["aoi"]),
    ("road_relations", &["road"]),
    ("junction_relations", &["junction"]),
    ("route", &["origin", "dest"]),
    ("distance", &["route", "origin", "dest"]),
    ("direction", &["route", "origin", "dest"]),
    ("distance_followup", &["origin", "dest"]),
    ("direction_followup", &["origin", "dest"]),
];

/// Question templates keyed by question type, each with `{slot}` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateSet {
    templates: BTreeMap<String, Vec<String>>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::from_json(BUNDLED).expect("bundled templates are valid")
    }
}

impl TemplateSet {
    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let set: TemplateSet = serde_json::from_str(text).map_err(|e| SynthError::Config(format!("templates: {e}")))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SynthError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<(), SynthError> {
        for (qt, list) in &self.templates {
            if list.len() < 3 {
                return Err(SynthError::TooFewTemplates { question_type: qt.clone(), count: list.len() });
            }
            let allowed = SLOTS.iter().find(|(k, _)| k == qt).map(|(_, s)| *s).unwrap_or(&[]);
            for t in list {
                for slot in slots_in(t) {
                    if !allowed.contains(&slot.as_str()) {
                        return Err(SynthError::UnknownSlot { question_type: qt.clone(), slot });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, question_type: &str) -> Result<&[String], SynthError> {
        self.templates
            .get(question_type)
            .map(Vec::as_slice)
            .ok_or_else(|| SynthError::MissingTemplates(question_type.to_string()))
    }

    pub fn count(&self, question_type: &str) -> usize {
        self.templates.get(question_type).map_or(0, Vec::len)
    }

    /// Fill template `index` (modulo the number of templates) of a type.
    pub fn render(&self, question_type: &str, index: usize, values: &[(&str, &str)]) -> Result<String, SynthError> {
        let list = self.get(question_type)?;
        Ok(fill(&list[index % list.len()], values))
    }
}

fn slots_in(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                out.push(after[..end].to_string());
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        match after.find('}') {
            Some(end) => {
                let key = &after[..end];
                match values.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push('{');
                        out.push_str(key);
                        out.push('}');
                    }
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}
