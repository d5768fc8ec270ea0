use serde::{Deserialize, Serialize};

/// One PoI category and the urban function it signals when dominant in a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryDef {
    pub name: String,
    pub function: String,
}

/// Closed list of PoI categories.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub categories: Vec<CategoryDef>,
}

const DEFAULT_CATEGORIES: [(&str, &str); 12] = [
    ("residential", "residential living"),
    ("food", "food/dining"),
    ("shopping", "commercial shopping"),
    ("business", "business and offices"),
    ("education", "education"),
    ("medical", "healthcare"),
    ("entertainment", "entertainment and nightlife"),
    ("transport", "transportation hub"),
    ("hotel", "lodging and hospitality"),
    ("sport", "sports and fitness"),
    ("culture", "culture and tourism"),
    ("public-service", "public administration and services"),
];

impl Default for Taxonomy {
    fn default() -> Self {
        Self {
            categories: DEFAULT_CATEGORIES
                .iter()
                .map(|(name, function)| CategoryDef { name: name.to_string(), function: function.to_string() })
                .collect(),
        }
    }
}

impl Taxonomy {
    pub fn contains(&self, category: &str) -> bool {
        self.categories.iter().any(|c| c.name == category)
    }

    pub fn function_of(&self, category: &str) -> Option<&str> {
        self.categories.iter().find(|c| c.name == category).map(|c| c.function.as_str())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.name.as_str())
    }

    pub fn functions(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|c| c.function.as_str())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}
