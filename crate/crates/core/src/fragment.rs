//! `[type, value]` prompt fragments and the edits that recombine them.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Known fragment types in canonical order.
pub const CANONICAL_TYPES: [&str; 5] = ["content", "style", "tone", "color", "composition"];

/// Lowercase, trimmed, single-spaced.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Category label of a fragment, e.g. `style`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FragmentType(String);

impl FragmentType {
    pub fn new(name: &str) -> Result<Self> {
        let name = normalize_text(name);
        if name.is_empty() {
            return Err(Error::MalformedPayload("empty fragment type".into()));
        }
        Ok(FragmentType(name))
    }

    pub fn content() -> Self {
        FragmentType("content".into())
    }

    pub fn style() -> Self {
        FragmentType("style".into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Position in the canonical order; adapter-invented types sort last.
    pub fn rank(&self) -> usize {
        CANONICAL_TYPES.iter().position(|t| *t == self.0).unwrap_or(CANONICAL_TYPES.len())
    }

    pub fn is_canonical(&self) -> bool {
        self.rank() < CANONICAL_TYPES.len()
    }
}

impl Ord for FragmentType {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for FragmentType {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FragmentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FragmentOrigin {
    #[default]
    Decomposed,
    Suggested,
    User,
    Extracted,
}

/// One reified dimension of intent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFragment")]
pub struct Fragment {
    pub ftype: FragmentType,
    pub value: String,
    #[serde(default)]
    pub origin: FragmentOrigin,
}

#[derive(Deserialize)]
struct RawFragment {
    ftype: String,
    value: String,
    #[serde(default)]
    origin: FragmentOrigin,
}

impl TryFrom<RawFragment> for Fragment {
    type Error = Error;

    fn try_from(raw: RawFragment) -> Result<Self> {
        Fragment::with_origin(&raw.ftype, &raw.value, raw.origin)
    }
}

impl Fragment {
    pub fn new(ftype: &str, value: &str) -> Result<Self> {
        Self::with_origin(ftype, value, FragmentOrigin::Decomposed)
    }

    pub fn with_origin(ftype: &str, value: &str, origin: FragmentOrigin) -> Result<Self> {
        let ftype = FragmentType::new(ftype)?;
        let value = normalize_text(value);
        if value.is_empty() {
            return Err(Error::MalformedPayload("empty fragment value".into()));
        }
        Ok(Fragment { ftype, value, origin })
    }

    pub fn origin(mut self, origin: FragmentOrigin) -> Self {
        self.origin = origin;
        self
    }

    /// Equality on `(ftype, value)`, ignoring where the fragment came from.
    pub fn same_as(&self, other: &Fragment) -> bool {
        self.ftype == other.ftype && self.value == other.value
    }
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.ftype, self.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditAction {
    Add,
    Remove,
    Replace,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentEdit {
    pub action: EditAction,
    pub fragment: Fragment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<Fragment>,
}

impl FragmentEdit {
    pub fn add(fragment: Fragment) -> Self {
        FragmentEdit { action: EditAction::Add, fragment, replacement: None }
    }

    pub fn remove(fragment: Fragment) -> Self {
        FragmentEdit { action: EditAction::Remove, fragment, replacement: None }
    }

    pub fn replace(fragment: Fragment, replacement: Fragment) -> Self {
        FragmentEdit { action: EditAction::Replace, fragment, replacement: Some(replacement) }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.action, &self.replacement) {
            (EditAction::Replace, None) => Err(Error::MalformedPayload("replace edit without replacement".into())),
            (EditAction::Replace, Some(r)) if r.ftype != self.fragment.ftype => Err(Error::ReplaceTypeMismatch {
                from: self.fragment.ftype.to_string(),
                to: r.ftype.to_string(),
            }),
            (EditAction::Add | EditAction::Remove, Some(_)) => {
                Err(Error::MalformedPayload("only replace edits carry a replacement".into()))
            }
            _ => Ok(()),
        }
    }

    /// Applies the edit to a fragment set, keeping `(ftype, value)` unique.
    pub fn apply_to(&self, set: &mut Vec<Fragment>) -> Result<()> {
        self.validate()?;
        let pos = set.iter().position(|f| f.same_as(&self.fragment));
        match self.action {
            EditAction::Add => {
                if pos.is_none() {
                    set.push(self.fragment.clone());
                }
            }
            EditAction::Remove => {
                let pos = pos.ok_or_else(|| Error::RemoveOfAbsentFragment(self.fragment.clone()))?;
                set.remove(pos);
            }
            EditAction::Replace => {
                let pos = pos.ok_or_else(|| Error::RemoveOfAbsentFragment(self.fragment.clone()))?;
                let replacement = self.replacement.clone().expect("validated");
                if set.iter().any(|f| f.same_as(&replacement)) {
                    set.remove(pos);
                } else {
                    set[pos] = replacement;
                }
            }
        }
        Ok(())
    }
}

/// Base fragments laid out in a row (one per type) with value variations
/// accumulated in a column under each type.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FragmentRow {
    pub fragments: Vec<Fragment>,
    #[serde(default)]
    pub expansions: BTreeMap<String, Vec<Fragment>>,
}

impl FragmentRow {
    /// Keeps the first fragment of each type, in canonical type order.
    pub fn from_fragments(fragments: &[Fragment]) -> Self {
        let mut row = FragmentRow::default();
        for f in fragments {
            row.push_base(f.clone());
        }
        row
    }

    /// Adds a base fragment unless its type is already present.
    pub fn push_base(&mut self, fragment: Fragment) -> bool {
        if self.fragments.iter().any(|f| f.ftype == fragment.ftype) {
            return false;
        }
        let at = self.fragments.iter().position(|f| f.ftype > fragment.ftype).unwrap_or(self.fragments.len());
        self.fragments.insert(at, fragment);
        true
    }

    /// Accumulates variations under the column of their type, skipping repeats.
    pub fn expand(&mut self, variations: &[Fragment]) {
        for v in variations {
            let column = self.expansions.entry(v.ftype.to_string()).or_default();
            if !column.iter().any(|f| f.same_as(v)) {
                column.push(v.clone());
            }
        }
    }

    /// Replaces the base fragments while keeping accumulated columns.
    pub fn rebase(&mut self, fragments: &[Fragment]) {
        let expansions = std::mem::take(&mut self.expansions);
        *self = FragmentRow::from_fragments(fragments);
        self.expansions = expansions;
    }
}
