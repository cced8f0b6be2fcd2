use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// A normalized semantic concept: trimmed and case-folded, never empty.
///
/// Cloning is cheap; labels are shared between every network that knows the
/// concept.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TagLabel(Arc<str>);

impl TagLabel {
    pub fn new(raw: &str) -> Result<Self, GraphError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(GraphError::EmptyLabel);
        }
        let folded: String = trimmed.to_lowercase();
        Ok(Self(Arc::from(folded)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for TagLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl fmt::Display for TagLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for TagLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for TagLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        TagLabel::new(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u64);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A content item: an opaque id plus the tags describing it.
///
/// Tags are stored sorted and duplicate-free; the set is immutable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedItem {
    id: ItemId,
    tags: Arc<[TagLabel]>,
}

impl TaggedItem {
    pub fn new(id: ItemId, tags: impl IntoIterator<Item = TagLabel>) -> Result<Self, GraphError> {
        let mut tags: Vec<TagLabel> = tags.into_iter().collect();
        tags.sort();
        tags.dedup();
        if tags.is_empty() {
            return Err(GraphError::EmptyItem);
        }
        Ok(Self { id, tags: tags.into() })
    }

    /// Convenience constructor normalizing raw strings.
    pub fn from_strs<'a>(id: u64, tags: impl IntoIterator<Item = &'a str>) -> Result<Self, GraphError> {
        let labels = tags.into_iter().map(TagLabel::new).collect::<Result<Vec<_>, _>>()?;
        Self::new(ItemId(id), labels)
    }

    pub fn id(&self) -> ItemId {
        self.id
    }

    pub fn tags(&self) -> &[TagLabel] {
        &self.tags
    }

    pub fn has_tag(&self, tag: &TagLabel) -> bool {
        self.tags.binary_search(tag).is_ok()
    }
}

/// Items owned by one node, keyed by id. Items are only ever added.
pub type ItemStore = BTreeMap<ItemId, TaggedItem>;
