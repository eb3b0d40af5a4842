//! Keyword ontology: a tree of at most four levels whose leaves are the
//! retrieval query keywords.
//!
//! The on-disk form is nested JSON, `{"name": ..., "children": [...]}`, with
//! leaves being nodes whose `children` is empty or absent.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DEPTH: u8 = 4;

/// The bundled default ontology (396 distinct keywords in four top-level
/// groups).
pub const DEFAULT_ONTOLOGY_JSON: &str = include_str!("../data/documentnet_ontology.json");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyNode {
    pub name: String,
    /// 1 for the root.
    pub level: u8,
    pub children: Vec<OntologyNode>,
}

impl OntologyNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OntologyTree {
    root: OntologyNode,
    leaf_count: usize,
}

/// A leaf keyword together with the names of its ancestors, root first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeafKeyword {
    pub keyword: String,
    pub path: Vec<String>,
}

#[derive(Deserialize, Serialize)]
struct RawNode {
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<RawNode>,
}

/// Case-folded, whitespace-collapsed form used for uniqueness checks.
pub fn normalize_keyword(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_ontology(text: &str) -> Result<OntologyTree> {
    let raw: RawNode = serde_json::from_str(text).map_err(|e| Error::Format {
        what: "ontology",
        msg: e.to_string(),
    })?;
    OntologyTree::from_raw(raw)
}

pub fn default_ontology() -> OntologyTree {
    parse_ontology(DEFAULT_ONTOLOGY_JSON).expect("bundled ontology is valid")
}

impl OntologyTree {
    fn from_raw(raw: RawNode) -> Result<Self> {
        if raw.children.is_empty() {
            return Err(Error::validation(
                "ontology has no keywords: the root must have at least one child",
            ));
        }
        let mut seen = HashSet::new();
        let root = build_node(raw, 1, &mut seen)?;
        Ok(OntologyTree {
            root,
            leaf_count: seen.len(),
        })
    }

    pub fn root(&self) -> &OntologyNode {
        &self.root
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    /// Pre-order enumeration of the leaves.
    pub fn leaf_keywords(&self) -> Vec<LeafKeyword> {
        let mut out = Vec::with_capacity(self.leaf_count);
        let mut path = Vec::new();
        collect_leaves(&self.root, &mut path, &mut out);
        out
    }

    pub fn keywords(&self) -> Vec<String> {
        self.leaf_keywords().into_iter().map(|l| l.keyword).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&to_raw(&self.root)).expect("ontology serializes")
    }
}

pub fn leaf_keywords(tree: &OntologyTree) -> Vec<LeafKeyword> {
    tree.leaf_keywords()
}

fn build_node(raw: RawNode, level: u8, seen: &mut HashSet<String>) -> Result<OntologyNode> {
    let name = raw.name.trim().to_string();
    if name.is_empty() {
        return Err(Error::validation(format!("empty node name at level {level}")));
    }
    if level > MAX_DEPTH {
        return Err(Error::validation(format!(
            "node {name:?} at level {level} exceeds the maximum depth of {MAX_DEPTH}"
        )));
    }
    if level > 1 && raw.children.is_empty() && !seen.insert(normalize_keyword(&name)) {
        return Err(Error::validation(format!("duplicate keyword {name:?}")));
    }
    let mut sibling_names = HashSet::new();
    let mut children = Vec::with_capacity(raw.children.len());
    for child in raw.children {
        let child = build_node(child, level + 1, seen)?;
        if !sibling_names.insert(normalize_keyword(&child.name)) {
            return Err(Error::validation(format!(
                "duplicate child {:?} under {name:?}",
                child.name
            )));
        }
        children.push(child);
    }
    Ok(OntologyNode {
        name,
        level,
        children,
    })
}

fn collect_leaves(node: &OntologyNode, path: &mut Vec<String>, out: &mut Vec<LeafKeyword>) {
    if node.is_leaf() {
        out.push(LeafKeyword {
            keyword: node.name.clone(),
            path: path.clone(),
        });
        return;
    }
    path.push(node.name.clone());
    for child in &node.children {
        collect_leaves(child, path, out);
    }
    path.pop();
}

fn to_raw(node: &OntologyNode) -> RawNode {
    RawNode {
        name: node.name.clone(),
        children: node.children.iter().map(to_raw).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> OntologyTree {
        parse_ontology(
            r#"{"name":"document","children":[
                {"name":"A","children":[{"name":"k1"}]},
                {"name":"B","children":[{"name":"k2","children":[]}]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn toy_tree_enumerates_in_preorder() {
        let leaves = toy().leaf_keywords();
        assert_eq!(
            leaves,
            vec![
                LeafKeyword {
                    keyword: "k1".into(),
                    path: vec!["document".into(), "A".into()]
                },
                LeafKeyword {
                    keyword: "k2".into(),
                    path: vec!["document".into(), "B".into()]
                },
            ]
        );
    }

    #[test]
    fn rootless_tree_rejected() {
        let err = parse_ontology(r#"{"name":"document","children":[]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn duplicate_keyword_across_branches_rejected() {
        let err = parse_ontology(
            r#"{"name":"document","children":[
                {"name":"A","children":[{"name":"invoice"}]},
                {"name":"B","children":[{"name":" Invoice "}]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(m) if m.contains("duplicate keyword")));
    }

    #[test]
    fn depth_five_rejected() {
        let err = parse_ontology(
            r#"{"name":"document","children":[{"name":"a","children":[
                {"name":"b","children":[{"name":"c","children":[{"name":"too deep"}]}]}]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(m) if m.contains("maximum depth")));
    }

    #[test]
    fn empty_name_rejected() {
        let err = parse_ontology(r#"{"name":"document","children":[{"name":"  "}]}"#).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn duplicate_siblings_rejected() {
        let err = parse_ontology(
            r#"{"name":"document","children":[
                {"name":"A","children":[{"name":"x"}]},
                {"name":"A","children":[{"name":"y"}]}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(m) if m.contains("duplicate child")));
    }

    #[test]
    fn single_leaf_path_is_short() {
        let tree = parse_ontology(r#"{"name":"document","children":[{"name":"receipt"}]}"#).unwrap();
        let leaves = tree.leaf_keywords();
        assert_eq!(leaves.len(), 1);
        assert!(leaves[0].path.len() <= 3);
    }

    #[test]
    fn default_ontology_has_all_distinct_keywords() {
        let tree = default_ontology();
        assert_eq!(tree.leaf_count(), 396);
        assert_eq!(tree.leaf_keywords().len(), 396);
        let groups: Vec<_> = tree.root().children.iter().map(|n| n.name.as_str()).collect();
        assert_eq!(groups, ["financial", "legal", "business", "education"]);
        assert!(tree.leaf_keywords().iter().all(|l| l.path.len() == 3));
    }

    #[test]
    fn serialize_round_trips() {
        let tree = default_ontology();
        assert_eq!(parse_ontology(&tree.to_json()).unwrap(), tree);
        let tree = toy();
        assert_eq!(parse_ontology(&tree.to_json()).unwrap(), tree);
    }
}
