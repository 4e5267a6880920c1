use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LabelId;
use crate::error::{Error, Result};

/// A node of the label hierarchy. Children are the labels offered once the
/// node itself has been annotated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelNode {
    pub id: LabelId,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub children: Vec<LabelNode>,
}

/// Validated label tree: ids are unique and the hierarchy is strict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaFile", into = "LabelNode")]
pub struct LabelSchema {
    root: LabelNode,
}

/// Either the nested tree or a flat node list with parent references.
#[derive(Deserialize)]
#[serde(untagged)]
enum SchemaFile {
    Flat { nodes: Vec<FlatNode> },
    Nested(LabelNode),
}

#[derive(Deserialize)]
struct FlatNode {
    id: LabelId,
    #[serde(default)]
    name: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    parent: Option<LabelId>,
}

impl TryFrom<SchemaFile> for LabelSchema {
    type Error = Error;

    fn try_from(file: SchemaFile) -> Result<Self> {
        match file {
            SchemaFile::Nested(root) => LabelSchema::new(root),
            SchemaFile::Flat { nodes } => LabelSchema::from_flat(nodes),
        }
    }
}

impl From<LabelSchema> for LabelNode {
    fn from(s: LabelSchema) -> Self {
        s.root
    }
}

impl LabelSchema {
    pub fn new(root: LabelNode) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut ancestors = Vec::new();
        check_node(&root, &mut seen, &mut ancestors)?;
        Ok(LabelSchema { root })
    }

    fn from_flat(nodes: Vec<FlatNode>) -> Result<Self> {
        let mut ids = HashSet::new();
        for n in &nodes {
            if !ids.insert(n.id.clone()) {
                return Err(Error::Schema(format!("duplicate label id `{}`", n.id)));
            }
        }
        for n in &nodes {
            if let Some(p) = &n.parent {
                if !ids.contains(p) {
                    return Err(Error::Schema(format!(
                        "label `{}` references unknown parent `{p}`",
                        n.id
                    )));
                }
                if p == &n.id {
                    return Err(Error::Schema(format!("label `{}` is its own parent", n.id)));
                }
            }
        }
        let roots: Vec<&FlatNode> = nodes.iter().filter(|n| n.parent.is_none()).collect();
        let root = match roots.as_slice() {
            [root] => *root,
            [] => return Err(Error::Schema("no root label (cycle through every node)".into())),
            _ => {
                return Err(Error::Schema(format!(
                    "multiple root labels: {}",
                    roots.iter().map(|n| n.id.as_str()).collect::<Vec<_>>().join(", ")
                )))
            }
        };
        fn build(node: &FlatNode, nodes: &[FlatNode], placed: &mut usize) -> LabelNode {
            *placed += 1;
            LabelNode {
                id: node.id.clone(),
                name: node.name.clone(),
                description: node.description.clone(),
                children: nodes
                    .iter()
                    .filter(|n| n.parent.as_ref() == Some(&node.id))
                    .map(|n| build(n, nodes, placed))
                    .collect(),
            }
        }
        let mut placed = 0;
        let tree = build(root, &nodes, &mut placed);
        if placed != nodes.len() {
            return Err(Error::Schema("labels unreachable from the root form a cycle".into()));
        }
        LabelSchema::new(tree)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        serde_json::from_str::<SchemaFile>(raw)
            .map_err(|e| Error::Schema(e.to_string()))?
            .try_into()
    }

    pub fn root(&self) -> &LabelNode {
        &self.root
    }

    pub fn len(&self) -> usize {
        fn count(n: &LabelNode) -> usize {
            1 + n.children.iter().map(count).sum::<usize>()
        }
        count(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of levels; a single node has depth 1.
    pub fn depth(&self) -> usize {
        fn depth(n: &LabelNode) -> usize {
            1 + n.children.iter().map(depth).max().unwrap_or(0)
        }
        depth(&self.root)
    }

    pub fn find(&self, id: &LabelId) -> Option<&LabelNode> {
        fn find<'a>(n: &'a LabelNode, id: &LabelId) -> Option<&'a LabelNode> {
            if &n.id == id {
                return Some(n);
            }
            n.children.iter().find_map(|c| find(c, id))
        }
        find(&self.root, id)
    }

    pub fn contains(&self, id: &LabelId) -> bool {
        self.find(id).is_some()
    }

    pub fn children_of(&self, id: &LabelId) -> Vec<LabelId> {
        self.find(id)
            .map(|n| n.children.iter().map(|c| c.id.clone()).collect())
            .unwrap_or_default()
    }

    /// Labels offered by a root annotation task. The root node acts as a
    /// container, so its children are offered; a childless root offers itself.
    pub fn top_level(&self) -> Vec<LabelId> {
        if self.root.children.is_empty() {
            vec![self.root.id.clone()]
        } else {
            self.root.children.iter().map(|c| c.id.clone()).collect()
        }
    }

    /// Depth of a label, root = 0.
    pub fn depth_of(&self, id: &LabelId) -> Option<usize> {
        fn walk(n: &LabelNode, id: &LabelId, d: usize) -> Option<usize> {
            if &n.id == id {
                return Some(d);
            }
            n.children.iter().find_map(|c| walk(c, id, d + 1))
        }
        walk(&self.root, id, 0)
    }

    pub fn labels(&self) -> Vec<LabelId> {
        fn collect(n: &LabelNode, out: &mut Vec<LabelId>) {
            out.push(n.id.clone());
            n.children.iter().for_each(|c| collect(c, out));
        }
        let mut out = Vec::new();
        collect(&self.root, &mut out);
        out
    }
}

fn check_node(node: &LabelNode, seen: &mut HashSet<LabelId>, ancestors: &mut Vec<LabelId>) -> Result<()> {
    if ancestors.contains(&node.id) {
        return Err(Error::Schema(format!(
            "cycle: label `{}` appears beneath itself",
            node.id
        )));
    }
    if !seen.insert(node.id.clone()) {
        return Err(Error::Schema(format!("duplicate label id `{}`", node.id)));
    }
    ancestors.push(node.id.clone());
    for child in &node.children {
        check_node(child, seen, ancestors)?;
    }
    ancestors.pop();
    Ok(())
}

pub fn load_label_schema(path: impl AsRef<Path>) -> Result<LabelSchema> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    LabelSchema::from_json(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rights::rights_schema;

    #[test]
    fn rights_schema_from_json() {
        let json = serde_json::to_string(&rights_schema()).unwrap();
        let schema = LabelSchema::from_json(&json).unwrap();
        assert_eq!(schema.len(), 6);
        assert_eq!(schema.depth(), 2);
        assert_eq!(schema.top_level().len(), 5);
        assert_eq!(schema, rights_schema());
    }

    #[test]
    fn single_node_schema() {
        let schema = LabelSchema::from_json(r#"{"id":"only","name":"Only","description":"d","children":[]}"#).unwrap();
        assert_eq!(schema.len(), 1);
        assert!(schema.children_of(&LabelId::new("only")).is_empty());
        assert_eq!(schema.top_level(), vec![LabelId::new("only")]);
    }

    #[test]
    fn self_child_is_cycle() {
        let err = LabelSchema::from_json(r#"{"id":"a","children":[{"id":"a"}]}"#).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("cycle")), "{err}");
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = LabelSchema::from_json(r#"{"id":"r","children":[{"id":"a"},{"id":"b","children":[{"id":"a"}]}]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("duplicate")), "{err}");
    }

    #[test]
    fn flat_schema_with_unknown_parent() {
        let err = LabelSchema::from_json(r#"{"nodes":[{"id":"r"},{"id":"a","parent":"missing"}]}"#).unwrap_err();
        assert!(
            matches!(err, Error::Schema(ref m) if m.contains("unknown parent")),
            "{err}"
        );
    }

    #[test]
    fn flat_schema_cycle() {
        let err = LabelSchema::from_json(r#"{"nodes":[{"id":"r"},{"id":"a","parent":"b"},{"id":"b","parent":"a"}]}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("cycle")), "{err}");
    }

    #[test]
    fn flat_schema_builds_tree() {
        let schema =
            LabelSchema::from_json(r#"{"nodes":[{"id":"r"},{"id":"a","parent":"r"},{"id":"b","parent":"a"}]}"#)
                .unwrap();
        assert_eq!(schema.depth(), 3);
        assert_eq!(schema.depth_of(&LabelId::new("b")), Some(2));
        assert_eq!(schema.children_of(&LabelId::new("a")), vec![LabelId::new("b")]);
    }
}
