//! Labeled trees, paths, and their JSON form.
//!
//! Children are kept sorted by attribute index so equality and serialization
//! are canonical.

use std::collections::BTreeMap;
use std::fmt;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::schema::{AttrId, Schema, TokenId};

/// Sequence of attributes from the root to a node. Empty is the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(Vec<AttrId>);

impl Path {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn new(attrs: Vec<AttrId>) -> Self {
        Self(attrs)
    }

    pub fn attrs(&self) -> &[AttrId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, attr: AttrId) -> Path {
        let mut attrs = self.0.clone();
        attrs.push(attr);
        Path(attrs)
    }

    /// Root-side prefix of length `len`.
    pub fn prefix(&self, len: usize) -> Path {
        Path(self.0[..len].to_vec())
    }

    /// Parses comma-separated attribute names; the empty string is the root.
    pub fn parse(text: &str, schema: &Schema) -> Result<Path> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Path::root());
        }
        text.split(',')
            .map(|name| schema.require_attribute(name.trim()))
            .collect::<Result<Vec<_>>>()
            .map(Path)
    }

    pub fn display<'a>(&'a self, schema: &'a Schema) -> impl fmt::Display + 'a {
        PathDisplay { path: self, schema }
    }
}

struct PathDisplay<'a> {
    path: &'a Path,
    schema: &'a Schema,
}

impl fmt::Display for PathDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.path.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(self.schema.attribute_name(*a))?;
        }
        Ok(())
    }
}

/// A finite rooted tree with token-labeled nodes and attribute-labeled edges,
/// at most one child per attribute.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Tree {
    label: TokenId,
    children: Vec<(AttrId, Tree)>,
}

impl Tree {
    pub fn leaf(label: TokenId) -> Self {
        Self {
            label,
            children: Vec::new(),
        }
    }

    pub fn new(label: TokenId, children: impl IntoIterator<Item = (AttrId, Tree)>) -> Result<Self> {
        let mut children: Vec<(AttrId, Tree)> = children.into_iter().collect();
        children.sort_by_key(|(a, _)| *a);
        if let Some(w) = children.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateChild(w[0].0 .0));
        }
        Ok(Self { label, children })
    }

    /// A `next`-linked list `t1 -next-> t2 -next-> ...`. Panics on an empty slice.
    pub fn chain(tokens: &[TokenId], next: AttrId) -> Tree {
        let (last, rest) = tokens.split_last().expect("chain needs at least one token");
        rest.iter().rev().fold(Tree::leaf(*last), |tail, &t| Tree {
            label: t,
            children: vec![(next, tail)],
        })
    }

    pub fn label(&self) -> TokenId {
        self.label
    }

    pub fn children(&self) -> &[(AttrId, Tree)] {
        &self.children
    }

    pub fn child(&self, attr: AttrId) -> Option<&Tree> {
        self.children
            .binary_search_by_key(&attr, |(a, _)| *a)
            .ok()
            .map(|i| &self.children[i].1)
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|(_, c)| c.node_count())
            .sum::<usize>()
    }

    /// Longest root-to-node path length (0 for a single node).
    pub fn depth(&self) -> usize {
        self.children
            .iter()
            .map(|(_, c)| 1 + c.depth())
            .max()
            .unwrap_or(0)
    }

    pub fn subtree_at(&self, path: &Path) -> Option<&Tree> {
        path.attrs().iter().try_fold(self, |node, &a| node.child(a))
    }

    pub fn node_at(&self, path: &Path) -> Option<TokenId> {
        self.subtree_at(path).map(|t| t.label)
    }

    /// Preorder list of `(path, label)`, children visited in attribute order.
    pub fn nodes(&self) -> Vec<(Path, TokenId)> {
        let mut out = Vec::new();
        let mut stack = vec![(Path::root(), self)];
        while let Some((path, node)) = stack.pop() {
            out.push((path.clone(), node.label));
            for (a, c) in node.children.iter().rev() {
                stack.push((path.child(*a), c));
            }
        }
        out
    }

    /// Returns a new tree with `sub` hung under the node at `at` via `attr`.
    pub fn attach(&self, at: &Path, attr: AttrId, sub: Tree) -> Result<Tree> {
        fn go(node: &Tree, rest: &[AttrId], attr: AttrId, sub: Tree) -> Result<Tree> {
            match rest.split_first() {
                None => {
                    if node.child(attr).is_some() {
                        return Err(Error::DuplicateChild(attr.0));
                    }
                    let mut children = node.children.clone();
                    children.push((attr, sub));
                    Tree::new(node.label, children)
                }
                Some((head, tail)) => {
                    let mut children = node.children.clone();
                    let slot = children
                        .iter_mut()
                        .find(|(a, _)| a == head)
                        .ok_or_else(|| Error::InvalidInput("attach path does not exist".into()))?;
                    slot.1 = go(&slot.1, tail, attr, sub)?;
                    Ok(Tree {
                        label: node.label,
                        children,
                    })
                }
            }
        }
        go(self, at.attrs(), attr, sub)
    }

    /// Checks every label and edge index against `schema`.
    pub fn check_schema(&self, schema: &Schema) -> Result<()> {
        if !schema.contains_token(self.label) {
            return Err(Error::SchemaMismatch(format!(
                "{} outside schema of {} tokens",
                self.label,
                schema.token_count()
            )));
        }
        for (a, c) in &self.children {
            if !schema.contains_attribute(*a) {
                return Err(Error::SchemaMismatch(format!(
                    "{a} outside schema of {} attributes",
                    schema.attribute_count()
                )));
            }
            c.check_schema(schema)?;
        }
        Ok(())
    }

    pub fn to_json(&self, schema: &Schema) -> String {
        serde_json::to_string(&TreeDoc { tree: self, schema }).expect("tree serializes")
    }

    pub fn to_json_pretty(&self, schema: &Schema) -> String {
        serde_json::to_string_pretty(&TreeDoc { tree: self, schema }).expect("tree serializes")
    }

    pub fn from_json(text: &str, schema: &Schema) -> Result<Tree> {
        let raw: RawTree = serde_json::from_str(text)?;
        raw.bind(schema)
    }
}

/// Serializes a tree with names; children in schema attribute order.
struct TreeDoc<'a> {
    tree: &'a Tree,
    schema: &'a Schema,
}

struct ChildrenDoc<'a> {
    children: &'a [(AttrId, Tree)],
    schema: &'a Schema,
}

impl Serialize for TreeDoc<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(2))?;
        map.serialize_entry("label", self.schema.token_name(self.tree.label))?;
        map.serialize_entry(
            "children",
            &ChildrenDoc {
                children: &self.tree.children,
                schema: self.schema,
            },
        )?;
        map.end()
    }
}

impl Serialize for ChildrenDoc<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.children.len()))?;
        for (a, c) in self.children {
            map.serialize_entry(
                self.schema.attribute_name(*a),
                &TreeDoc {
                    tree: c,
                    schema: self.schema,
                },
            )?;
        }
        map.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    label: String,
    #[serde(default)]
    children: BTreeMap<String, RawTree>,
}

impl RawTree {
    fn bind(self, schema: &Schema) -> Result<Tree> {
        let label = schema.require_token(&self.label)?;
        let children = self
            .children
            .into_iter()
            .map(|(name, c)| Ok((schema.require_attribute(&name)?, c.bind(schema)?)))
            .collect::<Result<Vec<_>>>()?;
        Tree::new(label, children)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pet_schema() -> Schema {
        Schema::new(
            [
                "pet", "dog", "cat", "rex", "brown", "3", "name", "species", "color", "age",
                "owner", "person", "alice",
            ],
            ["name", "species", "color", "age", "owner"],
        )
        .unwrap()
    }

    /// A pet record: species, name, color, age, and an owner with a name.
    fn pet_tree(s: &Schema) -> Tree {
        let t = |n: &str| s.token(n).unwrap();
        let a = |n: &str| s.attribute(n).unwrap();
        let owner = Tree::new(t("person"), [(a("name"), Tree::leaf(t("alice")))]).unwrap();
        Tree::new(
            t("pet"),
            [
                (a("species"), Tree::leaf(t("dog"))),
                (a("name"), Tree::leaf(t("rex"))),
                (a("color"), Tree::leaf(t("brown"))),
                (a("age"), Tree::leaf(t("3"))),
                (a("owner"), owner),
            ],
        )
        .unwrap()
    }

    #[test]
    fn node_counts() {
        assert_eq!(Tree::leaf(TokenId(0)).node_count(), 1);
        let t = Tree::new(
            TokenId(0),
            [
                (AttrId(0), Tree::leaf(TokenId(1))),
                (AttrId(1), Tree::leaf(TokenId(2))),
            ],
        )
        .unwrap();
        assert_eq!(t.node_count(), 3);
        let s = pet_schema();
        assert_eq!(pet_tree(&s).node_count(), 7);
    }

    #[test]
    fn node_at_root_and_missing() {
        let t = Tree::leaf(TokenId(4));
        assert_eq!(t.node_at(&Path::root()), Some(TokenId(4)));
        assert_eq!(t.node_at(&Path::new(vec![AttrId(0)])), None);
        let s = pet_schema();
        let pet = pet_tree(&s);
        let p = Path::parse("owner,name", &s).unwrap();
        assert_eq!(pet.node_at(&p), s.token("alice"));
        assert_eq!(p.display(&s).to_string(), "owner,name");
    }

    #[test]
    fn duplicate_children_rejected() {
        let err = Tree::new(
            TokenId(0),
            [
                (AttrId(1), Tree::leaf(TokenId(0))),
                (AttrId(1), Tree::leaf(TokenId(1))),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateChild(1)));
    }

    #[test]
    fn attach_builds_new_tree() {
        let base = Tree::new(TokenId(0), [(AttrId(0), Tree::leaf(TokenId(1)))]).unwrap();
        let leaf_path = Path::new(vec![AttrId(0)]);
        let joined = base
            .attach(&leaf_path, AttrId(1), Tree::leaf(TokenId(2)))
            .unwrap();
        assert_eq!(joined.node_count(), 3);
        assert_eq!(base.node_count(), 2);
        assert_eq!(
            joined.node_at(&Path::new(vec![AttrId(0), AttrId(1)])),
            Some(TokenId(2))
        );
        assert!(base
            .attach(&Path::root(), AttrId(0), Tree::leaf(TokenId(3)))
            .is_err());
        assert!(base
            .attach(
                &Path::new(vec![AttrId(2)]),
                AttrId(0),
                Tree::leaf(TokenId(3))
            )
            .is_err());
    }

    #[test]
    fn chain_is_next_linked() {
        let t = Tree::chain(&[TokenId(3), TokenId(1), TokenId(2)], AttrId(0));
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.depth(), 2);
        assert_eq!(
            t.node_at(&Path::new(vec![AttrId(0), AttrId(0)])),
            Some(TokenId(2))
        );
    }

    #[test]
    fn json_shape_and_errors() {
        let s = pet_schema();
        let json = pet_tree(&s).to_json(&s);
        assert!(json.starts_with(r#"{"label":"pet","children":{"name":{"label":"rex""#));
        let leaf = Tree::from_json(r#"{"label":"dog"}"#, &s).unwrap();
        assert_eq!(leaf, Tree::leaf(s.token("dog").unwrap()));
        assert!(matches!(
            Tree::from_json(r#"{"label":"wolf"}"#, &s),
            Err(Error::UnknownToken(_))
        ));
        assert!(matches!(
            Tree::from_json(r#"{"label":"dog","children":{"tail":{"label":"dog"}}}"#, &s),
            Err(Error::UnknownAttribute(_))
        ));
    }

    #[test]
    fn schema_check_catches_out_of_range() {
        let s = Schema::generated(2, 1).unwrap();
        assert!(Tree::leaf(TokenId(2)).check_schema(&s).is_ok());
        assert!(Tree::leaf(TokenId(3)).check_schema(&s).is_err());
        let bad = Tree::new(TokenId(0), [(AttrId(1), Tree::leaf(TokenId(0)))]).unwrap();
        assert!(bad.check_schema(&s).is_err());
    }

    fn arb_tree(tokens: usize, attrs: usize) -> impl Strategy<Value = Tree> {
        let leaf = (0..tokens).prop_map(|t| Tree::leaf(TokenId(t)));
        leaf.prop_recursive(4, 24, attrs as u32, move |inner| {
            (
                0..tokens,
                proptest::collection::btree_map(0..attrs, inner, 0..=attrs),
            )
                .prop_map(|(label, kids)| {
                    Tree::new(
                        TokenId(label),
                        kids.into_iter().map(|(a, t)| (AttrId(a), t)),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn json_round_trip(t in arb_tree(6, 3)) {
            let s = Schema::generated(3, 3).unwrap();
            let back = Tree::from_json(&t.to_json(&s), &s).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn node_at_agrees_with_traversal(t in arb_tree(6, 3)) {
            let nodes = t.nodes();
            prop_assert_eq!(nodes.len(), t.node_count());
            for (path, label) in nodes {
                // independent walk down the child lists
                let mut cur = &t;
                for a in path.attrs() {
                    cur = &cur.children().iter().find(|(b, _)| b == a).unwrap().1;
                }
                prop_assert_eq!(cur.label(), label);
                prop_assert_eq!(t.node_at(&path), Some(label));
            }
        }
    }
}
