//! Line-oriented text format for ensembles.
//!
//! ```text
//! flowcast-gbrt 1
//! base_score 412.5
//! learning_rate 0.03
//! n_features 7
//! trees 2
//! tree 0 3
//! 0 split 4 6.5 1 2
//! 1 leaf -12.25
//! 2 leaf 8
//! ...
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::boost::Ensemble;
use crate::error::{GbrtError, Result};
use crate::tree::{Node, Tree};

const MAGIC: &str = "flowcast-gbrt 1";

pub fn to_text(e: &Ensemble) -> String {
    let mut out = format!(
        "{MAGIC}\nbase_score {}\nlearning_rate {}\nn_features {}\ntrees {}\n",
        e.base_score,
        e.learning_rate,
        e.n_features,
        e.trees.len()
    );
    for (t, tree) in e.trees.iter().enumerate() {
        out.push_str(&format!("tree {t} {}\n", tree.nodes.len()));
        for (i, node) in tree.nodes.iter().enumerate() {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    out.push_str(&format!("{i} split {feature} {threshold} {left} {right}\n"))
                }
                Node::Leaf { weight } => out.push_str(&format!("{i} leaf {weight}\n")),
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        let (i, l) = self.inner.next().ok_or(GbrtError::Parse { line: self.line + 1, msg: "unexpected end".into() })?;
        self.line = i + 1;
        Ok(l.split_whitespace().collect())
    }

    fn err(&self, msg: impl Into<String>) -> GbrtError {
        GbrtError::Parse { line: self.line, msg: msg.into() }
    }

    fn field<T: FromStr>(&self, tok: Option<&&str>) -> Result<T> {
        tok.and_then(|t| t.parse().ok()).ok_or_else(|| self.err("malformed field"))
    }

    fn keyed<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let toks = self.next()?;
        if toks.len() != 2 || toks[0] != key {
            return Err(self.err(format!("expected `{key} <value>`")));
        }
        self.field(toks.get(1))
    }
}

pub fn from_text(text: &str) -> Result<Ensemble> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()?.join(" ") != MAGIC {
        return Err(lines.err("not a flowcast-gbrt model"));
    }
    let base_score = lines.keyed("base_score")?;
    let learning_rate = lines.keyed("learning_rate")?;
    let n_features: usize = lines.keyed("n_features")?;
    let n_trees: usize = lines.keyed("trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let head = lines.next()?;
        if head.len() != 3 || head[0] != "tree" || lines.field::<usize>(head.get(1))? != t {
            return Err(lines.err(format!("expected `tree {t} <nodes>`")));
        }
        let n_nodes: usize = lines.field(head.get(2))?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let toks = lines.next()?;
            if lines.field::<usize>(toks.first())? != i {
                return Err(lines.err("node ids must be consecutive"));
            }
            let node = match toks.get(1).copied() {
                Some("leaf") if toks.len() == 3 => Node::Leaf { weight: lines.field(toks.get(2))? },
                Some("split") if toks.len() == 6 => Node::Split {
                    feature: lines.field(toks.get(2))?,
                    threshold: lines.field(toks.get(3))?,
                    left: lines.field(toks.get(4))?,
                    right: lines.field(toks.get(5))?,
                },
                _ => return Err(lines.err("expected a leaf or split node")),
            };
            if let Node::Split { feature, left, right, .. } = node {
                if feature >= n_features || left <= i || right <= i || left >= n_nodes || right >= n_nodes {
                    return Err(lines.err("split references an invalid feature or child"));
                }
            }
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(lines.err("empty tree"));
        }
        trees.push(Tree { nodes });
    }
    Ok(Ensemble { base_score, learning_rate, n_features, trees })
}

pub fn save(e: &Ensemble, path: &Path) -> Result<()> {
    Ok(std::fs::write(path, to_text(e))?)
}

pub fn load(path: &Path) -> Result<Ensemble> {
    from_text(&std::fs::read_to_string(path)?)
}
