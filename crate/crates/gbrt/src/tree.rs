use crate::error::Result;
use crate::matrix::SortedColumns;
use crate::objective::leaf_weight;
use crate::split::{best_split, SplitParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { weight: f64 },
}

/// Regression tree stored as a node array; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Self { nodes: vec![Node::Leaf { weight }] }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { weight } => return weight,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] < threshold { left } else { right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub split: SplitParams,
}

/// Greedy top-down growth on `rows`, splitting only on `features`.
pub fn grow_tree(
    cols: &SortedColumns,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    features: &[usize],
    p: &TreeParams,
) -> Result<Tree> {
    let mut tree = Tree { nodes: Vec::new() };
    grow(cols, rows.to_vec(), g, h, features, p, 0, &mut tree)?;
    Ok(tree)
}

#[allow(clippy::too_many_arguments)]
fn grow(
    cols: &SortedColumns,
    rows: Vec<usize>,
    g: &[f64],
    h: &[f64],
    features: &[usize],
    p: &TreeParams,
    depth: usize,
    tree: &mut Tree,
) -> Result<usize> {
    let id = tree.nodes.len();
    tree.nodes.push(Node::Leaf { weight: 0.0 });
    let split = if depth < p.max_depth { best_split(cols, &rows, g, h, features, &p.split) } else { None };
    match split {
        None => {
            let (gs, hs) = rows.iter().fold((0.0, 0.0), |(a, b), &i| (a + g[i], b + h[i]));
            tree.nodes[id] = Node::Leaf { weight: leaf_weight(gs, hs, p.split.lambda)? };
        }
        Some(s) => {
            let rank = &cols.rank[s.feature];
            let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| rank[i] < s.left_rank_end);
            let left = grow(cols, l, g, h, features, p, depth + 1, tree)?;
            let right = grow(cols, r, g, h, features, p, depth + 1, tree)?;
            tree.nodes[id] = Node::Split { feature: s.feature, threshold: s.threshold, left, right };
        }
    }
    Ok(id)
}
