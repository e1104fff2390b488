use serde::{Deserialize, Serialize};

use super::features::FeatureMatrix;
use super::split::{best_split, Branch, NodeRows, Split, SplitRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
        missing: usize,
        improvement: f64,
    },
}

/// A ternary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf_for(&self, x: &FeatureMatrix, row: usize) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                    missing,
                    ..
                } => {
                    i = match rule.route(x.columns[*feature][row]) {
                        Branch::Left => *left,
                        Branch::Right => *right,
                        Branch::Missing => *missing,
                    };
                }
            }
        }
    }

    pub fn predict_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        match self.nodes[self.leaf_for(x, row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn n_splits(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Split { .. }))
            .count()
    }

    pub fn max_abs_leaf(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { value } => Some(value.abs()),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    /// Checks the structural invariants: every split has three in-range
    /// children and every node except the root has exactly one parent.
    pub fn is_well_formed(&self) -> bool {
        let mut parents = vec![0usize; self.nodes.len()];
        for n in &self.nodes {
            if let Node::Split {
                left,
                right,
                missing,
                ..
            } = n
            {
                for &c in [left, right, missing] {
                    if c == 0 || c >= self.nodes.len() {
                        return false;
                    }
                    parents[c] += 1;
                }
            }
        }
        parents.iter().skip(1).all(|&p| p == 1)
    }
}

/// Grows a tree best-first: the leaf whose best split reduces squared error the
/// most is split next, up to `max_splits` splits. The structure is chosen on
/// `bag` rows; leaf values are then the mean residual of all `fit_rows` landing
/// in each leaf (a leaf no fitting row reaches inherits its parent's value).
pub fn grow_tree(
    x: &FeatureMatrix,
    resid: &[f64],
    order: &[Vec<u32>],
    bag: Vec<u32>,
    fit_rows: &[u32],
    max_splits: usize,
    min_obs_leaf: usize,
) -> RegressionTree {
    struct Pending {
        node: usize,
        rows: NodeRows,
        split: Option<Split>,
    }
    let n = x.n_rows;
    let mut side = vec![0u8; n];
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut parent = vec![usize::MAX];
    let root = NodeRows::new(x, order, bag, n);
    let can_split = |r: &NodeRows| r.len() >= 2 * min_obs_leaf;
    let root_split = if can_split(&root) {
        best_split(x, resid, &root, min_obs_leaf)
    } else {
        None
    };
    let mut open = vec![Pending {
        node: 0,
        rows: root,
        split: root_split,
    }];

    for _ in 0..max_splits {
        // Largest improvement; ties keep the earliest-created node.
        let pick = open
            .iter()
            .enumerate()
            .filter(|(_, p)| p.split.is_some())
            .fold(None::<(usize, f64)>, |acc, (i, p)| {
                let g = p.split.as_ref().unwrap().improvement;
                match acc {
                    Some((_, bg)) if bg >= g => acc,
                    _ => Some((i, g)),
                }
            });
        let Some((i, _)) = pick else { break };
        let p = open.swap_remove(i);
        let split = p.split.unwrap();
        let children = p.rows.partition(x, split.feature, &split.rule, &mut side);
        let base = nodes.len();
        nodes[p.node] = Node::Split {
            feature: split.feature,
            rule: split.rule,
            left: base,
            right: base + 1,
            missing: base + 2,
            improvement: split.improvement,
        };
        for (k, rows) in children.into_iter().enumerate() {
            nodes.push(Node::Leaf { value: 0.0 });
            parent.push(p.node);
            let s = if can_split(&rows) {
                best_split(x, resid, &rows, min_obs_leaf)
            } else {
                None
            };
            open.push(Pending {
                node: base + k,
                rows,
                split: s,
            });
        }
        // Keep creation order so tie-breaking among open leaves is stable.
        open.sort_by_key(|p| p.node);
    }

    let mut tree = RegressionTree { nodes };
    let mut sum = vec![0.0; tree.nodes.len()];
    let mut cnt = vec![0usize; tree.nodes.len()];
    for &r in fit_rows {
        let mut i = 0;
        loop {
            sum[i] += resid[r as usize];
            cnt[i] += 1;
            match &tree.nodes[i] {
                Node::Leaf { .. } => break,
                Node::Split {
                    feature,
                    rule,
                    left,
                    right,
                    missing,
                    ..
                } => {
                    i = match rule.route(x.columns[*feature][r as usize]) {
                        Branch::Left => *left,
                        Branch::Right => *right,
                        Branch::Missing => *missing,
                    };
                }
            }
        }
    }
    // Children always have larger indices than parents.
    let mut mean = vec![0.0; tree.nodes.len()];
    for i in 0..tree.nodes.len() {
        mean[i] = if cnt[i] > 0 {
            sum[i] / cnt[i] as f64
        } else if i > 0 {
            mean[parent[i]]
        } else {
            0.0
        };
        if let Node::Leaf { value } = &mut tree.nodes[i] {
            *value = mean[i];
        }
    }
    tree
}
