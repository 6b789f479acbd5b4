//! Single decision trees: recursive greedy splitting for Gini
//! classification and Newton-style gradient boosting.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::trees::{FeatureKind, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Left if `x <= threshold`.
    Threshold(f64),
    /// Left if the category index equals this one.
    Category(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// Class-1 probability for classification; additive weight for
        /// boosting.
        score: f64,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn evaluate(&self, row: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { score } => *score,
            TreeNode::Split {
                feature,
                rule,
                left,
                right,
            } => {
                let goes_left = match rule {
                    SplitRule::Threshold(t) => row[*feature] <= *t,
                    SplitRule::Category(c) => row[*feature] == *c as f64,
                };
                if goes_left {
                    left.evaluate(row)
                } else {
                    right.evaluate(row)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Gini impurity of a two-class count pair.
pub fn gini_impurity(n0: f64, n1: f64) -> f64 {
    let n = n0 + n1;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = n0 / n;
    let p1 = n1 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Candidate rules for one feature over the given node rows: midpoints of
/// sorted unique values for numeric features, one-vs-rest per category
/// otherwise.
fn candidate_rules(
    x: &FeatureMatrix,
    indices: &[usize],
    feature: usize,
) -> Vec<SplitRule> {
    match x.kinds[feature] {
        FeatureKind::Numeric => {
            let mut values: Vec<f64> = indices.iter().map(|&i| x.rows[i][feature]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            values
                .windows(2)
                .map(|w| SplitRule::Threshold(0.5 * (w[0] + w[1])))
                .collect()
        }
        FeatureKind::Categorical { arity } => {
            let mut present = vec![false; arity];
            for &i in indices {
                present[x.rows[i][feature] as usize] = true;
            }
            (0..arity)
                .filter(|c| present[*c])
                .map(SplitRule::Category)
                .collect()
        }
    }
}

fn rule_goes_left(x: &FeatureMatrix, row: usize, feature: usize, rule: &SplitRule) -> bool {
    match rule {
        SplitRule::Threshold(t) => x.rows[row][feature] <= *t,
        SplitRule::Category(c) => x.rows[row][feature] == *c as f64,
    }
}

fn feature_subset(
    n_features: usize,
    mtry: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> Vec<usize> {
    match (mtry, rng) {
        (Some(m), Some(rng)) if m < n_features => {
            let mut picked: Vec<usize> = sample(rng, n_features, m).into_iter().collect();
            picked.sort_unstable();
            picked
        }
        _ => (0..n_features).collect(),
    }
}

/// Greedy Gini tree. `mtry` features are re-drawn at every split when an RNG
/// is supplied; splits are accepted only if they strictly reduce impurity.
pub fn fit_classification_tree(
    x: &FeatureMatrix,
    y: &[u8],
    indices: &[usize],
    max_depth: Option<usize>,
    mtry: Option<usize>,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> TreeNode {
    let n1: f64 = indices.iter().map(|&i| f64::from(y[i])).sum();
    let n0 = indices.len() as f64 - n1;
    let leaf = TreeNode::Leaf {
        score: if indices.is_empty() { 0.5 } else { n1 / (n0 + n1) },
    };
    if n0 == 0.0 || n1 == 0.0 || max_depth == Some(0) {
        return leaf;
    }

    let parent = gini_impurity(n0, n1) * indices.len() as f64;
    let features = feature_subset(x.n_features(), mtry, rng.as_deref_mut());
    let mut best: Option<(f64, usize, SplitRule)> = None;
    for &f in &features {
        for rule in candidate_rules(x, indices, f) {
            let mut l = (0.0, 0.0);
            let mut r = (0.0, 0.0);
            for &i in indices {
                let side = if rule_goes_left(x, i, f, &rule) { &mut l } else { &mut r };
                if y[i] == 1 {
                    side.1 += 1.0;
                } else {
                    side.0 += 1.0;
                }
            }
            if l.0 + l.1 == 0.0 || r.0 + r.1 == 0.0 {
                continue;
            }
            let weighted = gini_impurity(l.0, l.1) * (l.0 + l.1)
                + gini_impurity(r.0, r.1) * (r.0 + r.1);
            let gain = parent - weighted;
            if gain > 1e-12 && best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
                best = Some((gain, f, rule));
            }
        }
    }

    let Some((_, feature, rule)) = best else {
        return leaf;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| rule_goes_left(x, i, feature, &rule));
    let child_depth = max_depth.map(|d| d - 1);
    TreeNode::Split {
        feature,
        rule,
        left: Box::new(fit_classification_tree(
            x, y, &left_idx, child_depth, mtry, rng,
        )),
        right: Box::new(fit_classification_tree(
            x, y, &right_idx, child_depth, mtry, rng,
        )),
    }
}

/// Newton-boosting regression tree on gradient/hessian pairs with an L2
/// weight penalty of 1, XGBoost-style.
pub fn fit_gradient_tree(
    x: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    indices: &[usize],
    features: &[usize],
    max_depth: usize,
    min_child_weight: f64,
) -> TreeNode {
    const LAMBDA: f64 = 1.0;
    let g: f64 = indices.iter().map(|&i| grad[i]).sum();
    let h: f64 = indices.iter().map(|&i| hess[i]).sum();
    let leaf = TreeNode::Leaf {
        score: -g / (h + LAMBDA),
    };
    if max_depth == 0 || indices.len() < 2 {
        return leaf;
    }

    let parent_score = g * g / (h + LAMBDA);
    let mut best: Option<(f64, usize, SplitRule)> = None;
    for &f in features {
        for rule in candidate_rules(x, indices, f) {
            let mut gl = 0.0;
            let mut hl = 0.0;
            for &i in indices {
                if rule_goes_left(x, i, f, &rule) {
                    gl += grad[i];
                    hl += hess[i];
                }
            }
            let gr = g - gl;
            let hr = h - hl;
            if hl < min_child_weight || hr < min_child_weight {
                continue;
            }
            let gain =
                0.5 * (gl * gl / (hl + LAMBDA) + gr * gr / (hr + LAMBDA) - parent_score);
            if gain > 1e-12 && best.as_ref().is_none_or(|(bg, _, _)| gain > *bg) {
                best = Some((gain, f, rule));
            }
        }
    }

    let Some((_, feature, rule)) = best else {
        return leaf;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| rule_goes_left(x, i, feature, &rule));
    TreeNode::Split {
        feature,
        rule,
        left: Box::new(fit_gradient_tree(
            x,
            grad,
            hess,
            &left_idx,
            features,
            max_depth - 1,
            min_child_weight,
        )),
        right: Box::new(fit_gradient_tree(
            x,
            grad,
            hess,
            &right_idx,
            features,
            max_depth - 1,
            min_child_weight,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gini_formula() {
        assert_eq!(gini_impurity(10.0, 0.0), 0.0);
        assert_eq!(gini_impurity(0.0, 7.0), 0.0);
        assert_eq!(gini_impurity(5.0, 5.0), 0.5);
    }

    #[test]
    fn splits_never_increase_impurity() {
        // The acceptance rule requires strictly positive gain, so every
        // internal node's children have lower weighted impurity.
        let x = FeatureMatrix {
            kinds: vec![FeatureKind::Numeric, FeatureKind::Categorical { arity: 3 }],
            rows: (0..40)
                .map(|i| vec![(i % 7) as f64, (i % 3) as f64])
                .collect(),
        };
        let y: Vec<u8> = (0..40).map(|i| u8::from(i % 7 < 3)).collect();
        let indices: Vec<usize> = (0..40).collect();
        let tree = fit_classification_tree(&x, &y, &indices, None, None, &mut None);
        fn check(node: &TreeNode, x: &FeatureMatrix, y: &[u8], indices: &[usize]) {
            if let TreeNode::Split {
                feature,
                rule,
                left,
                right,
            } = node
            {
                let (li, ri): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| super::rule_goes_left(x, i, *feature, rule));
                let count = |idx: &[usize]| {
                    let n1: f64 = idx.iter().map(|&i| f64::from(y[i])).sum();
                    (idx.len() as f64 - n1, n1)
                };
                let (p0, p1) = count(indices);
                let (l0, l1) = count(&li);
                let (r0, r1) = count(&ri);
                let parent = gini_impurity(p0, p1) * indices.len() as f64;
                let children =
                    gini_impurity(l0, l1) * li.len() as f64 + gini_impurity(r0, r1) * ri.len() as f64;
                assert!(children < parent + 1e-12);
                check(left, x, y, &li);
                check(right, x, y, &ri);
            }
        }
        check(&tree, &x, &y, &indices);
    }
}
