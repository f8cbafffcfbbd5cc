//! Interpretable CART trees over the 25 diagnostic answers.
//!
//! Every split tests one question at the fixed threshold 0.5, so with the
//! default encoding (Yes 1.0, Not Sure 0.5, No 0.0) the left branch holds
//! No and Not Sure answers and the right branch holds Yes.

mod cv;

use std::fmt;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consensus::Driver;
use crate::corpus::Label;
use crate::parser::{Answer, Answers, QUESTION_COUNT};

pub use cv::{fold_assignments, stratified_cv, CvReport, FoldReport, MetricSummary};

/// Split threshold used by every internal node.
pub const SPLIT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("empty dataset")]
    Empty,
    #[error("{features} feature vectors but {targets} targets")]
    LengthMismatch { features: usize, targets: usize },
    #[error("feature vector {index} has {len} values, expected 25")]
    FeatureLength { index: usize, len: usize },
    #[error("feature vector {index}: Q{question} = {value} is not 0, 0.5 or 1")]
    InvalidValue { index: usize, question: u8, value: f64 },
    #[error("class {label} has {count} members, fewer than k = {k}")]
    TooFewInClass { label: Label, count: usize, k: usize },
    #[error("k must be at least 2, got {0}")]
    InvalidFolds(usize),
}

/// How a Not Sure answer is encoded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotSureEncoding {
    /// 0.5, which falls on the `<= 0.5` side with No.
    #[default]
    Half,
    /// Same as No.
    AsNo,
}

/// Which label a tree learns to predict.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeTarget {
    /// Human consensus label.
    #[default]
    Human,
    /// The model's own binary prediction.
    Model,
}

impl TreeTarget {
    pub fn as_str(self) -> &'static str {
        match self {
            TreeTarget::Human => "human",
            TreeTarget::Model => "model",
        }
    }
}

impl std::str::FromStr for TreeTarget {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "human" => Ok(TreeTarget::Human),
            "model" => Ok(TreeTarget::Model),
            other => Err(format!("unknown tree target `{other}` (expected human or model)")),
        }
    }
}

/// Encoded answers, index 0 holding Q1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; QUESTION_COUNT]);

impl FeatureVector {
    pub fn from_answers(answers: &Answers, encoding: NotSureEncoding) -> Self {
        FeatureVector(answers.0.map(|a| match a {
            Answer::Yes => 1.0,
            Answer::No => 0.0,
            Answer::NotSure => match encoding {
                NotSureEncoding::Half => 0.5,
                NotSureEncoding::AsNo => 0.0,
            },
        }))
    }

    pub fn from_slice(index: usize, values: &[f64]) -> Result<Self, TreeError> {
        let arr: [f64; QUESTION_COUNT] = values
            .try_into()
            .map_err(|_| TreeError::FeatureLength { index, len: values.len() })?;
        if let Some(q) = arr.iter().position(|v| ![0.0, 0.5, 1.0].contains(v)) {
            return Err(TreeError::InvalidValue { index, question: q as u8 + 1, value: arr[q] });
        }
        Ok(FeatureVector(arr))
    }

    /// Value for question `q` (1-based).
    pub fn question(&self, q: u8) -> f64 {
        self.0[q as usize - 1]
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub complex: usize,
    pub not_complex: usize,
}

impl ClassCounts {
    fn of(targets: &[Label], idx: &[usize]) -> Self {
        let complex = idx.iter().filter(|&&i| targets[i] == Label::Complex).count();
        ClassCounts { complex, not_complex: idx.len() - complex }
    }

    pub fn total(&self) -> usize {
        self.complex + self.not_complex
    }

    /// Binary Gini impurity, in [0, 0.5].
    pub fn gini(&self) -> f64 {
        let n = self.total();
        if n == 0 {
            return 0.0;
        }
        let p = self.complex as f64 / n as f64;
        2.0 * p * (1.0 - p)
    }

    /// Majority class; ties go to Complex.
    pub fn majority(&self) -> Label {
        if self.complex >= self.not_complex {
            Label::Complex
        } else {
            Label::NotComplex
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        /// 1-based question number.
        question: u8,
        threshold: f64,
        counts: ClassCounts,
        impurity: f64,
        /// `value <= threshold`
        left: Box<TreeNode>,
        /// `value > threshold`
        right: Box<TreeNode>,
    },
    Leaf {
        label: Label,
        counts: ClassCounts,
        impurity: f64,
    },
}

impl TreeNode {
    pub fn counts(&self) -> ClassCounts {
        match self {
            TreeNode::Internal { counts, .. } | TreeNode::Leaf { counts, .. } => *counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.internal_count() + right.internal_count(),
        }
    }

    /// Distinct questions tested anywhere in the tree, ascending.
    pub fn questions_used(&self) -> Vec<u8> {
        fn walk(node: &TreeNode, out: &mut Vec<u8>) {
            if let TreeNode::Internal { question, left, right, .. } = node {
                out.push(*question);
                walk(left, out);
                walk(right, out);
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Recorded for provenance; greedy CART with index tie-breaking does
    /// not consume randomness.
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: 3, min_samples_leaf: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub params: TreeParams,
    pub n_samples: usize,
}

struct SplitChoice {
    question_index: usize,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn best_split(
    features: &[FeatureVector],
    targets: &[Label],
    idx: &[usize],
    parent_impurity: f64,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len() as f64;
    let mut best: Option<(f64, usize)> = None;
    for f in 0..QUESTION_COUNT {
        let mut left = ClassCounts::default();
        let mut right = ClassCounts::default();
        for &i in idx {
            let side = if features[i].0[f] <= SPLIT_THRESHOLD { &mut left } else { &mut right };
            match targets[i] {
                Label::Complex => side.complex += 1,
                Label::NotComplex => side.not_complex += 1,
            }
        }
        let min_side = min_leaf.max(1);
        if left.total() < min_side || right.total() < min_side {
            continue;
        }
        let weighted =
            (left.total() as f64 * left.gini() + right.total() as f64 * right.gini()) / n;
        // strict improvement keeps the lowest feature index on ties
        if best.is_none_or(|(b, _)| weighted < b - 1e-12) {
            best = Some((weighted, f));
        }
    }
    let (weighted, f) = best?;
    if parent_impurity - weighted <= 1e-12 {
        return None;
    }
    let (left, right) = idx.iter().partition(|&&i| features[i].0[f] <= SPLIT_THRESHOLD);
    Some(SplitChoice { question_index: f, left, right })
}

fn grow(
    features: &[FeatureVector],
    targets: &[Label],
    idx: &[usize],
    depth: usize,
    params: &TreeParams,
) -> TreeNode {
    let counts = ClassCounts::of(targets, idx);
    let impurity = counts.gini();
    let leaf = || TreeNode::Leaf { label: counts.majority(), counts, impurity };
    if depth >= params.max_depth || impurity == 0.0 {
        return leaf();
    }
    match best_split(features, targets, idx, impurity, params.min_samples_leaf) {
        None => leaf(),
        Some(split) => TreeNode::Internal {
            question: split.question_index as u8 + 1,
            threshold: SPLIT_THRESHOLD,
            counts,
            impurity,
            left: Box::new(grow(features, targets, &split.left, depth + 1, params)),
            right: Box::new(grow(features, targets, &split.right, depth + 1, params)),
        },
    }
}

/// Greedy CART on weighted Gini impurity.
///
/// A node becomes a leaf at `max_depth`, when pure, or when no split leaves
/// `min_samples_leaf` samples on both sides while lowering impurity. Ties on
/// impurity go to the lowest question number.
pub fn train(
    features: &[FeatureVector],
    targets: &[Label],
    params: TreeParams,
) -> Result<DecisionTree, TreeError> {
    if features.len() != targets.len() {
        return Err(TreeError::LengthMismatch { features: features.len(), targets: targets.len() });
    }
    if features.is_empty() {
        return Err(TreeError::Empty);
    }
    let idx: Vec<usize> = (0..features.len()).collect();
    Ok(DecisionTree {
        root: grow(features, targets, &idx, 0, &params),
        params,
        n_samples: features.len(),
    })
}

/// Root-to-leaf descent.
pub fn predict(tree: &DecisionTree, x: &FeatureVector) -> Label {
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Leaf { label, .. } => return *label,
            TreeNode::Internal { question, threshold, left, right, .. } => {
                node = if x.question(*question) <= *threshold { left } else { right };
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub question: u8,
    pub op: Comparison,
    pub threshold: f64,
}

impl Condition {
    pub fn holds(&self, x: &FeatureVector) -> bool {
        let v = x.question(self.question);
        match self.op {
            Comparison::AtMost => v <= self.threshold,
            Comparison::Above => v > self.threshold,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            Comparison::AtMost => "\u{2264}",
            Comparison::Above => ">",
        };
        write!(f, "Q{} {op} {}", self.question, self.threshold)
    }
}

/// Conjunction of conditions leading to one leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub label: Label,
    /// Training samples reaching the leaf.
    pub support: usize,
    pub counts: ClassCounts,
}

impl Rule {
    pub fn matches(&self, x: &FeatureVector) -> bool {
        self.conditions.iter().all(|c| c.holds(x))
    }

    /// `Q7 ≤ 0.5 ∧ Q2 ≤ 0.5`; an empty conjunction renders as `(always)`.
    pub fn condition_text(&self) -> String {
        if self.conditions.is_empty() {
            return "(always)".to_string();
        }
        self.conditions.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" \u{2227} ")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} \u{2192} {}", self.condition_text(), self.label)
    }
}

/// One rule per leaf, left-to-right.
pub fn extract_rules(tree: &DecisionTree) -> Vec<Rule> {
    fn walk(node: &TreeNode, path: &mut Vec<Condition>, out: &mut Vec<Rule>) {
        match node {
            TreeNode::Leaf { label, counts, .. } => out.push(Rule {
                conditions: path.clone(),
                label: *label,
                support: counts.total(),
                counts: *counts,
            }),
            TreeNode::Internal { question, threshold, left, right, .. } => {
                for (op, child) in [(Comparison::AtMost, left), (Comparison::Above, right)] {
                    path.push(Condition { question: *question, op, threshold: *threshold });
                    walk(child, path, out);
                    path.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, &mut Vec::new(), &mut out);
    out
}

/// Plain-text rule table: path number, rule, predicted class, support.
pub fn render_rules_table(rules: &[Rule]) -> String {
    let texts: Vec<String> = rules.iter().map(|r| r.condition_text()).collect();
    let width = texts.iter().map(|t| t.chars().count()).max().unwrap_or(0).max("Decision Rule".len());
    let mut out = format!("{:<6}{:<width$}  {:<15}{:>8}\n", "Path", "Decision Rule", "Predicted Class", "Support");
    for (i, (rule, text)) in rules.iter().zip(&texts).enumerate() {
        let pad = width - text.chars().count();
        let class = rule.label.display_name();
        out.push_str(&format!("{:<6}{text}{}  {:<15}{:>8}\n", i + 1, " ".repeat(pad), class, rule.support));
    }
    out
}

/// Normalized Gini importance per question, index 0 holding Q1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector(pub [f64; QUESTION_COUNT]);

impl ImportanceVector {
    pub fn question(&self, q: u8) -> f64 {
        self.0[q as usize - 1]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Question with the highest importance (lowest number on ties), or
    /// `None` for the zero vector.
    pub fn argmax(&self) -> Option<u8> {
        let mut best: Option<(u8, f64)> = None;
        for (i, &v) in self.0.iter().enumerate() {
            if v > 0.0 && best.is_none_or(|(_, b)| v > b) {
                best = Some((i as u8 + 1, v));
            }
        }
        best.map(|(q, _)| q)
    }

    /// CSV with columns `question,driver,importance`.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["question", "driver", "importance"])?;
        for (i, v) in self.0.iter().enumerate() {
            let q = i as u8 + 1;
            let driver = Driver::for_question(q).map(|d| d.name()).unwrap_or("");
            out.write_record([format!("Q{q}"), driver.to_string(), format!("{v:.6}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Each internal node adds `(n_node / n_total) * impurity_decrease` to its
/// question; the vector is then normalized to sum to one.
pub fn importance(tree: &DecisionTree) -> ImportanceVector {
    fn walk(node: &TreeNode, total: f64, acc: &mut [f64; QUESTION_COUNT]) {
        if let TreeNode::Internal { question, counts, impurity, left, right, .. } = node {
            let n = counts.total() as f64;
            let (l, r) = (left.counts(), right.counts());
            let child = (l.total() as f64 * l.gini() + r.total() as f64 * r.gini()) / n;
            acc[*question as usize - 1] += n / total * (impurity - child);
            walk(left, total, acc);
            walk(right, total, acc);
        }
    }
    let mut acc = [0.0; QUESTION_COUNT];
    let total = tree.root.counts().total() as f64;
    if total > 0.0 {
        walk(&tree.root, total, &mut acc);
    }
    let sum: f64 = acc.iter().sum();
    if sum > 0.0 {
        for v in &mut acc {
            *v /= sum;
        }
    }
    ImportanceVector(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Complex as C, NotComplex as N};

    fn fv(pairs: &[(u8, f64)]) -> FeatureVector {
        let mut v = [0.0; QUESTION_COUNT];
        for &(q, x) in pairs {
            v[q as usize - 1] = x;
        }
        FeatureVector(v)
    }

    fn loose() -> TreeParams {
        TreeParams { max_depth: 3, min_samples_leaf: 1, seed: 0 }
    }

    #[test]
    fn pure_root_is_a_leaf() {
        let xs = vec![fv(&[(1, 1.0)]), fv(&[(2, 1.0)]), fv(&[])];
        let tree = train(&xs, &[N, N, N], loose()).unwrap();
        assert!(tree.root.is_leaf());
        assert_eq!(extract_rules(&tree).len(), 1);
        assert_eq!(importance(&tree).0, [0.0; QUESTION_COUNT]);
        assert_eq!(predict(&tree, &fv(&[(9, 1.0)])), N);
    }

    #[test]
    fn two_samples_split_on_q1() {
        // every question separating the two points gives the same (zero)
        // impurity, so brute force over all 25 confirms Q1 wins the tie
        let a = FeatureVector([1.0; QUESTION_COUNT]);
        let b = FeatureVector([0.0; QUESTION_COUNT]);
        let tree = train(&[a, b], &[C, N], loose()).unwrap();
        match &tree.root {
            TreeNode::Internal { question, left, right, .. } => {
                assert_eq!(*question, 1);
                assert!(left.is_leaf() && right.is_leaf());
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
        assert_eq!(tree.root.depth(), 1);
        assert_eq!(predict(&tree, &a), C);
        assert_eq!(predict(&tree, &b), N);
        let imp = importance(&tree);
        assert_eq!(imp.question(1), 1.0);
        assert_eq!(imp.sum(), 1.0);
    }

    #[test]
    fn depth_one_tree_has_two_complementary_rules() {
        let xs = vec![fv(&[(7, 1.0)]), fv(&[(7, 1.0)]), fv(&[]), fv(&[(7, 0.5)])];
        let tree = train(&xs, &[N, N, C, C], loose()).unwrap();
        let rules = extract_rules(&tree);
        let texts: Vec<String> = rules.iter().map(|r| r.to_string()).collect();
        assert_eq!(texts, vec!["Q7 \u{2264} 0.5 \u{2192} Complex", "Q7 > 0.5 \u{2192} NotComplex"]);
        assert_eq!(rules.iter().map(|r| r.support).sum::<usize>(), 4);
    }

    #[test]
    fn leaf_tie_goes_to_complex() {
        let xs = vec![fv(&[]), fv(&[])];
        let tree = train(&xs, &[C, N], loose()).unwrap();
        assert_eq!(tree.root, TreeNode::Leaf {
            label: C,
            counts: ClassCounts { complex: 1, not_complex: 1 },
            impurity: 0.5
        });
    }

    #[test]
    fn min_samples_leaf_blocks_small_splits() {
        let xs = vec![fv(&[(3, 1.0)]), fv(&[]), fv(&[]), fv(&[])];
        let tree = train(&xs, &[C, N, N, N], TreeParams { min_samples_leaf: 2, ..loose() }).unwrap();
        assert!(tree.root.is_leaf());
    }

    #[test]
    fn input_errors() {
        assert_eq!(train(&[], &[], loose()).unwrap_err(), TreeError::Empty);
        assert_eq!(
            train(&[fv(&[])], &[C, N], loose()).unwrap_err(),
            TreeError::LengthMismatch { features: 1, targets: 2 }
        );
        assert_eq!(
            FeatureVector::from_slice(3, &[0.0; 24]).unwrap_err(),
            TreeError::FeatureLength { index: 3, len: 24 }
        );
    }

    #[test]
    fn encoding_of_not_sure() {
        let mut answers = [Answer::No; QUESTION_COUNT];
        answers[0] = Answer::Yes;
        answers[1] = Answer::NotSure;
        let a = Answers(answers);
        assert_eq!(FeatureVector::from_answers(&a, NotSureEncoding::Half).0[..3], [1.0, 0.5, 0.0]);
        assert_eq!(FeatureVector::from_answers(&a, NotSureEncoding::AsNo).0[..3], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn tree_json_round_trip() {
        let xs = vec![fv(&[(7, 1.0)]), fv(&[(7, 1.0), (2, 1.0)]), fv(&[]), fv(&[(2, 1.0)])];
        let tree = train(&xs, &[N, N, C, N], loose()).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        let back: DecisionTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }

    #[test]
    fn rules_table_text() {
        let xs = vec![fv(&[(7, 1.0)]), fv(&[(7, 1.0)]), fv(&[]), fv(&[(7, 0.5)])];
        let tree = train(&xs, &[N, N, C, C], loose()).unwrap();
        let table = render_rules_table(&extract_rules(&tree));
        assert!(table.contains("1     Q7 \u{2264} 0.5"));
        assert!(table.contains("Not Complex"));
    }
}
