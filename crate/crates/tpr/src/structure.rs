//! Leaf-labeled binary trees with a canonical bracketed text form, e.g.
//! `[un [lock able]]`, and their TPR codec over tree-position roles
//! ("L"/"R" paths from the root; "" is the root itself).

use std::fmt;
use std::str::FromStr;

use crate::algebra::{bind, rank_fillers, Tpr};
use crate::spaces::{FillerSpace, RoleSpace};
use crate::{Result, TprError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Structure {
    Leaf(String),
    Node(Box<Structure>, Box<Structure>),
}

impl Structure {
    pub fn leaf(name: &str) -> Self {
        Structure::Leaf(name.to_string())
    }

    pub fn node(left: Structure, right: Structure) -> Self {
        Structure::Node(Box::new(left), Box::new(right))
    }

    pub fn depth(&self) -> usize {
        match self {
            Structure::Leaf(_) => 0,
            Structure::Node(l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// (path, symbol) for every leaf, left-to-right; the root path is "".
    pub fn leaves(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        self.collect_leaves(String::new(), &mut out);
        out
    }

    fn collect_leaves(&self, path: String, out: &mut Vec<(String, String)>) {
        match self {
            Structure::Leaf(s) => out.push((path, s.clone())),
            Structure::Node(l, r) => {
                l.collect_leaves(format!("{path}L"), out);
                r.collect_leaves(format!("{path}R"), out);
            }
        }
    }

    /// The subtree at an L/R path, if the path exists.
    pub fn subtree(&self, path: &str) -> Option<&Structure> {
        let mut cur = self;
        for c in path.chars() {
            match (cur, c) {
                (Structure::Node(l, _), 'L') => cur = l,
                (Structure::Node(_, r), 'R') => cur = r,
                _ => return None,
            }
        }
        Some(cur)
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Leaf(s) => write!(f, "{s}"),
            Structure::Node(l, r) => write!(f, "[{l} {r}]"),
        }
    }
}

impl FromStr for Structure {
    type Err = TprError;

    fn from_str(s: &str) -> Result<Self> {
        let tokens = tokenize(s)?;
        let mut pos = 0;
        let tree = parse_tree(&tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(TprError::Parse(format!(
                "trailing input after tree: '{}'",
                tokens[pos..].join(" ")
            )));
        }
        Ok(tree)
    }
}

fn tokenize(s: &str) -> Result<Vec<String>> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in s.chars() {
        match c {
            '[' | ']' => {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                tokens.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
            }
            c => word.push(c),
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    if tokens.is_empty() {
        return Err(TprError::Parse("empty tree text".into()));
    }
    Ok(tokens)
}

fn parse_tree(tokens: &[String], pos: &mut usize) -> Result<Structure> {
    let Some(tok) = tokens.get(*pos) else {
        return Err(TprError::Parse("unexpected end of tree text".into()));
    };
    *pos += 1;
    match tok.as_str() {
        "[" => {
            let left = parse_tree(tokens, pos)?;
            let right = parse_tree(tokens, pos)?;
            match tokens.get(*pos) {
                Some(t) if t == "]" => {
                    *pos += 1;
                    Ok(Structure::node(left, right))
                }
                Some(t) => Err(TprError::Parse(format!(
                    "expected ']' after two children, found '{t}' (nodes are binary)"
                ))),
                None => Err(TprError::Parse("missing closing ']'".into())),
            }
        }
        "]" => Err(TprError::Parse("unexpected ']'".into())),
        name => Ok(Structure::leaf(name)),
    }
}

/// Σ over leaves of bind(filler(symbol), role(path)).
pub fn encode_tree(tree: &Structure, fillers: &FillerSpace, roles: &RoleSpace) -> Result<Tpr> {
    if let Some(max) = roles.tree_depth() {
        let depth = tree.depth();
        if depth > max {
            return Err(TprError::TooDeep { depth, max });
        }
    }
    let mut bindings = Vec::new();
    for (path, symbol) in tree.leaves() {
        let f = fillers.vector(&symbol)?;
        let r = roles.vector(&path)?;
        bindings.push(bind(f, r)?);
    }
    Tpr::aggregate(bindings, fillers.dim_f(), roles.dim_r())
}

/// Rebuilds the tree by probing paths from the root: a path holding a filler
/// (unbind norm ≥ half the smallest filler norm) is a leaf; otherwise both
/// children must decode. Sound for TPRs produced by [`encode_tree`], whose
/// internal paths carry nothing.
pub fn decode_tree(tpr: &Tpr, fillers: &FillerSpace, roles: &RoleSpace) -> Result<Structure> {
    let d = fillers.dim_f();
    let min_norm = (0..fillers.len())
        .map(|i| {
            fillers.table().data()[i * d..(i + 1) * d]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min);
    let threshold = 0.5 * min_norm;
    let max_depth = roles
        .tree_depth()
        .unwrap_or_else(|| roles.roles().iter().map(|r| r.len()).max().unwrap_or(0));
    probe(tpr, fillers, roles, String::new(), threshold, max_depth)
}

fn probe(
    tpr: &Tpr,
    fillers: &FillerSpace,
    roles: &RoleSpace,
    path: String,
    threshold: f64,
    max_depth: usize,
) -> Result<Structure> {
    let recovered = tpr.unbind(&path, roles)?;
    let norm = recovered.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm >= threshold {
        let (name, _) = rank_fillers(&recovered, fillers, path.len());
        return Ok(Structure::leaf(&name));
    }
    if path.len() >= max_depth {
        return Err(TprError::NoStructure(path));
    }
    let left = probe(
        tpr,
        fillers,
        roles,
        format!("{path}L"),
        threshold,
        max_depth,
    )?;
    let right = probe(
        tpr,
        fillers,
        roles,
        format!("{path}R"),
        threshold,
        max_depth,
    )?;
    Ok(Structure::node(left, right))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spaces(depth: usize) -> (FillerSpace, RoleSpace) {
        let fs = FillerSpace::random(&["un", "lock", "able", "kim"], 6, 3, true).unwrap();
        let n_roles = (1 << (depth + 1)) - 1;
        let rs = RoleSpace::tree_positions(depth, n_roles.max(6), 3).unwrap();
        (fs, rs)
    }

    #[test]
    fn bracketed_text_round_trips_bit_exactly() {
        for text in ["lock", "[lock able]", "[un [lock able]]", "[[a b] [c d]]"] {
            let tree: Structure = text.parse().unwrap();
            assert_eq!(tree.to_string(), text);
        }
    }

    #[test]
    fn parser_rejects_malformed_trees() {
        for bad in ["", "[a b", "[a]", "[a b c]", "a b", "]", "[a [b c] d]"] {
            assert!(bad.parse::<Structure>().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn leaves_carry_their_paths() {
        let tree: Structure = "[un [lock able]]".parse().unwrap();
        let leaves = tree.leaves();
        let want = [("L", "un"), ("RL", "lock"), ("RR", "able")];
        assert_eq!(leaves.len(), want.len());
        for ((path, sym), (wp, ws)) in leaves.iter().zip(want) {
            assert_eq!((path.as_str(), sym.as_str()), (wp, ws));
        }
        assert_eq!(tree.depth(), 2);
        assert_eq!(
            tree.subtree("R").map(ToString::to_string),
            Some("[lock able]".to_string())
        );
        assert!(tree.subtree("LL").is_none());
    }

    #[test]
    fn encoding_places_fillers_at_leaf_paths() {
        let (fs, rs) = spaces(2);
        let tree: Structure = "[un [lock able]]".parse().unwrap();
        let tpr = encode_tree(&tree, &fs, &rs).unwrap();
        for (path, symbol) in [("L", "un"), ("RL", "lock"), ("RR", "able")] {
            let rec = tpr.unbind(path, &rs).unwrap();
            for (r, f) in rec.iter().zip(fs.vector(symbol).unwrap()) {
                assert!((r - f).abs() < 1e-8, "{symbol} at {path}");
            }
        }
        // Internal paths carry nothing.
        for path in ["", "R"] {
            let rec = tpr.unbind(path, &rs).unwrap();
            assert!(rec.iter().all(|x| x.abs() < 1e-8), "{path} not empty");
        }
    }

    #[test]
    fn overdeep_trees_are_rejected() {
        let (fs, rs) = spaces(1);
        let tree: Structure = "[un [lock able]]".parse().unwrap();
        assert!(matches!(
            encode_tree(&tree, &fs, &rs),
            Err(TprError::TooDeep { depth: 2, max: 1 })
        ));
    }

    #[test]
    fn round_trip_is_exhaustive_over_small_trees() {
        // Every leaf-labeled binary tree of depth ≤ 3 over 4 symbols:
        // 20 of depth ≤ 1, 4 + 20² = 404 of depth ≤ 2, and 4 + 404² =
        // 163,220 of depth ≤ 3, enumerated lazily as (left, right) pairs.
        let (fs, rs) = spaces(3);
        let symbols = ["un", "lock", "able", "kim"];
        let mut upto2: Vec<Structure> = symbols.iter().map(|s| Structure::leaf(s)).collect();
        for _ in 0..2 {
            let mut next: Vec<Structure> = symbols.iter().map(|s| Structure::leaf(s)).collect();
            for l in &upto2 {
                for r in &upto2 {
                    next.push(Structure::node(l.clone(), r.clone()));
                }
            }
            upto2 = next;
        }
        assert_eq!(upto2.len(), 404);

        let mut check = |tree: &Structure| {
            let tpr = encode_tree(tree, &fs, &rs).unwrap();
            let back = decode_tree(&tpr, &fs, &rs).unwrap();
            assert_eq!(&back, tree, "round trip failed for {tree}");
        };
        let mut count = 0usize;
        for s in symbols {
            check(&Structure::leaf(s));
            count += 1;
        }
        for l in &upto2 {
            for r in &upto2 {
                check(&Structure::node(l.clone(), r.clone()));
                count += 1;
            }
        }
        assert_eq!(count, 4 + 404 * 404);
    }

    #[test]
    fn decoding_an_empty_tpr_reports_no_structure() {
        let (fs, rs) = spaces(1);
        let zero = Tpr::aggregate(vec![], fs.dim_f(), rs.dim_r()).unwrap();
        assert!(matches!(
            decode_tree(&zero, &fs, &rs),
            Err(TprError::NoStructure(_))
        ));
    }
}
