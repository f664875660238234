//! Three compositional-structure functions, each written twice: a discrete
//! symbolic oracle and a constant linear map on TPR space built by
//! unbind-then-rebind. The map never inspects the symbols it moves — one
//! matrix, fixed before any input exists, transforms every instance.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use tprlab_tensor::kernels::matmul_nn;
use tprlab_tensor::Tensor;

use crate::algebra::{bind, rank_fillers, Tpr};
use crate::spaces::{FillerSpace, RoleSpace};
use crate::structure::Structure;
use crate::{Result, TprError};

// ---------------------------------------------------------------------------
// Role-to-role linear maps
// ---------------------------------------------------------------------------

/// A constant map on TPR space: `out = value · k`, where `k` was assembled
/// from (dual input role ⊗ output role) transfer terms. Because unbinding is
/// exact, applying the map moves each bound filler from its input role to
/// the chosen output role without touching the filler itself.
#[derive(Clone, Debug)]
pub struct RoleMap {
    /// (input role width × output role width).
    pub k: Tensor<f64>,
}

impl RoleMap {
    /// One transfer per (input role name, output role name) pair.
    pub fn from_transfers(
        transfers: &[(&str, &str)],
        input: &RoleSpace,
        output: &RoleSpace,
    ) -> Result<Self> {
        let (din, dout) = (input.dim_r(), output.dim_r());
        let mut k = vec![0.0f64; din * dout];
        for &(from, to) in transfers {
            let d = input.dual(from)?;
            let r = output.vector(to)?;
            for i in 0..din {
                for j in 0..dout {
                    k[i * dout + j] += d[i] * r[j];
                }
            }
        }
        Ok(Self {
            k: Tensor::new(vec![din, dout], k)?,
        })
    }

    pub fn apply(&self, tpr: &Tpr) -> Result<Tpr> {
        let (din, dout) = (self.k.shape()[0], self.k.shape()[1]);
        if tpr.dim_r() != din {
            return Err(TprError::Dimension {
                what: "role-map input width",
                expected: din,
                got: tpr.dim_r(),
            });
        }
        let df = tpr.dim_f();
        let mut out = vec![0.0f64; df * dout];
        matmul_nn(tpr.value.data(), self.k.data(), df, din, dout, &mut out);
        Tpr::from_value(Tensor::new(vec![df, dout], out)?)
    }

    /// The same map as one explicit matrix over flattened TPRs:
    /// `vec(out) = M · vec(in)` with row-major vec. Dimension
    /// (dim_f·dout) × (dim_f·din) — the "single constant matrix" form.
    pub fn explicit_matrix(&self, dim_f: usize) -> Tensor<f64> {
        let (din, dout) = (self.k.shape()[0], self.k.shape()[1]);
        let mut m = vec![0.0f64; dim_f * dout * dim_f * din];
        let cols = dim_f * din;
        for i in 0..dim_f {
            for jo in 0..dout {
                let row = i * dout + jo;
                for ji in 0..din {
                    m[row * cols + i * din + ji] = self.k.data()[ji * dout + jo];
                }
            }
        }
        Tensor::new(vec![dim_f * dout, cols], m).expect("shape matches")
    }

    /// Applies the explicit matrix to a flattened TPR (test twin of
    /// [`RoleMap::apply`]).
    pub fn apply_flat(&self, tpr: &Tpr) -> Result<Vec<f64>> {
        let m = self.explicit_matrix(tpr.dim_f());
        let rows = m.shape()[0];
        let cols = m.shape()[1];
        if tpr.value.numel() != cols {
            return Err(TprError::Dimension {
                what: "flattened TPR length",
                expected: cols,
                got: tpr.value.numel(),
            });
        }
        let mut out = vec![0.0f64; rows];
        for (r, o) in out.iter_mut().enumerate() {
            *o = m.data()[r * cols..(r + 1) * cols]
                .iter()
                .zip(tpr.value.data())
                .map(|(a, b)| a * b)
                .sum();
        }
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Implication chaining
// ---------------------------------------------------------------------------

/// `antecedent -> consequent`, e.g. "q->r".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Implication {
    pub antecedent: String,
    pub consequent: String,
}

impl Implication {
    pub fn new(antecedent: &str, consequent: &str) -> Self {
        Self {
            antecedent: antecedent.to_string(),
            consequent: consequent.to_string(),
        }
    }
}

impl fmt::Display for Implication {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.antecedent, self.consequent)
    }
}

impl FromStr for Implication {
    type Err = TprError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split("->");
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(c), None) if !a.trim().is_empty() && !c.trim().is_empty() => {
                Ok(Implication::new(a.trim(), c.trim()))
            }
            _ => Err(TprError::Parse(format!(
                "implication must look like 'q->r', got '{s}'"
            ))),
        }
    }
}

/// (q→r) chained with (r→s) gives (q→s); the middle symbols must agree.
pub fn chain_implications_symbolic(p1: &Implication, p2: &Implication) -> Result<Implication> {
    if p1.consequent != p2.antecedent {
        return Err(TprError::NotChainable(
            p1.consequent.clone(),
            p2.antecedent.clone(),
        ));
    }
    Ok(Implication::new(&p1.antecedent, &p2.consequent))
}

/// Roles of the two-premise input TPR.
pub const PREMISE_ROLES: [&str; 4] = ["ant1", "con1", "ant2", "con2"];
/// Roles of the one-conclusion output TPR.
pub const CONCLUSION_ROLES: [&str; 2] = ["ant", "con"];

/// The chaining map: the first premise's antecedent filler moves to the
/// conclusion's antecedent role, the second premise's consequent filler to
/// the conclusion's consequent role.
pub fn chain_map(premises: &RoleSpace, conclusion: &RoleSpace) -> Result<RoleMap> {
    RoleMap::from_transfers(&[("ant1", "ant"), ("con2", "con")], premises, conclusion)
}

/// Σ of the four filler:role bindings for `{p1, p2}`.
pub fn encode_implication_pair(
    p1: &Implication,
    p2: &Implication,
    fillers: &FillerSpace,
    premises: &RoleSpace,
) -> Result<Tpr> {
    let pairs = [
        (p1.antecedent.as_str(), "ant1"),
        (p1.consequent.as_str(), "con1"),
        (p2.antecedent.as_str(), "ant2"),
        (p2.consequent.as_str(), "con2"),
    ];
    let mut bindings = Vec::with_capacity(4);
    for (symbol, role) in pairs {
        bindings.push(bind(fillers.vector(symbol)?, premises.vector(role)?)?);
    }
    Tpr::aggregate(bindings, fillers.dim_f(), premises.dim_r())
}

pub fn encode_implication(
    imp: &Implication,
    fillers: &FillerSpace,
    conclusion: &RoleSpace,
) -> Result<Tpr> {
    let bindings = vec![
        bind(fillers.vector(&imp.antecedent)?, conclusion.vector("ant")?)?,
        bind(fillers.vector(&imp.consequent)?, conclusion.vector("con")?)?,
    ];
    Tpr::aggregate(bindings, fillers.dim_f(), conclusion.dim_r())
}

pub fn decode_implication(
    tpr: &Tpr,
    fillers: &FillerSpace,
    conclusion: &RoleSpace,
) -> Result<Implication> {
    let ant = tpr.unbind("ant", conclusion)?;
    let con = tpr.unbind("con", conclusion)?;
    let (a, _) = rank_fillers(&ant, fillers, 0);
    let (c, _) = rank_fillers(&con, fillers, 1);
    Ok(Implication::new(&a, &c))
}

// ---------------------------------------------------------------------------
// Ratio simplification
// ---------------------------------------------------------------------------

/// One ratio of plain variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: String,
    pub den: String,
}

impl Ratio {
    pub fn new(num: &str, den: &str) -> Self {
        Self {
            num: num.to_string(),
            den: den.to_string(),
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}/{})", self.num, self.den)
    }
}

/// The four-leaf expression: either a ratio of ratios (the input form) or a
/// product of ratios (the simplified form).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RatioExpr {
    RatioOfRatios(Ratio, Ratio),
    ProductOfRatios(Ratio, Ratio),
}

impl fmt::Display for RatioExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatioExpr::RatioOfRatios(a, b) => write!(f, "{a}/{b}"),
            RatioExpr::ProductOfRatios(a, b) => write!(f, "{a}*{b}"),
        }
    }
}

impl RatioExpr {
    /// Numeric value under a variable assignment.
    pub fn eval(&self, env: &HashMap<String, f64>) -> Result<f64> {
        let get = |name: &str| -> Result<f64> {
            env.get(name)
                .copied()
                .ok_or_else(|| TprError::UnknownSymbol(name.to_string()))
        };
        let ratio = |r: &Ratio| -> Result<f64> { Ok(get(&r.num)? / get(&r.den)?) };
        match self {
            RatioExpr::RatioOfRatios(a, b) => Ok(ratio(a)? / ratio(b)?),
            RatioExpr::ProductOfRatios(a, b) => Ok(ratio(a)? * ratio(b)?),
        }
    }
}

/// (a/b)/(c/d) ↦ (a/b)·(d/c): the denominator-of-the-denominator ends in a
/// numerator role, and vice versa.
pub fn simplify_ratio_symbolic(expr: &RatioExpr) -> Result<RatioExpr> {
    match expr {
        RatioExpr::RatioOfRatios(ab, cd) => Ok(RatioExpr::ProductOfRatios(
            ab.clone(),
            Ratio::new(&cd.den, &cd.num),
        )),
        RatioExpr::ProductOfRatios(..) => Err(TprError::WrongShape(
            "ratio simplification expects a ratio of ratios".into(),
        )),
    }
}

/// Roles of the four leaves, named by tree path: LL numerator-of-numerator,
/// LR denominator-of-numerator, RL numerator-of-denominator, RR
/// denominator-of-denominator. The same four names address the output
/// product's leaves.
pub const RATIO_ROLES: [&str; 4] = ["LL", "LR", "RL", "RR"];

/// The simplification map: LL and LR stay, RR and RL trade places — the
/// whole function is this fixed role permutation.
pub fn simplify_ratio_map(roles: &RoleSpace) -> Result<RoleMap> {
    RoleMap::from_transfers(
        &[("LL", "LL"), ("LR", "LR"), ("RR", "RL"), ("RL", "RR")],
        roles,
        roles,
    )
}

pub fn encode_ratio(expr: &RatioExpr, fillers: &FillerSpace, roles: &RoleSpace) -> Result<Tpr> {
    let (left, right) = match expr {
        RatioExpr::RatioOfRatios(l, r) | RatioExpr::ProductOfRatios(l, r) => (l, r),
    };
    let pairs = [
        (left.num.as_str(), "LL"),
        (left.den.as_str(), "LR"),
        (right.num.as_str(), "RL"),
        (right.den.as_str(), "RR"),
    ];
    let mut bindings = Vec::with_capacity(4);
    for (symbol, role) in pairs {
        bindings.push(bind(fillers.vector(symbol)?, roles.vector(role)?)?);
    }
    Tpr::aggregate(bindings, fillers.dim_f(), roles.dim_r())
}

/// Reads a product-of-ratios back out of a TPR.
pub fn decode_product_of_ratios(
    tpr: &Tpr,
    fillers: &FillerSpace,
    roles: &RoleSpace,
) -> Result<RatioExpr> {
    let mut names = Vec::with_capacity(4);
    for (i, role) in RATIO_ROLES.iter().enumerate() {
        let v = tpr.unbind(role, roles)?;
        names.push(rank_fillers(&v, fillers, i).0);
    }
    Ok(RatioExpr::ProductOfRatios(
        Ratio::new(&names[0], &names[1]),
        Ratio::new(&names[2], &names[3]),
    ))
}

// ---------------------------------------------------------------------------
// Tree adjoining
// ---------------------------------------------------------------------------

/// Replaces the internal node at `site` with a new node whose left child is
/// the adjunct and whose right child is the original subtree. The result
/// must stay within `max_depth`.
pub fn adjoin_tree_symbolic(
    host: &Structure,
    adjunct: &str,
    site: &str,
    max_depth: usize,
) -> Result<Structure> {
    let sub = host.subtree(site).ok_or_else(|| TprError::InvalidSite {
        site: site.to_string(),
        why: "host has no such path".into(),
    })?;
    if matches!(sub, Structure::Leaf(_)) {
        return Err(TprError::InvalidSite {
            site: site.to_string(),
            why: "addresses a leaf; adjunction sites are internal nodes".into(),
        });
    }
    let new_sub = Structure::node(Structure::leaf(adjunct), sub.clone());
    let result = replace_subtree(host, site, new_sub)?;
    let depth = result.depth();
    if depth > max_depth {
        return Err(TprError::TooDeep {
            depth,
            max: max_depth,
        });
    }
    Ok(result)
}

fn replace_subtree(host: &Structure, site: &str, new: Structure) -> Result<Structure> {
    let Some(dir) = site.chars().next() else {
        return Ok(new);
    };
    let rest = &site[1..];
    match (host, dir) {
        (Structure::Node(l, r), 'L') => Ok(Structure::node(
            replace_subtree(l, rest, new)?,
            (**r).clone(),
        )),
        (Structure::Node(l, r), 'R') => Ok(Structure::node(
            (**l).clone(),
            replace_subtree(r, rest, new)?,
        )),
        _ => Err(TprError::InvalidSite {
            site: site.to_string(),
            why: "path descends through a leaf or uses a character other than L/R".into(),
        }),
    }
}

/// The re-addressing map for one site: every path at or under the site moves
/// from site·s to site·R·s; all other paths stay. Re-addresses that would
/// exceed the role space's depth have no target role and are dropped — those
/// inputs are exactly the hosts the symbolic operation rejects as too deep.
pub fn adjoin_map(site: &str, roles: &RoleSpace) -> Result<RoleMap> {
    let max_depth = roles.tree_depth().ok_or_else(|| TprError::InvalidSite {
        site: site.to_string(),
        why: "role space has no tree depth (build it with tree_positions)".into(),
    })?;
    if site.len() + 1 > max_depth {
        return Err(TprError::InvalidSite {
            site: site.to_string(),
            why: format!("adjunct at '{site}L' would exceed depth {max_depth}"),
        });
    }
    if !site.chars().all(|c| c == 'L' || c == 'R') {
        return Err(TprError::InvalidSite {
            site: site.to_string(),
            why: "sites are strings over L/R".into(),
        });
    }
    let mut transfers: Vec<(String, String)> = Vec::new();
    for q in roles.roles() {
        if let Some(suffix) = q.strip_prefix(site) {
            let target = format!("{site}R{suffix}");
            if target.len() <= max_depth {
                transfers.push((q.clone(), target));
            }
        } else {
            transfers.push((q.clone(), q.clone()));
        }
    }
    let borrowed: Vec<(&str, &str)> = transfers
        .iter()
        .map(|(a, b)| (a.as_str(), b.as_str()))
        .collect();
    RoleMap::from_transfers(&borrowed, roles, roles)
}

/// The full adjoining operation on TPRs: affine — the constant re-addressing
/// map plus a constant adjunct binding at site·L.
pub fn adjoin_tree_tpr(
    tpr: &Tpr,
    adjunct: &str,
    site: &str,
    fillers: &FillerSpace,
    roles: &RoleSpace,
) -> Result<Tpr> {
    let map = adjoin_map(site, roles)?;
    let mut out = map.apply(tpr)?;
    let adjunct_binding = bind(fillers.vector(adjunct)?, roles.vector(&format!("{site}L"))?)?;
    for (o, a) in out.value.data_mut().iter_mut().zip(adjunct_binding.product.data()) {
        *o += a;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::{decode_tree, encode_tree};

    fn implication_setup() -> (FillerSpace, RoleSpace, RoleSpace) {
        let symbols = ["q", "r", "s", "t", "u", "v"];
        let fs = FillerSpace::random(&symbols, 8, 21, true).unwrap();
        let premises = RoleSpace::random(&PREMISE_ROLES, 4, 21).unwrap();
        let conclusion = RoleSpace::random(&CONCLUSION_ROLES, 4, 22).unwrap();
        (fs, premises, conclusion)
    }

    #[test]
    fn implication_text_round_trips() {
        let imp: Implication = "q->r".parse().unwrap();
        assert_eq!(imp, Implication::new("q", "r"));
        assert_eq!(imp.to_string(), "q->r");
        assert!("q->".parse::<Implication>().is_err());
        assert!("q".parse::<Implication>().is_err());
        assert!("q->r->s".parse::<Implication>().is_err());
    }

    #[test]
    fn symbolic_chaining_follows_the_middle_symbol() {
        let qr = Implication::new("q", "r");
        let rs_ = Implication::new("r", "s");
        assert_eq!(
            chain_implications_symbolic(&qr, &rs_).unwrap(),
            Implication::new("q", "s")
        );
        let rain = Implication::new("rain", "drive");
        let drive = Implication::new("drive", "charge");
        assert_eq!(
            chain_implications_symbolic(&rain, &drive).unwrap(),
            Implication::new("rain", "charge")
        );
        let ab = Implication::new("a", "b");
        let cd = Implication::new("c", "d");
        assert!(matches!(
            chain_implications_symbolic(&ab, &cd),
            Err(TprError::NotChainable(..))
        ));
    }

    #[test]
    fn one_fixed_map_chains_all_216_premise_pairs() {
        let (fs, premises, conclusion) = implication_setup();
        // The map exists before any input does and never changes.
        let map = chain_map(&premises, &conclusion).unwrap();
        let symbols: Vec<String> = fs.symbols().to_vec();
        let mut count = 0;
        for q in &symbols {
            for r in &symbols {
                for s in &symbols {
                    let p1 = Implication::new(q, r);
                    let p2 = Implication::new(r, s);
                    let want =
                        chain_implications_symbolic(&p1, &p2).expect("chainable by construction");
                    let input = encode_implication_pair(&p1, &p2, &fs, &premises).unwrap();
                    let out = map.apply(&input).unwrap();
                    let got = decode_implication(&out, &fs, &conclusion).unwrap();
                    assert_eq!(got, want, "{p1} & {p2}");
                    // The explicit flattened matrix computes the same thing.
                    let flat = map.apply_flat(&input).unwrap();
                    for (a, b) in flat.iter().zip(out.value.data()) {
                        assert!((a - b).abs() < 1e-12);
                    }
                    // And the decoded TPR matches the directly encoded
                    // conclusion within tolerance.
                    let direct = encode_implication(&want, &fs, &conclusion).unwrap();
                    for (a, b) in out.value.data().iter().zip(direct.value.data()) {
                        assert!((a - b).abs() < 1e-6);
                    }
                    count += 1;
                }
            }
        }
        assert_eq!(count, 216);
    }

    #[test]
    fn the_chain_map_is_linear_over_blends() {
        let (fs, premises, conclusion) = implication_setup();
        let map = chain_map(&premises, &conclusion).unwrap();
        let t1 = encode_implication_pair(
            &Implication::new("q", "r"),
            &Implication::new("r", "s"),
            &fs,
            &premises,
        )
        .unwrap();
        let t2 = encode_implication_pair(
            &Implication::new("t", "u"),
            &Implication::new("u", "v"),
            &fs,
            &premises,
        )
        .unwrap();
        let mut blend_data = Vec::with_capacity(t1.value.numel());
        for (a, b) in t1.value.data().iter().zip(t2.value.data()) {
            blend_data.push(0.5 * (a + b));
        }
        let blend = Tpr::from_value(
            Tensor::new(vec![t1.dim_f(), t1.dim_r()], blend_data).unwrap(),
        )
        .unwrap();
        let out_blend = map.apply(&blend).unwrap();
        let o1 = map.apply(&t1).unwrap();
        let o2 = map.apply(&t2).unwrap();
        for ((ob, a), b) in out_blend
            .value
            .data()
            .iter()
            .zip(o1.value.data())
            .zip(o2.value.data())
        {
            assert!((ob - 0.5 * (a + b)).abs() < 1e-8);
        }
    }

    #[test]
    fn ratio_simplification_matches_the_identity_on_all_labelings() {
        let symbols = ["a", "b", "c", "d", "e"];
        let fs = FillerSpace::random(&symbols, 6, 31, true).unwrap();
        let roles = RoleSpace::random(&RATIO_ROLES, 4, 31).unwrap();
        let map = simplify_ratio_map(&roles).unwrap();
        let mut count = 0;
        for &a in &symbols {
            for &b in &symbols {
                for &c in &symbols {
                    for &d in &symbols {
                        let distinct = a != b
                            && a != c
                            && a != d
                            && b != c
                            && b != d
                            && c != d;
                        if !distinct {
                            continue;
                        }
                        let expr =
                            RatioExpr::RatioOfRatios(Ratio::new(a, b), Ratio::new(c, d));
                        let want = simplify_ratio_symbolic(&expr).unwrap();
                        assert_eq!(
                            want,
                            RatioExpr::ProductOfRatios(Ratio::new(a, b), Ratio::new(d, c))
                        );
                        let tpr = encode_ratio(&expr, &fs, &roles).unwrap();
                        let out = map.apply(&tpr).unwrap();
                        let got = decode_product_of_ratios(&out, &fs, &roles).unwrap();
                        assert_eq!(got, want, "{expr}");
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 120);
    }

    #[test]
    fn ratio_identity_checks_out_numerically() {
        let expr = RatioExpr::RatioOfRatios(Ratio::new("a", "b"), Ratio::new("c", "d"));
        let simplified = simplify_ratio_symbolic(&expr).unwrap();
        let env: HashMap<String, f64> = [("a", 6.0), ("b", 3.0), ("c", 4.0), ("d", 2.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        assert_eq!(expr.eval(&env).unwrap(), 1.0);
        assert_eq!(simplified.eval(&env).unwrap(), 1.0);
        // Identity denominators keep their shape.
        let trivial = RatioExpr::RatioOfRatios(Ratio::new("a", "one"), Ratio::new("one", "one"));
        assert_eq!(
            simplify_ratio_symbolic(&trivial).unwrap(),
            RatioExpr::ProductOfRatios(Ratio::new("a", "one"), Ratio::new("one", "one"))
        );
        // Already-simplified input is the wrong shape.
        assert!(simplify_ratio_symbolic(&simplified).is_err());
    }

    fn adjoin_setup() -> (FillerSpace, RoleSpace) {
        let fs =
            FillerSpace::random(&["Kim", "really", "hates", "symbols"], 6, 41, true).unwrap();
        let rs = RoleSpace::tree_positions(3, 15, 41).unwrap();
        (fs, rs)
    }

    #[test]
    fn adjoining_reproduces_the_worked_examples() {
        let host: Structure = "[Kim [hates symbols]]".parse().unwrap();
        let vp = adjoin_tree_symbolic(&host, "really", "R", 3).unwrap();
        assert_eq!(vp.to_string(), "[Kim [really [hates symbols]]]");
        let root = adjoin_tree_symbolic(&host, "really", "", 3).unwrap();
        assert_eq!(root.to_string(), "[really [Kim [hates symbols]]]");
        // Leaf sites and missing paths are invalid.
        assert!(adjoin_tree_symbolic(&host, "really", "L", 3).is_err());
        assert!(adjoin_tree_symbolic(&host, "really", "RLL", 3).is_err());
        // Depth overflow is rejected: a depth-3 host adjoined at the root
        // would reach depth 4.
        let deep: Structure = "[[[Kim really] hates] symbols]".parse().unwrap();
        assert_eq!(deep.depth(), 3);
        assert!(matches!(
            adjoin_tree_symbolic(&deep, "really", "", 3),
            Err(TprError::TooDeep { depth: 4, max: 3 })
        ));
    }

    #[test]
    fn adjoin_maps_match_the_symbolic_operation_exhaustively() {
        // All hosts of depth ≤ 2 over 4 symbols (404 of them), every
        // internal site, every adjunct symbol.
        let (fs, rs) = adjoin_setup();
        let symbols = ["Kim", "really", "hates", "symbols"];
        let mut hosts: Vec<Structure> = symbols.iter().map(|s| Structure::leaf(s)).collect();
        for _ in 0..2 {
            let mut next: Vec<Structure> = symbols.iter().map(|s| Structure::leaf(s)).collect();
            for l in &hosts {
                for r in &hosts {
                    next.push(Structure::node(l.clone(), r.clone()));
                }
            }
            hosts = next;
        }
        assert_eq!(hosts.len(), 404);

        // One map per site, built before any host is examined.
        let maps: HashMap<&str, RoleMap> = ["", "L", "R", "LL", "LR", "RL", "RR"]
            .into_iter()
            .map(|site| (site, adjoin_map(site, &rs).unwrap()))
            .collect();

        let mut checked = 0usize;
        for host in &hosts {
            for site in ["", "L", "R", "LL", "LR", "RL", "RR"] {
                let internal = matches!(host.subtree(site), Some(Structure::Node(..)));
                if !internal {
                    continue;
                }
                for adjunct in symbols {
                    let want = adjoin_tree_symbolic(host, adjunct, site, 3).unwrap();
                    let tpr = encode_tree(host, &fs, &rs).unwrap();
                    let moved = maps[site].apply(&tpr).unwrap();
                    let mut out = moved;
                    let extra = bind(
                        fs.vector(adjunct).unwrap(),
                        rs.vector(&format!("{site}L")).unwrap(),
                    )
                    .unwrap();
                    for (o, a) in out.value.data_mut().iter_mut().zip(extra.product.data()) {
                        *o += a;
                    }
                    let got = decode_tree(&out, &fs, &rs).unwrap();
                    assert_eq!(got, want, "host {host}, site '{site}', adjunct {adjunct}");
                    checked += 1;
                }
            }
        }
        // 400 internal roots + 2×256 depth-2 sites at L/R of the full
        // shape + 64 each for the one-sided shapes, all times 4 adjuncts.
        assert!(checked > 1_000, "only {checked} instances checked");

        // The affine wrapper agrees with the manual map-plus-binding.
        let host: Structure = "[Kim [hates symbols]]".parse().unwrap();
        let tpr = encode_tree(&host, &fs, &rs).unwrap();
        let direct = adjoin_tree_tpr(&tpr, "really", "R", &fs, &rs).unwrap();
        let want = adjoin_tree_symbolic(&host, "really", "R", 3).unwrap();
        assert_eq!(decode_tree(&direct, &fs, &rs).unwrap(), want);
    }

    #[test]
    fn adjoin_map_rejects_impossible_sites() {
        let (_fs, rs) = adjoin_setup();
        // site·L would exceed the depth bound.
        assert!(adjoin_map("LLL", &rs).is_err());
        assert!(adjoin_map("LX", &rs).is_err());
        // Non-tree role spaces cannot be adjoined over.
        let flat = RoleSpace::positions(4, 6, 1).unwrap();
        assert!(adjoin_map("", &flat).is_err());
    }
}
