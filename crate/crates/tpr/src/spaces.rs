//! Filler and role vector spaces. Roles carry a dual basis so that binding
//! is exactly invertible: `dual_i · role_j = δ_ij`.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::json;
use tprlab_tensor::params::ParamSet;
use tprlab_tensor::rng::stream;
use tprlab_tensor::{checkpoint, Tensor};

use crate::{Result, TprError};

/// Independent standard-normal entries, seeded per (seed, name) so different
/// tables drawn from one seed do not share values.
fn gaussian_rows(n: usize, d: usize, seed: u64, name: &str) -> Tensor<f64> {
    let mut rng = stream(seed, name);
    let data: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    Tensor::new(vec![n, d], data).expect("shape matches data length")
}

/// Modified Gram–Schmidt with one re-orthogonalization pass. Requires
/// n ≤ d and (numerically) independent rows.
fn orthonormalize(table: &mut Tensor<f64>) -> Result<()> {
    let (n, d) = (table.shape()[0], table.shape()[1]);
    let rows = table.data_mut();
    for i in 0..n {
        for _ in 0..2 {
            for j in 0..i {
                let dot: f64 = (0..d).map(|k| rows[i * d + k] * rows[j * d + k]).sum();
                for k in 0..d {
                    rows[i * d + k] -= dot * rows[j * d + k];
                }
            }
        }
        let norm: f64 = (0..d)
            .map(|k| rows[i * d + k] * rows[i * d + k])
            .sum::<f64>()
            .sqrt();
        if norm < 1e-10 {
            return Err(TprError::RankDeficient { cond: f64::INFINITY });
        }
        for k in 0..d {
            rows[i * d + k] /= norm;
        }
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations. Small and
/// deterministic; plenty for the ≤ ~100 roles used here.
fn jacobi_eigenvalues(g: &[f64], n: usize) -> Vec<f64> {
    let mut a = g.to_vec();
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Builds the dual basis `(R Rᵀ)⁻¹ R` of a role table `R` (n × d), the
/// least-squares left inverse, so `dual · Rᵀ = I`. Rejects rank-deficient
/// tables with the measured condition number, and verifies the δ property to
/// 1e-10 before returning.
pub fn make_dual(table: &Tensor<f64>) -> Result<Tensor<f64>> {
    let shape = table.shape();
    if shape.len() != 2 {
        return Err(TprError::Dimension {
            what: "role table rank",
            expected: 2,
            got: shape.len(),
        });
    }
    let (n, d) = (shape[0], shape[1]);
    if n > d {
        // More roles than dimensions cannot be linearly independent.
        return Err(TprError::RankDeficient { cond: f64::INFINITY });
    }
    let r = table.data();
    if r.iter().any(|x| !x.is_finite()) {
        return Err(TprError::NonFinite("role table"));
    }

    // Gram matrix G = R Rᵀ.
    let mut g = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            g[i * n + j] = (0..d).map(|k| r[i * d + k] * r[j * d + k]).sum();
        }
    }
    let mut eigs = jacobi_eigenvalues(&g, n);
    eigs.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    let (lo, hi) = (eigs[0], eigs[n - 1]);
    if lo <= hi * 1e-12 || lo <= 0.0 {
        let cond = if lo > 0.0 {
            (hi / lo).sqrt()
        } else {
            f64::INFINITY
        };
        return Err(TprError::RankDeficient { cond });
    }

    // Solve G X = R by Gaussian elimination with partial pivoting.
    let mut aug = vec![0.0f64; n * (n + d)];
    let w = n + d;
    for i in 0..n {
        aug[i * w..i * w + n].copy_from_slice(&g[i * n..(i + 1) * n]);
        aug[i * w + n..(i + 1) * w].copy_from_slice(&r[i * d..(i + 1) * d]);
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| {
                aug[a * w + col]
                    .abs()
                    .partial_cmp(&aug[b * w + col].abs())
                    .expect("finite pivots")
            })
            .expect("non-empty range");
        if aug[pivot_row * w + col].abs() < 1e-300 {
            return Err(TprError::RankDeficient { cond: f64::INFINITY });
        }
        if pivot_row != col {
            for k in 0..w {
                aug.swap(col * w + k, pivot_row * w + k);
            }
        }
        let pivot = aug[col * w + col];
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = aug[row * w + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..w {
                aug[row * w + k] -= factor * aug[col * w + k];
            }
        }
    }
    let mut dual = vec![0.0f64; n * d];
    for i in 0..n {
        let pivot = aug[i * w + i];
        for k in 0..d {
            dual[i * d + k] = aug[i * w + n + k] / pivot;
        }
    }

    // δ check: dual · roleᵀ must be the identity to 1e-10.
    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let dot: f64 = (0..d).map(|k| dual[i * d + k] * r[j * d + k]).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            max_dev = max_dev.max((dot - target).abs());
        }
    }
    if max_dev > 1e-10 {
        return Err(TprError::DualCheckFailed { max_dev });
    }
    Tensor::new(vec![n, d], dual).map_err(Into::into)
}

fn check_unique(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(TprError::DuplicateName(n.clone()));
        }
    }
    Ok(())
}

/// Symbol vocabulary with one embedding row per symbol.
#[derive(Clone, Debug)]
pub struct FillerSpace {
    symbols: Vec<String>,
    table: Tensor<f64>,
}

impl FillerSpace {
    pub fn new(symbols: Vec<String>, table: Tensor<f64>) -> Result<Self> {
        let shape = table.shape();
        if shape.len() != 2 || shape[0] != symbols.len() {
            return Err(TprError::Dimension {
                what: "filler table rows",
                expected: symbols.len(),
                got: if shape.is_empty() { 0 } else { shape[0] },
            });
        }
        if table.data().iter().any(|x| !x.is_finite()) {
            return Err(TprError::NonFinite("filler table"));
        }
        check_unique(&symbols)?;
        let d = shape[1];
        for i in 0..symbols.len() {
            for j in i + 1..symbols.len() {
                if table.data()[i * d..(i + 1) * d] == table.data()[j * d..(j + 1) * d] {
                    return Err(TprError::DuplicateRow(
                        symbols[i].clone(),
                        symbols[j].clone(),
                    ));
                }
            }
        }
        Ok(Self { symbols, table })
    }

    /// Random Gaussian rows; `orthonormal` additionally makes the rows an
    /// orthonormal set (requires as many dimensions as symbols).
    pub fn random<S: AsRef<str>>(
        symbols: &[S],
        dim_f: usize,
        seed: u64,
        orthonormal: bool,
    ) -> Result<Self> {
        let names: Vec<String> = symbols.iter().map(|s| s.as_ref().to_string()).collect();
        let mut table = gaussian_rows(names.len(), dim_f, seed, "filler-table");
        if orthonormal {
            if names.len() > dim_f {
                return Err(TprError::Dimension {
                    what: "orthonormal filler dimensions",
                    expected: names.len(),
                    got: dim_f,
                });
            }
            orthonormalize(&mut table)?;
        }
        Self::new(names, table)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn dim_f(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn table(&self) -> &Tensor<f64> {
        &self.table
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| TprError::UnknownSymbol(name.to_string()))
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        let i = self.index_of(name)?;
        let d = self.dim_f();
        Ok(&self.table.data()[i * d..(i + 1) * d])
    }
}

/// Role vocabulary with embedding rows and their dual basis. `tree_depth`
/// is set when the roles are tree paths, bounding encodable trees.
#[derive(Clone, Debug)]
pub struct RoleSpace {
    roles: Vec<String>,
    table: Tensor<f64>,
    dual: Tensor<f64>,
    tree_depth: Option<usize>,
}

impl RoleSpace {
    pub fn new(roles: Vec<String>, table: Tensor<f64>) -> Result<Self> {
        let shape = table.shape();
        if shape.len() != 2 || shape[0] != roles.len() {
            return Err(TprError::Dimension {
                what: "role table rows",
                expected: roles.len(),
                got: if shape.is_empty() { 0 } else { shape[0] },
            });
        }
        check_unique(&roles)?;
        let dual = make_dual(&table)?;
        Ok(Self {
            roles,
            table,
            dual,
            tree_depth: None,
        })
    }

    /// Random rows, orthonormalized when the dimension allows it (then the
    /// dual equals the table itself up to rounding); raw Gaussian rows are
    /// independent with probability one otherwise.
    pub fn random<S: AsRef<str>>(roles: &[S], dim_r: usize, seed: u64) -> Result<Self> {
        let names: Vec<String> = roles.iter().map(|s| s.as_ref().to_string()).collect();
        let mut table = gaussian_rows(names.len(), dim_r, seed, "role-table");
        if names.len() <= dim_r {
            orthonormalize(&mut table)?;
        }
        Self::new(names, table)
    }

    /// Positional roles named "1".."n".
    pub fn positions(n: usize, dim_r: usize, seed: u64) -> Result<Self> {
        let names: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
        Self::random(&names, dim_r, seed)
    }

    /// One role per left/right tree path of length ≤ `depth`, breadth-first:
    /// "", "L", "R", "LL", ... The empty path addresses the root.
    pub fn tree_positions(depth: usize, dim_r: usize, seed: u64) -> Result<Self> {
        let mut names = vec![String::new()];
        let mut frontier = vec![String::new()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for p in &frontier {
                for c in ["L", "R"] {
                    let child = format!("{p}{c}");
                    names.push(child.clone());
                    next.push(child);
                }
            }
            frontier = next;
        }
        let mut space = Self::random(&names, dim_r, seed)?;
        space.tree_depth = Some(depth);
        Ok(space)
    }

    pub fn roles(&self) -> &[String] {
        &self.roles
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn dim_r(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn table(&self) -> &Tensor<f64> {
        &self.table
    }

    pub fn dual_table(&self) -> &Tensor<f64> {
        &self.dual
    }

    pub fn tree_depth(&self) -> Option<usize> {
        self.tree_depth
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.roles
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| TprError::UnknownRole(name.to_string()))
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        let i = self.index_of(name)?;
        let d = self.dim_r();
        Ok(&self.table.data()[i * d..(i + 1) * d])
    }

    pub fn dual(&self, name: &str) -> Result<&[f64]> {
        let i = self.index_of(name)?;
        let d = self.dim_r();
        Ok(&self.dual.data()[i * d..(i + 1) * d])
    }
}

/// Writes both spaces into one checkpoint file; the dual basis is recomputed
/// on load (deterministically, so it round-trips bit-exactly).
pub fn save_spaces(path: &Path, filler: &FillerSpace, roles: &RoleSpace) -> Result<()> {
    let mut ps = ParamSet::<f64>::new();
    ps.add("filler.table", filler.table.clone(), false)?;
    ps.add("role.table", roles.table.clone(), false)?;
    let header = json!({
        "kind": "tpr-spaces",
        "symbols": filler.symbols,
        "roles": roles.roles,
        "tree_depth": roles.tree_depth,
    });
    checkpoint::save(path, &header, &ps)?;
    Ok(())
}

pub fn load_spaces(path: &Path) -> Result<(FillerSpace, RoleSpace)> {
    let (header, ps) = checkpoint::load::<f64>(path)?;
    let get_names = |key: &str| -> Result<Vec<String>> {
        header.model[key]
            .as_array()
            .ok_or_else(|| TprError::Parse(format!("missing '{key}' in spaces header")))?
            .iter()
            .map(|v| {
                v.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| TprError::Parse(format!("non-string entry in '{key}'")))
            })
            .collect()
    };
    let filler = FillerSpace::new(get_names("symbols")?, ps.by_name("filler.table")?.value.clone())?;
    let mut roles = RoleSpace::new(get_names("roles")?, ps.by_name("role.table")?.value.clone())?;
    roles.tree_depth = header.model["tree_depth"].as_u64().map(|d| d as usize);
    Ok((filler, roles))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_roles_have_their_own_dual() {
        let rs = RoleSpace::random(&["L", "R"], 4, 1).unwrap();
        for (d, t) in rs.dual.data().iter().zip(rs.table.data()) {
            assert!((d - t).abs() < 1e-10, "{d} vs {t}");
        }
    }

    #[test]
    fn random_rectangular_table_satisfies_the_delta_property() {
        // 5 roles in 8 dimensions, raw Gaussian (not orthonormalized by
        // hand): build the dual directly and verify δ to 1e-10.
        let table = gaussian_rows(5, 8, 42, "test-roles");
        let dual = make_dual(&table).unwrap();
        let (n, d) = (5, 8);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..d)
                    .map(|k| dual.data()[i * d + k] * table.data()[j * d + k])
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10, "δ[{i}][{j}] = {dot}");
            }
        }
    }

    #[test]
    fn duplicated_role_row_is_rejected_with_a_condition_number() {
        let row: Vec<f64> = vec![0.3, -1.2, 0.7, 2.0];
        let mut data = row.clone();
        data.extend_from_slice(&row);
        let table = Tensor::new(vec![2, 4], data).unwrap();
        match make_dual(&table) {
            Err(TprError::RankDeficient { cond }) => assert!(cond > 1e6 || cond.is_infinite()),
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn more_roles_than_dimensions_is_rank_deficient() {
        let table = gaussian_rows(5, 3, 7, "over");
        assert!(matches!(
            make_dual(&table),
            Err(TprError::RankDeficient { .. })
        ));
    }

    #[test]
    fn jacobi_finds_the_spectrum_of_a_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let mut eig = jacobi_eigenvalues(&[2.0, 1.0, 1.0, 2.0], 2);
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((eig[0] - 1.0).abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn filler_space_rejects_duplicate_rows_and_names() {
        let table = Tensor::new(vec![2, 2], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(
            FillerSpace::new(vec!["a".into(), "b".into()], table),
            Err(TprError::DuplicateRow(..))
        ));
        let table = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            FillerSpace::new(vec!["a".into(), "a".into()], table),
            Err(TprError::DuplicateName(..))
        ));
    }

    #[test]
    fn orthonormal_fillers_require_enough_dimensions() {
        assert!(FillerSpace::random(&["a", "b", "c"], 2, 0, true).is_err());
        let fs = FillerSpace::random(&["a", "b", "c"], 3, 0, true).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3)
                    .map(|k| fs.table.data()[i * 3 + k] * fs.table.data()[j * 3 + k])
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tree_position_roles_enumerate_paths_breadth_first() {
        let rs = RoleSpace::tree_positions(2, 8, 3).unwrap();
        assert_eq!(
            rs.roles(),
            &["", "L", "R", "LL", "LR", "RL", "RR"]
                .map(String::from)
        );
        assert_eq!(rs.tree_depth(), Some(2));
    }

    #[test]
    fn spaces_round_trip_through_a_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spaces.bin");
        let fs = FillerSpace::random(&["un", "lock", "able"], 6, 9, true).unwrap();
        let rs = RoleSpace::tree_positions(2, 8, 9).unwrap();
        save_spaces(&path, &fs, &rs).unwrap();
        let (fs2, rs2) = load_spaces(&path).unwrap();
        assert_eq!(fs.symbols(), fs2.symbols());
        assert_eq!(fs.table.data(), fs2.table.data());
        assert_eq!(rs.roles(), rs2.roles());
        assert_eq!(rs.table.data(), rs2.table.data());
        assert_eq!(rs.dual.data(), rs2.dual.data());
        assert_eq!(rs2.tree_depth(), Some(2));
    }
}
