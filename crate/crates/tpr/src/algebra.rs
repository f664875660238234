//! Binding, aggregation, unbinding, and blends — plus the sequence codec.
//!
//! A binding is the outer product of a filler vector and a role vector: the
//! entry at row i, column j is exactly `filler[i] * role[j]`. A TPR is the
//! sum of bindings; unbinding multiplies by a dual role vector to recover
//! the bound filler exactly.

use tprlab_tensor::Tensor;

use crate::spaces::{FillerSpace, RoleSpace};
use crate::{Result, TprError};

/// One filler:role pair with its outer-product matrix.
#[derive(Clone, Debug)]
pub struct Binding {
    pub filler: Vec<f64>,
    pub role: Vec<f64>,
    pub product: Tensor<f64>,
}

/// `product[i][j] = filler[i] * role[j]`, bilinear in both arguments.
pub fn bind(filler: &[f64], role: &[f64]) -> Result<Binding> {
    if filler.iter().chain(role).any(|x| !x.is_finite()) {
        return Err(TprError::NonFinite("bind input"));
    }
    let mut data = Vec::with_capacity(filler.len() * role.len());
    for &f in filler {
        for &r in role {
            data.push(f * r);
        }
    }
    Ok(Binding {
        filler: filler.to_vec(),
        role: role.to_vec(),
        product: Tensor::new(vec![filler.len(), role.len()], data)?,
    })
}

/// A tensor product representation: the (dim_f × dim_r) sum of bindings.
/// `provenance` remembers the bindings when the TPR was built from them.
#[derive(Clone, Debug)]
pub struct Tpr {
    pub value: Tensor<f64>,
    pub provenance: Option<Vec<Binding>>,
}

impl Tpr {
    /// Sums the bindings into a TPR. The shape argument makes the empty
    /// aggregate well-defined and is cross-checked against every binding.
    pub fn aggregate(bindings: Vec<Binding>, dim_f: usize, dim_r: usize) -> Result<Self> {
        let mut value = Tensor::<f64>::zeros(&[dim_f, dim_r]);
        for b in &bindings {
            if b.product.shape() != [dim_f, dim_r] {
                return Err(TprError::Dimension {
                    what: "binding rows",
                    expected: dim_f,
                    got: b.product.shape()[0],
                });
            }
            for (v, p) in value.data_mut().iter_mut().zip(b.product.data()) {
                *v += p;
            }
        }
        Ok(Self {
            value,
            provenance: Some(bindings),
        })
    }

    /// Wraps an existing matrix (for example a map output) with no
    /// provenance.
    pub fn from_value(value: Tensor<f64>) -> Result<Self> {
        if value.shape().len() != 2 {
            return Err(TprError::Dimension {
                what: "TPR rank",
                expected: 2,
                got: value.shape().len(),
            });
        }
        Ok(Self {
            value,
            provenance: None,
        })
    }

    pub fn dim_f(&self) -> usize {
        self.value.shape()[0]
    }

    pub fn dim_r(&self) -> usize {
        self.value.shape()[1]
    }

    /// Checks the provenance invariant: value == Σ products within `tol`.
    pub fn provenance_consistent(&self, tol: f64) -> bool {
        let Some(bindings) = &self.provenance else {
            return true;
        };
        let mut sum = vec![0.0f64; self.value.numel()];
        for b in bindings {
            for (s, p) in sum.iter_mut().zip(b.product.data()) {
                *s += p;
            }
        }
        sum.iter()
            .zip(self.value.data())
            .all(|(s, v)| (s - v).abs() <= tol)
    }

    /// Recovers the filler bound to `role_name` by multiplying with the dual
    /// role vector. Roles bound nowhere give (numerically) the zero vector.
    pub fn unbind(&self, role_name: &str, roles: &RoleSpace) -> Result<Vec<f64>> {
        let dual = roles.dual(role_name)?;
        if dual.len() != self.dim_r() {
            return Err(TprError::Dimension {
                what: "unbind role width",
                expected: self.dim_r(),
                got: dual.len(),
            });
        }
        let data = self.value.data();
        let (df, dr) = (self.dim_f(), self.dim_r());
        let mut out = vec![0.0f64; df];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..dr).map(|j| data[i * dr + j] * dual[j]).sum();
        }
        Ok(out)
    }
}

/// `(1 − alpha)·r_a + alpha·r_b`: the continuous role between two discrete
/// ones. Unbinding a TPR built on a blend returns correspondingly scaled
/// fillers (the blend is not re-normalized).
pub fn blend_roles(r_a: &[f64], r_b: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TprError::BadBlend(alpha));
    }
    if r_a.len() != r_b.len() {
        return Err(TprError::Dimension {
            what: "blend widths",
            expected: r_a.len(),
            got: r_b.len(),
        });
    }
    Ok(r_a
        .iter()
        .zip(r_b)
        .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
        .collect())
}

/// Σ_i bind(filler(token_i), role_i), using the role space's first
/// `tokens.len()` roles in order.
pub fn encode_sequence(
    tokens: &[&str],
    fillers: &FillerSpace,
    roles: &RoleSpace,
) -> Result<Tpr> {
    if tokens.len() > roles.len() {
        return Err(TprError::TooLong {
            len: tokens.len(),
            roles: roles.len(),
        });
    }
    let mut bindings = Vec::with_capacity(tokens.len());
    for (i, tok) in tokens.iter().enumerate() {
        let f = fillers.vector(tok)?;
        let r = roles.vector(&roles.roles()[i].clone())?;
        bindings.push(bind(f, r)?);
    }
    Tpr::aggregate(bindings, fillers.dim_f(), roles.dim_r())
}

/// Cosine similarity, with zero vectors scoring 0 against everything.
fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na < 1e-12 || nb < 1e-12 {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

/// Why a decoded position deserves a second look.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdvisoryReason {
    /// Best cosine below 0.5 — nothing in the vocabulary is close.
    LowConfidence,
    /// Top two cosines within 0.05 — several symbols fit about equally,
    /// as happens when fillers were blended at one role.
    Ambiguous,
}

/// Advisory channel entry for one position, carrying the full similarity
/// ranking so callers can inspect the blend.
#[derive(Clone, Debug)]
pub struct Advisory {
    pub position: usize,
    pub reason: AdvisoryReason,
    pub best_cosine: f64,
    /// (symbol, cosine) sorted best-first.
    pub ranking: Vec<(String, f64)>,
}

/// Decode result: committed tokens plus advisories for shaky positions.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub tokens: Vec<String>,
    pub advisories: Vec<Advisory>,
}

/// Per position: unbind, rank vocabulary rows by cosine similarity, commit
/// the best (ties broken by lowest vocabulary index — ranking is
/// stable-sorted on a vocabulary-ordered list). Positions whose best cosine
/// is below 0.5, or whose top two are within 0.05, get an advisory.
pub fn decode_sequence(
    tpr: &Tpr,
    fillers: &FillerSpace,
    roles: &RoleSpace,
    length: usize,
) -> Result<Decoded> {
    if length > roles.len() {
        return Err(TprError::TooLong {
            len: length,
            roles: roles.len(),
        });
    }
    let mut tokens = Vec::with_capacity(length);
    let mut advisories = Vec::new();
    for pos in 0..length {
        let recovered = tpr.unbind(&roles.roles()[pos].clone(), roles)?;
        let (name, advisory) = rank_fillers(&recovered, fillers, pos);
        tokens.push(name);
        advisories.extend(advisory);
    }
    Ok(Decoded { tokens, advisories })
}

/// Shared ranking logic for sequence and tree decoding.
pub(crate) fn rank_fillers(
    recovered: &[f64],
    fillers: &FillerSpace,
    position: usize,
) -> (String, Option<Advisory>) {
    let d = fillers.dim_f();
    let mut ranking: Vec<(String, f64)> = fillers
        .symbols()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                s.clone(),
                cosine(recovered, &fillers.table().data()[i * d..(i + 1) * d]),
            )
        })
        .collect();
    // Stable sort on a vocabulary-ordered list: ties keep the lowest index.
    ranking.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite cosines"));
    let best = ranking[0].clone();
    let margin = if ranking.len() > 1 {
        best.1 - ranking[1].1
    } else {
        f64::INFINITY
    };
    let reason = if best.1 < 0.5 {
        Some(AdvisoryReason::LowConfidence)
    } else if margin < 0.05 {
        Some(AdvisoryReason::Ambiguous)
    } else {
        None
    };
    let advisory = reason.map(|reason| Advisory {
        position,
        reason,
        best_cosine: best.1,
        ranking: ranking.clone(),
    });
    (best.0, advisory)
}
