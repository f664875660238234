//! Tensor product representations: symbols bound to structural roles by
//! outer products, aggregated by summation, and recovered exactly through a
//! dual role basis. Includes sequence and bounded-depth tree codecs and the
//! three compositional-structure functions implemented both symbolically and
//! as constant linear maps on TPR space.

pub mod algebra;
pub mod functions;
pub mod spaces;
pub mod structure;

pub use algebra::{bind, blend_roles, decode_sequence, encode_sequence, Binding, Decoded, Tpr};
pub use spaces::{make_dual, FillerSpace, RoleSpace};
pub use structure::{decode_tree, encode_tree, Structure};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TprError {
    #[error(transparent)]
    Tensor(#[from] tprlab_tensor::TensorError),

    #[error("unknown symbol '{0}'")]
    UnknownSymbol(String),

    #[error("unknown role '{0}'")]
    UnknownRole(String),

    #[error("duplicate name '{0}'")]
    DuplicateName(String),

    #[error("table rows for '{0}' and '{1}' are identical")]
    DuplicateRow(String, String),

    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("role table is rank deficient (condition number {cond:.3e}); unbinding needs linearly independent roles")]
    RankDeficient { cond: f64 },

    #[error("dual basis verification failed: max |dual·roleᵀ − I| = {max_dev:.3e} exceeds 1e-10")]
    DualCheckFailed { max_dev: f64 },

    #[error("sequence of {len} tokens exceeds the {roles} available roles")]
    TooLong { len: usize, roles: usize },

    #[error("tree depth {depth} exceeds the role space's maximum {max}")]
    TooDeep { depth: usize, max: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("implications do not chain: first concludes '{0}' but second assumes '{1}'")]
    NotChainable(String, String),

    #[error("wrong expression shape: {0}")]
    WrongShape(String),

    #[error("invalid adjunction site '{site}': {why}")]
    InvalidSite { site: String, why: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("nothing decodable at tree path '{0}'")]
    NoStructure(String),

    #[error("blend weight {0} outside [0, 1]")]
    BadBlend(f64),
}

pub type Result<T> = std::result::Result<T, TprError>;
