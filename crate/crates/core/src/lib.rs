//! Near-field sensing with a movable linear antenna array: Cramér-Rao
//! bounds for AoA/range estimation, antenna placement that minimizes the
//! worst-case bounds, and a MUSIC Monte-Carlo simulator that checks them.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod crb;
pub mod error;
pub mod linalg;
pub mod model;
pub mod music;
pub mod placement;
pub mod search;

pub use error::{Error, Result};
