//! Guided data repair over conditional functional dependencies.
//!
//! The engine finds tuples that violate a set of CFDs, proposes single-cell
//! updates for them, groups the proposals by `(attribute, value)` and ranks
//! the groups by expected quality gain. Feedback on a group trains a
//! per-attribute committee of decision trees, which can then decide the rest
//! of the group on the user's behalf.
//!
//! ```
//! use gdr_core::fixtures;
//! use gdr_core::violation::detect_all;
//!
//! let (data, rules) = fixtures::figure1();
//! let (dirty, _index) = detect_all(&data, rules);
//! assert_eq!(dirty.len(), 8);
//! ```

pub mod consistency;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod generator;
pub mod learner;
pub mod model;
pub mod orchestrator;
pub mod ranking;
pub mod similarity;
pub mod violation;

pub use error::{Error, Result};
pub use model::{parse_rules, AttrId, CfdRule, Dataset, PatternValue, RuleKind, RuleSet, Schema, Tuple, TupleId};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/rules.md")]
    mod rules {}
    #[doc = include_str!("../../../book/src/updates.md")]
    mod updates {}
    #[doc = include_str!("../../../book/src/ranking.md")]
    mod ranking {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
}
