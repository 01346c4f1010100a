//! Vector and field catalogs, length-aware injection plans and reflection
//! checks.
//!
//! A plan pairs fields with vectors. Every rendered payload carries a marker
//! (`MA<plan>-<field>`) in place of the `{{M}}` placeholder, so a payload
//! that later shows up in a web page can be traced back to the field it was
//! written into.

pub mod fields;
pub mod plan;
pub mod reflect;
pub mod vectors;

use thiserror::Error;

use crate::media::FieldKey;

pub use fields::{bundled_fields, load_fields, FieldCatalog, FieldDescriptor};
pub use plan::{
    apply_plan, build_plan, make_marker, FieldSelection, InjectionPlan, InjectionRecord, PlanEntry, PlanMode,
    SkipReason, SkippedEntry,
};
pub use reflect::{classify, reflect_check, ReflectStatus};
pub use vectors::{bundled_vectors, load_vectors, PayloadVector, MARKER_PLACEHOLDER};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("plan id {0:?} must be 1 to 8 ASCII letters or digits")]
    BadPlanId(String),
    #[error("field {0} is not in the field catalog for this format")]
    UnknownField(FieldKey),
    #[error("no vectors to plan with")]
    EmptyVectorSet,
}
