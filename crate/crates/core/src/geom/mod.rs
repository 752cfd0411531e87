//! Predicate vocabulary, fact storage, scene sampling and side-condition checks.

mod point;
mod predicate;
mod sample;
mod store;
mod witness;

pub use point::{circumcenter, is_circle_id, orient, Point, PointLabel, MAX_LABEL_LEN};
pub use predicate::{canonicalize, Arity, Predicate, PredicateKind};
pub use sample::{sample_scene, Construction, ConstructionStep, SampleBudget, SampledScene};
pub use store::{CyclicSet, FactStore, Pattern, Substitution, Term};
pub use witness::{check_nondegenerate, relative_area, Witness, NCOLL_AREA_TOL, NPARA_ANGLE_TOL};

pub(crate) use predicate::parse_ratio;
pub(crate) use store::{Binding, CTerm, CompiledPattern, Support};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("invalid point label {0:?}")]
    InvalidLabel(String),
    #[error("invalid predicate: {0}")]
    InvalidPredicate(String),
    #[error("cannot parse predicate {0:?}")]
    ParsePredicate(String),
    #[error("unknown point {0}")]
    UnknownPoint(String),
    #[error("invalid sampling budget: {0}")]
    InvalidBudget(String),
    #[error("scene sampling failed after {0} degenerate draws")]
    SamplingFailed(usize),
}
