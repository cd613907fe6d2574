//! Geometric intergenerational transfer rules on doubly-infinite income
//! streams, and a laboratory for checking allocation axioms on them.

pub mod axioms;
pub mod battery;
pub mod engine;
pub mod fixtures;
pub mod gallery;
pub mod lambda;
pub mod probes;
pub mod rule;
pub mod stream;

pub use axioms::{check_axiom, lipschitz_certificate, Axiom, AxiomVerdict, Outcome, Witness};
pub use battery::{Battery, BatteryConfig, BatteryStamp, StreamShape};
pub use engine::{
    allocate, allocate_direct, incoming_transfer, total_allocated, total_below, AllocationResult, IndexRange, RuleError,
};
pub use gallery::{gallery, independence_matrix, GalleryKind, GalleryRule, IndependenceMatrix};
pub use lambda::{Extended, Family, FamilyReport, Formula, LambdaProfile, ProfileError, TailSpec};
pub use probes::{
    pointwise_continuity_probe, sup_continuity_probe, taxicab_continuity_probe, ProbeOutcome, ProbeVerdict,
};
pub use rule::{consistency_transform, recover_lambda, GeometricRule, Rule};
pub use stream::{GeometricTail, Stream, StreamError, SupportStart};
