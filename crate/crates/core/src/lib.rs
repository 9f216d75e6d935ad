pub mod expr;
pub mod invariants;
pub mod numeric;
pub mod opspec;
pub mod partition;
pub mod patterns;
pub mod pme;
pub mod report;
pub mod rewrite;
pub mod tasks;
