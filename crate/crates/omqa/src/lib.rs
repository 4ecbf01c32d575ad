//! Certain-answer computation over disjunctive embedded dependencies:
//! branching chase, locality checking, first-order rewriting, hitting-set
//! universal models, and successor-encoding rule generators.

pub mod chase;
pub mod core;
pub mod diag;
pub mod hom;
pub mod locality;
pub mod succgen;
pub mod syntax;
pub mod umodels;
