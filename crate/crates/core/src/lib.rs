//! Stage-based workbench for computability-theoretic constructions.
//!
//! The crate models c.e. sets as registered stagewise enumeration programs
//! ([`ce_core`]), computable permutation groups acting on them
//! ([`perm_group`]), finite-stage approximations of the equivalence relations
//! `=^ce`, `E_0^ce`, `E_set^n` and `R^ce_G` ([`orbit_rel`]), the explicit
//! index reductions between them ([`reductions`]), and a tree-of-strategies
//! priority engine ([`priority_engine`]) running four concrete constructions
//! ([`constructions`]) with per-stage lemma checks.
//!
//! Everything is deterministic: searches are ordered breadth-first and no
//! randomness is used anywhere.

pub mod ce_core;
pub mod cli;
pub mod constructions;
pub mod orbit_rel;
pub mod pairing;
pub mod par;
pub mod perm_group;
pub mod priority_engine;
pub mod reductions;
pub mod verify;

pub use ce_core::{CeIndex, Opponent, PartialFnIndex, Registry, StageSnapshot, StageView};
pub use perm_group::{ActionClass, Budget, Letter, PermGroup, Permutation, Word};
