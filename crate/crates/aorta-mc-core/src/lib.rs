//! Core semantics for organization-aware multi-agent systems plus an
//! explicit-state LTL model checker over their interleaving graphs.
//!
//! The crate is `no_std` (alloc only); everything here is a pure function of
//! its inputs. File formats, the CLI, and multi-worker exploration live in
//! the companion `aorta-mc` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod aorta;
pub mod apl;
pub mod buchi;
pub mod checker;
pub mod logic;
pub mod psl;
pub mod reference;
pub mod runtime;

#[cfg(test)]
pub(crate) mod testutil;
