// Copyright 2026 HamForge Contributors
// SPDX-License-Identifier: Apache-2.0

//! Gradient-filtered coupling engineering for dipolar spin networks.
//!
//! Gradient-tagged spin networks are sculpted into a target coupling
//! topology by alternating free evolution under a field gradient with
//! double-quantum mixing blocks. The cycle-to-cycle gradient phase acts as a
//! time-domain Bragg grating that removes unwanted couplings, while the
//! mixing times weight the surviving ones. The crate synthesizes such
//! sequences and checks them by exact unitary simulation.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod dynamics;
pub mod engineering;
pub mod io;
pub mod lattice;
pub mod openg;
pub mod ops;

pub use error::{Error, Result};
