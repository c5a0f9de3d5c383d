//! Scalar deformations of Lagrangians.
//!
//! Given a second-order system written as forced Lagrange equations
//! `δ_S L = σ`, decide whether some `Φ: ℝ → ℝ` makes the same dynamics the
//! unforced Euler-Lagrange equations of `Φ(L)`, build `Φ`, and check the
//! result pointwise and along integrated trajectories.

pub mod expr;
pub mod geometry;
pub mod theorem;
pub mod deform;
pub mod dynamics;
pub mod cli;
