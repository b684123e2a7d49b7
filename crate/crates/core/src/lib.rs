//! Local quantum thermal susceptibility of locally interacting lattice spin
//! models, computed by exact diagonalization, together with the closed-form
//! locality bounds it is certified against.

pub mod bounds;
pub mod harness;
pub mod lattice;
pub mod operators;
pub mod thermometry;
