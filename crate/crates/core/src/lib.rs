//! Atomistic materials screening engine: periodic structures, trainable
//! interatomic potentials with ensemble uncertainty, structure relaxation,
//! phonon thermodynamics, mechanical properties, molecular dynamics
//! diffusivity, and the active-learning machinery tying them together.

pub mod active;
pub mod consts;
pub mod element;
pub mod explore;
pub mod fdcheck;
pub mod fit;
pub mod io;
pub mod md;
pub mod mech;
pub mod neighbor;
pub mod phonon;
pub mod potential;
pub mod relax;
pub mod structure;
