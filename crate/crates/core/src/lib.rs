//! Joint object matching toolkit.
//!
//! Finds collections of pairwise partial maps between objects that are
//! mutually cycle-consistent and close to noisy input maps. The crate
//! provides:
//!
//! * an ILP/LP formulation of the matching problem ([`relaxation`]),
//! * a built-in sparse revised simplex solver with primal and dual values
//!   ([`lp`]),
//! * consistency cuts with exact min-cut separation ([`cuts`]),
//! * end-to-end solve pipelines: basic LP, double LP, multi-round cutting
//!   planes ([`driver`]),
//! * synthetic instance generation under the random corruption model
//!   ([`synth`]),
//! * a dual-certificate recovery analyzer and recovery-threshold solver
//!   ([`certificate`]),
//! * exact (rational/integer arithmetic) polytope verification machinery:
//!   vertex enumeration, dimension and facet checks, hull membership, and a
//!   brute-force ILP oracle ([`polytope_lab`]).
//!
//! With the default `parallel` feature the embarrassingly parallel parts
//! (separation scans, sweeps, threshold grids) run on rayon; without it the
//! same entry points fall back to sequential loops.

pub mod certificate;
pub mod cuts;
pub mod driver;
pub mod hungarian;
pub mod instance;
pub mod lp;
pub mod mincut;
pub(crate) mod par;
pub mod polytope_lab;
pub mod rational;
pub mod relaxation;
pub mod synth;

pub use instance::{BlockMatrix, CostTensor, Instance, ObjectConfig, SolutionMaps};
