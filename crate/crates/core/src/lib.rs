//! Mixed-integer bilinear optimization toolkit for the 2-D bookshelf
//! insertion problem.
//!
//! A shelf of width `W` and height `H` holds `N−1` rectangular books; one
//! more book must be inserted while moving the stored books as little as
//! possible. Each book is upright, laid flat, or leaning, and collision
//! avoidance between book pairs is certified by separating planes. The
//! resulting program has mixed-integer convex constraints plus bilinear
//! ones (rotation orthogonality and plane/vertex products).
//!
//! The crate provides four interchangeable solve pipelines over one model:
//!
//! - **MPCC**: binaries become continuous with complementarity constraints
//!   z(1−z) = 0 and the smooth program is solved by an augmented-Lagrangian
//!   NLP solver ([`nlp`]), optionally warm-started from data.
//! - **MICP**: bilinear constraints are compiled into per-cell McCormick
//!   envelopes activated by a log₂N disjunctive encoding ([`envelope`]) and
//!   solved by branch-and-bound over QP relaxations ([`bnb`], [`qp`]).
//! - **Convex restriction**: a learned integer strategy fixes every binary
//!   and the remaining QP is solved directly ([`learn`], [`qp`]).
//! - **Consensus ADMM**: a mode-only MIQP copy and a bilinear NLP copy are
//!   alternated with dual/weight updates ([`admm`]).
//!
//! [`learn`] holds the data-driven layer (dataset store, KNN retrieval,
//! DBSCAN + random-forest cluster models, reduced integer sets) and
//! [`bench`] the benchmark harness comparing every pipeline on randomly
//! generated instances.

pub mod admm;
pub mod bench;
pub mod bnb;
pub mod envelope;
pub mod geom;
pub mod ir;
pub mod learn;
pub mod model;
pub mod nlp;
pub mod qp;

pub use ir::{ConvexProgram, MibpProgram, NlpProgram, Variable};
pub use model::{BookshelfSolution, ProblemInstance, ShelfSpec};
