//! Toolkit for the Σ-fragment of the modal μ-calculus presented with the
//! cover-style modality ∇: equation systems and their ordinal approximations,
//! conjunctive normal forms, Kozen-style well-annotations, relevant parts,
//! repetition pairs and pumping on finite Kripke frames.

pub mod annotation;
pub mod corpus;
pub mod frame;
pub mod normalform;
pub mod ordinal;
pub mod pump;
pub mod semantics;
pub mod syntax;

pub use frame::{Frame, StateSet, TreeFrame};
pub use ordinal::Ordinal;
pub use syntax::{EquationSystem, EquationalFormula, Formula, FormulaSet};
