//! Compiler from ETR-INV formulas to two-layer neural-network training
//! instances, with exact witness verification.
//!
//! The pipeline is
//!
//! ```text
//! EtrInvFormula --lower_to_combined--> CombinedFormula
//!     --compile_restricted--> restricted instance (fixed weights, `?` targets)
//!     --remove_fixed_weights / add_bias_anchor / remove_question_marks--> plain instance
//! ```
//!
//! and a formula has a real solution exactly when the compiled instance has
//! a zero-cost witness. [`witness`] converts between the two directions.
//!
//! ```
//! use etrnn::formula::{parse_etr_inv, Assignment};
//! use etrnn::lowering::compile_full;
//! use etrnn::witness::{extract_assignment, synthesize_witness};
//! use etrnn::eval::verify_witness;
//! use etrnn::scalar::Scalar;
//!
//! let f = parse_etr_inv("x + y = z").unwrap();
//! let (inst, map) = compile_full(&f).unwrap();
//! let a = Assignment::from_values([1, 2, 3].map(Scalar::integer));
//! let w = synthesize_witness(&inst, &map, &a, 0.0).unwrap();
//! assert!(verify_witness(&inst, &w, 0.0).unwrap().accepted);
//! assert_eq!(extract_assignment(&inst, &w, &map).unwrap(), a);
//! ```

pub mod cli;
pub mod eval;
pub mod formula;
pub mod gadgets;
pub mod inveq;
pub mod lowering;
pub mod network;
pub mod scalar;
pub mod solver;
pub mod witness;

pub use eval::{verify_witness, Witness};
pub use formula::{parse_etr_inv, Assignment, EtrInvFormula};
pub use lowering::{compile_full, CompilationMap};
pub use network::TrainingInstance;
pub use scalar::{Rational, Scalar};
