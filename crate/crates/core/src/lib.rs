//! Exact construction of lower-bounded generalized twisted modules for free-field vertex
//! superalgebras, together with a verifier for the twisted vertex operator axioms.

pub mod algebra;
pub mod cyclo;
pub mod error;
pub mod field;
pub mod fock;
pub mod induced;
pub mod instances;
pub mod linalg;
pub mod locality;
pub mod module;
pub mod rational;
pub mod report;
pub mod scalar;
pub mod seed;
pub mod series;
pub mod twisted;
pub mod universal;

pub use cyclo::Cyclo;
pub use error::{AlgebraError, Error, ModuleError, ParseError, ScalarError, SeriesError};
pub use field::Coeff;
pub use rational::Rational;
pub use scalar::{scalar_add, scalar_inverse, scalar_mul, Scalar};
pub use linalg::{RowSpace, SparseMat, SparseVec};
pub use series::{LogSeries, MultiSeries, NilpotentOp, Var};
pub use algebra::{builtin, AlgebraSpec, GeneratorInfo};
pub use module::{SlotKey, TruncatedModule};
pub use report::{CheckResult, Report};
