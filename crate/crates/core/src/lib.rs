//! Possible-worlds interpretation of a small imperative language.
//!
//! Pipeline: user program -> event program -> grounded declarations -> event network
//! -> exact or approximate target probabilities.

pub mod compile;
pub mod datagen;
pub mod dataset;
pub mod distributed;
pub mod eid;
pub mod eprog;
pub mod error;
pub mod expr;
pub mod ground;
pub mod interp;
pub mod oracle;
pub mod lang;
pub mod mask;
pub mod network;
pub mod pipeline;
pub mod translate;
pub mod value;

pub use eid::{EidPat, IExpr};
pub use eprog::{parse_event_program, EventProgram, Item, TExpr};
pub use error::{Error, ParseError, Pos};
pub use expr::{eval_cval, eval_event, world_probability, Decl, EventExpr, CVal, Expr, Valuation, VarTable};
pub use value::{CmpOp, Ty, Value};
