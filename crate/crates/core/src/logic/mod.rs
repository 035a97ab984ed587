//! Input patterns, input schemes, Boolean functions and gates.
//!
//! Spin convention: bit value 0 is spin +1, bit value 1 is spin −1 ("True").
//! Pattern indices are 0-based in this API; file outputs add one.

pub(crate) mod function;
pub(crate) mod gate;
mod patterns;
mod scheme;

pub use function::{BooleanFunction, MAX_ENUMERATION_ARITY, MAX_FUNCTION_ARITY};
pub use gate::{ComposePlan, Gate, GateProperties, MAX_FAN_IN};
pub use patterns::{enumerate_patterns, pattern_spin, PatternSet, MAX_PATTERN_ARITY};
pub use scheme::InputScheme;
