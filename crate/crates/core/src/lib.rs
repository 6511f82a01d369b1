//! Quarklet frames on the interval: splines, filters, boundary adaptation, sequence norms and tensor estimates.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity, clippy::should_implement_trait, clippy::too_many_arguments)]
pub mod error;
pub mod quadrature;
pub mod spline;
pub mod shift_invariant;
pub mod interval;
pub mod sequence_norms;
pub mod oracle;
pub mod expansion;
pub mod tensor;
