//! Word metrics from breadth-first enumeration of Cayley balls.

mod ball;
pub mod cache;

pub use ball::{build_ball, BallError, BallOptions, BallTable, GrowthSequence};

use crate::group::Element;

/// A length function on a group: `None` when the length cannot be resolved.
pub trait WordMetric {
    fn length(&self, x: &Element) -> Option<usize>;
}

impl<F: Fn(&Element) -> Option<usize>> WordMetric for F {
    fn length(&self, x: &Element) -> Option<usize> {
        self(x)
    }
}

/// Closed-form word length for the default ℤⁿ (ℓ¹ norm) and free-group
/// (reduced word length) markings.
pub fn closed_form_length(x: &Element) -> Option<usize> {
    match x {
        Element::Abelian(v) => Some(v.iter().map(|a| a.unsigned_abs() as usize).sum()),
        Element::Free(w) => Some(w.len()),
        _ => None,
    }
}
