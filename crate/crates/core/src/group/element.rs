use std::fmt;

use num_bigint::BigInt;

/// A group element in canonical form.
///
/// Every variant has exactly one representation per group element, so the
/// derived `Eq`, `Hash` and `Ord` are equality, hashing and ordering of group
/// elements. Which variant is meaningful is decided by the owning
/// [`GroupKind`](super::GroupKind).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    /// Integer vector in ℤⁿ.
    Abelian(Vec<i64>),
    /// Freely reduced word. Letter `i + 1` is free generator `i`, `-(i + 1)` its inverse.
    Free(Vec<i8>),
    /// Upper unitriangular matrix `[[1, a, c], [0, 1, b], [0, 0, 1]]` stored as `[a, b, c]`.
    Heisenberg([i64; 3]),
    /// Affine map of BS(1,m).
    Affine(Box<Affine>),
    /// Lamp configuration and cursor of ℤ/2 ≀ ℤ.
    Lamplighter(Box<Lamps>),
    /// Point of ℤ² ⋊_A ℤ.
    Semidirect(Box<Semidirect>),
}

/// The matrix `[[m^b_exp, num / m^den_exp], [0, 1]]`.
///
/// The translation part is kept in lowest terms: `den_exp == 0` or `num` is
/// not divisible by `m`; zero is `num = 0, den_exp = 0`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Affine {
    pub num: BigInt,
    pub den_exp: u32,
    pub b_exp: i64,
}

/// Lit lamps (sorted, no duplicates) and the cursor position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lamps {
    pub cursor: i64,
    pub lit: Vec<i64>,
}

/// `(v, t)` with `v ∈ ℤ²` and `t ∈ ℤ`; the product is `(v + Aᵗ w, t + s)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Semidirect {
    pub v: [BigInt; 2],
    pub t: i64,
}

impl Element {
    /// Injective text key of the canonical form. Also the on-disk record form.
    pub fn canonical_key(&self) -> String {
        self.to_string()
    }

    pub(crate) fn affine(num: BigInt, den_exp: u32, b_exp: i64) -> Element {
        Element::Affine(Box::new(Affine {
            num,
            den_exp,
            b_exp,
        }))
    }

    pub(crate) fn lamps(cursor: i64, lit: Vec<i64>) -> Element {
        Element::Lamplighter(Box::new(Lamps { cursor, lit }))
    }

    pub(crate) fn semidirect(v: [BigInt; 2], t: i64) -> Element {
        Element::Semidirect(Box::new(Semidirect { v, t }))
    }
}

fn join<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Abelian(v) => {
                f.write_str("z(")?;
                join(f, v)?;
                f.write_str(")")
            }
            Element::Free(w) => {
                f.write_str("f(")?;
                join(f, w)?;
                f.write_str(")")
            }
            Element::Heisenberg([a, b, c]) => write!(f, "h({a},{b},{c})"),
            Element::Affine(x) => write!(f, "bs({},{},{})", x.num, x.den_exp, x.b_exp),
            Element::Lamplighter(x) => {
                write!(f, "l({};", x.cursor)?;
                join(f, &x.lit)?;
                f.write_str(")")
            }
            Element::Semidirect(x) => write!(f, "sd({},{},{})", x.v[0], x.v[1], x.t),
        }
    }
}
