use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::element::{Affine, Element};
use super::GroupError;

/// The group law of a catalog family, with its parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GroupKind {
    /// ℤⁿ. Rank 0 is the trivial group, used for trivial quotients.
    Abelian { rank: usize },
    /// Free group on `rank` generators.
    Free { rank: usize },
    /// Integer Heisenberg group H₃(ℤ).
    Heisenberg,
    /// Baumslag–Solitar group BS(1,m) = ⟨a, b | bab⁻¹ = aᵐ⟩ realized by affine maps.
    BaumslagSolitar { m: u32 },
    /// Lamplighter group ℤ/2 ≀ ℤ.
    Lamplighter,
    /// ℤ² ⋊_A ℤ for an integer matrix with |det A| = 1.
    Semidirect { matrix: [[i64; 2]; 2] },
}

type Mat = [[BigInt; 2]; 2];

fn mat_mul(x: &Mat, y: &Mat) -> Mat {
    let e = |i: usize, j: usize| &x[i][0] * &y[0][j] + &x[i][1] * &y[1][j];
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

fn mat_identity() -> Mat {
    [
        [BigInt::one(), BigInt::zero()],
        [BigInt::zero(), BigInt::one()],
    ]
}

fn reduce_dyadic(mut num: BigInt, mut den_exp: u32, m: u32) -> (BigInt, u32) {
    if num.is_zero() {
        return (num, 0);
    }
    let base = BigInt::from(m);
    while den_exp > 0 {
        let (q, r) = num.div_rem(&base);
        if !r.is_zero() {
            break;
        }
        num = q;
        den_exp -= 1;
    }
    (num, den_exp)
}

impl GroupKind {
    pub fn identity(&self) -> Element {
        match self {
            GroupKind::Abelian { rank } => Element::Abelian(vec![0; *rank]),
            GroupKind::Free { .. } => Element::Free(Vec::new()),
            GroupKind::Heisenberg => Element::Heisenberg([0; 3]),
            GroupKind::BaumslagSolitar { .. } => Element::affine(BigInt::zero(), 0, 0),
            GroupKind::Lamplighter => Element::lamps(0, Vec::new()),
            GroupKind::Semidirect { .. } => {
                Element::semidirect([BigInt::zero(), BigInt::zero()], 0)
            }
        }
    }

    pub fn is_identity(&self, x: &Element) -> bool {
        *x == self.identity()
    }

    /// Whether `x` is a well-formed canonical element of this group.
    pub fn contains(&self, x: &Element) -> bool {
        match (self, x) {
            (GroupKind::Abelian { rank }, Element::Abelian(v)) => v.len() == *rank,
            (GroupKind::Free { rank }, Element::Free(w)) => {
                w.iter()
                    .all(|&l| l != 0 && (l.unsigned_abs() as usize) <= *rank)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupKind::Heisenberg, Element::Heisenberg(_)) => true,
            (GroupKind::BaumslagSolitar { m }, Element::Affine(x)) => {
                if x.num.is_zero() {
                    x.den_exp == 0
                } else {
                    x.den_exp == 0 || !x.num.is_multiple_of(&BigInt::from(*m))
                }
            }
            (GroupKind::Lamplighter, Element::Lamplighter(x)) => {
                x.lit.windows(2).all(|p| p[0] < p[1])
            }
            (GroupKind::Semidirect { .. }, Element::Semidirect(_)) => true,
            _ => false,
        }
    }

    fn check(&self, x: &Element) -> Result<(), GroupError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(GroupError::ForeignElement {
                group: format!("{self:?}"),
                element: x.canonical_key(),
            })
        }
    }

    pub fn mul(&self, x: &Element, y: &Element) -> Result<Element, GroupError> {
        self.check(x)?;
        self.check(y)?;
        Ok(self.mul_unchecked(x, y))
    }

    pub fn inv(&self, x: &Element) -> Result<Element, GroupError> {
        self.check(x)?;
        Ok(self.inv_unchecked(x))
    }

    /// Product of two elements already known to belong to this group.
    pub(crate) fn mul_unchecked(&self, x: &Element, y: &Element) -> Element {
        match (self, x, y) {
            (GroupKind::Abelian { .. }, Element::Abelian(u), Element::Abelian(v)) => {
                Element::Abelian(u.iter().zip(v).map(|(a, b)| a + b).collect())
            }
            (GroupKind::Free { .. }, Element::Free(u), Element::Free(v)) => {
                let mut cancel = 0;
                while cancel < u.len().min(v.len()) && u[u.len() - 1 - cancel] == -v[cancel] {
                    cancel += 1;
                }
                let mut w = Vec::with_capacity(u.len() + v.len() - 2 * cancel);
                w.extend_from_slice(&u[..u.len() - cancel]);
                w.extend_from_slice(&v[cancel..]);
                Element::Free(w)
            }
            (GroupKind::Heisenberg, Element::Heisenberg(u), Element::Heisenberg(v)) => {
                Element::Heisenberg([u[0] + v[0], u[1] + v[1], u[2] + v[2] + u[0] * v[1]])
            }
            (GroupKind::BaumslagSolitar { m }, Element::Affine(u), Element::Affine(v)) => {
                self.affine_mul(*m, u, v)
            }
            (GroupKind::Lamplighter, Element::Lamplighter(u), Element::Lamplighter(v)) => {
                // symmetric difference of u.lit and v.lit shifted by u.cursor
                let shifted = v.lit.iter().map(|p| p + u.cursor);
                let mut lit = Vec::with_capacity(u.lit.len() + v.lit.len());
                let mut a = u.lit.iter().copied().peekable();
                let mut b = shifted.peekable();
                loop {
                    match (a.peek().copied(), b.peek().copied()) {
                        (Some(p), Some(q)) if p == q => {
                            a.next();
                            b.next();
                        }
                        (Some(p), Some(q)) if p < q => {
                            lit.push(p);
                            a.next();
                        }
                        (Some(_), Some(q)) => {
                            lit.push(q);
                            b.next();
                        }
                        (Some(p), None) => {
                            lit.push(p);
                            a.next();
                        }
                        (None, Some(q)) => {
                            lit.push(q);
                            b.next();
                        }
                        (None, None) => break,
                    }
                }
                Element::lamps(u.cursor + v.cursor, lit)
            }
            (GroupKind::Semidirect { .. }, Element::Semidirect(u), Element::Semidirect(v)) => {
                let p = self.matrix_power(u.t);
                let w0 = &u.v[0] + &p[0][0] * &v.v[0] + &p[0][1] * &v.v[1];
                let w1 = &u.v[1] + &p[1][0] * &v.v[0] + &p[1][1] * &v.v[1];
                Element::semidirect([w0, w1], u.t + v.t)
            }
            _ => panic!("mul_unchecked: operands do not belong to {self:?}"),
        }
    }

    pub(crate) fn inv_unchecked(&self, x: &Element) -> Element {
        match (self, x) {
            (GroupKind::Abelian { .. }, Element::Abelian(v)) => {
                Element::Abelian(v.iter().map(|a| -a).collect())
            }
            (GroupKind::Free { .. }, Element::Free(w)) => {
                Element::Free(w.iter().rev().map(|l| -l).collect())
            }
            (GroupKind::Heisenberg, Element::Heisenberg([a, b, c])) => {
                Element::Heisenberg([-a, -b, a * b - c])
            }
            (GroupKind::BaumslagSolitar { m }, Element::Affine(u)) => {
                // (e, x)⁻¹ = (-e, -m^{-e} x)
                let (num, den_exp) = scale_by_power(&u.num, u.den_exp, *m, -u.b_exp);
                let (num, den_exp) = reduce_dyadic(-num, den_exp, *m);
                Element::affine(num, den_exp, -u.b_exp)
            }
            (GroupKind::Lamplighter, Element::Lamplighter(u)) => {
                Element::lamps(-u.cursor, u.lit.iter().map(|p| p - u.cursor).collect())
            }
            (GroupKind::Semidirect { .. }, Element::Semidirect(u)) => {
                let p = self.matrix_power(-u.t);
                let w0 = -(&p[0][0] * &u.v[0] + &p[0][1] * &u.v[1]);
                let w1 = -(&p[1][0] * &u.v[0] + &p[1][1] * &u.v[1]);
                Element::semidirect([w0, w1], -u.t)
            }
            _ => panic!("inv_unchecked: operand does not belong to {self:?}"),
        }
    }

    fn affine_mul(&self, m: u32, u: &Affine, v: &Affine) -> Element {
        // (e1, x1)(e2, x2) = (e1 + e2, x1 + m^{e1} x2)
        let (n2, k2) = scale_by_power(&v.num, v.den_exp, m, u.b_exp);
        let k = u.den_exp.max(k2);
        let base = BigInt::from(m);
        let n1 = &u.num * num_traits::pow(base.clone(), (k - u.den_exp) as usize);
        let n2 = n2 * num_traits::pow(base, (k - k2) as usize);
        let (num, den_exp) = reduce_dyadic(n1 + n2, k, m);
        Element::affine(num, den_exp, u.b_exp + v.b_exp)
    }

    /// `Aᵗ` for the semidirect action; negative powers use the integral inverse.
    pub(crate) fn matrix_power(&self, t: i64) -> Mat {
        let GroupKind::Semidirect { matrix } = self else {
            panic!("matrix_power on {self:?}");
        };
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        let base: [[i64; 2]; 2] = if t >= 0 {
            *matrix
        } else {
            // det = ±1, so adj(A)·det is the inverse
            [
                [matrix[1][1] * det, -matrix[0][1] * det],
                [-matrix[1][0] * det, matrix[0][0] * det],
            ]
        };
        let mut acc = mat_identity();
        let mut sq: Mat = [
            [BigInt::from(base[0][0]), BigInt::from(base[0][1])],
            [BigInt::from(base[1][0]), BigInt::from(base[1][1])],
        ];
        let mut e = t.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = mat_mul(&acc, &sq);
            }
            e >>= 1;
            if e > 0 {
                sq = mat_mul(&sq, &sq);
            }
        }
        acc
    }

    /// `xⁿ` by repeated squaring.
    pub fn pow(&self, x: &Element, n: i64) -> Result<Element, GroupError> {
        self.check(x)?;
        let mut base = if n < 0 {
            self.inv_unchecked(x)
        } else {
            x.clone()
        };
        let mut acc = self.identity();
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul_unchecked(&acc, &base);
            }
            e >>= 1;
            if e > 0 {
                base = self.mul_unchecked(&base, &base);
            }
        }
        Ok(acc)
    }

    /// Short family tag used in element parsing errors and descriptors.
    pub fn family(&self) -> &'static str {
        match self {
            GroupKind::Abelian { .. } => "Zn",
            GroupKind::Free { .. } => "Free",
            GroupKind::Heisenberg => "Heisenberg",
            GroupKind::BaumslagSolitar { .. } => "BS1m",
            GroupKind::Lamplighter => "Lamplighter",
            GroupKind::Semidirect { .. } => "ZsdZ2",
        }
    }

    /// Parse an element from its canonical key, rejecting non-canonical forms.
    pub fn parse_element(&self, text: &str) -> Result<Element, GroupError> {
        let bad = |why: &str| GroupError::Parse {
            input: truncate(text),
            reason: why.to_string(),
        };
        let open = text.find('(').ok_or_else(|| bad("missing '('"))?;
        if !text.ends_with(')') {
            return Err(bad("missing ')'"));
        }
        let tag = &text[..open];
        let body = &text[open + 1..text.len() - 1];
        let ints = |s: &str| -> Result<Vec<i64>, GroupError> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|t| t.parse::<i64>().map_err(|_| bad("invalid integer")))
                .collect()
        };
        let big = |s: &str| -> Result<BigInt, GroupError> {
            if s.is_empty() || s.starts_with('+') {
                return Err(bad("invalid integer"));
            }
            s.parse::<BigInt>().map_err(|_| bad("invalid integer"))
        };
        let x = match tag {
            "z" => Element::Abelian(ints(body)?),
            "f" => Element::Free(
                ints(body)?
                    .into_iter()
                    .map(|l| i8::try_from(l).map_err(|_| bad("letter out of range")))
                    .collect::<Result<_, _>>()?,
            ),
            "h" => {
                let v = ints(body)?;
                let [a, b, c] = v[..] else {
                    return Err(bad("expected 3 entries"));
                };
                Element::Heisenberg([a, b, c])
            }
            "bs" => {
                let parts: Vec<&str> = body.split(',').collect();
                let [n, k, e] = parts[..] else {
                    return Err(bad("expected 3 entries"));
                };
                let k = k.parse::<u32>().map_err(|_| bad("invalid exponent"))?;
                let e = e.parse::<i64>().map_err(|_| bad("invalid exponent"))?;
                Element::affine(big(n)?, k, e)
            }
            "l" => {
                let (c, lit) = body.split_once(';').ok_or_else(|| bad("missing ';'"))?;
                let c = c.parse::<i64>().map_err(|_| bad("invalid cursor"))?;
                Element::lamps(c, ints(lit)?)
            }
            "sd" => {
                let parts: Vec<&str> = body.split(',').collect();
                let [v0, v1, t] = parts[..] else {
                    return Err(bad("expected 3 entries"));
                };
                let t = t.parse::<i64>().map_err(|_| bad("invalid exponent"))?;
                Element::semidirect([big(v0)?, big(v1)?], t)
            }
            _ => return Err(bad("unknown element tag")),
        };
        if !self.contains(&x) {
            return Err(bad("not a canonical element of this group"));
        }
        // Display must reproduce the input byte for byte.
        if x.canonical_key() != text {
            return Err(bad("non-canonical spelling"));
        }
        Ok(x)
    }
}

/// `num/m^den · m^e` as an unreduced fraction.
fn scale_by_power(num: &BigInt, den_exp: u32, m: u32, e: i64) -> (BigInt, u32) {
    if e >= 0 {
        let e = e as u32;
        if e >= den_exp {
            (
                num * num_traits::pow(BigInt::from(m), (e - den_exp) as usize),
                0,
            )
        } else {
            (num.clone(), den_exp - e)
        }
    } else {
        let extra = u32::try_from(e.unsigned_abs()).expect("b-exponent fits in u32");
        (num.clone(), den_exp + extra)
    }
}

fn truncate(s: &str) -> String {
    s.chars().take(64).collect()
}

/// Integer value of a BigInt that must fit an i64 exponent.
pub(crate) fn exponent_of(x: &BigInt) -> Result<i64, GroupError> {
    x.to_i64()
        .ok_or_else(|| GroupError::Overflow(x.abs().to_string()))
}
