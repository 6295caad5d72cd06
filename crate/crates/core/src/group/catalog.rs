use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::One;

use super::element::Element;
use super::kind::{exponent_of, GroupKind};
use super::{GroupError, MarkedGroup, PowerWord};

/// Name and parameters of a catalog group, e.g. `BS1m m=2`.
///
/// The text form is `name key=value ...` with keys sorted; it is the key
/// under which ball tables are cached.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Descriptor {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl Descriptor {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn parse(text: &str) -> Result<Self, GroupError> {
        let mut tokens = text.split_whitespace();
        let name = tokens
            .next()
            .ok_or_else(|| GroupError::Descriptor(text.to_string()))?;
        if name.contains('=') {
            return Err(GroupError::Descriptor(text.to_string()));
        }
        let mut params = BTreeMap::new();
        for tok in tokens {
            let (k, v) = tok
                .split_once('=')
                .filter(|(k, v)| !k.is_empty() && !v.is_empty())
                .ok_or_else(|| GroupError::Descriptor(text.to_string()))?;
            if params.insert(k.to_string(), v.to_string()).is_some() {
                return Err(GroupError::Descriptor(text.to_string()));
            }
        }
        Ok(Self {
            name: name.to_string(),
            params,
        })
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        for (k, v) in &self.params {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

struct Params<'a> {
    group: &'a str,
    params: BTreeMap<String, String>,
}

impl Params<'_> {
    fn take<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, GroupError> {
        match self.params.remove(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| GroupError::InvalidParam {
                group: self.group.into(),
                key: key.into(),
                reason: format!("cannot parse '{v}'"),
            }),
        }
    }

    fn invalid(&self, key: &str, reason: &str) -> GroupError {
        GroupError::InvalidParam {
            group: self.group.into(),
            key: key.into(),
            reason: reason.into(),
        }
    }

    fn finish(self) -> Result<(), GroupError> {
        match self.params.keys().next() {
            None => Ok(()),
            Some(k) => Err(self.invalid(k, "unknown parameter")),
        }
    }
}

fn unit(vec_len: usize, i: usize, sign: i64) -> Element {
    let mut v = vec![0; vec_len];
    v[i] = sign;
    Element::Abelian(v)
}

fn big_pair(a: i64, b: i64) -> [BigInt; 2] {
    [BigInt::from(a), BigInt::from(b)]
}

/// Look up a catalog group with its documented default generators.
///
/// | name | params | generators (in order) |
/// |------|--------|-----------------------|
/// | `Zn` | `n` (default 2) | `e1 E1 e2 E2 ...` |
/// | `Free` | `rank` (default 2, at most 26) | `a A b B ...` |
/// | `Heisenberg` | | `x X y Y` |
/// | `BS1m` | `m` (default 2) | `a A b B` with `a = [[1,1],[0,1]]`, `b = [[m,0],[0,1]]` |
/// | `Lamplighter` | | `t T a` |
/// | `ZsdZ2` | `a` = `a11,a12,a21,a22` (default `2,1,1,1`) | `e1 E1 e2 E2 t T` |
///
/// Upper-case names are inverses.
pub fn catalog(desc: &Descriptor) -> Result<MarkedGroup, GroupError> {
    let mut p = Params {
        group: &desc.name,
        params: desc.params.clone(),
    };
    let (kind, gens, names): (GroupKind, Vec<Element>, Vec<String>) = match desc.name.as_str() {
        "Zn" => {
            let n: usize = p.take("n", 2)?;
            if n == 0 {
                return Err(p.invalid("n", "rank must be at least 1"));
            }
            let mut gens = Vec::new();
            let mut names = Vec::new();
            for i in 0..n {
                gens.push(unit(n, i, 1));
                gens.push(unit(n, i, -1));
                names.push(format!("e{}", i + 1));
                names.push(format!("E{}", i + 1));
            }
            (GroupKind::Abelian { rank: n }, gens, names)
        }
        "Free" => {
            let rank: usize = p.take("rank", 2)?;
            if rank == 0 || rank > 26 {
                return Err(p.invalid("rank", "rank must be in 1..=26"));
            }
            let mut gens = Vec::new();
            let mut names = Vec::new();
            for i in 0..rank {
                let l = i as i8 + 1;
                gens.push(Element::Free(vec![l]));
                gens.push(Element::Free(vec![-l]));
                let c = (b'a' + i as u8) as char;
                names.push(c.to_string());
                names.push(c.to_ascii_uppercase().to_string());
            }
            (GroupKind::Free { rank }, gens, names)
        }
        "Heisenberg" => (
            GroupKind::Heisenberg,
            vec![
                Element::Heisenberg([1, 0, 0]),
                Element::Heisenberg([-1, 0, 0]),
                Element::Heisenberg([0, 1, 0]),
                Element::Heisenberg([0, -1, 0]),
            ],
            ["x", "X", "y", "Y"].map(String::from).to_vec(),
        ),
        "BS1m" => {
            let m: u32 = p.take("m", 2)?;
            if m < 2 {
                return Err(p.invalid("m", "m must be at least 2"));
            }
            let kind = GroupKind::BaumslagSolitar { m };
            let a = Element::affine(BigInt::one(), 0, 0);
            let b = Element::affine(BigInt::from(0), 0, 1);
            let gens = vec![a.clone(), kind.inv(&a)?, b.clone(), kind.inv(&b)?];
            (kind, gens, ["a", "A", "b", "B"].map(String::from).to_vec())
        }
        "Lamplighter" => (
            GroupKind::Lamplighter,
            vec![
                Element::lamps(1, vec![]),
                Element::lamps(-1, vec![]),
                Element::lamps(0, vec![0]),
            ],
            ["t", "T", "a"].map(String::from).to_vec(),
        ),
        "ZsdZ2" => {
            let text: String = p.take("a", "2,1,1,1".to_string())?;
            let entries: Vec<i64> = text
                .split(',')
                .map(|t| t.trim().parse::<i64>())
                .collect::<Result<_, _>>()
                .map_err(|_| p.invalid("a", "expected four integers a11,a12,a21,a22"))?;
            let [a11, a12, a21, a22] = entries[..] else {
                return Err(p.invalid("a", "expected four integers a11,a12,a21,a22"));
            };
            if entries.iter().any(|e| e.abs() > 1 << 20) {
                return Err(p.invalid("a", "entries too large"));
            }
            let det = a11 * a22 - a12 * a21;
            let tr = a11 + a22;
            if det.abs() != 1 {
                return Err(p.invalid("a", "|det A| must be 1"));
            }
            let hyperbolic = if det == 1 { tr.abs() > 2 } else { tr != 0 };
            if !hyperbolic {
                return Err(p.invalid("a", "A must be hyperbolic"));
            }
            let gens = vec![
                Element::semidirect(big_pair(1, 0), 0),
                Element::semidirect(big_pair(-1, 0), 0),
                Element::semidirect(big_pair(0, 1), 0),
                Element::semidirect(big_pair(0, -1), 0),
                Element::semidirect(big_pair(0, 0), 1),
                Element::semidirect(big_pair(0, 0), -1),
            ];
            (
                GroupKind::Semidirect {
                    matrix: [[a11, a12], [a21, a22]],
                },
                gens,
                ["e1", "E1", "e2", "E2", "t", "T"]
                    .map(String::from)
                    .to_vec(),
            )
        }
        other => return Err(GroupError::UnknownGroup(other.to_string())),
    };
    p.finish()?;
    let mut canonical = Descriptor::new(&desc.name);
    match &kind {
        GroupKind::Abelian { rank } => canonical = canonical.with("n", rank),
        GroupKind::Free { rank } => canonical = canonical.with("rank", rank),
        GroupKind::BaumslagSolitar { m } => canonical = canonical.with("m", m),
        GroupKind::Semidirect { matrix: a } => {
            canonical = canonical.with(
                "a",
                format!("{},{},{},{}", a[0][0], a[0][1], a[1][0], a[1][1]),
            )
        }
        _ => {}
    }
    MarkedGroup::build(canonical, kind, gens, names, true)
}

fn power(gen: usize, inv: usize, e: i64) -> Vec<usize> {
    let g = if e >= 0 { gen } else { inv };
    vec![g; e.unsigned_abs() as usize]
}

/// Defining relations for the default markings (Lamplighter: the first few
/// commutators of its infinite presentation).
pub(crate) fn relations(kind: &GroupKind) -> Vec<Vec<usize>> {
    match kind {
        GroupKind::Abelian { rank } => {
            let mut rels = Vec::new();
            for i in 0..*rank {
                for j in i + 1..*rank {
                    rels.push(vec![2 * i, 2 * j, 2 * i + 1, 2 * j + 1]);
                }
            }
            rels
        }
        GroupKind::Free { .. } => Vec::new(),
        GroupKind::Heisenberg => {
            let z = [0, 2, 1, 3];
            let z_inv = [2, 0, 3, 1];
            let comm = |g: usize, gi: usize| {
                let mut w = vec![g];
                w.extend(z);
                w.push(gi);
                w.extend(z_inv);
                w
            };
            vec![comm(0, 1), comm(2, 3)]
        }
        GroupKind::BaumslagSolitar { m } => {
            let mut w = vec![2, 0, 3];
            w.extend(std::iter::repeat_n(1, *m as usize));
            vec![w]
        }
        GroupKind::Lamplighter => {
            let mut rels = vec![vec![2, 2]];
            for k in 1..=3 {
                let mut w = Vec::new();
                for _ in 0..2 {
                    w.push(2);
                    w.extend(power(0, 1, k));
                    w.push(2);
                    w.extend(power(0, 1, -k));
                }
                rels.push(w);
            }
            rels
        }
        GroupKind::Semidirect { matrix } => {
            let mut rels = vec![vec![0, 2, 1, 3]];
            #[allow(clippy::needless_range_loop)]
            for col in 0..2 {
                // t e_col t⁻¹ (A e_col)⁻¹
                let mut w = vec![4, 2 * col, 5];
                w.extend(power(2, 3, -matrix[1][col]));
                w.extend(power(0, 1, -matrix[0][col]));
                rels.push(w);
            }
            rels
        }
    }
}

pub(crate) fn normal_word(kind: &GroupKind, x: &Element) -> Result<PowerWord, GroupError> {
    let word = match (kind, x) {
        (GroupKind::Abelian { .. }, Element::Abelian(v)) => v
            .iter()
            .enumerate()
            .filter(|(_, e)| **e != 0)
            .map(|(i, e)| (vec![2 * i], *e))
            .collect(),
        (GroupKind::Free { .. }, Element::Free(w)) => w
            .iter()
            .map(|&l| {
                let i = (l.unsigned_abs() as usize - 1) * 2 + usize::from(l < 0);
                (vec![i], 1)
            })
            .collect(),
        (GroupKind::Heisenberg, Element::Heisenberg([a, b, c])) => {
            // x^a y^b = (a, b, ab); the commutator xyx⁻¹y⁻¹ is the central (0, 0, 1)
            vec![(vec![0], *a), (vec![2], *b), (vec![0, 2, 1, 3], c - a * b)]
        }
        (GroupKind::BaumslagSolitar { .. }, Element::Affine(u)) => {
            // b^{-k} a^{num} b^{k} = a^{num/m^k}, then b^{e}
            let k = i64::from(u.den_exp);
            vec![
                (vec![2], -k),
                (vec![0], exponent_of(&u.num)?),
                (vec![2], k + u.b_exp),
            ]
        }
        (GroupKind::Lamplighter, Element::Lamplighter(u)) => {
            let mut w = Vec::new();
            let mut at = 0;
            for &p in &u.lit {
                w.push((vec![0], p - at));
                w.push((vec![2], 1));
                at = p;
            }
            w.push((vec![0], u.cursor - at));
            w
        }
        (GroupKind::Semidirect { .. }, Element::Semidirect(u)) => vec![
            (vec![0], exponent_of(&u.v[0])?),
            (vec![2], exponent_of(&u.v[1])?),
            (vec![4], u.t),
        ],
        _ => {
            return Err(GroupError::ForeignElement {
                group: kind.family().into(),
                element: x.canonical_key(),
            })
        }
    };
    Ok(word)
}

/// Catalog data for the group extensions 1 → N → G → Q → 1 shipped with the
/// catalog: the quotient law, the images of G's generators, and intrinsic
/// generators of N.
#[derive(Clone, Debug)]
pub struct ExtensionData {
    pub quotient: GroupKind,
    pub images: Vec<Element>,
    pub normal_generators: Vec<Element>,
    pub normal_names: Vec<String>,
    /// Exact word length in the intrinsic generators for elements of the
    /// subgroup they generate, where a closed form exists.
    pub normal_length: fn(&Element) -> Option<usize>,
}

fn center_length(x: &Element) -> Option<usize> {
    match x {
        Element::Heisenberg([0, 0, c]) => Some(c.unsigned_abs() as usize),
        _ => None,
    }
}

fn cyclic_a_length(x: &Element) -> Option<usize> {
    match x {
        Element::Affine(u) if u.b_exp == 0 && u.den_exp == 0 => {
            u64::try_from(num_traits::Signed::abs(&u.num))
                .ok()
                .map(|v| v as usize)
        }
        _ => None,
    }
}

fn fiber_length(x: &Element) -> Option<usize> {
    match x {
        Element::Semidirect(u) if u.t == 0 => {
            let l1 = num_traits::Signed::abs(&u.v[0]) + num_traits::Signed::abs(&u.v[1]);
            u64::try_from(l1).ok().map(|v| v as usize)
        }
        _ => None,
    }
}

impl ExtensionData {
    /// Extension data for `g`, if its catalog family ships one: Heisenberg
    /// over its center, BS(1,m) over the kernel of the b-exponent, and
    /// ℤ² ⋊_A ℤ over the ℤ² fiber.
    pub fn for_group(g: &MarkedGroup) -> Option<Self> {
        if !g.is_standard() {
            return None;
        }
        let z = |v: i64| Element::Abelian(vec![v]);
        match g.kind() {
            GroupKind::Heisenberg => Some(Self {
                quotient: GroupKind::Abelian { rank: 2 },
                images: vec![
                    Element::Abelian(vec![1, 0]),
                    Element::Abelian(vec![-1, 0]),
                    Element::Abelian(vec![0, 1]),
                    Element::Abelian(vec![0, -1]),
                ],
                normal_generators: vec![
                    Element::Heisenberg([0, 0, 1]),
                    Element::Heisenberg([0, 0, -1]),
                ],
                normal_names: vec!["z".into(), "Z".into()],
                normal_length: center_length,
            }),
            GroupKind::BaumslagSolitar { .. } => Some(Self {
                quotient: GroupKind::Abelian { rank: 1 },
                images: vec![z(0), z(0), z(1), z(-1)],
                normal_generators: g.generators()[..2].to_vec(),
                normal_names: vec!["a".into(), "A".into()],
                normal_length: cyclic_a_length,
            }),
            GroupKind::Semidirect { .. } => Some(Self {
                quotient: GroupKind::Abelian { rank: 1 },
                images: vec![z(0), z(0), z(0), z(0), z(1), z(-1)],
                normal_generators: g.generators()[..4].to_vec(),
                normal_names: ["e1", "E1", "e2", "E2"].map(String::from).to_vec(),
                normal_length: fiber_length,
            }),
            _ => None,
        }
    }
}
