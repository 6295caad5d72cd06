//! Short exact sequences `1 → N → G → Q → 1` on finite balls: geodesic
//! cross-sections, the cocycles `β` and `θ`, section coordinates, the
//! decomposition of convolution along the quotient, and the cocycle
//! collection process for words that evaluate into `N`.
//!
//! Every `g ∈ G` is written `g = n σ(q)` with `q = π(g)` and `n ∈ N`, where
//! `σ` is the section and
//!
//! ```text
//! β(p, q) = σ(p) σ(q) σ(pq)⁻¹        θ(q)(n) = σ(q) n σ(q)⁻¹
//! (m, p)(n, q) = (m θ(p)(n) β(p, q), pq)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cayley::{build_ball, BallError, BallOptions, BallTable, WordMetric};
use crate::convolution::{ConvolutionError, FinSuppFunction};
use crate::fit::{classify_points, Classification, ClassifyOptions};
use crate::group::{
    catalog, Descriptor, Element, ExtensionData, GroupError, GroupHom, GroupKind, MarkedGroup,
};

#[derive(Debug, Error)]
pub enum ExtensionError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Ball(#[from] BallError),
    #[error(transparent)]
    Convolution(#[from] ConvolutionError),
    #[error("{0} has no catalog extension")]
    NoExtension(String),
    #[error("section radius {requested} exceeds the G-ball radius {available}")]
    RadiusTooLarge { requested: usize, available: usize },
    #[error("cosets without a section representative: {}", .0.join(", "))]
    MissingCosets(Vec<String>),
    #[error("section entry for {q} has G-length {g_len} but Q-length {q_len}")]
    SectionNotGeodesic {
        q: String,
        g_len: usize,
        q_len: usize,
    },
    #[error("quotient element {0} is outside the section table")]
    OutOfTable(String),
    #[error("{0} is not in the normal subgroup")]
    NotInNormal(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Word metric on `N` in its intrinsic generators.
#[derive(Clone, Debug)]
pub enum NormalMetric {
    /// Exact closed form; `None` outside the subgroup the generators reach.
    ClosedForm(fn(&Element) -> Option<usize>),
    /// `N = G`: the ambient ball table, with meet-in-the-middle beyond it.
    Ambient,
}

/// `σ` on the `Q`-ball: each coset's first element in BFS order.
#[derive(Clone, Debug)]
pub struct CrossSectionTable {
    radius: usize,
    /// `q ↦` index of `σ(q)` in the G-ball.
    index: HashMap<Element, usize>,
}

impl CrossSectionTable {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

/// An element in section coordinates `n σ(q)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Coords {
    pub n: Element,
    pub q: Element,
}

impl fmt::Display for Coords {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n, self.q)
    }
}

/// A letter of `S_G = S_N ∪ σ(S_Q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Letter {
    /// The `i`-th intrinsic generator of `N`.
    N(usize),
    /// `σ` of the `j`-th generator of `Q`.
    Sigma(usize),
}

/// One factor of a collected word.
#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    /// `β(p, q)`.
    Beta {
        p: Element,
        q: Element,
        value: Element,
    },
    /// `B θ(q)(s) B⁻¹` with `B` the product of the listed `β(pᵢ, qᵢ)`.
    Conjugate {
        betas: Vec<(Element, Element)>,
        q: Element,
        letter: usize,
        value: Element,
    },
    /// `σ(q)` closing the all-section part.
    Sigma { q: Element, value: Element },
}

impl Factor {
    pub fn value(&self) -> &Element {
        match self {
            Factor::Beta { value, .. }
            | Factor::Conjugate { value, .. }
            | Factor::Sigma { value, .. } => value,
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Beta { p, q, .. } => write!(f, "β({p},{q})"),
            Factor::Sigma { q, .. } => write!(f, "σ({q})"),
            Factor::Conjugate {
                betas, q, letter, ..
            } => {
                let b: Vec<String> = betas.iter().map(|(p, q)| format!("β({p},{q})")).collect();
                let b = b.join("");
                if b.is_empty() {
                    write!(f, "θ({q})(s{letter})")
                } else {
                    write!(f, "[{b}]θ({q})(s{letter})[{b}]⁻¹")
                }
            }
        }
    }
}

/// The collected form of a word evaluating into `N`.
#[derive(Clone, Debug, PartialEq)]
pub struct Collected {
    pub trace: Vec<Factor>,
    /// Product of the trace.
    pub element: Element,
    /// Direct evaluation of the word.
    pub direct: Element,
}

impl Collected {
    pub fn agrees(&self) -> bool {
        self.element == self.direct
    }
}

/// The context of one extension: `G`, the quotient map, `N` and the tables.
#[derive(Clone, Debug)]
pub struct ExtensionContext {
    g: MarkedGroup,
    q: MarkedGroup,
    pi: GroupHom,
    normal_generators: Vec<Element>,
    normal_names: Vec<String>,
    normal_metric: NormalMetric,
    ball_g: BallTable,
    ball_q: BallTable,
    /// `π` of each G-ball entry, by index.
    projections: Vec<Element>,
    section: CrossSectionTable,
}

fn quotient_marking(kind: &GroupKind, images: &[Element]) -> Result<MarkedGroup, GroupError> {
    let mut gens: Vec<Element> = Vec::new();
    for x in images {
        if !kind.is_identity(x) && !gens.contains(x) {
            gens.push(x.clone());
        }
    }
    if let GroupKind::Abelian { rank } = kind {
        if *rank > 0 {
            let std = catalog(&Descriptor::new("Zn").with("n", rank))?;
            if std.generators() == gens.as_slice() {
                return Ok(std);
            }
        }
    }
    let names = (0..gens.len()).map(|i| format!("q{i}")).collect();
    let desc = Descriptor::new("Quotient").with("family", kind.family());
    MarkedGroup::with_generators(desc, kind.clone(), gens, names)
}

impl ExtensionContext {
    /// The catalog extension of `g` with a G-ball of radius `g_radius` and
    /// a section on the Q-ball of radius `section_radius`.
    pub fn build(
        g: &MarkedGroup,
        g_radius: usize,
        section_radius: usize,
        opts: &BallOptions,
    ) -> Result<Self, ExtensionError> {
        Self::from_ball(build_ball(g, g_radius, opts)?, section_radius)
    }

    pub fn from_ball(ball_g: BallTable, section_radius: usize) -> Result<Self, ExtensionError> {
        let g = ball_g.group().clone();
        let data = ExtensionData::for_group(&g)
            .ok_or_else(|| ExtensionError::NoExtension(g.descriptor().to_string()))?;
        let q = quotient_marking(&data.quotient, &data.images)?;
        let pi = GroupHom::new(g.clone(), q.clone(), data.images)?;
        Self::assemble_context(
            ball_g,
            pi,
            data.normal_generators,
            data.normal_names,
            NormalMetric::ClosedForm(data.normal_length),
            section_radius,
        )
    }

    /// `1 → G → G → 1 → 1`: `N = G` with its own generators and metric.
    pub fn trivial(ball_g: BallTable) -> Result<Self, ExtensionError> {
        let g = ball_g.group().clone();
        let kind = GroupKind::Abelian { rank: 0 };
        let q = quotient_marking(&kind, &[])?;
        let images = vec![kind.identity(); g.generators().len()];
        let pi = GroupHom::new(g.clone(), q, images)?;
        let radius = ball_g.radius();
        Self::assemble_context(
            ball_g,
            pi,
            g.generators().to_vec(),
            g.generator_names().to_vec(),
            NormalMetric::Ambient,
            radius,
        )
    }

    fn assemble_context(
        ball_g: BallTable,
        pi: GroupHom,
        normal_generators: Vec<Element>,
        normal_names: Vec<String>,
        normal_metric: NormalMetric,
        section_radius: usize,
    ) -> Result<Self, ExtensionError> {
        if section_radius > ball_g.radius() {
            return Err(ExtensionError::RadiusTooLarge {
                requested: section_radius,
                available: ball_g.radius(),
            });
        }
        let g = ball_g.group().clone();
        let q = pi.target().clone();
        let opts = BallOptions::default();
        let ball_q = build_ball(&q, section_radius, &opts)?;
        let qk = q.kind().clone();
        let mut projections = Vec::with_capacity(ball_g.len());
        for i in 0..ball_g.len() {
            let image = match ball_g.parent(i) {
                None => qk.identity(),
                Some((p, s)) => qk.mul(&projections[p], &pi.images()[s])?,
            };
            projections.push(image);
        }
        let mut index = HashMap::with_capacity(ball_q.len());
        for (i, image) in projections
            .iter()
            .enumerate()
            .take(ball_g.ball_size(section_radius))
        {
            if ball_q.contains(image) {
                index.entry(image.clone()).or_insert(i);
            }
        }
        let missing: Vec<String> = ball_q
            .elements()
            .filter(|x| !index.contains_key(*x))
            .map(|x| x.canonical_key())
            .collect();
        if !missing.is_empty() {
            return Err(ExtensionError::MissingCosets(missing));
        }
        for (qi, x) in ball_q.elements().enumerate() {
            let g_len = ball_g.length_of_index(index[x]);
            let q_len = ball_q.length_of_index(qi);
            if g_len != q_len {
                return Err(ExtensionError::SectionNotGeodesic {
                    q: x.canonical_key(),
                    g_len,
                    q_len,
                });
            }
        }
        Ok(Self {
            g,
            q,
            pi,
            normal_generators,
            normal_names,
            normal_metric,
            ball_g,
            ball_q,
            projections,
            section: CrossSectionTable {
                radius: section_radius,
                index,
            },
        })
    }

    pub fn group(&self) -> &MarkedGroup {
        &self.g
    }

    pub fn quotient(&self) -> &MarkedGroup {
        &self.q
    }

    pub fn projection(&self) -> &GroupHom {
        &self.pi
    }

    pub fn ball_g(&self) -> &BallTable {
        &self.ball_g
    }

    pub fn ball_q(&self) -> &BallTable {
        &self.ball_q
    }

    pub fn section_table(&self) -> &CrossSectionTable {
        &self.section
    }

    pub fn normal_generators(&self) -> &[Element] {
        &self.normal_generators
    }

    pub fn normal_names(&self) -> &[String] {
        &self.normal_names
    }

    /// `π` of the G-ball entry at `index`.
    pub fn projection_of_index(&self, index: usize) -> &Element {
        &self.projections[index]
    }

    pub fn project(&self, x: &Element) -> Result<Element, GroupError> {
        match self.ball_g.index_of(x) {
            Some(i) => Ok(self.projections[i].clone()),
            None => self.pi.apply(x),
        }
    }

    pub fn is_normal(&self, x: &Element) -> Result<bool, GroupError> {
        Ok(self.q.kind().is_identity(&self.project(x)?))
    }

    /// `ℓ_N(x)` in the intrinsic generators of `N`.
    pub fn normal_length(&self, x: &Element) -> Option<usize> {
        match &self.normal_metric {
            NormalMetric::ClosedForm(f) => f(x),
            NormalMetric::Ambient => self.ball_g.word_length(x),
        }
    }

    pub fn q_length(&self, q: &Element) -> Option<usize> {
        self.ball_q.length_in_table(q)
    }

    pub fn sigma(&self, q: &Element) -> Result<&Element, ExtensionError> {
        self.section
            .index
            .get(q)
            .map(|&i| self.ball_g.element(i))
            .ok_or_else(|| ExtensionError::OutOfTable(q.canonical_key()))
    }

    /// A geodesic word for `σ(q)` in the generators of `G`.
    pub fn sigma_word(&self, q: &Element) -> Result<Vec<usize>, ExtensionError> {
        Ok(self.ball_g.geodesic_word(self.sigma(q)?)?)
    }

    fn mul(&self, x: &Element, y: &Element) -> Element {
        self.g.mul(x, y).expect("elements of G")
    }

    fn inv(&self, x: &Element) -> Element {
        self.g.inv(x).expect("elements of G")
    }

    fn require_normal(&self, n: &Element) -> Result<(), ExtensionError> {
        if !self.g.contains(n) || !self.is_normal(n)? {
            return Err(ExtensionError::NotInNormal(n.canonical_key()));
        }
        Ok(())
    }

    /// `β(p, q) = σ(p) σ(q) σ(pq)⁻¹`.
    pub fn beta(&self, p: &Element, q: &Element) -> Result<Element, ExtensionError> {
        let pq = self.q.mul(p, q)?;
        let b = self.mul(
            &self.mul(self.sigma(p)?, self.sigma(q)?),
            &self.inv(self.sigma(&pq)?),
        );
        debug_assert!(self.is_normal(&b).unwrap_or(false));
        Ok(b)
    }

    /// `θ(q)(n) = σ(q) n σ(q)⁻¹`.
    pub fn theta(&self, q: &Element, n: &Element) -> Result<Element, ExtensionError> {
        self.require_normal(n)?;
        let s = self.sigma(q)?;
        Ok(self.mul(&self.mul(s, n), &self.inv(s)))
    }

    /// `θ(q)⁻¹(n) = σ(q)⁻¹ n σ(q)`.
    pub fn theta_inv(&self, q: &Element, n: &Element) -> Result<Element, ExtensionError> {
        self.require_normal(n)?;
        let s = self.sigma(q)?;
        Ok(self.mul(&self.mul(&self.inv(s), n), s))
    }

    pub fn coords(&self, x: &Element) -> Result<Coords, ExtensionError> {
        let q = self.project(x)?;
        let n = self.mul(x, &self.inv(self.sigma(&q)?));
        Ok(Coords { n, q })
    }

    pub fn assemble(&self, c: &Coords) -> Result<Element, ExtensionError> {
        self.require_normal(&c.n)?;
        Ok(self.mul(&c.n, self.sigma(&c.q)?))
    }

    /// `(m, p)(n, q) = (m θ(p)(n) β(p, q), pq)`.
    pub fn mult_in_coords(&self, a: &Coords, b: &Coords) -> Result<Coords, ExtensionError> {
        let n = self.mul(
            &self.mul(&a.n, &self.theta(&a.q, &b.n)?),
            &self.beta(&a.q, &b.q)?,
        );
        Ok(Coords {
            n,
            q: self.q.mul(&a.q, &b.q)?,
        })
    }

    /// `(m, p)⁻¹ = (θ(p)⁻¹(m⁻¹ β(p, p⁻¹)⁻¹), p⁻¹)`.
    pub fn inverse_in_coords(&self, a: &Coords) -> Result<Coords, ExtensionError> {
        let p_inv = self.q.inv(&a.q)?;
        let b = self.beta(&a.q, &p_inv)?;
        let inner = self.mul(&self.inv(&a.n), &self.inv(&b));
        Ok(Coords {
            n: self.theta_inv(&a.q, &inner)?,
            q: p_inv,
        })
    }

    /// Compare coordinate multiplication and inversion with the group law
    /// on every pair from `B_radius × B_radius`.
    pub fn check_multiplication(
        &self,
        radius: usize,
    ) -> Result<MultiplicationReport, ExtensionError> {
        let elems: Vec<&Element> = self
            .ball_g
            .elements()
            .take(self.ball_g.ball_size(radius))
            .collect();
        let coords: Vec<Coords> = elems
            .iter()
            .map(|x| self.coords(x))
            .collect::<Result<_, _>>()?;
        let mut report = MultiplicationReport {
            radius,
            pairs: 0,
            mismatches: 0,
            inverse_mismatches: 0,
            first_mismatch: None,
        };
        for (i, x) in elems.iter().enumerate() {
            let inv = self.inverse_in_coords(&coords[i])?;
            if inv != self.coords(&self.inv(x))? {
                report.inverse_mismatches += 1;
            }
            for (j, y) in elems.iter().enumerate() {
                report.pairs += 1;
                let via = self.mult_in_coords(&coords[i], &coords[j])?;
                let xy = self.mul(x, y);
                if via != self.coords(&xy)? || self.assemble(&via)? != xy {
                    report.mismatches += 1;
                    report
                        .first_mismatch
                        .get_or_insert_with(|| (x.canonical_key(), y.canonical_key()));
                }
            }
        }
        Ok(report)
    }

    /// Re-verify `π(σ(q)) = q` and `ℓ_G(σ(q)) = ℓ_Q(q)` on the Q-ball of
    /// radius `radius`.
    pub fn check_section(&self, radius: usize) -> Result<SectionReport, ExtensionError> {
        let mut report = SectionReport {
            radius,
            entries: 0,
            length_mismatches: 0,
            projection_mismatches: 0,
            identity_ok: self.g.kind().is_identity(self.sigma(&self.q.identity())?),
        };
        for (qi, q) in self
            .ball_q
            .elements()
            .enumerate()
            .take(self.ball_q.ball_size(radius))
        {
            let s = self.sigma(q)?;
            report.entries += 1;
            if self.pi.apply(s)? != *q {
                report.projection_mismatches += 1;
            }
            if self.ball_g.word_length(s) != Some(self.ball_q.length_of_index(qi)) {
                report.length_mismatches += 1;
            }
        }
        Ok(report)
    }

    /// The section as CSV with columns `q,sigma_word,len_q,len_g`.
    pub fn write_section_csv<W: Write>(&self, out: W) -> Result<(), ExtensionError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["q", "sigma_word", "len_q", "len_g"])?;
        for (qi, q) in self.ball_q.elements().enumerate() {
            let word = self.sigma_word(q)?;
            let s = self.sigma(q)?;
            w.write_record([
                q.canonical_key(),
                self.g.format_word(&word),
                self.ball_q.length_of_index(qi).to_string(),
                self.ball_g
                    .length_in_table(s)
                    .map_or("?".into(), |l| l.to_string()),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    fn slices(
        &self,
        f: &FinSuppFunction,
    ) -> Result<BTreeMap<Element, FinSuppFunction>, ExtensionError> {
        let mut out: BTreeMap<Element, FinSuppFunction> = BTreeMap::new();
        for (x, v) in f.iter() {
            let c = self.coords(x)?;
            out.entry(c.q)
                .or_insert_with(|| FinSuppFunction::zero(self.g.kind()))
                .add_at(c.n, v);
        }
        Ok(out)
    }

    /// The pieces `f_p`, `g_{p,q}` and `f_p * g_{p,q}` for every `(p, q)`
    /// with both sides nonzero, where `f_p(m) = f(m, p⁻¹)` and
    /// `g_{p,q}(m) = g(β(p,p⁻¹)⁻¹ θ(p)(m) β(p,q), pq)`.
    pub fn decomposition_pieces(
        &self,
        f: &FinSuppFunction,
        g: &FinSuppFunction,
    ) -> Result<Vec<Piece>, ExtensionError> {
        let f_slices = self.slices(f)?;
        let g_slices = self.slices(g)?;
        let mut pieces = Vec::new();
        for (p_inv, f_slice) in &f_slices {
            let p = self.q.inv(p_inv)?;
            let b_pp = self.beta(&p, p_inv)?;
            for (r, g_slice) in &g_slices {
                let q = self.q.mul(p_inv, r)?;
                let b_pq = self.beta(&p, &q)?;
                let b_pq_inv = self.inv(&b_pq);
                let mut g_pq = FinSuppFunction::zero(self.g.kind());
                for (m2, v) in g_slice.iter() {
                    // m2 = β(p,p⁻¹)⁻¹ θ(p)(m) β(p,q)
                    let inner = self.mul(&self.mul(&b_pp, m2), &b_pq_inv);
                    g_pq.add_at(self.theta_inv(&p, &inner)?, v);
                }
                let conv = f_slice.convolve(&g_pq)?;
                pieces.push(Piece {
                    p: p.clone(),
                    q,
                    f_p: f_slice.clone(),
                    g_pq,
                    conv,
                });
            }
        }
        Ok(pieces)
    }

    /// `Σ_p f_p * g_{p,q}` reassembled on `G`; equals `f*g` exactly.
    pub fn jolissaint_decompose(
        &self,
        f: &FinSuppFunction,
        g: &FinSuppFunction,
    ) -> Result<FinSuppFunction, ExtensionError> {
        let mut out = FinSuppFunction::zero(self.g.kind());
        for piece in self.decomposition_pieces(f, g)? {
            let s = self.sigma(&piece.q)?.clone();
            for (n, v) in piece.conv.iter() {
                out.add_at(self.mul(n, &s), v);
            }
        }
        Ok(out)
    }

    /// `‖g_{p,q}‖₂ = ψ(pq)` for every piece, and the slice inequality
    /// `‖(f*g)(·, q)‖₂ ≤ Σ_p ‖f_p * g_{p,q}‖₂`.
    pub fn phi_psi_check(
        &self,
        f: &FinSuppFunction,
        g: &FinSuppFunction,
    ) -> Result<PhiPsiReport, ExtensionError> {
        let pieces = self.decomposition_pieces(f, g)?;
        let g_slices = self.slices(g)?;
        let f_slices = self.slices(f)?;
        let psi2 = |r: &Element| g_slices.get(r).map_or(0.0, |s| s.l2_norm_squared());
        let mut report = PhiPsiReport {
            pairs: pieces.len(),
            psi_mismatches: 0,
            slices: 0,
            min_slice_margin: f64::INFINITY,
            slice_violations: 0,
            phi: f_slices
                .iter()
                .map(|(p_inv, s)| Ok((self.q.inv(p_inv)?.canonical_key(), s.l2_norm())))
                .collect::<Result<_, GroupError>>()?,
            psi: g_slices
                .iter()
                .map(|(r, s)| (r.canonical_key(), s.l2_norm()))
                .collect(),
        };
        let mut rhs: BTreeMap<Element, f64> = BTreeMap::new();
        for piece in &pieces {
            let pq = self.q.mul(&piece.p, &piece.q)?;
            if piece.g_pq.l2_norm_squared() != psi2(&pq) {
                report.psi_mismatches += 1;
            }
            *rhs.entry(piece.q.clone()).or_insert(0.0) += piece.conv.l2_norm();
        }
        let fg = self.slices(&f.convolve(g)?)?;
        for (q, bound) in &rhs {
            let lhs = fg.get(q).map_or(0.0, |s| s.l2_norm());
            report.slices += 1;
            let margin = bound - lhs;
            report.min_slice_margin = report.min_slice_margin.min(margin);
            if margin < -1e-9 * bound.max(1.0) {
                report.slice_violations += 1;
            }
        }
        Ok(report)
    }

    /// Largest `(ℓ_G(n) + ℓ_Q(q)) / ℓ_G(n σ(q))` over `B_radius \ {1}`.
    pub fn length_inequality_check(
        &self,
        radius: usize,
    ) -> Result<LengthInequalityReport, ExtensionError> {
        let radius = radius.min(self.ball_g.radius());
        let mut report = LengthInequalityReport {
            radius,
            scanned: 0,
            unresolved: 0,
            max_ratio: 0.0,
            witness: None,
        };
        for i in 1..self.ball_g.ball_size(radius) {
            let x = self.ball_g.element(i);
            let c = self.coords(x)?;
            let len_x = self.ball_g.length_of_index(i);
            let q_len = self
                .q_length(&c.q)
                .ok_or_else(|| ExtensionError::OutOfTable(c.q.canonical_key()))?;
            report.scanned += 1;
            let Some(n_len) = self.ball_g.word_length(&c.n) else {
                report.unresolved += 1;
                continue;
            };
            let ratio = (n_len + q_len) as f64 / len_x as f64;
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.witness = Some(LengthWitness {
                    element: x.canonical_key(),
                    n: c.n.canonical_key(),
                    q: c.q.canonical_key(),
                    len_g: len_x,
                    len_n: n_len,
                    len_q: q_len,
                });
            }
        }
        Ok(report)
    }

    pub fn letter_value(&self, letter: Letter) -> Result<Element, ExtensionError> {
        match letter {
            Letter::N(i) => self
                .normal_generators
                .get(i)
                .cloned()
                .ok_or_else(|| ExtensionError::OutOfTable(format!("normal generator {i}"))),
            Letter::Sigma(j) => {
                let q =
                    self.q.generators().get(j).ok_or_else(|| {
                        ExtensionError::OutOfTable(format!("quotient generator {j}"))
                    })?;
                Ok(self.sigma(q)?.clone())
            }
        }
    }

    /// The `β` chain of a word of section letters: the pairs
    /// `(q₁⋯qᵢ, qᵢ₊₁)` and the total `q₁⋯q_k`.
    fn beta_chain(
        &self,
        letters: &[usize],
    ) -> Result<(Vec<(Element, Element)>, Element), ExtensionError> {
        let gens = self.q.generators();
        let mut acc = self.q.identity();
        let mut pairs = Vec::new();
        for (i, &j) in letters.iter().enumerate() {
            let qj = gens[j].clone();
            if i > 0 {
                pairs.push((acc.clone(), qj.clone()));
            }
            acc = self.q.mul(&acc, &qj)?;
        }
        Ok((pairs, acc))
    }

    /// Rewrite a word with trivial `π`-image as a product of `β`-values and
    /// conjugated `N`-letters.
    ///
    /// A word of section letters alone is `(∏ β(q₁⋯qᵢ, qᵢ₊₁)) σ(q₁⋯q_k)`.
    /// Otherwise the first `N`-letter `s` after the section prefix
    /// `s₁⋯s_m` splits the word as `(s₁⋯s_m) s (s₁⋯s_m)⁻¹ · n'`, the
    /// conjugate equals `B θ(q₁⋯q_m)(s) B⁻¹` with `B` the prefix's `β`
    /// product, and `n'` is the word with `s` removed.
    pub fn cocycle_collect(&self, word: &[Letter]) -> Result<Collected, ExtensionError> {
        let mut direct = self.g.identity();
        for &l in word {
            direct = self.mul(&direct, &self.letter_value(l)?);
        }
        if !self.is_normal(&direct)? {
            return Err(ExtensionError::NotInNormal(direct.canonical_key()));
        }
        let mut rest = word.to_vec();
        let mut trace = Vec::new();
        let beta_product = |pairs: &[(Element, Element)]| -> Result<Element, ExtensionError> {
            let mut b = self.g.identity();
            for (p, q) in pairs {
                b = self.mul(&b, &self.beta(p, q)?);
            }
            Ok(b)
        };
        loop {
            let pos = rest.iter().position(|l| matches!(l, Letter::N(_)));
            let prefix: Vec<usize> = rest[..pos.unwrap_or(rest.len())]
                .iter()
                .map(|l| match l {
                    Letter::Sigma(j) => *j,
                    Letter::N(_) => unreachable!("prefix holds section letters only"),
                })
                .collect();
            let (pairs, total) = self.beta_chain(&prefix)?;
            match pos {
                Some(k) => {
                    let Letter::N(i) = rest[k] else {
                        unreachable!()
                    };
                    let b = beta_product(&pairs)?;
                    let s = self.letter_value(Letter::N(i))?;
                    let value = self.mul(&self.mul(&b, &self.theta(&total, &s)?), &self.inv(&b));
                    trace.push(Factor::Conjugate {
                        betas: pairs,
                        q: total,
                        letter: i,
                        value,
                    });
                    rest.remove(k);
                }
                None => {
                    for (p, q) in pairs {
                        let value = self.beta(&p, &q)?;
                        trace.push(Factor::Beta { p, q, value });
                    }
                    if !prefix.is_empty() {
                        let value = self.sigma(&total)?.clone();
                        trace.push(Factor::Sigma { q: total, value });
                    }
                    break;
                }
            }
        }
        let mut element = self.g.identity();
        for factor in &trace {
            element = self.mul(&element, factor.value());
        }
        Ok(Collected {
            trace,
            element,
            direct,
        })
    }

    /// Amplitude of `β` by combined radius `ℓ_Q(p) + ℓ_Q(q) ≤ r` and growth
    /// of `θ(q)` on the intrinsic generators by `ℓ_Q(q) = r`.
    pub fn cocycle_profiles(&self, radius: usize) -> Result<CocycleProfiles, ExtensionError> {
        let radius = radius.min(self.section.radius);
        let spheres: Vec<Vec<&Element>> = (0..=radius)
            .map(|r| self.ball_q.sphere(r).collect())
            .collect();
        let mut table = vec![vec![None; radius + 1]; radius + 1];
        let mut unresolved_beta = 0;
        for i in 0..=radius {
            for j in 0..=radius - i {
                let mut best: Option<usize> = None;
                for p in &spheres[i] {
                    for q in &spheres[j] {
                        match self.normal_length(&self.beta(p, q)?) {
                            Some(l) => best = Some(best.map_or(l, |b| b.max(l))),
                            None => unresolved_beta += 1,
                        }
                    }
                }
                table[i][j] = best;
            }
        }
        let amplitude: Vec<ProfileRow> = (0..=radius)
            .map(|r| {
                let max = (0..=r).filter_map(|i| table[i][r - i]).max();
                ProfileRow {
                    r,
                    max,
                    unresolved: 0,
                }
            })
            .scan(None, |run: &mut Option<usize>, mut row| {
                *run = match (*run, row.max) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    (a, b) => a.or(b),
                };
                row.max = *run;
                Some(row)
            })
            .collect();
        let mut theta_growth = Vec::with_capacity(radius + 1);
        for (r, sphere) in spheres.iter().enumerate() {
            let mut row = ProfileRow {
                r,
                max: None,
                unresolved: 0,
            };
            for q in sphere {
                for s in &self.normal_generators {
                    match self.normal_length(&self.theta(q, s)?) {
                        Some(l) => row.max = Some(row.max.map_or(l, |b| b.max(l))),
                        None => row.unresolved += 1,
                    }
                }
            }
            theta_growth.push(row);
        }
        let classify = |rows: &[ProfileRow]| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .map(|row| (row.r as f64, row.max.map_or(0.0, |m| m as f64)))
                .collect();
            classify_points(&pts, &ClassifyOptions::default())
        };
        Ok(CocycleProfiles {
            radius,
            beta_class: classify(&amplitude),
            theta_class: classify(&theta_growth),
            beta_table: table,
            amplitude,
            theta_growth,
            unresolved_beta,
        })
    }

    /// `(S_G)` letters: the intrinsic `N` generators, then `σ` of each
    /// generator of `Q`.
    pub fn alphabet(&self) -> Vec<Letter> {
        (0..self.normal_generators.len())
            .map(Letter::N)
            .chain((0..self.q.generators().len()).map(Letter::Sigma))
            .collect()
    }

    /// A seeded random word of length `1..=max_len` with trivial image in
    /// `Q`, by rejection; `None` after `attempts` failures.
    pub fn random_normal_word<R: Rng>(
        &self,
        rng: &mut R,
        max_len: usize,
        attempts: usize,
    ) -> Option<Vec<Letter>> {
        let alphabet = self.alphabet();
        for _ in 0..attempts {
            let len = rng.gen_range(1..=max_len);
            let word: Vec<Letter> = (0..len)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())])
                .collect();
            let mut image = self.q.identity();
            for l in &word {
                if let Letter::Sigma(j) = l {
                    image = self.q.mul(&image, &self.q.generators()[*j]).ok()?;
                }
            }
            if self.q.kind().is_identity(&image) {
                return Some(word);
            }
        }
        None
    }

    pub fn format_letters(&self, word: &[Letter]) -> String {
        word.iter()
            .map(|l| match l {
                Letter::N(i) => self.normal_names[*i].clone(),
                Letter::Sigma(j) => format!("σ({})", self.q.generator_names()[*j]),
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl WordMetric for ExtensionContext {
    fn length(&self, x: &Element) -> Option<usize> {
        self.normal_length(x)
    }
}

/// A seeded random integer-valued function on the given elements with
/// coefficients in `-bound..=bound`.
pub fn random_integer_function<R: Rng>(
    rng: &mut R,
    kind: &GroupKind,
    elements: &[Element],
    bound: i32,
) -> FinSuppFunction {
    let mut f = FinSuppFunction::zero(kind);
    for x in elements {
        let v = rng.gen_range(-bound..=bound);
        f.add_at(x.clone(), v as f64);
    }
    f
}

#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub p: Element,
    pub q: Element,
    pub f_p: FinSuppFunction,
    pub g_pq: FinSuppFunction,
    pub conv: FinSuppFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiplicationReport {
    pub radius: usize,
    pub pairs: usize,
    pub mismatches: usize,
    pub inverse_mismatches: usize,
    pub first_mismatch: Option<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectionReport {
    pub radius: usize,
    pub entries: usize,
    pub length_mismatches: usize,
    pub projection_mismatches: usize,
    pub identity_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiPsiReport {
    pub pairs: usize,
    pub psi_mismatches: usize,
    pub slices: usize,
    pub min_slice_margin: f64,
    pub slice_violations: usize,
    /// `φ(p) = ‖f_{p⁻¹}‖₂` keyed by `p`.
    pub phi: Vec<(String, f64)>,
    /// `ψ(p) = ‖g(·, p)‖₂` keyed by `p`.
    pub psi: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthWitness {
    pub element: String,
    pub n: String,
    pub q: String,
    pub len_g: usize,
    pub len_n: usize,
    pub len_q: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LengthInequalityReport {
    pub radius: usize,
    pub scanned: usize,
    pub unresolved: usize,
    pub max_ratio: f64,
    pub witness: Option<LengthWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub r: usize,
    /// `None` when no value in the row could be resolved.
    pub max: Option<usize>,
    pub unresolved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CocycleProfiles {
    pub radius: usize,
    /// `[i][j]`: max `ℓ_N(β(p, q))` over `ℓ_Q(p) = i`, `ℓ_Q(q) = j`.
    pub beta_table: Vec<Vec<Option<usize>>>,
    /// Running max of `ℓ_N(β)` over combined radius `≤ r`.
    pub amplitude: Vec<ProfileRow>,
    pub theta_growth: Vec<ProfileRow>,
    pub unresolved_beta: usize,
    pub beta_class: Classification,
    pub theta_class: Classification,
}

impl CocycleProfiles {
    /// CSV with columns `profile,r,max,unresolved`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["profile", "r", "max", "unresolved"])?;
        for (name, rows) in [
            ("beta_amplitude", &self.amplitude),
            ("theta_growth", &self.theta_growth),
        ] {
            for row in rows {
                w.write_record([
                    name.to_string(),
                    row.r.to_string(),
                    row.max.map_or("?".into(), |m| m.to_string()),
                    row.unresolved.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn group(text: &str) -> MarkedGroup {
        catalog(&Descriptor::parse(text).unwrap()).unwrap()
    }

    fn ctx(text: &str, g_radius: usize, section_radius: usize) -> ExtensionContext {
        ExtensionContext::build(
            &group(text),
            g_radius,
            section_radius,
            &BallOptions::default(),
        )
        .unwrap()
    }

    fn h(a: i64, b: i64, c: i64) -> Element {
        Element::Heisenberg([a, b, c])
    }

    #[test]
    fn quotients_are_marked_by_images() {
        let c = ctx("Heisenberg", 3, 3);
        assert_eq!(c.quotient().descriptor().to_string(), "Zn n=2");
        let c = ctx("BS1m m=2", 3, 3);
        assert_eq!(c.quotient().generators().len(), 2);
        assert!(
            ExtensionContext::build(&group("Free rank=2"), 2, 2, &BallOptions::default()).is_err()
        );
        assert!(matches!(
            ExtensionContext::build(&group("Heisenberg"), 2, 3, &BallOptions::default()),
            Err(ExtensionError::RadiusTooLarge { .. })
        ));
    }

    #[test]
    fn section_values() {
        let c = ctx("Heisenberg", 6, 6);
        let q1 = Element::Abelian(vec![0, 0]);
        assert_eq!(*c.sigma(&q1).unwrap(), c.group().identity());
        assert_eq!(*c.sigma(&Element::Abelian(vec![1, 0])).unwrap(), h(1, 0, 0));
        let r = c.check_section(6).unwrap();
        assert_eq!((r.length_mismatches, r.projection_mismatches), (0, 0));
        assert!(r.identity_ok);

        let bs = ctx("BS1m m=2", 6, 6);
        let b = bs.group().generators()[2].clone();
        for k in -6i64..=6 {
            let bk = bs.group().kind().pow(&b, k).unwrap();
            assert_eq!(*bs.sigma(&Element::Abelian(vec![k])).unwrap(), bk);
            assert_eq!(
                bs.ball_g().word_length(&bk),
                Some(k.unsigned_abs() as usize)
            );
        }
    }

    #[test]
    fn cocycle_values() {
        let c = ctx("Heisenberg", 6, 6);
        let e1 = Element::Abelian(vec![1, 0]);
        let e2 = Element::Abelian(vec![0, 1]);
        let one = Element::Abelian(vec![0, 0]);
        assert_eq!(c.beta(&one, &e2).unwrap(), c.group().identity());
        assert_eq!(c.beta(&e1, &one).unwrap(), c.group().identity());
        let z = h(0, 0, 1);
        assert_eq!(c.theta(&one, &z).unwrap(), z);
        for q in c.ball_q().elements() {
            assert_eq!(c.theta(q, &z).unwrap(), z, "center is fixed");
        }
        let b12 = c.beta(&e1, &e2).unwrap();
        let b21 = c.beta(&e2, &e1).unwrap();
        // regression constant for the BFS-order section
        assert_eq!(
            c.group().mul(&b12, &c.group().inv(&b21).unwrap()).unwrap(),
            h(0, 0, 1)
        );
        assert!(matches!(
            c.theta(&e1, &h(1, 0, 0)),
            Err(ExtensionError::NotInNormal(_))
        ));
    }

    #[test]
    fn coordinates_round_trip() {
        let c = ctx("Heisenberg", 6, 6);
        let one = c.group().identity();
        let c1 = c.coords(&one).unwrap();
        assert_eq!(
            c1,
            Coords {
                n: one.clone(),
                q: Element::Abelian(vec![0, 0])
            }
        );
        // z³x²y
        let x = c
            .group()
            .mul(&h(0, 0, 3), &c.group().eval_word(&[0, 0, 2]))
            .unwrap();
        let cx = c.coords(&x).unwrap();
        assert_eq!(cx.q, Element::Abelian(vec![2, 1]));
        assert!(matches!(cx.n, Element::Heisenberg([0, 0, _])));
        assert_eq!(c.assemble(&cx).unwrap(), x);
        let s = c.sigma(&Element::Abelian(vec![1, -2])).unwrap().clone();
        assert_eq!(c.coords(&s).unwrap().n, one);
    }

    #[test]
    fn multiplication_law_on_small_balls() {
        for text in ["Heisenberg", "BS1m m=2", "ZsdZ2"] {
            let c = ctx(text, 4, 4);
            let r = c.check_multiplication(2).unwrap();
            assert_eq!((r.mismatches, r.inverse_mismatches), (0, 0), "{text}");
            assert_eq!(r.pairs, c.ball_g().ball_size(2).pow(2));
        }
    }

    #[test]
    fn decomposition_identities() {
        let c = ctx("Heisenberg", 6, 6);
        let kind = c.group().kind().clone();
        let one = FinSuppFunction::delta(&kind, c.group().identity()).unwrap();
        let pts: Vec<Element> = c
            .ball_g()
            .elements()
            .take(c.ball_g().ball_size(2))
            .cloned()
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_integer_function(&mut rng, &kind, &pts, 2);
        assert_eq!(c.jolissaint_decompose(&one, &g).unwrap(), g);
        let x = pts[5].clone();
        let y = pts[11].clone();
        let dx = FinSuppFunction::delta(&kind, x.clone()).unwrap();
        let dy = FinSuppFunction::delta(&kind, y.clone()).unwrap();
        let prod = c
            .mult_in_coords(&c.coords(&x).unwrap(), &c.coords(&y).unwrap())
            .unwrap();
        let expected = FinSuppFunction::delta(&kind, c.assemble(&prod).unwrap()).unwrap();
        assert_eq!(c.jolissaint_decompose(&dx, &dy).unwrap(), expected);
        // g on N × {1}: ψ lives at the identity only
        let n_only =
            FinSuppFunction::from_pairs(&kind, [(h(0, 0, 1), 2.0), (h(0, 0, -3), 1.0)]).unwrap();
        let report = c.phi_psi_check(&g, &n_only).unwrap();
        assert_eq!(report.psi.len(), 1);
        assert_eq!(report.psi[0].0, "z(0,0)");
        assert_eq!(report.psi_mismatches, 0);
    }

    #[test]
    fn length_inequality_extremes() {
        let c = ctx("Heisenberg", 8, 8);
        let r = c.length_inequality_check(8).unwrap();
        assert!(r.max_ratio <= 3.0);
        assert_eq!(r.unresolved, 0);
        // central elements have ratio exactly 1 and sections at most 2
        for (i, x) in c.ball_g().elements().enumerate().skip(1) {
            let co = c.coords(x).unwrap();
            let len_x = c.ball_g().length_of_index(i) as f64;
            let n_len = c.ball_g().word_length(&co.n).unwrap() as f64;
            let q_len = c.q_length(&co.q).unwrap() as f64;
            if c.quotient().kind().is_identity(&co.q) {
                assert_eq!((n_len + q_len) / len_x, 1.0);
            }
            if c.group().kind().is_identity(&co.n) {
                assert!((n_len + q_len) / len_x <= 2.0);
            }
        }
    }

    #[test]
    fn collection_small_words() {
        let c = ctx("Heisenberg", 6, 6);
        let empty = c.cocycle_collect(&[]).unwrap();
        assert!(empty.trace.is_empty());
        assert_eq!(empty.element, c.group().identity());
        // σ(e1)σ(E1) = β(e1, E1)·σ(1)
        let w = c
            .cocycle_collect(&[Letter::Sigma(0), Letter::Sigma(1)])
            .unwrap();
        assert_eq!(w.trace.len(), 2);
        assert!(matches!(&w.trace[0], Factor::Beta { .. }));
        assert!(w.agrees());
        // xyx⁻¹y⁻¹
        let word = [
            Letter::Sigma(0),
            Letter::Sigma(2),
            Letter::Sigma(1),
            Letter::Sigma(3),
        ];
        let comm = c.cocycle_collect(&word).unwrap();
        assert!(comm.agrees());
        assert_eq!(comm.element, h(0, 0, 1));
        assert_eq!(comm.trace.len(), 4);
        let with_n = [
            Letter::Sigma(0),
            Letter::N(0),
            Letter::Sigma(1),
            Letter::N(1),
            Letter::N(1),
        ];
        let r = c.cocycle_collect(&with_n).unwrap();
        assert!(r.agrees());
        assert_eq!(r.element, h(0, 0, -1));
        assert!(matches!(r.trace[0], Factor::Conjugate { letter: 0, .. }));
        assert!(matches!(
            c.cocycle_collect(&[Letter::Sigma(0)]),
            Err(ExtensionError::NotInNormal(_))
        ));
    }

    #[test]
    fn heisenberg_cocycle_profiles() {
        let c = ctx("Heisenberg", 10, 10);
        let p = c.cocycle_profiles(10).unwrap();
        assert!(p.theta_growth.iter().all(|row| row.max == Some(1)));
        assert!(p.theta_class.class.is_polynomial());
        assert!(p.beta_class.class.is_polynomial(), "{:?}", p.beta_class);
    }

    #[test]
    fn baumslag_solitar_theta_doubles() {
        let c = ctx("BS1m m=2", 9, 9);
        let p = c.cocycle_profiles(9).unwrap();
        for row in &p.theta_growth {
            assert_eq!(row.max, Some(1 << row.r));
        }
        assert!(p.theta_class.class.is_exponential(), "{:?}", p.theta_class);
    }

    #[test]
    fn closed_form_normal_lengths_match_bfs() {
        for text in ["Heisenberg", "BS1m m=2", "ZsdZ2"] {
            let g = group(text);
            let data = ExtensionData::for_group(&g).unwrap();
            let n = MarkedGroup::with_generators(
                Descriptor::new("N"),
                g.kind().clone(),
                data.normal_generators.clone(),
                data.normal_names.clone(),
            )
            .unwrap();
            let t = build_ball(&n, 5, &BallOptions::default()).unwrap();
            for (i, x) in t.elements().enumerate() {
                assert_eq!(
                    (data.normal_length)(x),
                    Some(t.length_of_index(i)),
                    "{text} {x}"
                );
            }
        }
    }

    #[test]
    fn trivial_extension() {
        let t = build_ball(&group("Zn n=2"), 4, &BallOptions::default()).unwrap();
        let c = ExtensionContext::trivial(t).unwrap();
        assert_eq!(c.quotient().generators().len(), 0);
        assert_eq!(c.ball_q().len(), 1);
        let x = Element::Abelian(vec![2, -1]);
        assert_eq!(c.coords(&x).unwrap().n, x);
        assert_eq!(c.normal_length(&x), Some(3));
        assert_eq!(c.check_multiplication(2).unwrap().mismatches, 0);
    }

    #[test]
    fn section_csv() {
        let c = ctx("BS1m m=2", 2, 2);
        let mut buf = Vec::new();
        c.write_section_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q,sigma_word,len_q,len_g\n"));
        assert_eq!(text.lines().count(), 6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn decomposition_equals_convolution(seed in any::<u64>(), which in 0usize..3) {
            let text = ["Heisenberg", "BS1m m=2", "ZsdZ2"][which];
            let c = ctx(text, 4, 4);
            let kind = c.group().kind().clone();
            let pts: Vec<Element> = c.ball_g().elements().take(c.ball_g().ball_size(2)).cloned().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_integer_function(&mut rng, &kind, &pts, 3);
            let g = random_integer_function(&mut rng, &kind, &pts, 3);
            let fg = f.convolve(&g).unwrap();
            prop_assert_eq!(c.jolissaint_decompose(&f, &g).unwrap().max_abs_diff(&fg), 0.0);
            let report = c.phi_psi_check(&f, &g).unwrap();
            prop_assert_eq!(report.psi_mismatches, 0);
            prop_assert_eq!(report.slice_violations, 0);
        }

        #[test]
        fn collected_words_evaluate_correctly(seed in any::<u64>()) {
            let c = ctx("Heisenberg", 8, 8);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if let Some(word) = c.random_normal_word(&mut rng, 8, 1000) {
                let r = c.cocycle_collect(&word).unwrap();
                prop_assert!(r.agrees(), "{}", c.format_letters(&word));
            }
        }
    }
}
