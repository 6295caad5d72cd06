//! Exact arithmetic for the catalog of finitely generated groups.
//!
//! A [`MarkedGroup`] pairs a group law ([`GroupKind`]) with an ordered,
//! symmetric generating set. The generator order fixes every downstream
//! tie-break (BFS parents, cross-sections), so it is part of the group's
//! identity and of its [`digest`](MarkedGroup::digest).

mod axioms;
mod catalog;
mod element;
mod hom;
mod kind;

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use axioms::{check_group_axioms, check_marked_group, AxiomOptions, AxiomReport, GroupLaw};
pub use catalog::{catalog, Descriptor, ExtensionData};
pub use element::{Affine, Element, Lamps, Semidirect};
pub use hom::{GroupAutomorphism, GroupHom};
pub use kind::GroupKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("element {element} does not belong to {group}")]
    ForeignElement { group: String, element: String },
    #[error("unknown group '{0}'")]
    UnknownGroup(String),
    #[error("invalid parameter '{key}' for {group}: {reason}")]
    InvalidParam {
        group: String,
        key: String,
        reason: String,
    },
    #[error("malformed descriptor '{0}'")]
    Descriptor(String),
    #[error("cannot parse element '{input}': {reason}")]
    Parse { input: String, reason: String },
    #[error("invalid generating set: {0}")]
    Generators(String),
    #[error("relation {index} ({word}) maps to {value}, not the identity")]
    RelationViolated {
        index: usize,
        word: String,
        value: String,
    },
    #[error("{0}")]
    Hom(String),
    #[error("exponent {0} does not fit in 64 bits")]
    Overflow(String),
    #[error("axiom '{law}' fails on {witness:?}")]
    Axiom { law: String, witness: Vec<String> },
}

/// A word of powers `w₁^{e₁} w₂^{e₂} ⋯`, each `wᵢ` a short generator-index word.
pub type PowerWord = Vec<(Vec<usize>, i64)>;

/// A group law together with a finite symmetric generating set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkedGroup {
    descriptor: Descriptor,
    kind: GroupKind,
    generators: Vec<Element>,
    names: Vec<String>,
    inverse_of: Vec<usize>,
    standard: bool,
}

impl MarkedGroup {
    /// A marking by an arbitrary symmetric generating set.
    ///
    /// The set must be closed under inverses and must not contain the
    /// identity or repeated elements.
    pub fn with_generators(
        descriptor: Descriptor,
        kind: GroupKind,
        generators: Vec<Element>,
        names: Vec<String>,
    ) -> Result<Self, GroupError> {
        Self::build(descriptor, kind, generators, names, false)
    }

    pub(crate) fn build(
        descriptor: Descriptor,
        kind: GroupKind,
        generators: Vec<Element>,
        names: Vec<String>,
        standard: bool,
    ) -> Result<Self, GroupError> {
        if names.len() != generators.len() {
            return Err(GroupError::Generators(
                "one name per generator required".into(),
            ));
        }
        let mut inverse_of = Vec::with_capacity(generators.len());
        for (i, s) in generators.iter().enumerate() {
            let s_inv = kind.inv(s)?;
            if kind.is_identity(s) {
                return Err(GroupError::Generators(format!(
                    "generator {} is the identity",
                    names[i]
                )));
            }
            if generators[..i].contains(s) {
                return Err(GroupError::Generators(format!(
                    "generator {} is repeated",
                    names[i]
                )));
            }
            let j = generators.iter().position(|t| *t == s_inv).ok_or_else(|| {
                GroupError::Generators(format!("inverse of {} missing", names[i]))
            })?;
            inverse_of.push(j);
        }
        Ok(Self {
            descriptor,
            kind,
            generators,
            names,
            inverse_of,
            standard,
        })
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn generators(&self) -> &[Element] {
        &self.generators
    }

    pub fn generator_names(&self) -> &[String] {
        &self.names
    }

    /// Index of the inverse of generator `i`.
    pub fn inverse_index(&self, i: usize) -> usize {
        self.inverse_of[i]
    }

    /// Whether the generators are the catalog defaults (normal words and
    /// relations are only available then).
    pub fn is_standard(&self) -> bool {
        self.standard
    }

    pub fn identity(&self) -> Element {
        self.kind.identity()
    }

    pub fn mul(&self, x: &Element, y: &Element) -> Result<Element, GroupError> {
        self.kind.mul(x, y)
    }

    pub fn inv(&self, x: &Element) -> Result<Element, GroupError> {
        self.kind.inv(x)
    }

    pub fn contains(&self, x: &Element) -> bool {
        self.kind.contains(x)
    }

    pub fn parse_element(&self, text: &str) -> Result<Element, GroupError> {
        self.kind.parse_element(text)
    }

    pub fn eval_word(&self, word: &[usize]) -> Element {
        word.iter().fold(self.identity(), |acc, &i| {
            self.kind.mul_unchecked(&acc, &self.generators[i])
        })
    }

    /// Evaluate a power word. Exponents may be large; powers use squaring.
    pub fn eval_power_word(&self, word: &PowerWord) -> Element {
        let mut acc = self.identity();
        for (w, e) in word {
            let base = self.eval_word(w);
            let p = self
                .kind
                .pow(&base, *e)
                .expect("word value is in the group");
            acc = self.kind.mul_unchecked(&acc, &p);
        }
        acc
    }

    pub fn format_word(&self, word: &[usize]) -> String {
        word.iter()
            .map(|&i| self.names[i].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Catalog relations as generator-index words (standard markings only).
    pub fn relations(&self) -> Option<Vec<Vec<usize>>> {
        self.standard.then(|| catalog::relations(&self.kind))
    }

    /// A (not necessarily geodesic) power word evaluating to `x`.
    pub fn normal_word(&self, x: &Element) -> Result<PowerWord, GroupError> {
        if !self.standard {
            return Err(GroupError::Hom(format!(
                "no normal form for the marking {}",
                self.descriptor
            )));
        }
        if !self.contains(x) {
            return Err(GroupError::ForeignElement {
                group: self.descriptor.to_string(),
                element: x.canonical_key(),
            });
        }
        catalog::normal_word(&self.kind, x)
    }

    /// Hex digest of the descriptor and the ordered generating set.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.descriptor.to_string().as_bytes());
        for (s, n) in self.generators.iter().zip(&self.names) {
            h.update(b"\n");
            h.update(n.as_bytes());
            h.update(b"=");
            h.update(s.canonical_key().as_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

impl fmt::Display for MarkedGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <{}>", self.descriptor, self.names.join(","))
    }
}
