use super::element::Element;
use super::{GroupError, GroupKind, MarkedGroup};

/// A homomorphism given by the images of the source generators.
#[derive(Clone, Debug)]
pub struct GroupHom {
    source: MarkedGroup,
    target: MarkedGroup,
    images: Vec<Element>,
}

impl GroupHom {
    /// Build the homomorphism, checking every catalog relation of the source
    /// and that inverse generators map to inverse images.
    pub fn new(
        source: MarkedGroup,
        target: MarkedGroup,
        images: Vec<Element>,
    ) -> Result<Self, GroupError> {
        if images.len() != source.generators().len() {
            return Err(GroupError::Hom(format!(
                "{} images for {} generators",
                images.len(),
                source.generators().len()
            )));
        }
        if let Some(bad) = images.iter().find(|x| !target.contains(x)) {
            return Err(GroupError::ForeignElement {
                group: target.descriptor().to_string(),
                element: bad.canonical_key(),
            });
        }
        let relations = source.relations().ok_or_else(|| {
            GroupError::Hom(format!(
                "source marking {} has no relation set",
                source.descriptor()
            ))
        })?;
        let hom = Self {
            source,
            target,
            images,
        };
        for i in 0..hom.images.len() {
            let j = hom.source.inverse_index(i);
            let prod = hom.target.mul(&hom.images[i], &hom.images[j])?;
            if !hom.target.kind().is_identity(&prod) {
                return Err(GroupError::RelationViolated {
                    index: usize::MAX,
                    word: hom.source.format_word(&[i, j]),
                    value: prod.canonical_key(),
                });
            }
        }
        for (index, r) in relations.iter().enumerate() {
            let value = hom.apply_word(r);
            if !hom.target.kind().is_identity(&value) {
                return Err(GroupError::RelationViolated {
                    index,
                    word: hom.source.format_word(r),
                    value: value.canonical_key(),
                });
            }
        }
        Ok(hom)
    }

    pub fn source(&self) -> &MarkedGroup {
        &self.source
    }

    pub fn target(&self) -> &MarkedGroup {
        &self.target
    }

    pub fn images(&self) -> &[Element] {
        &self.images
    }

    pub fn apply_word(&self, word: &[usize]) -> Element {
        let kind = self.target.kind();
        word.iter().fold(kind.identity(), |acc, &i| {
            kind.mul_unchecked(&acc, &self.images[i])
        })
    }

    /// Image of an arbitrary source element, through its normal word.
    pub fn apply(&self, x: &Element) -> Result<Element, GroupError> {
        let kind = self.target.kind();
        let mut acc = kind.identity();
        for (w, e) in self.source.normal_word(x)? {
            let base = self.apply_word(&w);
            acc = kind.mul_unchecked(&acc, &kind.pow(&base, e)?);
        }
        Ok(acc)
    }
}

/// An automorphism with its inverse.
///
/// `modular_factor` is the scaling of the Haar measure; every catalog group
/// is discrete, where counting measure is preserved and the factor is 1.
#[derive(Clone, Debug)]
pub struct GroupAutomorphism {
    forward: GroupHom,
    backward: GroupHom,
    modular_factor: f64,
    conjugator: Option<Element>,
}

impl GroupAutomorphism {
    pub fn new(forward: GroupHom, backward: GroupHom) -> Result<Self, GroupError> {
        if forward.source() != forward.target()
            || backward.source() != forward.source()
            || backward.target() != forward.source()
        {
            return Err(GroupError::Hom(
                "automorphism maps must be endomorphisms of one marked group".into(),
            ));
        }
        let aut = Self {
            forward,
            backward,
            modular_factor: 1.0,
            conjugator: None,
        };
        // generators suffice: both composites are homomorphisms
        let gens = aut.forward.source().generators().to_vec();
        aut.verify_round_trip(&gens)?;
        Ok(aut)
    }

    /// Conjugation `x ↦ a x a⁻¹`.
    pub fn inner(group: &MarkedGroup, a: &Element) -> Result<Self, GroupError> {
        let a_inv = group.inv(a)?;
        let conj = |c: &Element, ci: &Element| -> Result<Vec<Element>, GroupError> {
            group
                .generators()
                .iter()
                .map(|s| group.mul(&group.mul(c, s)?, ci))
                .collect()
        };
        let fwd = GroupHom::new(group.clone(), group.clone(), conj(a, &a_inv)?)?;
        let bwd = GroupHom::new(group.clone(), group.clone(), conj(&a_inv, a)?)?;
        let mut aut = Self::new(fwd, bwd)?;
        aut.conjugator = Some(a.clone());
        Ok(aut)
    }

    /// The linear automorphism `v ↦ A v` of ℤ² (standard marking).
    pub fn linear(group: &MarkedGroup, matrix: [[i64; 2]; 2]) -> Result<Self, GroupError> {
        if *group.kind() != (GroupKind::Abelian { rank: 2 }) {
            return Err(GroupError::Hom("linear automorphisms need Zn n=2".into()));
        }
        let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
        if det.abs() != 1 {
            return Err(GroupError::Hom("|det A| must be 1".into()));
        }
        let inverse = [
            [matrix[1][1] * det, -matrix[0][1] * det],
            [-matrix[1][0] * det, matrix[0][0] * det],
        ];
        let images = |a: [[i64; 2]; 2]| -> Vec<Element> {
            (0..4)
                .map(|i| {
                    let col = i / 2;
                    let sign = if i % 2 == 0 { 1 } else { -1 };
                    Element::Abelian(vec![sign * a[0][col], sign * a[1][col]])
                })
                .collect()
        };
        let fwd = GroupHom::new(group.clone(), group.clone(), images(matrix))?;
        let bwd = GroupHom::new(group.clone(), group.clone(), images(inverse))?;
        Self::new(fwd, bwd)
    }

    pub fn forward(&self) -> &GroupHom {
        &self.forward
    }

    pub fn backward(&self) -> &GroupHom {
        &self.backward
    }

    pub fn group(&self) -> &MarkedGroup {
        self.forward.source()
    }

    pub fn modular_factor(&self) -> f64 {
        self.modular_factor
    }

    pub fn conjugator(&self) -> Option<&Element> {
        self.conjugator.as_ref()
    }

    pub fn apply(&self, x: &Element) -> Result<Element, GroupError> {
        self.forward.apply(x)
    }

    pub fn apply_inverse(&self, x: &Element) -> Result<Element, GroupError> {
        self.backward.apply(x)
    }

    /// `αᵏ(x)` for any integer `k`.
    pub fn power(&self, x: &Element, k: i64) -> Result<Element, GroupError> {
        let step = if k >= 0 {
            &self.forward
        } else {
            &self.backward
        };
        let mut y = x.clone();
        for _ in 0..k.unsigned_abs() {
            y = step.apply(&y)?;
        }
        Ok(y)
    }

    /// Check both composites are the identity on `elements`.
    pub fn verify_round_trip(&self, elements: &[Element]) -> Result<(), GroupError> {
        for x in elements {
            let there = self.backward.apply(&self.forward.apply(x)?)?;
            let back = self.forward.apply(&self.backward.apply(x)?)?;
            if there != *x || back != *x {
                return Err(GroupError::Hom(format!(
                    "automorphism round trip fails at {x}"
                )));
            }
        }
        Ok(())
    }
}
