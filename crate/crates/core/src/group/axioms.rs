use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::element::Element;
use super::{GroupError, MarkedGroup};
use crate::cayley::{build_ball, BallOptions};

/// The operations the axiom check exercises.
pub trait GroupLaw {
    fn identity(&self) -> Element;
    fn mul(&self, x: &Element, y: &Element) -> Element;
    fn inv(&self, x: &Element) -> Element;
}

impl GroupLaw for MarkedGroup {
    fn identity(&self) -> Element {
        MarkedGroup::identity(self)
    }

    fn mul(&self, x: &Element, y: &Element) -> Element {
        self.kind().mul_unchecked(x, y)
    }

    fn inv(&self, x: &Element) -> Element {
        self.kind().inv_unchecked(x)
    }
}

#[derive(Clone, Debug)]
pub struct AxiomOptions {
    /// Above this many triples, a seeded random sample of this size is used.
    pub max_triples: usize,
    pub seed: u64,
}

impl Default for AxiomOptions {
    fn default() -> Self {
        Self {
            max_triples: 200_000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxiomReport {
    pub elements: usize,
    pub triples_checked: usize,
    pub exhaustive: bool,
}

fn violation(law: &str, witness: &[&Element]) -> GroupError {
    GroupError::Axiom {
        law: law.into(),
        witness: witness.iter().map(|x| x.canonical_key()).collect(),
    }
}

/// Check identity, inverse and associativity laws over `sample`; the first
/// failure is returned with its witness.
pub fn check_group_axioms<L: GroupLaw>(
    law: &L,
    sample: &[Element],
    opts: &AxiomOptions,
) -> Result<AxiomReport, GroupError> {
    let e = law.identity();
    for x in sample {
        if law.mul(&e, x) != *x || law.mul(x, &e) != *x {
            return Err(violation("identity", &[x]));
        }
        let xi = law.inv(x);
        if law.mul(x, &xi) != e || law.mul(&xi, x) != e {
            return Err(violation("inverse", &[x]));
        }
    }
    let n = sample.len();
    let assoc = |x: &Element, y: &Element, z: &Element| -> Result<(), GroupError> {
        let lhs = law.mul(&law.mul(x, y), z);
        let rhs = law.mul(x, &law.mul(y, z));
        if lhs != rhs {
            return Err(violation("associativity", &[x, y, z]));
        }
        let inv_prod = law.inv(&law.mul(x, y));
        if inv_prod != law.mul(&law.inv(y), &law.inv(x)) {
            return Err(violation("inverse of product", &[x, y]));
        }
        Ok(())
    };
    let total = n.saturating_mul(n).saturating_mul(n);
    if total <= opts.max_triples {
        for x in sample {
            for y in sample {
                for z in sample {
                    assoc(x, y, z)?;
                }
            }
        }
        Ok(AxiomReport {
            elements: n,
            triples_checked: total,
            exhaustive: true,
        })
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.max_triples {
            let (i, j, k) = (
                rng.gen_range(0..n),
                rng.gen_range(0..n),
                rng.gen_range(0..n),
            );
            assoc(&sample[i], &sample[j], &sample[k])?;
        }
        Ok(AxiomReport {
            elements: n,
            triples_checked: opts.max_triples,
            exhaustive: false,
        })
    }
}

/// Axiom check over the ball of `sample_radius`.
pub fn check_marked_group(
    g: &MarkedGroup,
    sample_radius: usize,
    opts: &AxiomOptions,
) -> Result<AxiomReport, GroupError> {
    let ball = build_ball(g, sample_radius, &BallOptions::default())
        .map_err(|e| GroupError::Hom(e.to_string()))?;
    let sample: Vec<Element> = ball.elements().cloned().collect();
    check_group_axioms(g, &sample, opts)
}
