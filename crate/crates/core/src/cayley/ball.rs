use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use indexmap::IndexSet;
use thiserror::Error;

use super::WordMetric;
use crate::group::{Element, MarkedGroup};

const ROOT: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct BallOptions {
    /// Cap on the number of stored elements.
    pub max_elements: usize,
}

impl Default for BallOptions {
    fn default() -> Self {
        Self {
            max_elements: 10_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum BallError {
    #[error("element budget of {budget} exceeded; radius {completed_radius} is complete")]
    BudgetExceeded {
        budget: usize,
        completed_radius: usize,
        partial: Box<BallTable>,
    },
    #[error("element {0} is outside the ball table")]
    NotInTable(String),
}

/// The ball of radius `R` in a Cayley graph, stored sphere by sphere.
///
/// Indices are BFS order, so the ball of any radius `n ≤ R` is the index
/// prefix `0..ball_size(n)`. Within a sphere elements are sorted by canonical
/// key, and each element's parent is the first (parent, generator) pair that
/// reached it when expanding the previous sphere in order.
#[derive(Clone, PartialEq, Eq)]
pub struct BallTable {
    group: MarkedGroup,
    radius: usize,
    elements: IndexSet<Element>,
    sphere_starts: Vec<usize>,
    parents: Vec<(u32, u32)>,
}

impl fmt::Debug for BallTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BallTable")
            .field("group", &self.group.to_string())
            .field("radius", &self.radius)
            .field("elements", &self.elements.len())
            .finish()
    }
}

/// Breadth-first enumeration of the ball of radius `radius`.
pub fn build_ball(
    group: &MarkedGroup,
    radius: usize,
    opts: &BallOptions,
) -> Result<BallTable, BallError> {
    let mut table = BallTable {
        group: group.clone(),
        radius: 0,
        elements: IndexSet::new(),
        sphere_starts: vec![0, 1],
        parents: vec![(ROOT, ROOT)],
    };
    table.elements.insert(group.identity());
    let kind = group.kind();
    for n in 0..radius {
        let (start, end) = (table.sphere_starts[n], table.sphere_starts[n + 1]);
        let mut fresh: HashMap<Element, (u32, u32)> = HashMap::new();
        for i in start..end {
            let x = &table.elements[i];
            for (j, s) in group.generators().iter().enumerate() {
                let y = kind.mul_unchecked(x, s);
                if table.elements.contains(&y) {
                    continue;
                }
                fresh.entry(y).or_insert((i as u32, j as u32));
            }
            if table.elements.len() + fresh.len() > opts.max_elements {
                return Err(BallError::BudgetExceeded {
                    budget: opts.max_elements,
                    completed_radius: n,
                    partial: Box::new(table),
                });
            }
        }
        let mut sphere: Vec<(Element, (u32, u32))> = fresh.into_iter().collect();
        sphere.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        table.elements.reserve(sphere.len());
        for (y, parent) in sphere {
            table.elements.insert(y);
            table.parents.push(parent);
        }
        table.sphere_starts.push(table.elements.len());
        table.radius = n + 1;
    }
    Ok(table)
}

impl BallTable {
    pub(crate) fn from_parts(
        group: MarkedGroup,
        elements: IndexSet<Element>,
        sphere_starts: Vec<usize>,
        parents: Vec<(u32, u32)>,
    ) -> Self {
        Self {
            group,
            radius: sphere_starts.len() - 2,
            elements,
            sphere_starts,
            parents,
        }
    }

    pub fn group(&self) -> &MarkedGroup {
        &self.group
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `|B_n|` for `n ≤ R`.
    pub fn ball_size(&self, n: usize) -> usize {
        self.sphere_starts[n.min(self.radius) + 1]
    }

    pub fn sphere_range(&self, n: usize) -> std::ops::Range<usize> {
        self.sphere_starts[n]..self.sphere_starts[n + 1]
    }

    pub fn sphere(&self, n: usize) -> impl Iterator<Item = &Element> + '_ {
        self.sphere_range(n).map(move |i| &self.elements[i])
    }

    pub fn elements(&self) -> impl Iterator<Item = &Element> + '_ {
        self.elements.iter()
    }

    pub fn element(&self, index: usize) -> &Element {
        &self.elements[index]
    }

    pub fn index_of(&self, x: &Element) -> Option<usize> {
        self.elements.get_index_of(x)
    }

    pub fn contains(&self, x: &Element) -> bool {
        self.elements.contains(x)
    }

    pub fn length_of_index(&self, index: usize) -> usize {
        self.sphere_starts.partition_point(|&s| s <= index) - 1
    }

    /// Parent index and generator index of a non-identity entry.
    pub fn parent(&self, index: usize) -> Option<(usize, usize)> {
        let (p, g) = self.parents[index];
        (p != ROOT).then_some((p as usize, g as usize))
    }

    pub fn length_in_table(&self, x: &Element) -> Option<usize> {
        self.index_of(x).map(|i| self.length_of_index(i))
    }

    /// Exact word length: read off the table, or by meet-in-the-middle up to
    /// `2R`; `None` means the length exceeds `2R`.
    pub fn word_length(&self, x: &Element) -> Option<usize> {
        if let Some(n) = self.length_in_table(x) {
            return Some(n);
        }
        if !self.group.contains(x) {
            return None;
        }
        let kind = self.group.kind();
        // First sphere S_a holding some y with y·x ∈ B_R (the sphere is
        // closed under inversion) gives ℓ(x) = a + R.
        for a in 1..=self.radius {
            for y in self.sphere(a) {
                if self.elements.contains(&kind.mul_unchecked(y, x)) {
                    return Some(a + self.radius);
                }
            }
        }
        None
    }

    /// A word of length `ℓ(x)` in the generator indices that evaluates to `x`.
    pub fn geodesic_word(&self, x: &Element) -> Result<Vec<usize>, BallError> {
        let mut i = self
            .index_of(x)
            .ok_or_else(|| BallError::NotInTable(x.canonical_key()))?;
        let mut word = Vec::with_capacity(self.length_of_index(i));
        while let Some((p, g)) = self.parent(i) {
            word.push(g);
            i = p;
        }
        word.reverse();
        Ok(word)
    }

    pub fn growth(&self) -> GrowthSequence {
        GrowthSequence {
            sizes: self.sphere_starts[1..].to_vec(),
        }
    }
}

impl WordMetric for BallTable {
    fn length(&self, x: &Element) -> Option<usize> {
        self.word_length(x)
    }
}

/// Ball sizes `|B_0|, …, |B_R|`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrowthSequence {
    pub sizes: Vec<usize>,
}

impl GrowthSequence {
    pub fn sphere_sizes(&self) -> Vec<usize> {
        let mut prev = 0;
        self.sizes
            .iter()
            .map(|&b| {
                let s = b - prev;
                prev = b;
                s
            })
            .collect()
    }

    /// CSV with columns `n,ball_size,sphere_size`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "ball_size", "sphere_size"])?;
        for (n, (b, s)) in self.sizes.iter().zip(self.sphere_sizes()).enumerate() {
            w.write_record([n.to_string(), b.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
