//! Subgroup distortion and automorphism length growth.

use std::io::Write;

use serde::Serialize;

use crate::cayley::WordMetric;
use crate::extension::{ExtensionContext, ExtensionError};
use crate::fit::{classify_points, Classification, ClassifyOptions};
use crate::group::{Element, GroupAutomorphism, GroupError};

/// The element realising `D(n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionWitness {
    pub element: String,
    pub word: String,
    pub len_g: usize,
    pub len_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionRow {
    pub n: usize,
    /// `max{ℓ_N(x) : x ∈ N, ℓ_G(x) ≤ n}` over resolvable `x`.
    pub d: usize,
    pub witness: DistortionWitness,
    /// `|{x ∈ N : ℓ_G(x) ≤ n}|`.
    pub relative_growth: usize,
    /// Members of `N ∩ B_n` whose intrinsic length is unknown.
    pub unresolved: usize,
}

impl DistortionRow {
    pub fn partial(&self) -> bool {
        self.unresolved > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistortionProfile {
    pub rows: Vec<DistortionRow>,
    pub classification: Classification,
}

/// Options for distortion fits: radii below 6 are excluded by default.
pub fn distortion_fit_options() -> ClassifyOptions {
    ClassifyOptions {
        min_n: 6.0,
        ..ClassifyOptions::default()
    }
}

/// Scan the `N`-members of each G-sphere up to `radius`.
pub fn distortion_profile(
    ctx: &ExtensionContext,
    radius: usize,
    fit: &ClassifyOptions,
) -> Result<DistortionProfile, ExtensionError> {
    let ball = ctx.ball_g();
    let radius = radius.min(ball.radius());
    let qk = ctx.quotient().kind();
    let mut rows: Vec<DistortionRow> = Vec::with_capacity(radius + 1);
    let mut best: Option<(usize, usize)> = None;
    let mut count = 0;
    let mut unresolved = 0;
    for n in 0..=radius {
        for i in ball.sphere_range(n) {
            if !qk.is_identity(ctx.projection_of_index(i)) {
                continue;
            }
            count += 1;
            match ctx.normal_length(ball.element(i)) {
                Some(l) if best.is_none_or(|(b, _)| l > b) => best = Some((l, i)),
                Some(_) => {}
                None => unresolved += 1,
            }
        }
        let (d, i) = best.expect("identity is always a member");
        let x = ball.element(i);
        rows.push(DistortionRow {
            n,
            d,
            witness: DistortionWitness {
                element: x.canonical_key(),
                word: ball.group().format_word(&ball.geodesic_word(x)?),
                len_g: ball.length_of_index(i),
                len_n: d,
            },
            relative_growth: count,
            unresolved,
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.d as f64)).collect();
    Ok(DistortionProfile {
        classification: classify_points(&pts, fit),
        rows,
    })
}

impl DistortionProfile {
    /// Re-evaluate every witness: membership in `N` and both lengths.
    pub fn verify(&self, ctx: &ExtensionContext) -> Result<bool, GroupError> {
        for row in &self.rows {
            let x = ctx.group().parse_element(&row.witness.element)?;
            let ok = ctx.is_normal(&x)?
                && ctx.ball_g().length_in_table(&x) == Some(row.witness.len_g)
                && row.witness.len_g <= row.n
                && ctx.normal_length(&x) == Some(row.d);
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// CSV with columns `n,D,witness_word,relative_growth,unresolved`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "D", "witness_word", "relative_growth", "unresolved"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.d.to_string(),
                r.witness.word.clone(),
                r.relative_growth.to_string(),
                r.unresolved.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AutRow {
    pub k: i64,
    /// `max{ℓ(α^{-k}(u)) : u ∈ U}`, `None` if some length is unknown.
    pub lambda: Option<usize>,
    /// `ℓ(U) + 2|k|ℓ(a)` for inner automorphisms by `a`.
    pub inner_bound: Option<usize>,
    /// `Δ^k ≤ D(1+λ(k))^{2s}`.
    pub inequality_holds: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AutGrowthProfile {
    pub ell_u: usize,
    pub modular_factor: f64,
    pub constant: f64,
    pub exponent: f64,
    pub rows: Vec<AutRow>,
    /// `λ(k)` for `k = 0..K`.
    pub forward: Classification,
    /// `λ(-k)` for `k = 0..K`.
    pub backward: Classification,
}

impl AutGrowthProfile {
    pub fn lambda(&self, k: i64) -> Option<usize> {
        self.rows.iter().find(|r| r.k == k).and_then(|r| r.lambda)
    }

    pub fn unresolved(&self) -> usize {
        self.rows.iter().filter(|r| r.lambda.is_none()).count()
    }

    /// `false` only on a measured violation of the inner-automorphism bound.
    pub fn inner_bound_ok(&self) -> bool {
        self.rows.iter().all(|r| match (r.lambda, r.inner_bound) {
            (Some(l), Some(b)) => l <= b,
            _ => true,
        })
    }

    pub fn inequality_ok(&self) -> bool {
        self.rows.iter().all(|r| r.inequality_holds != Some(false))
    }

    /// CSV with columns `k,lambda,inner_bound`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "lambda", "inner_bound"])?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.lambda.map_or("?".into(), |l| l.to_string()),
                r.inner_bound.map_or(String::new(), |b| b.to_string()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `λ(k)` for `|k| ≤ K`, with the inner-automorphism bound when `α` is
/// inner and the inequality `Δ^k ≤ D(1+λ(k))^{2s}` for the given `D`, `s`.
pub fn aut_growth_profile(
    alpha: &GroupAutomorphism,
    u: &[Element],
    metric: &impl WordMetric,
    k_max: i64,
    constant: f64,
    exponent: f64,
) -> Result<AutGrowthProfile, GroupError> {
    let len_of_set = |xs: &[Element]| -> Option<usize> {
        xs.iter()
            .map(|x| metric.length(x))
            .try_fold(0, |acc, l| l.map(|l| acc.max(l)))
    };
    let ell_u = len_of_set(u).ok_or_else(|| GroupError::Hom("length of U is unknown".into()))?;
    let ell_a = alpha.conjugator().and_then(|a| metric.length(a));
    let delta = alpha.modular_factor();
    let mut rows = Vec::with_capacity(2 * k_max as usize + 1);
    let mut images_fwd: Vec<Element> = u.to_vec();
    let mut images_bwd: Vec<Element> = u.to_vec();
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for k in 0..=k_max {
        if k > 0 {
            // λ(k) uses α^{-k}, λ(-k) uses α^{k}
            images_fwd = images_fwd
                .iter()
                .map(|x| alpha.apply_inverse(x))
                .collect::<Result<_, _>>()?;
            images_bwd = images_bwd
                .iter()
                .map(|x| alpha.apply(x))
                .collect::<Result<_, _>>()?;
        }
        positive.push(len_of_set(&images_fwd));
        negative.push(len_of_set(&images_bwd));
    }
    let row = |k: i64, lambda: Option<usize>| AutRow {
        k,
        lambda,
        inner_bound: ell_a.map(|a| ell_u + 2 * k.unsigned_abs() as usize * a),
        inequality_holds: lambda.map(|l| {
            delta.powi(k as i32) <= constant * (1.0 + l as f64).powf(2.0 * exponent) * (1.0 + 1e-12)
        }),
    };
    for k in (1..=k_max).rev() {
        rows.push(row(-k, negative[k as usize]));
    }
    for k in 0..=k_max {
        rows.push(row(k, positive[k as usize]));
    }
    let classify = |seq: &[Option<usize>]| {
        let pts: Vec<(f64, f64)> = seq
            .iter()
            .enumerate()
            .map(|(k, l)| (k as f64, l.map_or(0.0, |l| l as f64)))
            .collect();
        classify_points(&pts, &ClassifyOptions::default())
    };
    Ok(AutGrowthProfile {
        ell_u,
        modular_factor: delta,
        constant,
        exponent,
        forward: classify(&positive),
        backward: classify(&negative),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley::{build_ball, closed_form_length, BallOptions};
    use crate::group::{catalog, Descriptor, MarkedGroup};

    fn group(text: &str) -> MarkedGroup {
        catalog(&Descriptor::parse(text).unwrap()).unwrap()
    }

    #[test]
    fn trivial_extension_is_undistorted() {
        let t = build_ball(&group("Zn n=2"), 12, &BallOptions::default()).unwrap();
        let ctx = ExtensionContext::trivial(t).unwrap();
        let p = distortion_profile(&ctx, 12, &distortion_fit_options()).unwrap();
        for r in &p.rows {
            assert_eq!(r.d, r.n);
            assert_eq!(r.relative_growth, ctx.ball_g().ball_size(r.n));
        }
        match p.classification.class {
            crate::fit::GrowthClass::Polynomial { degree, .. } => {
                assert!((degree - 1.0).abs() < 1e-9)
            }
            ref other => panic!("{other:?}"),
        }
        assert!(p.verify(&ctx).unwrap());
    }

    #[test]
    fn heisenberg_center_is_quadratically_distorted() {
        let ctx =
            ExtensionContext::build(&group("Heisenberg"), 12, 4, &BallOptions::default()).unwrap();
        let p = distortion_profile(&ctx, 12, &distortion_fit_options()).unwrap();
        assert!(p.verify(&ctx).unwrap());
        for w in p.rows.windows(2) {
            assert!(w[1].d >= w[0].d);
        }
        assert_eq!(p.rows[4].d, 1, "z has length 4");
        // the staircase D(2j+1) = D(2j) keeps both residuals close, so only
        // the log–log slope is asserted
        let degree = p.classification.poly_fit.unwrap().slope;
        assert!((1.6..=2.4).contains(&degree), "{degree}");
    }

    #[test]
    fn baumslag_solitar_witnesses() {
        let ctx =
            ExtensionContext::build(&group("BS1m m=2"), 11, 2, &BallOptions::default()).unwrap();
        let p = distortion_profile(&ctx, 11, &distortion_fit_options()).unwrap();
        assert!(p.verify(&ctx).unwrap());
        for k in 0..=5usize {
            assert!(p.rows[2 * k + 1].d >= 1 << k);
        }
        assert!(p.rows[11].partial());
    }

    #[test]
    fn intrinsic_length_dominates_restricted_length() {
        for text in ["Heisenberg", "BS1m m=2", "ZsdZ2"] {
            let ctx = ExtensionContext::build(&group(text), 6, 2, &BallOptions::default()).unwrap();
            let k = ctx
                .normal_generators()
                .iter()
                .map(|s| ctx.ball_g().word_length(s).unwrap())
                .max()
                .unwrap();
            for (i, x) in ctx.ball_g().elements().enumerate() {
                if ctx
                    .quotient()
                    .kind()
                    .is_identity(ctx.projection_of_index(i))
                {
                    if let Some(ln) = ctx.normal_length(x) {
                        assert!(ctx.ball_g().length_of_index(i) <= ln * k, "{text} {x}");
                    }
                }
            }
        }
    }

    #[test]
    fn identity_automorphism_is_flat() {
        let g = group("Heisenberg");
        let t = build_ball(&g, 6, &BallOptions::default()).unwrap();
        let id = GroupAutomorphism::inner(&g, &g.identity()).unwrap();
        let u = vec![g.generators()[2].clone(), g.eval_word(&[0, 2])];
        let p = aut_growth_profile(&id, &u, &t, 4, 1.0, 1.0).unwrap();
        assert!(p.rows.iter().all(|r| r.lambda == Some(2)));
        assert_eq!(p.ell_u, 2);
        assert!(p.inequality_ok());
    }

    #[test]
    fn inner_automorphism_bound() {
        let g = group("Heisenberg");
        let t = build_ball(&g, 11, &BallOptions::default()).unwrap();
        let x = g.generators()[0].clone();
        let alpha = GroupAutomorphism::inner(&g, &x).unwrap();
        let y = g.generators()[2].clone();
        let p = aut_growth_profile(&alpha, &[y], &t, 10, 1.0, 1.0).unwrap();
        assert_eq!(p.unresolved(), 0);
        assert!(p.inner_bound_ok());
        assert_eq!(p.lambda(0), Some(1));
        for k in -10..=10i64 {
            assert!(p.lambda(k).unwrap() <= 1 + 2 * k.unsigned_abs() as usize);
        }
    }

    #[test]
    fn hyperbolic_automorphism_grows_exponentially() {
        let g = group("Zn n=2");
        let alpha = GroupAutomorphism::linear(&g, [[2, 1], [1, 1]]).unwrap();
        let e1 = g.generators()[0].clone();
        let p = aut_growth_profile(&alpha, &[e1], &closed_form_length, 10, 1.0, 1.0).unwrap();
        let rate = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        for c in [&p.forward, &p.backward] {
            match c.class {
                crate::fit::GrowthClass::Exponential { rate: r, .. } => {
                    assert!((r - rate).abs() < 0.05, "{r}")
                }
                ref other => panic!("{other:?}"),
            }
        }
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("k,lambda,inner_bound\n-10,"));
    }
}
