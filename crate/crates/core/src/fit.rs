//! Least-squares line fits and the polynomial/exponential growth classifier.

use serde::Serialize;

/// `y ≈ slope·x + intercept` with the RMS residual of the fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

/// Ordinary least squares. Needs at least two distinct abscissae.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    Some(LineFit {
        slope,
        intercept,
        residual: (ss / n as f64).sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthClass {
    Polynomial {
        degree: f64,
        residual: f64,
    },
    Exponential {
        rate: f64,
        residual: f64,
    },
    Inconclusive {
        poly_residual: f64,
        exp_residual: f64,
    },
}

impl GrowthClass {
    pub fn is_polynomial(&self) -> bool {
        matches!(self, GrowthClass::Polynomial { .. })
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, GrowthClass::Exponential { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            GrowthClass::Polynomial { .. } => "polynomial",
            GrowthClass::Exponential { .. } => "exponential",
            GrowthClass::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassifyOptions {
    /// Points with `n` below this are never fitted.
    pub min_n: f64,
    /// A model wins when its residual is below this fraction of the other's.
    pub residual_ratio: f64,
    /// Fewer points than this yields `Inconclusive`.
    pub min_points: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            min_n: 1.0,
            residual_ratio: 0.5,
            min_points: 8,
        }
    }
}

/// The result of classifying a sequence, with the fit window used.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub class: GrowthClass,
    pub window: (f64, f64),
    /// log y against log n.
    pub poly_fit: Option<LineFit>,
    /// log y against n.
    pub exp_fit: Option<LineFit>,
}

/// The top half of `points` (by position), restricted to `n ≥ min_n`.
pub fn top_half(points: &[(f64, f64)], min_n: f64) -> Vec<(f64, f64)> {
    points[points.len() / 2..]
        .iter()
        .copied()
        .filter(|(n, _)| *n >= min_n)
        .collect()
}

/// Classify `(n, value)` points as polynomial or exponential growth by
/// comparing a log–log fit with a log–linear fit over the top half.
pub fn classify_points(points: &[(f64, f64)], opts: &ClassifyOptions) -> Classification {
    let window = top_half(points, opts.min_n.max(f64::MIN_POSITIVE));
    let bounds = (
        window.first().map_or(f64::NAN, |p| p.0),
        window.last().map_or(f64::NAN, |p| p.0),
    );
    let inconclusive = |poly_fit, exp_fit| Classification {
        class: GrowthClass::Inconclusive {
            poly_residual: f64::NAN,
            exp_residual: f64::NAN,
        },
        window: bounds,
        poly_fit,
        exp_fit,
    };
    if points.len() < opts.min_points || window.len() < 2 || window.iter().any(|p| p.1 <= 0.0) {
        return inconclusive(None, None);
    }
    let ns: Vec<f64> = window.iter().map(|p| p.0).collect();
    let log_n: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let log_y: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let (Some(poly), Some(exp)) = (fit_line(&log_n, &log_y), fit_line(&ns, &log_y)) else {
        return inconclusive(None, None);
    };
    let lo = window.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = window.iter().map(|p| p.1).fold(0.0, f64::max);
    let class = if hi <= lo * (1.0 + 1e-12) {
        // bounded: polynomial of degree 0
        GrowthClass::Polynomial {
            degree: 0.0,
            residual: poly.residual,
        }
    } else if poly.residual < opts.residual_ratio * exp.residual {
        GrowthClass::Polynomial {
            degree: poly.slope,
            residual: poly.residual,
        }
    } else if exp.residual < opts.residual_ratio * poly.residual {
        GrowthClass::Exponential {
            rate: exp.slope,
            residual: exp.residual,
        }
    } else {
        GrowthClass::Inconclusive {
            poly_residual: poly.residual,
            exp_residual: exp.residual,
        }
    };
    Classification {
        class,
        window: bounds,
        poly_fit: Some(poly),
        exp_fit: Some(exp),
    }
}

/// Classify a sequence indexed by `n = 0, 1, 2, …`.
pub fn classify_growth(seq: &[f64], opts: &ClassifyOptions) -> Classification {
    let points: Vec<(f64, f64)> = seq
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as f64, v))
        .collect();
    classify_points(&points, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let f = fit_line(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_none());
    }

    #[test]
    fn odd_numbers_are_polynomial() {
        let seq: Vec<f64> = (0..12).map(|n| 2.0 * n as f64 + 1.0).collect();
        let c = classify_growth(&seq, &ClassifyOptions::default());
        match c.class {
            GrowthClass::Polynomial { degree, .. } => {
                assert!((degree - 1.0).abs() < 0.1, "{degree}")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn powers_of_three_are_exponential() {
        let seq: Vec<f64> = (0..12).map(|n| 3f64.powi(n)).collect();
        let c = classify_growth(&seq, &ClassifyOptions::default());
        match c.class {
            GrowthClass::Exponential { rate, .. } => assert!((rate - 3f64.ln()).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constants_are_degree_zero() {
        let c = classify_growth(&[1.0; 10], &ClassifyOptions::default());
        assert_eq!(c.class.label(), "polynomial");
    }

    #[test]
    fn short_or_nonpositive_sequences_are_inconclusive() {
        let opts = ClassifyOptions::default();
        assert_eq!(
            classify_growth(&[1.0, 2.0, 3.0], &opts).class.label(),
            "inconclusive"
        );
        let mut seq = vec![1.0; 10];
        seq[9] = 0.0;
        assert_eq!(classify_growth(&seq, &opts).class.label(), "inconclusive");
    }

    proptest! {
        #[test]
        fn classification_is_scale_invariant(
            base in 1.05f64..4.0,
            degree in 0.5f64..5.0,
            scale in 0.01f64..100.0,
            exponential in any::<bool>(),
        ) {
            let seq: Vec<f64> = (0..16)
                .map(|n| {
                    let n = n as f64;
                    if exponential { base.powf(n) } else { (1.0 + n).powf(degree) }
                })
                .collect();
            let scaled: Vec<f64> = seq.iter().map(|v| v * scale).collect();
            let opts = ClassifyOptions::default();
            let a = classify_growth(&seq, &opts);
            let b = classify_growth(&scaled, &opts);
            prop_assert_eq!(a.class.label(), b.class.label());
        }
    }
}
