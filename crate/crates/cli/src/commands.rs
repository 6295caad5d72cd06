//! One function per subcommand, each returning a [`Report`].

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdlab::cayley::cache::load_or_build;
use rdlab::cayley::{closed_form_length, BallError, BallOptions, BallTable};
use rdlab::config::{AutSpec, ExperimentConfig, SupportShape};
use rdlab::convolution::{
    opnorm_lower, rd_profile, ConvolutionError, EstimatorOptions, FinSuppFunction,
};
use rdlab::distortion::{aut_growth_profile, distortion_fit_options, distortion_profile};
use rdlab::extension::{random_integer_function, ExtensionContext, ExtensionError};
use rdlab::fit::{classify_growth, ClassifyOptions, GrowthClass};
use rdlab::group::{catalog, Element, GroupAutomorphism, GroupError, MarkedGroup};
use serde_json::{json, Value};
use thiserror::Error;

use crate::report::Report;

/// Coefficients of random test functions lie in `-BOUND..=BOUND`.
const BOUND: i32 = 5;
/// Radius of the `B_r × B_r` multiplication-law scan run by `section`,
/// capped at half the section radius so products stay in the table.
const MULT_RADIUS: usize = 3;
/// Attempts per random word with trivial image in the quotient.
const WORD_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    /// The subcommand does not apply to this group.
    #[error("{0}")]
    Unsupported(String),
    #[error("element budget of {budget} exceeded; radius {completed_radius} is complete")]
    Budget {
        budget: usize,
        completed_radius: usize,
    },
    #[error("{0}")]
    Failed(String),
}

impl From<BallError> for CliError {
    fn from(e: BallError) -> Self {
        match e {
            BallError::BudgetExceeded {
                budget,
                completed_radius,
                ..
            } => CliError::Budget {
                budget,
                completed_radius,
            },
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ExtensionError> for CliError {
    fn from(e: ExtensionError) -> Self {
        match e {
            ExtensionError::Ball(b) => b.into(),
            ExtensionError::NoExtension(g) => {
                CliError::Unsupported(format!("{g} has no catalog extension"))
            }
            ExtensionError::RadiusTooLarge { .. } => CliError::Usage(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<ConvolutionError> for CliError {
    fn from(e: ConvolutionError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<GroupError> for CliError {
    fn from(e: GroupError) -> Self {
        CliError::Failed(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub const COMMANDS: &[&str] = &[
    "growth",
    "rd-profile",
    "opnorm",
    "section",
    "cocycles",
    "decompose-check",
    "length-ineq",
    "distortion",
    "aut-growth",
];

pub struct Runner {
    pub cfg: ExperimentConfig,
    group: MarkedGroup,
    cache: Option<PathBuf>,
}

impl Runner {
    pub fn new(cfg: ExperimentConfig, cache: Option<PathBuf>) -> Result<Self, CliError> {
        let group = catalog(&cfg.descriptor).map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(Self { cfg, group, cache })
    }

    pub fn run(&self, command: &str) -> Result<Report, CliError> {
        match command {
            "growth" => self.growth(),
            "rd-profile" => self.rd_profile(),
            "opnorm" => self.opnorm(),
            "section" => self.section(),
            "cocycles" => self.cocycles(),
            "decompose-check" => self.decompose_check(),
            "length-ineq" => self.length_ineq(),
            "distortion" => self.distortion(),
            "aut-growth" => self.aut_growth(),
            other => Err(CliError::Usage(format!("unknown subcommand '{other}'"))),
        }
    }

    fn ball(&self, radius: usize) -> Result<BallTable, CliError> {
        Ok(load_or_build(
            &self.group,
            radius,
            self.cache.as_deref(),
            &BallOptions::default(),
        )?)
    }

    fn context(
        &self,
        ball_radius: usize,
        section_radius: usize,
    ) -> Result<ExtensionContext, CliError> {
        let table = self.ball(ball_radius.max(section_radius))?;
        Ok(ExtensionContext::from_ball(table, section_radius)?)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.seed)
    }

    fn estimator(&self) -> EstimatorOptions {
        EstimatorOptions {
            tol: self.cfg.tol,
            max_iter: self.cfg.max_iter,
            ..EstimatorOptions::default()
        }
    }

    fn generator(&self, name: &str) -> Result<Element, CliError> {
        self.group
            .generator_names()
            .iter()
            .position(|n| n == name)
            .map(|i| self.group.generators()[i].clone())
            .ok_or_else(|| {
                CliError::Unsupported(format!(
                    "{} has no generator '{name}' (generators: {})",
                    self.cfg.descriptor,
                    self.group.generator_names().join(" ")
                ))
            })
    }

    fn growth(&self) -> Result<Report, CliError> {
        let t = self.ball(self.cfg.ball_radius)?;
        let seq = t.growth();
        let mut r = Report::new("growth");
        seq.write_csv(&mut r.csv)?;
        let sizes: Vec<f64> = seq.sizes.iter().map(|&b| b as f64).collect();
        let c = classify_growth(&sizes, &ClassifyOptions::default());
        r.line("radius", t.radius());
        r.line("ball_size", t.len());
        r.line("class", c.class.label());
        push_class(&mut r, "", &c.class);
        r.data = json!({ "sizes": seq.sizes, "spheres": seq.sphere_sizes(), "classification": c });
        Ok(r)
    }

    fn rd_profile(&self) -> Result<Report, CliError> {
        let (radius, m) = (self.cfg.ball_radius, self.cfg.truncation);
        let t = self.ball(radius + m)?;
        let p = rd_profile(&t, radius, m, &self.estimator())?;
        let mut r = Report::new("rd-profile");
        p.write_csv(&mut r.csv)?;
        r.line("radius", radius);
        r.line("truncation", m);
        r.line("fitted_exponent", opt_f64(p.fitted_exponent()));
        r.line("poly_residual", opt_f64(p.poly_fit.map(|f| f.residual)));
        r.line("exp_slope", opt_f64(p.exp_fit.map(|f| f.slope)));
        r.line("exp_residual", opt_f64(p.exp_fit.map(|f| f.residual)));
        r.line("converged", p.rows.iter().all(|row| row.converged));
        r.ok = p
            .rows
            .iter()
            .all(|row| row.opnorm_lower <= row.ball_size as f64 * (1.0 + 1e-12));
        r.data = serde_json::to_value(&p).expect("profile serializes");
        Ok(r)
    }

    fn opnorm(&self) -> Result<Report, CliError> {
        let m = self.cfg.truncation;
        let (SupportShape::Ball(s) | SupportShape::Sphere(s)) = self.cfg.support;
        let t = self.ball(m + s)?;
        let f = match self.cfg.support {
            SupportShape::Ball(s) => FinSuppFunction::ball_indicator(&t, s),
            SupportShape::Sphere(s) => FinSuppFunction::sphere_indicator(&t, s),
        };
        let est = opnorm_lower(&f, &t, m, &self.estimator())?;
        let monotone = est.history.windows(2).all(|w| w[0].value <= w[1].value);
        let mut r = Report::new("opnorm");
        est.write_history_csv(&mut r.csv)?;
        r.line("function", self.cfg.support.to_string());
        r.line("truncation", m);
        r.line("value", est.value);
        r.line("ceiling", est.ceiling);
        r.line("converged", est.converged);
        r.line("iterations", est.iterations);
        r.line("monotone", monotone);
        r.ok = monotone && est.value <= est.ceiling * (1.0 + 1e-12);
        r.data = serde_json::to_value(&est).expect("estimate serializes");
        Ok(r)
    }

    fn section(&self) -> Result<Report, CliError> {
        let radius = self.cfg.section_radius;
        let ctx = self.context(radius, radius)?;
        let s = ctx.check_section(radius)?;
        let mult = ctx.check_multiplication(MULT_RADIUS.min(radius / 2))?;
        let mut r = Report::new("section");
        ctx.write_section_csv(&mut r.csv)?;
        r.line("radius", radius);
        r.line("entries", s.entries);
        r.line("length_mismatches", s.length_mismatches);
        r.line("projection_mismatches", s.projection_mismatches);
        r.line("multiplication_pairs", mult.pairs);
        r.line("mismatches", mult.mismatches + mult.inverse_mismatches);
        r.ok = s.length_mismatches == 0
            && s.projection_mismatches == 0
            && s.identity_ok
            && mult.mismatches == 0
            && mult.inverse_mismatches == 0;
        r.data = json!({ "section": s, "multiplication": mult });
        Ok(r)
    }

    fn cocycles(&self) -> Result<Report, CliError> {
        let radius = self.cfg.section_radius;
        let ctx = self.context(radius, radius)?;
        let prof = ctx.cocycle_profiles(radius)?;
        let mut rng = self.rng();
        let (mut checked, mut mismatches, mut skipped) = (0usize, 0usize, 0usize);
        let mut first_mismatch = None;
        for _ in 0..self.cfg.words {
            let Some(word) = ctx.random_normal_word(&mut rng, self.cfg.word_length, WORD_ATTEMPTS)
            else {
                skipped += 1;
                continue;
            };
            let collected = ctx.cocycle_collect(&word)?;
            checked += 1;
            if !collected.agrees() {
                mismatches += 1;
                first_mismatch.get_or_insert_with(|| ctx.format_letters(&word));
            }
        }
        let mut r = Report::new("cocycles");
        prof.write_csv(&mut r.csv)?;
        r.line("radius", radius);
        r.line("beta_class", prof.beta_class.class.label());
        push_class(&mut r, "beta_", &prof.beta_class.class);
        r.line("theta_class", prof.theta_class.class.label());
        push_class(&mut r, "theta_", &prof.theta_class.class);
        r.line("unresolved_beta", prof.unresolved_beta);
        r.line("words_checked", checked);
        r.line("words_skipped", skipped);
        r.line("mismatches", mismatches);
        r.ok = mismatches == 0;
        r.data = json!({ "profiles": prof, "first_mismatch": first_mismatch });
        Ok(r)
    }

    fn decompose_check(&self) -> Result<Report, CliError> {
        let fr = self.cfg.function_radius;
        let ctx = self.context(
            self.cfg.section_radius.max(2 * fr),
            self.cfg.section_radius.max(2 * fr),
        )?;
        let support: Vec<Element> = ctx
            .ball_g()
            .elements()
            .take(ctx.ball_g().ball_size(fr))
            .cloned()
            .collect();
        let kind = self.group.kind();
        let mut rng = self.rng();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "pair",
            "max_abs_deviation",
            "psi_mismatches",
            "slice_violations",
        ])?;
        let (mut mismatches, mut violations, mut worst) = (0usize, 0usize, 0.0f64);
        for pair in 0..self.cfg.pairs {
            let f = random_integer_function(&mut rng, kind, &support, BOUND);
            let g = random_integer_function(&mut rng, kind, &support, BOUND);
            let deviation = ctx
                .jolissaint_decompose(&f, &g)?
                .max_abs_diff(&f.convolve(&g)?);
            let pp = ctx.phi_psi_check(&f, &g)?;
            mismatches += usize::from(deviation != 0.0) + pp.psi_mismatches;
            violations += pp.slice_violations;
            worst = worst.max(deviation);
            w.write_record([
                pair.to_string(),
                deviation.to_string(),
                pp.psi_mismatches.to_string(),
                pp.slice_violations.to_string(),
            ])?;
        }
        let mut r = Report::new("decompose-check");
        r.csv = w
            .into_inner()
            .map_err(|e| CliError::Failed(e.to_string()))?;
        r.line("pairs", self.cfg.pairs);
        r.line("function_radius", fr);
        r.line("max_abs_deviation", worst);
        r.line("slice_violations", violations);
        r.line("mismatches", mismatches);
        r.ok = mismatches == 0 && violations == 0;
        r.data = json!({ "pairs": self.cfg.pairs, "max_abs_deviation": worst, "mismatches": mismatches, "slice_violations": violations });
        Ok(r)
    }

    fn length_ineq(&self) -> Result<Report, CliError> {
        let radius = self.cfg.ball_radius;
        let ctx = self.context(radius, radius)?;
        let rep = ctx.length_inequality_check(radius)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "radius",
            "scanned",
            "unresolved",
            "max_ratio",
            "element",
            "n",
            "q",
            "len_g",
            "len_n",
            "len_q",
        ])?;
        let mut row = vec![
            rep.radius.to_string(),
            rep.scanned.to_string(),
            rep.unresolved.to_string(),
            rep.max_ratio.to_string(),
        ];
        match &rep.witness {
            Some(x) => row.extend([
                x.element.clone(),
                x.n.clone(),
                x.q.clone(),
                x.len_g.to_string(),
                x.len_n.to_string(),
                x.len_q.to_string(),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        w.write_record(&row)?;
        let mut r = Report::new("length-ineq");
        r.csv = w
            .into_inner()
            .map_err(|e| CliError::Failed(e.to_string()))?;
        r.line("radius", rep.radius);
        r.line("scanned", rep.scanned);
        r.line("unresolved", rep.unresolved);
        r.line("max ratio", rep.max_ratio);
        r.ok = rep.max_ratio <= 3.0;
        r.data = serde_json::to_value(&rep).expect("report serializes");
        Ok(r)
    }

    fn distortion(&self) -> Result<Report, CliError> {
        let radius = self.cfg.ball_radius;
        let ctx = self.context(radius, self.cfg.section_radius.min(radius))?;
        let prof = distortion_profile(&ctx, radius, &distortion_fit_options())?;
        let verified = prof.verify(&ctx)?;
        let mut r = Report::new("distortion");
        prof.write_csv(&mut r.csv)?;
        r.line("radius", radius);
        r.line("D", prof.rows.last().map_or(0, |row| row.d));
        r.line("class", prof.classification.class.label());
        push_class(&mut r, "", &prof.classification.class);
        r.line(
            "poly_slope",
            opt_f64(prof.classification.poly_fit.map(|f| f.slope)),
        );
        r.line(
            "partial_rows",
            prof.rows.iter().filter(|row| row.partial()).count(),
        );
        r.line("witnesses_verified", verified);
        r.ok = verified;
        r.data = serde_json::to_value(&prof).expect("profile serializes");
        Ok(r)
    }

    fn aut_growth(&self) -> Result<Report, CliError> {
        let g = &self.group;
        let alpha = match &self.cfg.aut {
            AutSpec::Identity => GroupAutomorphism::inner(g, &g.identity()),
            AutSpec::Inner(name) => GroupAutomorphism::inner(g, &self.generator(name)?),
            AutSpec::Linear(a) => GroupAutomorphism::linear(g, *a),
        }
        .map_err(|e| CliError::Unsupported(e.to_string()))?;
        let u = self
            .cfg
            .aut_set
            .iter()
            .map(|n| self.generator(n))
            .collect::<Result<Vec<_>, _>>()?;
        let table = match closed_form_length(&g.identity()) {
            Some(_) => None,
            None => Some(self.ball(self.cfg.ball_radius)?),
        };
        let metric = |x: &Element| match &table {
            None => closed_form_length(x),
            Some(t) => t.word_length(x),
        };
        let k = self.cfg.aut_radius as i64;
        let prof = aut_growth_profile(&alpha, &u, &metric, k, 1.0, 1.0)?;

        // (f∘α)*(g∘α) = (f*g)∘α and ‖f∘α‖₂ = ‖f‖₂ on seeded integer pairs
        let small = self.ball(self.cfg.function_radius)?;
        let support: Vec<Element> = small.elements().cloned().collect();
        let mut rng = self.rng();
        let mut identity_mismatches = 0usize;
        for _ in 0..self.cfg.pairs {
            let f = random_integer_function(&mut rng, g.kind(), &support, BOUND);
            let h = random_integer_function(&mut rng, g.kind(), &support, BOUND);
            let lhs = f.compose(&alpha)?.convolve(&h.compose(&alpha)?)?;
            let rhs = f.convolve(&h)?.compose(&alpha)?;
            identity_mismatches += usize::from(lhs != rhs);
            identity_mismatches +=
                usize::from(f.compose(&alpha)?.l2_norm_squared() != f.l2_norm_squared());
        }

        let mut r = Report::new("aut-growth");
        prof.write_csv(&mut r.csv)?;
        r.line("automorphism", self.cfg.aut.to_string());
        r.line("K", k);
        r.line("ell_U", prof.ell_u);
        r.line("modular_factor", prof.modular_factor);
        r.line("forward_class", prof.forward.class.label());
        push_class(&mut r, "forward_", &prof.forward.class);
        r.line("unresolved", prof.unresolved());
        r.line("inner_bound_ok", prof.inner_bound_ok());
        r.line("identity_pairs", self.cfg.pairs);
        r.line("mismatches", identity_mismatches);
        r.ok = prof.inner_bound_ok() && prof.inequality_ok() && identity_mismatches == 0;
        r.data = json!({ "profile": prof, "identity_mismatches": identity_mismatches });
        Ok(r)
    }
}

fn opt_f64(v: Option<f64>) -> Value {
    v.map_or(Value::Null, Value::from)
}

fn push_class(r: &mut Report, prefix: &str, c: &GrowthClass) {
    match c {
        GrowthClass::Polynomial { degree, .. } => r.line(format!("{prefix}degree"), *degree),
        GrowthClass::Exponential { rate, .. } => r.line(format!("{prefix}rate"), *rate),
        GrowthClass::Inconclusive { .. } => {}
    }
}
