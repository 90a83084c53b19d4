//! Declarative experiment configuration: one TOML file describes the model,
//! weight, domain, probe, grids, and Monte Carlo budget for a single run.
//!
//! The schema is fixed and rejects unknown keys, so a typo fails loudly at
//! parse time instead of silently running defaults. Every scientific field
//! is folded into a stable digest that the runner stamps on each output
//! row; the output location is deliberately excluded, so moving results
//! around never changes their identity.
//!
//! ```toml
//! experiment = "degiorgi"
//! seed = 42
//! output = "out/degiorgi-1d"
//!
//! [model]
//! dimension = 1
//! eigenvalues = [1.0]
//!
//! [weight]
//! kind = "zero"
//!
//! [domain]
//! kind = "whole-space"
//!
//! [probe]
//! kind = "halfspace-indicator"
//! a = [1.0]
//! c = 0.0
//!
//! [grids]
//! t = [0.2, 0.1, 0.05]
//!
//! [budget]
//! outer = 20000
//! inner = 256
//! dt = 0.005
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bv::BvConfig;
use crate::domain::ConvexDomain;
use crate::error::{GaussBvError, Result};
use crate::field::{self, ScalarField};
use crate::model::GaussianModel;
use crate::potential::PenalizedPotential;
use crate::rng::stable_digest;
use crate::weight::ConvexWeight;

fn config_err(field: &str, reason: impl Into<String>) -> GaussBvError {
    GaussBvError::Config { field: field.into(), reason: reason.into() }
}

/// The experiments the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Degiorgi,
    Perimeter,
    PenaltySweep,
    Commutation,
    Voc,
    Inequalities,
    Ledoux,
    HypDCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Degiorgi,
        Experiment::Perimeter,
        Experiment::PenaltySweep,
        Experiment::Commutation,
        Experiment::Voc,
        Experiment::Inequalities,
        Experiment::Ledoux,
        Experiment::HypDCheck,
    ];

    /// The kebab-case name used in config files and output rows.
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Degiorgi => "degiorgi",
            Experiment::Perimeter => "perimeter",
            Experiment::PenaltySweep => "penalty-sweep",
            Experiment::Commutation => "commutation",
            Experiment::Voc => "voc",
            Experiment::Inequalities => "inequalities",
            Experiment::Ledoux => "ledoux",
            Experiment::HypDCheck => "hyp-d-check",
        }
    }

    /// One-line description for `list-experiments`.
    pub fn summary(self) -> &'static str {
        match self {
            Experiment::Degiorgi => {
                "regularized-variation curve t ↦ ∫|D_H T(t)u|_H dν over the \
                 t grid, extrapolated to t = 0 and compared to the matching \
                 oracle"
            }
            Experiment::Perimeter => {
                "closed-form / conditional-sampling half-space perimeter \
                 P_ν({⟨a,x⟩ < c}, Ω) for the configured weight and domain"
            }
            Experiment::PenaltySweep => {
                "penalized semigroup T_ε(t) at each ε in the grid against \
                 the 1D Crank–Nicolson Neumann reference"
            }
            Experiment::Voc => {
                "variation-of-constants identity T(t)g = S(t)g − drift \
                 integral, plus the correction envelope bound"
            }
            Experiment::Commutation => {
                "three-term gradient commutation residual |D_H T(t)f − \
                 e^{-tQ∞^{-1}}T(t)D_Hf + correction|_H at probe points"
            }
            Experiment::Inequalities => {
                "the standing identity/inequality battery (symmetry, \
                 contraction, envelopes, mass, content chain) as pass/fail \
                 reports"
            }
            Experiment::Ledoux => {
                "pair-functional content over the t grid against the \
                 (2/√π)·∫|D_H v|_H dν limit for the configured probe"
            }
            Experiment::HypDCheck => {
                "Monte Carlo integrability probe of d_Ω^{-4} near ∂Ω with a \
                 sample-doubling divergence flag"
            }
        }
    }
}

/// Model section: dimension plus either an explicit non-increasing
/// eigenvalue list or a geometric decay rule λ_k = λ₁·ρ^k.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub dimension: usize,
    #[serde(default)]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default)]
    pub lambda1: Option<f64>,
    #[serde(default)]
    pub decay: Option<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<GaussianModel> {
        if self.dimension == 0 {
            return Err(config_err(
                "model.dimension",
                "dimension must be at least 1",
            ));
        }
        let ev = match (&self.eigenvalues, self.lambda1, self.decay) {
            (Some(ev), None, None) => {
                if ev.len() != self.dimension {
                    return Err(config_err(
                        "model.eigenvalues",
                        format!(
                            "expected {} entries, got {}",
                            self.dimension,
                            ev.len()
                        ),
                    ));
                }
                ev.clone()
            }
            (None, Some(l1), Some(rho)) => {
                if !(l1 > 0.0) || !l1.is_finite() {
                    return Err(config_err(
                        "model.lambda1",
                        format!("must be positive and finite, got {l1}"),
                    ));
                }
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(config_err(
                        "model.decay",
                        format!("decay ratio must lie in (0, 1], got {rho}"),
                    ));
                }
                (0..self.dimension).map(|k| l1 * rho.powi(k as i32)).collect()
            }
            _ => {
                return Err(config_err(
                    "model",
                    "give either `eigenvalues` or both `lambda1` and `decay`",
                ))
            }
        };
        GaussianModel::new(ev).map_err(|e| {
            config_err("model.eigenvalues", e.to_string())
        })
    }
}

/// Probe function for the experiments that act on a fixed u or f.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbeSpec {
    /// u = 1_{⟨a,x⟩ < c}: the finite-perimeter set probe.
    HalfspaceIndicator { a: Vec<f64>, c: f64 },
    /// f = tanh(⟨a,x⟩/width): smooth, Lipschitz, bounded.
    TanhRamp { a: Vec<f64>, width: f64 },
    /// f = sin(⟨a,x⟩): smooth, Lipschitz, bounded.
    SinWave { a: Vec<f64> },
    /// f = exp(−⟨a,x⟩²/(2·width²)): smooth and concentrated near the
    /// origin, so zero extension outside a domain costs almost nothing.
    GaussianBump { a: Vec<f64>, width: f64 },
}

impl ProbeSpec {
    /// The default probe per experiment: the half-space indicator where a
    /// set is measured, the unit tanh ramp where a Lipschitz field is
    /// required.
    pub fn default_for(experiment: Experiment, d: usize) -> Self {
        let mut a = vec![0.0; d];
        a[0] = 1.0;
        match experiment {
            Experiment::Commutation
            | Experiment::Voc
            | Experiment::Inequalities => {
                ProbeSpec::TanhRamp { a, width: 1.0 }
            }
            // The sweep compares the penalized semigroup of the zero
            // extension against the ideal Neumann reference, so its default
            // probe must be negligible near the boundary.
            Experiment::PenaltySweep => {
                ProbeSpec::GaussianBump { a, width: 0.25 }
            }
            _ => ProbeSpec::HalfspaceIndicator { a, c: 0.0 },
        }
    }

    pub fn validate(&self, model: &GaussianModel) -> Result<()> {
        let (a, extra) = match self {
            ProbeSpec::HalfspaceIndicator { a, c } => (a, c.is_finite()),
            ProbeSpec::TanhRamp { a, width }
            | ProbeSpec::GaussianBump { a, width } => {
                (a, *width > 0.0 && width.is_finite())
            }
            ProbeSpec::SinWave { a } => (a, true),
        };
        if a.len() != model.dim() {
            return Err(config_err(
                "probe.a",
                format!(
                    "expected {} entries, got {}",
                    model.dim(),
                    a.len()
                ),
            ));
        }
        if a.iter().all(|&x| x == 0.0) || a.iter().any(|x| !x.is_finite()) {
            return Err(config_err(
                "probe.a",
                "direction must be finite and nonzero",
            ));
        }
        if !extra {
            return Err(config_err(
                "probe",
                "scalar parameter must be positive and finite",
            ));
        }
        Ok(())
    }

    pub fn build(&self) -> ScalarField {
        match self {
            ProbeSpec::HalfspaceIndicator { a, c } => {
                field::indicator_halfspace(a.clone(), *c)
            }
            ProbeSpec::TanhRamp { a, width } => {
                field::tanh_ramp(a.clone(), *width)
            }
            ProbeSpec::SinWave { a } => field::sin_wave(a.clone()),
            ProbeSpec::GaussianBump { a, width } => {
                field::gaussian_bump(a.clone(), 0.0, *width, 1.0)
            }
        }
    }

    /// The half-space parameters when the probe is an indicator, for
    /// closed-form oracle comparisons.
    pub fn halfspace(&self) -> Option<(&[f64], f64)> {
        match self {
            ProbeSpec::HalfspaceIndicator { a, c } => Some((a, *c)),
            _ => None,
        }
    }

    pub fn is_lipschitz(&self) -> bool {
        !matches!(self, ProbeSpec::HalfspaceIndicator { .. })
    }
}

/// Evaluation grids; which one must be nonempty depends on the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    #[serde(default)]
    pub t: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
}

fn default_outer() -> u64 {
    20_000
}
fn default_inner() -> u64 {
    128
}
fn default_dt() -> f64 {
    0.005
}

/// Monte Carlo budget: outer cloud size, inner paths per nested estimate,
/// and the Euler step bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default = "default_outer")]
    pub outer: u64,
    #[serde(default = "default_inner")]
    pub inner: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            outer: default_outer(),
            inner: default_inner(),
            dt: default_dt(),
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_weight() -> ConvexWeight {
    ConvexWeight::Zero
}

fn default_domain() -> ConvexDomain {
    ConvexDomain::WholeSpace
}

/// A full experiment description, parsed from one TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    /// Output directory; overridable on the command line and excluded from
    /// the config digest.
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub model: ModelSpec,
    #[serde(default = "default_weight")]
    pub weight: ConvexWeight,
    #[serde(default = "default_domain")]
    pub domain: ConvexDomain,
    /// Penalty width for domain-restricted semigroup dynamics.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub budget: Budget,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| GaussBvError::Config {
                field: "config".into(),
                reason: e.to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Build and validate the Gaussian model.
    pub fn build_model(&self) -> Result<GaussianModel> {
        self.model.build()
    }

    /// The resolved probe (configured or the experiment's default).
    pub fn probe_spec(&self, model: &GaussianModel) -> ProbeSpec {
        self.probe.clone().unwrap_or_else(|| {
            ProbeSpec::default_for(self.experiment, model.dim())
        })
    }

    /// The penalized potential for this run: the configured ε on restricted
    /// domains, no penalty on the whole space.
    pub fn build_potential(
        &self,
        model: &GaussianModel,
    ) -> Result<PenalizedPotential> {
        let p = PenalizedPotential::new(
            self.weight.clone(),
            self.domain.clone(),
            self.epsilon,
        )?;
        p.validate(model)?;
        Ok(p)
    }

    /// The Monte Carlo budget with this run's seed attached.
    pub fn bv(&self) -> Result<BvConfig> {
        BvConfig::new(
            self.budget.outer,
            self.budget.inner,
            self.budget.dt,
            self.seed,
        )
    }

    fn grid_positive(values: &[f64], field: &str) -> Result<()> {
        if values.is_empty() {
            return Err(config_err(field, "grid must be nonempty"));
        }
        for &v in values {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_err(
                    field,
                    format!("entries must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }

    fn grid_decreasing(values: &[f64], field: &str) -> Result<()> {
        Self::grid_positive(values, field)?;
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_err(field, "grid must be strictly decreasing"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model.build()?;
        self.weight
            .validate(&model)
            .map_err(|e| config_err("weight", e.to_string()))?;
        self.domain
            .validate(&model)
            .map_err(|e| config_err("domain", e.to_string()))?;
        self.bv().map_err(|e| config_err("budget", e.to_string()))?;
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(config_err(
                    "epsilon",
                    format!("penalty width must be positive, got {eps}"),
                ));
            }
        }
        let probe = self.probe_spec(&model);
        probe.validate(&model)?;

        let restricted =
            !matches!(self.domain, ConvexDomain::WholeSpace);
        let needs_dynamics = !matches!(
            self.experiment,
            Experiment::Perimeter | Experiment::HypDCheck
        );
        if restricted && needs_dynamics && self.epsilon.is_none() {
            return Err(config_err(
                "epsilon",
                "a restricted domain needs a penalty width for the \
                 semigroup dynamics",
            ));
        }
        match self.experiment {
            Experiment::Degiorgi | Experiment::Ledoux => {
                Self::grid_decreasing(&self.grids.t, "grids.t")?;
            }
            Experiment::Commutation | Experiment::Voc => {
                Self::grid_positive(&self.grids.t, "grids.t")?;
                if !probe.is_lipschitz() {
                    return Err(config_err(
                        "probe",
                        "this experiment differentiates the probe along \
                         paths; use a Lipschitz kind",
                    ));
                }
                if self.experiment == Experiment::Voc && restricted {
                    return Err(config_err(
                        "domain",
                        "the variation-of-constants identity is checked \
                         against the whole-space Mehler semigroup",
                    ));
                }
            }
            Experiment::PenaltySweep => {
                Self::grid_decreasing(&self.grids.epsilon, "grids.epsilon")?;
                Self::grid_positive(&self.grids.t, "grids.t")?;
                if !restricted {
                    return Err(config_err(
                        "domain",
                        "a penalty sweep needs a restricted domain",
                    ));
                }
            }
            Experiment::Perimeter => {
                if probe.halfspace().is_none() {
                    return Err(config_err(
                        "probe",
                        "the perimeter oracle measures a halfspace-indicator \
                         probe",
                    ));
                }
            }
            Experiment::Inequalities | Experiment::HypDCheck => {}
        }
        Ok(())
    }

    /// Stable digest of every scientific field (everything except the
    /// output location), hex-encoded; recorded in every output row.
    pub fn digest(&self) -> String {
        let model = format!("{:?}", self.model);
        let weight = format!("{:?}", self.weight);
        let domain = format!("{:?}", self.domain);
        let probe = format!("{:?}", self.probe);
        let grids = format!("{:?}", self.grids);
        let budget = format!("{:?}", self.budget);
        let eps = format!("{:?}", self.epsilon);
        format!(
            "{:016x}",
            stable_digest(&[
                self.experiment.name(),
                &self.seed.to_string(),
                &model,
                &weight,
                &domain,
                &eps,
                &probe,
                &grids,
                &budget,
            ])
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        experiment = "degiorgi"
        seed = 7

        [model]
        dimension = 1
        eigenvalues = [1.0]

        [grids]
        t = [0.2, 0.1, 0.05]
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, Experiment::Degiorgi);
        assert_eq!(cfg.weight, ConvexWeight::Zero);
        assert_eq!(cfg.domain, ConvexDomain::WholeSpace);
        assert_eq!(cfg.output, PathBuf::from("out"));
        assert_eq!(cfg.budget.outer, 20_000);
        let model = cfg.build_model().unwrap();
        let probe = cfg.probe_spec(&model);
        assert_eq!(
            probe,
            ProbeSpec::HalfspaceIndicator { a: vec![1.0], c: 0.0 }
        );
        assert!(!probe.build().lipschitz);
    }

    #[test]
    fn decay_rule_builds_geometric_spectrum() {
        let text = r#"
            experiment = "inequalities"
            seed = 1

            [model]
            dimension = 3
            lambda1 = 2.0
            decay = 0.5
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let m = cfg.build_model().unwrap();
        assert_eq!(m.eigenvalues(), &[2.0, 1.0, 0.5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("seed = 7", "seed = 7\nturbo = true");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, GaussBvError::Config { .. }), "{err}");
        assert!(err.to_string().contains("turbo"), "{err}");
    }

    #[test]
    fn empty_t_grid_names_the_field() {
        let text = MINIMAL.replace("t = [0.2, 0.1, 0.05]", "t = []");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        match err {
            GaussBvError::Config { field, .. } => {
                assert_eq!(field, "grids.t")
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn nonmonotone_curve_grid_is_rejected() {
        let text =
            MINIMAL.replace("t = [0.2, 0.1, 0.05]", "t = [0.05, 0.1]");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn restricted_domain_requires_penalty_width() {
        let text = format!(
            "{MINIMAL}\n[domain]\nkind = \"slab\"\na = [1.0]\nlo = -1.0\nhi = 1.0\n"
        );
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        match err {
            GaussBvError::Config { field, .. } => assert_eq!(field, "epsilon"),
            other => panic!("wrong error: {other}"),
        }
        // Top-level keys must precede tables in TOML, so splice ε up front.
        let text2 = MINIMAL.replace(
            "seed = 7",
            "seed = 7\nepsilon = 0.05",
        );
        let text2 = format!(
            "{text2}\n[domain]\nkind = \"slab\"\na = [1.0]\nlo = -1.0\nhi = 1.0\n"
        );
        let cfg = ExperimentConfig::from_toml(&text2).unwrap();
        let m = cfg.build_model().unwrap();
        let p = cfg.build_potential(&m).unwrap();
        assert_eq!(p.epsilon, Some(0.05));
    }

    #[test]
    fn voc_rejects_indicator_probe_and_restricted_domain() {
        let base = MINIMAL
            .replace("\"degiorgi\"", "\"voc\"")
            .replace("t = [0.2, 0.1, 0.05]", "t = [0.2]");
        // Default probe for voc is the tanh ramp, so the base parses.
        assert!(ExperimentConfig::from_toml(&base).is_ok());
        let bad_probe = format!(
            "{base}\n[probe]\nkind = \"halfspace-indicator\"\na = [1.0]\nc = 0.0\n"
        );
        assert!(ExperimentConfig::from_toml(&bad_probe).is_err());
    }

    #[test]
    fn digest_ignores_output_but_tracks_science() {
        let a = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let moved =
            MINIMAL.replace("seed = 7", "seed = 7\noutput = \"elsewhere\"");
        let b = ExperimentConfig::from_toml(&moved).unwrap();
        assert_eq!(a.digest(), b.digest());
        let reseeded = MINIMAL.replace("seed = 7", "seed = 8");
        let c = ExperimentConfig::from_toml(&reseeded).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn every_experiment_name_round_trips() {
        for e in Experiment::ALL {
            let toml = format!("x = \"{}\"", e.name());
            #[derive(Deserialize)]
            struct W {
                x: Experiment,
            }
            let w: W = toml::from_str(&toml).unwrap();
            assert_eq!(w.x, e);
            assert!(!e.summary().is_empty());
        }
    }
}
