//! Experiment runner: executes one validated [`ExperimentConfig`] and emits
//! a CSV of per-point rows plus a JSON summary, both written atomically
//! (temp file in the target directory, then rename) so reruns never
//! interleave with readers.
//!
//! The CSV schema is versioned in a header comment and fixed:
//! `experiment,digest,seed,label,t,epsilon,value,stderr,n,dt`, one row per
//! numeric point, with empty cells for fields that do not apply. Rows are
//! produced by deterministic substreamed estimators, so a rerun with the
//! same config and seed is byte-identical whatever the thread count. The
//! JSON summary additionally carries extrapolations, oracle comparisons,
//! check reports, and wall time (the one field that legitimately varies).

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::bv::{
    de_giorgi_curve, halfspace_perimeter_oracle, ledoux_content,
    smooth_variation_oracle, GradientNorm, VariationEstimate,
};
use crate::checks::{
    commutation_residual, inequality_suite, voc_residual, CheckReport,
};
use crate::config::{Budget, Experiment, ExperimentConfig, ProbeSpec};
use crate::domain::{check_hyp_d, divergence_flag, ConvexDomain};
use crate::error::{GaussBvError, Result};
use crate::estimate::Estimate;
use crate::model::{GaussianModel, Point};
use crate::pde1d::{pde_reference_1d, GridSpec};
use crate::potential::PenalizedPotential;
use crate::rng::nested_seed;
use crate::sde::{penalty_sweep, SdeConfig};
use crate::weight::ConvexWeight;

/// Version token embedded in the CSV header comment; bump on any column
/// change.
pub const CSV_VERSION: &str = "gaussbv-csv-v1";
const CSV_COLUMNS: &str = "experiment,digest,seed,label,t,epsilon,value,stderr,n,dt";

/// One numeric output point.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub label: String,
    pub t: Option<f64>,
    pub epsilon: Option<f64>,
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
    pub dt: Option<f64>,
}

impl Row {
    fn from_estimate(label: impl Into<String>, e: &Estimate) -> Self {
        Row {
            label: label.into(),
            t: if e.meta.t > 0.0 { Some(e.meta.t) } else { None },
            epsilon: e.meta.epsilon,
            value: e.value,
            stderr: e.stderr,
            n: e.n,
            dt: e.meta.dt,
        }
    }

    fn from_check(r: &CheckReport) -> Self {
        Row {
            label: r.name.clone(),
            t: if r.lhs.meta.t > 0.0 { Some(r.lhs.meta.t) } else { None },
            epsilon: r.lhs.meta.epsilon,
            value: r.residual,
            stderr: r.lhs.combined_stderr(&r.rhs),
            n: r.lhs.n + r.rhs.n,
            dt: r.lhs.meta.dt,
        }
    }
}

/// A measured value against its independent oracle.
#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub description: &'static str,
    pub estimate: Estimate,
    pub oracle: Estimate,
    pub relative_gap: f64,
    /// Within the larger of 2% relative and three combined standard errors.
    pub within_tolerance: bool,
}

impl OracleComparison {
    fn new(
        description: &'static str,
        estimate: Estimate,
        oracle: Estimate,
    ) -> Self {
        let gap = estimate.value - oracle.value;
        let relative_gap = if oracle.value != 0.0 {
            gap / oracle.value.abs()
        } else {
            gap
        };
        let tol = (0.02 * oracle.value.abs())
            .max(3.0 * estimate.combined_stderr(&oracle));
        OracleComparison {
            description,
            estimate,
            oracle,
            relative_gap,
            within_tolerance: gap.abs() <= tol,
        }
    }
}

/// Everything one run produced, serialized as the JSON summary.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub experiment: &'static str,
    pub digest: String,
    pub seed: u64,
    pub eigenvalues: Vec<f64>,
    pub weight: ConvexWeight,
    pub domain: ConvexDomain,
    pub epsilon: Option<f64>,
    pub probe: ProbeSpec,
    pub budget: Budget,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variation: Option<VariationEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence_flag: Option<bool>,
    pub pass: bool,
    pub wall_seconds: f64,
}

/// Paths written plus the summary; `summary.pass` decides the exit status.
#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Summary,
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_text(summary: &Summary) -> String {
    let mut out =
        format!("# {CSV_VERSION}; columns: {CSV_COLUMNS}\n{CSV_COLUMNS}\n");
    for r in &summary.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            summary.experiment,
            summary.digest,
            summary.seed,
            r.label,
            fmt_opt(r.t),
            fmt_opt(r.epsilon),
            r.value,
            r.stderr,
            r.n,
            fmt_opt(r.dt),
        ));
    }
    out
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = dir.unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| GaussBvError::Io(e.error))?;
    Ok(())
}

struct Pieces {
    rows: Vec<Row>,
    checks: Vec<CheckReport>,
    variation: Option<VariationEstimate>,
    oracle: Option<OracleComparison>,
    divergence_flag: Option<bool>,
    pass: bool,
}

impl Pieces {
    fn from_checks(checks: Vec<CheckReport>) -> Self {
        Pieces {
            rows: checks.iter().map(Row::from_check).collect(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            variation: None,
            oracle: None,
            divergence_flag: None,
        }
    }
}

/// The variation oracle matching the probe: closed-form / conditional
/// perimeter for an indicator, quadrature / rejection gradient integral for
/// a smooth field.
fn variation_oracle(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    probe: &ProbeSpec,
) -> Result<(Estimate, &'static str)> {
    match probe.halfspace() {
        Some((a, c)) => Ok((
            halfspace_perimeter_oracle(
                model,
                &potential.weight,
                a,
                c,
                &potential.domain,
            )?,
            "half-space perimeter oracle",
        )),
        None => Ok((
            smooth_variation_oracle(
                model,
                potential,
                &probe.build(),
                GradientNorm::H,
            )?,
            "smooth-field variation oracle",
        )),
    }
}

fn run_degiorgi(
    config: &ExperimentConfig,
    model: &GaussianModel,
    potential: &PenalizedPotential,
    probe: &ProbeSpec,
) -> Result<Pieces> {
    let bv = config.bv()?;
    let u = probe.build();
    let curve = de_giorgi_curve(model, potential, &u, &config.grids.t, &bv)?;
    let (oracle, description) = variation_oracle(model, potential, probe)?;
    let cmp =
        OracleComparison::new(description, curve.extrapolated, oracle);
    let mut rows: Vec<Row> = curve
        .curve
        .iter()
        .map(|(_, e)| Row::from_estimate("curve", e))
        .collect();
    rows.push(Row::from_estimate("extrapolated", &curve.extrapolated));
    rows.push(Row::from_estimate("oracle", &cmp.oracle));
    Ok(Pieces {
        rows,
        checks: Vec::new(),
        pass: cmp.within_tolerance,
        oracle: Some(cmp),
        variation: Some(curve),
        divergence_flag: None,
    })
}

fn run_perimeter(
    model: &GaussianModel,
    potential: &PenalizedPotential,
    probe: &ProbeSpec,
) -> Result<Pieces> {
    let (oracle, _) = variation_oracle(model, potential, probe)?;
    Ok(Pieces {
        rows: vec![Row::from_estimate("perimeter", &oracle)],
        checks: Vec::new(),
        variation: None,
        oracle: None,
        divergence_flag: None,
        pass: true,
    })
}

fn run_penalty_sweep(
    config: &ExperimentConfig,
    model: &GaussianModel,
    probe: &ProbeSpec,
) -> Result<Pieces> {
    let x = Point::new(vec![0.0; model.dim()]);
    if !config.domain.contains(model, &x) {
        return Err(GaussBvError::Config {
            field: "domain".into(),
            reason: "the sweep probes the semigroup at the origin, which \
                     must lie inside the domain"
                .into(),
        });
    }
    let f = probe.build();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let digest = config.digest();
    for (ti, &t) in config.grids.t.iter().enumerate() {
        let sde = SdeConfig::new(
            config.budget.dt.min(t),
            config.budget.outer,
            nested_seed(config.seed, 0x5F_0000 + ti as u64, 0),
            t,
        )?;
        let sweep = penalty_sweep(
            model,
            &config.weight,
            &config.domain,
            &f,
            t,
            &x,
            &config.grids.epsilon,
            &sde,
        )?;
        for e in &sweep {
            rows.push(Row::from_estimate(format!("sweep t={t}"), e));
        }
        if model.dim() == 1 {
            let eps = *config.grids.epsilon.last().expect("validated");
            let reference = pde_reference_1d(
                model,
                &PenalizedPotential::new(
                    config.weight.clone(),
                    config.domain.clone(),
                    Some(eps),
                )?,
                &f,
                t,
                &GridSpec::new(600, 400)?,
            )?;
            let last = sweep.last().expect("validated nonempty");
            checks.push(CheckReport::identity(
                format!("penalty-consistency t={t} eps={eps}"),
                *last,
                Estimate::exact(reference.interpolate(x.coords[0]))
                    .with_meta(last.meta),
                config.seed,
                &digest,
            ));
        }
    }
    let mut pieces = Pieces::from_checks(checks);
    pieces.rows = rows
        .into_iter()
        .chain(pieces.rows.into_iter())
        .collect();
    Ok(pieces)
}

fn run_commutation(
    config: &ExperimentConfig,
    model: &GaussianModel,
    potential: &PenalizedPotential,
    probe: &ProbeSpec,
) -> Result<Pieces> {
    let bv = config.bv()?;
    let f = probe.build();
    let l1s = model.lambda_max().sqrt();
    let probes: Vec<Point> = [-0.8, 0.4]
        .iter()
        .map(|&s| {
            let mut c = vec![0.0; model.dim()];
            c[0] = s * l1s;
            Point::new(c)
        })
        .collect();
    let mut checks = Vec::new();
    for (ti, &t) in config.grids.t.iter().enumerate() {
        for (pi, x) in probes.iter().enumerate() {
            let cfg_pt = crate::bv::BvConfig {
                seed: nested_seed(
                    config.seed,
                    0xC0_0000 + (ti * 8 + pi) as u64,
                    0,
                ),
                ..bv
            };
            let mut r = commutation_residual(
                model, potential, &f, t, x, 16, &cfg_pt,
            )?;
            r.name = format!("commutation t={t} probe={pi}");
            checks.push(r);
        }
    }
    Ok(Pieces::from_checks(checks))
}

fn run_voc(
    config: &ExperimentConfig,
    model: &GaussianModel,
    probe: &ProbeSpec,
) -> Result<Pieces> {
    let bv = config.bv()?;
    let g = probe.build();
    let mut checks = Vec::new();
    for (ti, &t) in config.grids.t.iter().enumerate() {
        let cfg_t = crate::bv::BvConfig {
            seed: nested_seed(config.seed, 0x0C_0000 + ti as u64, 0),
            ..bv
        };
        let mut rows = voc_residual(model, &config.weight, &g, t, &cfg_t)?;
        for r in &mut rows {
            r.name = format!("{} t={t}", r.name);
        }
        checks.extend(rows);
    }
    Ok(Pieces::from_checks(checks))
}

fn run_inequalities(
    config: &ExperimentConfig,
    model: &GaussianModel,
    potential: &PenalizedPotential,
) -> Result<Pieces> {
    let bv = config.bv()?;
    Ok(Pieces::from_checks(inequality_suite(model, potential, &bv)?))
}

fn run_ledoux(
    config: &ExperimentConfig,
    model: &GaussianModel,
    potential: &PenalizedPotential,
    probe: &ProbeSpec,
) -> Result<Pieces> {
    let bv = config.bv()?;
    let u = probe.build();
    let (oracle, description) = variation_oracle(model, potential, probe)?;
    let c = 2.0 / std::f64::consts::PI.sqrt();
    let limit = Estimate {
        value: c * oracle.value,
        stderr: c * oracle.stderr,
        n: oracle.n,
        meta: oracle.meta,
    };
    let digest = config.digest();
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut last_point = None;
    let n_t = config.grids.t.len();
    let verdict_from = n_t.saturating_sub(3);
    for (ti, &t) in config.grids.t.iter().enumerate() {
        let cfg_t = crate::bv::BvConfig {
            seed: nested_seed(config.seed, 0x1E_0000 + ti as u64, 0),
            ..bv
        };
        let point = ledoux_content(
            model,
            &potential.weight,
            &potential.domain,
            &u,
            t,
            &cfg_t,
        )?;
        rows.push(Row::from_estimate("pair-content", &point));
        last_point = Some(point);
        // The grid is strictly decreasing, so the verdict rows are the
        // three smallest times, where the limit has been reached.
        if ti >= verdict_from {
            checks.push(CheckReport::identity(
                format!("ledoux-limit t={t}"),
                point,
                limit.with_meta(point.meta),
                config.seed,
                &digest,
            ));
        }
    }
    rows.push(Row::from_estimate("limit-oracle", &limit));
    let mut pieces = Pieces::from_checks(checks);
    pieces.rows = rows
        .into_iter()
        .chain(pieces.rows.into_iter())
        .collect();
    // The smallest-t content against the scaled variation limit.
    pieces.oracle = Some(OracleComparison::new(
        description,
        last_point.expect("validated nonempty grid"),
        limit,
    ));
    Ok(pieces)
}

fn run_hyp_d(
    config: &ExperimentConfig,
    model: &GaussianModel,
) -> Result<Pieces> {
    let n = config.budget.outer;
    let at_n = check_hyp_d(model, &config.domain, &config.weight, n, config.seed)?;
    let at_2n = check_hyp_d(
        model,
        &config.domain,
        &config.weight,
        2 * n,
        nested_seed(config.seed, 0x42D, 0),
    )?;
    let flag = divergence_flag(&at_n, &at_2n);
    Ok(Pieces {
        rows: vec![
            Row::from_estimate("probe-n", &at_n),
            Row::from_estimate("probe-2n", &at_2n),
        ],
        checks: Vec::new(),
        variation: None,
        oracle: None,
        divergence_flag: Some(flag),
        pass: true,
    })
}

/// Execute one experiment end to end: validate, compute, and write
/// `<experiment>.csv` and `<experiment>.json` into `config.output`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let model = config.build_model()?;
    let potential = config.build_potential(&model)?;
    let probe = config.probe_spec(&model);

    let pieces = match config.experiment {
        Experiment::Degiorgi => {
            run_degiorgi(config, &model, &potential, &probe)?
        }
        Experiment::Perimeter => {
            run_perimeter(&model, &potential, &probe)?
        }
        Experiment::PenaltySweep => {
            run_penalty_sweep(config, &model, &probe)?
        }
        Experiment::Commutation => {
            run_commutation(config, &model, &potential, &probe)?
        }
        Experiment::Voc => run_voc(config, &model, &probe)?,
        Experiment::Inequalities => {
            run_inequalities(config, &model, &potential)?
        }
        Experiment::Ledoux => run_ledoux(config, &model, &potential, &probe)?,
        Experiment::HypDCheck => run_hyp_d(config, &model)?,
    };

    let summary = Summary {
        experiment: config.experiment.name(),
        digest: config.digest(),
        seed: config.seed,
        eigenvalues: model.eigenvalues().to_vec(),
        weight: config.weight.clone(),
        domain: config.domain.clone(),
        epsilon: config.epsilon,
        probe,
        budget: config.budget,
        rows: pieces.rows,
        variation: pieces.variation,
        oracle: pieces.oracle,
        checks: pieces.checks,
        divergence_flag: pieces.divergence_flag,
        pass: pieces.pass,
        wall_seconds: start.elapsed().as_secs_f64(),
    };

    let stem = config.experiment.name();
    let csv_path = config.output.join(format!("{stem}.csv"));
    let json_path = config.output.join(format!("{stem}.json"));
    atomic_write(&csv_path, csv_text(&summary).as_bytes())?;
    let mut json = serde_json::to_string_pretty(&summary)
        .expect("summary serializes");
    json.push('\n');
    atomic_write(&json_path, json.as_bytes())?;
    Ok(RunOutcome { summary, csv_path, json_path })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    fn tmp_config(toml: &str, dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::from_toml(toml).unwrap();
        cfg.output = dir.to_path_buf();
        cfg
    }

    #[test]
    fn degiorgi_halfspace_run_passes_and_writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tmp_config(
            r#"
            experiment = "degiorgi"
            seed = 41

            [model]
            dimension = 1
            eigenvalues = [1.0]

            [grids]
            t = [0.2, 0.1, 0.05]

            [budget]
            outer = 8000
            inner = 384
            dt = 0.00625
            "#,
            dir.path(),
        );
        let out = run(&cfg).unwrap();
        assert!(out.summary.pass);
        let cmp = out.summary.oracle.as_ref().unwrap();
        assert!((cmp.oracle.value - 0.3989422804014327).abs() < 1e-12);
        assert!(cmp.within_tolerance, "{cmp:?}");
        assert!(out.csv_path.exists() && out.json_path.exists());
        let csv = std::fs::read_to_string(&out.csv_path).unwrap();
        assert!(csv.starts_with(&format!("# {CSV_VERSION}")));
        // 3 curve points + extrapolated + oracle.
        assert_eq!(csv.lines().count(), 2 + 5);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let toml = r#"
            experiment = "hyp-d-check"
            seed = 5

            [model]
            dimension = 1
            eigenvalues = [1.0]

            [domain]
            kind = "h-ball"
            center = [0.0]
            radius = 1.0

            [budget]
            outer = 20000
            "#;
        let cfg = tmp_config(toml, dir.path());
        let a = run(&cfg).unwrap();
        let first = std::fs::read(&a.csv_path).unwrap();
        let b = run(&cfg).unwrap();
        let second = std::fs::read(&b.csv_path).unwrap();
        assert_eq!(first, second);
        assert_eq!(a.summary.divergence_flag, Some(false));
    }

    #[test]
    fn penalty_sweep_run_matches_pde_reference() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tmp_config(
            r#"
            experiment = "penalty-sweep"
            seed = 13
            epsilon = 0.025

            [model]
            dimension = 1
            eigenvalues = [1.0]

            [domain]
            kind = "slab"
            a = [1.0]
            lo = -1.0
            hi = 1.0

            [grids]
            t = [0.08]
            epsilon = [0.1, 0.05, 0.025]

            [budget]
            outer = 60000
            inner = 8
            dt = 0.005
            "#,
            dir.path(),
        );
        let m = cfg.build_model().unwrap();
        assert!(matches!(
            cfg.probe_spec(&m),
            crate::config::ProbeSpec::GaussianBump { .. }
        ));
        let out = run(&cfg).unwrap();
        assert!(out.summary.pass, "{:?}", out.summary.checks);
        assert_eq!(out.summary.checks.len(), 1);
        // 3 sweep values + 1 check row.
        assert_eq!(out.summary.rows.len(), 4);
    }

    #[test]
    fn invalid_config_is_a_config_error() {
        let toml = r#"
            experiment = "degiorgi"
            seed = 1

            [model]
            dimension = 1
            eigenvalues = [1.0]
            "#;
        let err = ExperimentConfig::from_toml(toml).unwrap_err();
        assert!(matches!(err, GaussBvError::Config { .. }));
    }
}
