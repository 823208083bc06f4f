//! Executes an [`ExperimentConfig`] and renders CSV and JSON results.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, PartitionKind};
use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{CMat, C64};
use crate::liouville::{commutator_generator, Liouvillian, ProjectorSuperOp, SuperOperator};
use crate::metrics::{
    admissible_states, drift_diagnostics_raw, drift_inequality_check, fit_exponential_rate, fit_order,
    moment_stability_check, trace_norm, ConvergenceReport, SobolevWeight,
};
use crate::models;
use crate::propagators::{reference_evolution, Propagator, Schedule};
use crate::schemes::{
    complement_unitary_mixer, make_uniform_power_contraction, scheme_step, splitting_product, telescopic_defect,
    time_dependent_trotter_with, zeno_limit_with, zeno_product_general_with, zeno_product_with, Partition,
    TelescopicReport, ZenoSpec,
};

/// Overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub oracle_tol: Option<f64>,
    pub threads: Option<usize>,
    pub timing: Option<bool>,
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub error_trace_norm: f64,
    pub trace_drift: f64,
    pub min_eig: f64,
    pub top_level_mass: f64,
    pub wall_time_ms: f64,
    /// Real trace of the final state.
    pub trace: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub telescopic: Option<TelescopicSummary>,
    /// Kind-specific bound on `error_trace_norm`, when one applies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TelescopicSummary {
    pub max_defect: f64,
    pub bound: f64,
    pub product_error: f64,
}

impl From<TelescopicReport> for TelescopicSummary {
    fn from(r: TelescopicReport) -> Self {
        Self { max_defect: r.max_defect, bound: r.bound, product_error: r.product_error }
    }
}

/// In-memory result of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub name: String,
    pub kind: ExperimentKind,
    pub config: ExperimentConfig,
    pub rows: Vec<SweepRow>,
    pub report: Option<ConvergenceReport>,
    pub fit_error: Option<String>,
    pub extras: serde_json::Value,
    #[serde(skip)]
    pub tables: Vec<(String, String)>,
}

/// A run that did not complete, with the stage that failed.
#[derive(Debug)]
pub struct RunFailure {
    pub stage: String,
    pub error: Error,
}

impl RunFailure {
    /// 2 for schema violations, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_validation() {
            2
        } else {
            3
        }
    }
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.error.is_validation() {
            write!(f, "{}", self.error)
        } else {
            write!(f, "numerical failure in {}: {}", self.stage, self.error)
        }
    }
}

impl std::error::Error for RunFailure {}

fn at<T>(stage: &str, r: Result<T>) -> std::result::Result<T, RunFailure> {
    r.map_err(|error| RunFailure { stage: stage.to_string(), error })
}

fn resolve(cfg: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = opts.oracle_tol {
        cfg.oracle_tol = tol;
    }
    if let Some(timing) = opts.timing {
        cfg.timing = timing;
    }
    cfg
}

/// Runs the experiment without touching the file system (except to read a
/// state file named by the config).
pub fn execute(cfg: &ExperimentConfig, opts: &RunOptions) -> std::result::Result<RunResult, RunFailure> {
    let cfg = resolve(cfg, opts);
    let prepared = at("validation", cfg.prepare())?;
    let pool = at(
        "thread pool",
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string())),
    )?;
    let ctx = Context { cfg: &cfg, prop: Propagator::default(), basis: prepared.basis.clone() };
    let x0 = prepared.state.as_ref().map(|s| s.matrix().clone());
    pool.install(|| match cfg.kind {
        ExperimentKind::TrotterSweep | ExperimentKind::SuzukiSweep => {
            let a = at("generator a", prepared.a.as_ref().expect("prepared").generator_at(0.0))?;
            let b = at("generator b", prepared.b.as_ref().expect("prepared").generator_at(0.0))?;
            ctx.splitting_sweep(&a, &b, &x0.expect("state"))
        }
        ExperimentKind::TimeDepTrotter => {
            ctx.time_dependent_sweep(prepared.a.as_ref().expect("prepared"), prepared.b.as_ref().expect("prepared"), &x0.expect("state"))
        }
        ExperimentKind::ZenoSweep => {
            let l = at("generator a", prepared.a.as_ref().expect("prepared").generator_at(0.0))?;
            ctx.zeno_sweep(&l, &x0.expect("state"), false)
        }
        ExperimentKind::GateFidelity => {
            let zeno = cfg.zeno.as_ref().expect("validated");
            let a = at("drive", crate::fock::annihilation(&ctx.basis, zeno.mode))?;
            let h = at("drive", a.add(&a.dagger()))?;
            let l = at("drive", commutator_generator(&h))?;
            ctx.zeno_sweep(&l, &x0.expect("state"), true)
        }
        ExperimentKind::GeneralZeno => ctx.general_zeno(prepared.a.as_ref().expect("prepared"), &x0.expect("state")),
        ExperimentKind::Diagnostics => {
            let l = at("generator a", prepared.a.as_ref().expect("prepared").generator_at(0.0))?;
            ctx.diagnostics(&l, x0.as_ref())
        }
    })
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    prop: Propagator,
    basis: FockBasis,
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

impl Context<'_> {
    fn sweep(&self) -> &crate::config::SweepConfig {
        self.cfg.sweep.as_ref().expect("validated sweep")
    }

    fn elapsed(&self, start: Instant) -> f64 {
        if self.cfg.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }

    fn row(&self, n: usize, error: f64, y: &CMat, start: Instant) -> SweepRow {
        let d = drift_diagnostics_raw(&self.basis, y);
        SweepRow {
            n,
            error_trace_norm: error,
            trace_drift: d.trace_drift,
            min_eig: d.min_eig,
            top_level_mass: d.max_top_level_mass(),
            wall_time_ms: self.elapsed(start),
            trace: crate::linalg::trace(y).re,
            telescopic: None,
            bound: None,
        }
    }

    /// Runs `body` over the n-grid in parallel, keeping grid order.
    fn over_grid<F>(&self, body: F) -> std::result::Result<Vec<SweepRow>, RunFailure>
    where
        F: Fn(usize) -> std::result::Result<SweepRow, RunFailure> + Sync,
    {
        self.sweep().n.par_iter().map(|&n| body(n)).collect()
    }

    /// Grid abscissae for the fit: `n` for uniform partitions, `t / h_max`
    /// for graded ones.
    fn fit_abscissae(&self) -> Vec<f64> {
        let sweep = self.sweep();
        sweep
            .n
            .iter()
            .map(|&n| match sweep.partition {
                PartitionKind::Uniform => n as f64,
                PartitionKind::Graded => {
                    let p = self.cfg.partition(n).expect("validated partition");
                    sweep.t / p.max_step()
                }
            })
            .collect()
    }

    fn finish(&self, rows: Vec<SweepRow>, extras: serde_json::Value) -> RunResult {
        let errors: Vec<f64> = rows.iter().map(|r| r.error_trace_norm).collect();
        let (report, fit_error) = match fit_order(&self.fit_abscissae(), &errors, self.cfg.oracle_tol) {
            Ok(mut r) => {
                r.drift = rows
                    .iter()
                    .map(|row| crate::metrics::DriftDiagnostics {
                        trace_drift: row.trace_drift,
                        min_eig: row.min_eig,
                        top_level_mass: vec![row.top_level_mass],
                    })
                    .collect();
                (Some(r), None)
            }
            Err(e) => (None, Some(e.to_string())),
        };
        let mut csv = String::from("n,error_trace_norm,trace_drift,min_eig,top_level_mass,wall_time_ms\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.n,
                fmt_f(r.error_trace_norm),
                fmt_f(r.trace_drift),
                fmt_f(r.min_eig),
                fmt_f(r.top_level_mass),
                fmt_f(r.wall_time_ms)
            ));
        }
        RunResult {
            name: self.cfg.name.clone(),
            kind: self.cfg.kind,
            config: self.cfg.clone(),
            rows,
            report,
            fit_error,
            extras,
            tables: vec![(String::new(), csv)],
        }
    }

    fn splitting_sweep(&self, a: &Liouvillian, b: &Liouvillian, x0: &CMat) -> std::result::Result<RunResult, RunFailure> {
        let t = self.sweep().t;
        let scheme = at("scheme", self.cfg.scheme())?;
        let full = at("generator sum", a.sum(b))?;
        let oracle = at("oracle propagation", self.prop.step(&full, t, x0))?;
        let rows = self.over_grid(|n| {
            let start = Instant::now();
            let partition = at("partition", self.cfg.partition(n))?;
            let y = at("splitting product", splitting_product(&self.prop, &scheme, a, b, &partition, x0))?;
            let mut row = self.row(n, trace_norm(&(&y - &oracle)), &y, start);
            if self.sweep().telescopic {
                let f = |s0: f64, s1: f64, x: &CMat| scheme_step(&self.prop, &scheme, a, b, s1 - s0, x);
                let exact = |s0: f64, s1: f64, x: &CMat| self.prop.step(&full, s1 - s0, x);
                row.telescopic = Some(at("telescopic defect", telescopic_defect(&f, &exact, &partition, x0))?.into());
            }
            Ok(row)
        })?;
        Ok(self.finish(rows, json!({ "scheme": scheme.name(), "oracle": "semigroup exponential of the summed generator" })))
    }

    fn time_dependent_sweep(&self, u: &Schedule, v: &Schedule, x0: &CMat) -> std::result::Result<RunResult, RunFailure> {
        let t = self.sweep().t;
        let full = at("schedule sum", u.sum(v))?;
        let rho0 = crate::liouville::DensityOperator::from_raw(&self.basis, x0.clone());
        let oracle = at("reference evolution", reference_evolution(&full, 0.0, t, &rho0, self.cfg.oracle_tol))?;
        let oracle = oracle.into_matrix();
        let rows = self.over_grid(|n| {
            let start = Instant::now();
            let partition = at("partition", self.cfg.partition(n))?;
            let y = at("time-dependent product", time_dependent_trotter_with(&self.prop, u, v, &partition, x0))?;
            let mut row = self.row(n, trace_norm(&(&y - &oracle)), &y, start);
            if self.sweep().telescopic {
                let f = |s0: f64, s1: f64, x: &CMat| {
                    let p = Partition::new(vec![s0, s1])?;
                    time_dependent_trotter_with(&self.prop, u, v, &p, x)
                };
                let exact = |s0: f64, s1: f64, x: &CMat| crate::schemes::schedule_step(&self.prop, &full, s0, s1, x);
                row.telescopic = Some(at("telescopic defect", telescopic_defect(&f, &exact, &partition, x0))?.into());
            }
            Ok(row)
        })?;
        Ok(self.finish(rows, json!({ "oracle": "Dormand-Prince reference evolution", "oracle_tol": self.cfg.oracle_tol })))
    }

    fn code_projector(&self) -> std::result::Result<(ProjectorSuperOp, C64, usize), RunFailure> {
        let zeno = self.cfg.zeno.as_ref().expect("validated zeno");
        let alpha = C64::new(zeno.alpha[0], zeno.alpha[1]);
        let p = at("code projector", models::cat_projector(&self.basis, zeno.mode, alpha))?;
        Ok((at("code projector", ProjectorSuperOp::new(&p))?, alpha, zeno.mode))
    }

    fn zeno_sweep(&self, l: &Liouvillian, x0: &CMat, gate: bool) -> std::result::Result<RunResult, RunFailure> {
        let t = self.sweep().t;
        let (p, alpha, mode) = self.code_projector()?;
        let oracle = at("compressed-generator oracle", zeno_limit_with(&self.prop, &p, l, t, x0))?;
        let px = p.apply(x0);
        let target = if gate { Some(at("gate target", models::zeno_gate_target(&self.basis, mode, alpha, t))?) } else { None };
        let rows = self.over_grid(|n| {
            let start = Instant::now();
            let y = at("Zeno product", zeno_product_with(&self.prop, &p, l, t, n, x0))?;
            let mut row = self.row(n, trace_norm(&(&y - &oracle)), &y, start);
            if self.sweep().telescopic {
                let f = |s0: f64, s1: f64, x: &CMat| Ok(p.apply(&self.prop.step(l, s1 - s0, x)?));
                let exact = |s0: f64, s1: f64, x: &CMat| zeno_limit_with(&self.prop, &p, l, s1 - s0, x);
                let partition = at("partition", Partition::uniform(0.0, t, n))?;
                row.telescopic = Some(at("telescopic defect", telescopic_defect(&f, &exact, &partition, &px))?.into());
            }
            if let Some(g) = &target {
                row.bound = Some(trace_norm(&(&y - g.apply_idealized(&px))));
            }
            Ok(row)
        })?;
        let extras = match target {
            Some(g) => json!({
                "oracle": "exponential of the compressed generator",
                "target_discrepancy": g.discrepancy,
                "discrepancy_bound": 10.0 * (-2.0 * alpha.norm_sqr()).exp(),
                "coupling": [g.coupling.re, g.coupling.im],
                "idealized_coupling": 2.0 * alpha.re,
                "row_bound": "trace distance of the product to the idealized rotation",
            }),
            None => json!({ "oracle": "exponential of the compressed generator" }),
        };
        Ok(self.finish(rows, extras))
    }

    fn general_zeno(&self, v: &Schedule, x0: &CMat) -> std::result::Result<RunResult, RunFailure> {
        let zeno = self.cfg.zeno.as_ref().expect("validated zeno");
        let delta = zeno.delta.expect("validated delta");
        let (p, _, _) = self.code_projector()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mixer = at("complement mixer", complement_unitary_mixer(&p, &mut rng))?;
        let spec: ZenoSpec = at("uniform power contraction", make_uniform_power_contraction(&p, delta, &mixer, zeno.n_check))?;
        let projective = spec.projective_counterpart();
        let x_norm = trace_norm(x0);
        let rows = self.over_grid(|n| {
            let start = Instant::now();
            let partition = at("partition", self.cfg.partition(n))?;
            let ym = at("general Zeno product", zeno_product_general_with(&self.prop, &spec, v, &partition, x0))?;
            let yp = at("projective Zeno product", zeno_product_general_with(&self.prop, &projective, v, &partition, x0))?;
            let mut row = self.row(n, trace_norm(&(&ym - &yp)), &ym, start);
            row.bound = Some(delta.powi(n as i32) * x_norm);
            Ok(row)
        })?;
        let ratios: Vec<f64> = spec.power_norms().iter().map(|&(k, norm)| norm / delta.powi(k as i32)).collect();
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let diffs: Vec<f64> = rows.iter().map(|r| r.error_trace_norm).collect();
        let decay = fit_exponential_rate(&ns, &diffs).ok();
        Ok(self.finish(
            rows,
            json!({
                "delta": delta,
                "power_norm_ratios": ratios,
                "log_delta": -delta.ln(),
                "difference_decay_rate": decay.map(|d| d.0),
                "row_bound": "delta^n times the trace norm of the initial state",
            }),
        ))
    }

    fn diagnostics(&self, l: &Liouvillian, x0: Option<&CMat>) -> std::result::Result<RunResult, RunFailure> {
        let diag = self.cfg.diagnostics.as_ref().expect("validated diagnostics");
        let mut extras = serde_json::Map::new();
        let mut tables = Vec::new();
        let margin = l.degree_margin();
        let needs_states = diag.moment.is_some() || diag.drift.is_some();
        let states = if needs_states { admissible_states(&self.basis, &margin) } else { Vec::new() };
        let moment = match &diag.moment {
            Some(m) => {
                let w = at("weight", SobolevWeight::uniform(&self.basis, m.k))?;
                Some(at("moment stability", moment_stability_check(l, &w, &states, m.omega))?)
            }
            None => None,
        };
        let drift = match &diag.drift {
            Some(d) => {
                let w = at("weight", SobolevWeight::uniform(&self.basis, d.k))?;
                let v = at("weight", SobolevWeight::uniform(&self.basis, d.damping_k))?;
                Some(at("drift inequality", drift_inequality_check(l, &w, d.damping, &v, &states))?)
            }
            None => None,
        };
        if needs_states {
            let mut csv = String::from("state,moment_margin,drift_margin\n");
            for i in 0..states.len() {
                let mm = moment.as_ref().map_or(String::new(), |r| fmt_f(r.margins[i]));
                let dm = drift.as_ref().map_or(String::new(), |r| fmt_f(r.margins[i]));
                csv.push_str(&format!("{i},{mm},{dm}\n"));
            }
            tables.push((String::new(), csv));
        }
        if let Some(m) = &moment {
            extras.insert(
                "moment_stability".into(),
                json!({ "omega": m.omega, "omega_fitted": m.omega_fitted, "max_margin": m.max_margin, "states": states.len() }),
            );
        }
        if let Some(d) = &drift {
            let violations = d.margins.iter().filter(|&&v| v > d.c_operator + 1e-9).count();
            extras.insert(
                "drift".into(),
                json!({ "damping": d.damping, "c": d.c, "c_operator": d.c_operator, "violations": violations }),
            );
        }
        let mut rows = Vec::new();
        if let Some(cd) = &diag.code_decay {
            let x0 = x0.ok_or_else(|| RunFailure { stage: "code decay".into(), error: Error::Config("code_decay needs a [state]".into()) })?;
            let alpha = C64::new(cd.alpha[0], cd.alpha[1]);
            let mut values = Vec::with_capacity(cd.times.len());
            let mut csv = String::from("t,code_distance,trace_drift,min_eig,top_level_mass,wall_time_ms\n");
            for &t in &cd.times {
                let start = Instant::now();
                let y = at("code decay propagation", self.prop.step(l, t, x0))?;
                let v = at("code distance", models::code_distance(&self.basis, cd.mode, cd.l, alpha, &y))?;
                let row = self.row(0, v, &y, start);
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    fmt_f(t),
                    fmt_f(v),
                    fmt_f(row.trace_drift),
                    fmt_f(row.min_eig),
                    fmt_f(row.top_level_mass),
                    fmt_f(row.wall_time_ms)
                ));
                values.push(v);
                rows.push(row);
            }
            let factorial: f64 = (1..=cd.l).map(f64::from).product();
            let fit = fit_exponential_rate(&cd.times, &values);
            let bound_holds = cd
                .times
                .iter()
                .zip(&values)
                .all(|(&t, &v)| v <= (-factorial * t).exp() * values[0] * (1.0 + 1e-9) + 1e-12);
            extras.insert(
                "code_decay".into(),
                json!({
                    "times": cd.times,
                    "values": values,
                    "rate": fit.as_ref().ok().map(|f| f.0),
                    "r_squared": fit.as_ref().ok().map(|f| f.2),
                    "fit_error": fit.as_ref().err().map(|e| e.to_string()),
                    "predicted_rate": factorial,
                    "bound_holds": bound_holds,
                }),
            );
            tables.push(("-decay".to_string(), csv));
        }
        if diag.stationary {
            let (_, residual) = at("stationary state", models::stationary_state(l))?;
            extras.insert("stationary_residual".into(), json!(residual));
        }
        Ok(RunResult {
            name: self.cfg.name.clone(),
            kind: self.cfg.kind,
            config: self.cfg.clone(),
            rows,
            report: None,
            fit_error: None,
            extras: serde_json::Value::Object(extras),
            tables,
        })
    }
}

impl RunResult {
    /// The main CSV table.
    pub fn csv(&self) -> &str {
        self.tables.iter().find(|(s, _)| s.is_empty()).map_or("", |(_, c)| c.as_str())
    }

    pub fn json(&self) -> String {
        let doc = json!({
            "name": self.name,
            "kind": self.kind,
            "versions": { "prodform": env!("CARGO_PKG_VERSION") },
            "config": self.config,
            "report": self.report,
            "fit_error": self.fit_error,
            "rows": self.rows,
            "extras": self.extras,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("result serializes");
        s.push('\n');
        s
    }

    /// Writes `<name><suffix>.csv` for each table and `<name>.json`.
    pub fn write(&self, out_dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out_dir)?;
        let mut paths = Vec::new();
        for (suffix, csv) in &self.tables {
            let p = out_dir.join(format!("{}{suffix}.csv", self.name));
            std::fs::write(&p, csv)?;
            paths.push(p);
        }
        let p = out_dir.join(format!("{}.json", self.name));
        std::fs::write(&p, self.json())?;
        paths.push(p);
        Ok(paths)
    }
}

/// [`execute`] followed by [`RunResult::write`].
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions, out_dir: &Path) -> std::result::Result<(RunResult, Vec<PathBuf>), RunFailure> {
    let result = execute(cfg, opts)?;
    let paths = at("writing results", result.write(out_dir))?;
    Ok((result, paths))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_ou() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            r#"
            name = "small-ou"
            kind = "trotter-sweep"
            timing = false
            [basis]
            cutoffs = [10]
            [state]
            kind = "fock"
            occupations = [1]
            [sweep]
            t = 0.5
            n = [4, 8, 16]
            [generators.a]
            ou = { lambda = 1.0, mu = 0.0 }
            [generators.b]
            ou = { lambda = 0.0, mu = 0.5 }
            "#,
        )
        .unwrap()
    }

    #[test]
    fn trotter_rows_and_fit() {
        let r = execute(&small_ou(), &RunOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 3);
        let rep = r.report.as_ref().unwrap();
        assert!((rep.slope + 1.0).abs() < 0.25, "slope {}", rep.slope);
        for row in &r.rows {
            let tel = row.telescopic.as_ref().unwrap();
            assert!(tel.product_error <= tel.bound + 1e-12);
            assert_eq!(row.wall_time_ms, 0.0);
        }
        assert!(r.csv().starts_with("n,error_trace_norm,trace_drift,min_eig,top_level_mass,wall_time_ms\n"));
        assert_eq!(r.csv().lines().count(), 4);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let one = execute(&small_ou(), &RunOptions { threads: Some(1), ..Default::default() }).unwrap();
        let many = execute(&small_ou(), &RunOptions { threads: Some(3), ..Default::default() }).unwrap();
        assert_eq!(one.csv(), many.csv());
        assert_eq!(one.json(), many.json());
    }

    #[test]
    fn exit_codes() {
        let mut cfg = small_ou();
        cfg.sweep.as_mut().unwrap().n = vec![4, 8];
        let err = execute(&cfg, &RunOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let fail = RunFailure { stage: "x".into(), error: Error::NonFinite("y") };
        assert_eq!(fail.exit_code(), 3);
        assert!(fail.to_string().contains("numerical failure in x"));
    }
}
