//! Config-driven pipelines behind the command-line subcommands. Each returns a
//! report whose pass flag decides the exit status, plus the artifacts written.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::{FlowKind, ScenarioConfig};
use crate::error::Result;
use crate::flows::{
    evolve, greens_dynamics_check, lax_residual, random_test_fields, Flow, SnapshotOptions,
    Trajectory,
};
use crate::greens::{greens, greens_jost, write_triple_csv};
use crate::grid::{sup_diff, Grid, C64};
use crate::invariants::{
    a_trace, asymptotic_compare, conserved_with_a, functional_derivative_check, rho_density,
    ConservedSet, TraceKernel, TraceMode,
};
use crate::profile::{sample_profile, tail_warning, FieldPair, ProfileSpec};
use crate::spectral::SpectralParameter;
use crate::verify::{
    continuity_residual, estimate_sweep, flux_a, flux_dnls, identity_suite, FluxKind, SweepTable,
    VerificationReport, ESTIMATES,
};

#[derive(Debug)]
pub struct Outcome {
    pub report: VerificationReport,
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Run<'a> {
    cfg: &'a ScenarioConfig,
    report: VerificationReport,
    artifacts: Vec<PathBuf>,
    warnings: Vec<String>,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ScenarioConfig) -> Self {
        Run {
            cfg,
            report: VerificationReport::new(&cfg.text),
            artifacts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, residual: Result<f64>, key: &str) -> Result<()> {
        self.report
            .push_result(name, residual, &self.cfg.tolerances, key)
            .map(|_| ())
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.cfg.output.dir)?;
        Ok(self.cfg.output.dir.join(name))
    }

    fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<()> {
        if !self.cfg.output.wants("csv") {
            return Ok(());
        }
        let path = self.path(name)?;
        let mut w = BufWriter::new(File::create(&path)?);
        write(&mut w)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.cfg.output.wants("json") {
            return Ok(());
        }
        let path = self.path(name)?;
        std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
        self.artifacts.push(path);
        Ok(())
    }

    fn finish(mut self, name: &str) -> Result<Outcome> {
        let report = self.report.clone();
        self.json(name, &report)?;
        Ok(Outcome {
            report: self.report,
            artifacts: self.artifacts,
            warnings: self.warnings,
        })
    }

    fn pair(&mut self) -> Result<FieldPair> {
        let grid = Grid::new(self.cfg.grid.half_length, self.cfg.grid.n)?;
        let pair = sample_profile(&self.cfg.profile, &grid)?;
        if let Some(w) = tail_warning(&pair, self.cfg.tail_threshold) {
            self.warnings.push(w);
        }
        Ok(pair)
    }
}

fn tag(sp: SpectralParameter) -> String {
    if sp.branch() < 0 {
        format!("tau{}_b-", sp.tau())
    } else {
        format!("tau{}", sp.tau())
    }
}

fn rel_change(a: C64, b: C64) -> f64 {
    let d = (a - b).norm();
    if b.norm() > 0.0 {
        d / b.norm()
    } else {
        d
    }
}

/// The second parameter of two-point checks: the next configured tau or 2 tau.
fn partner(cfg: &ScenarioConfig, sp: SpectralParameter) -> SpectralParameter {
    cfg.taus
        .iter()
        .copied()
        .find(|s| s.tau() != sp.tau())
        .unwrap_or_else(|| SpectralParameter::new(2.0 * sp.tau()).expect("|2 tau| >= 1"))
}

/// `pointwise` false leaves the pointwise identities to the identity suite.
fn greens_stage(run: &mut Run, pair: &FieldPair, pointwise: bool) -> Result<()> {
    let cfg = run.cfg;
    for sp in cfg.taus.clone() {
        let dg = greens(pair, sp)?;
        run.csv(&format!("greens_{}.csv", tag(sp)), |w| {
            write_triple_csv(&dg, w)
        })?;
        if cfg.enabled("identities") {
            let t = tag(sp);
            if pointwise {
                run.check(
                    &format!("quadratic_identity_{t}"),
                    Ok(dg.quadratic_residual()),
                    "quadratic",
                )?;
                let ode = dg.ode_residuals(pair).iter().fold(0.0f64, |m, v| m.max(*v));
                run.check(&format!("first_order_odes_{t}"), Ok(ode), "ode")?;
            }
            let jost = greens_jost(pair, sp).map(|j| j.distance(&dg));
            run.check(&format!("fixed_point_vs_jost_{t}"), jost, "methods")?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct InvariantsOut {
    conserved: ConservedSet,
    a_log_det: Vec<(f64, i8, C64)>,
}

fn invariants_stage(run: &mut Run, pair: &FieldPair, trace_checks: bool) -> Result<()> {
    let cfg = run.cfg;
    let set = conserved_with_a(pair, &cfg.taus)?;
    let mut a_log_det = Vec::new();
    for (sp, (_, _, a)) in cfg.taus.iter().zip(&set.a_values) {
        let ld = a_trace(&TraceKernel::new(pair, *sp)?, TraceMode::LogDet)?.value;
        a_log_det.push((sp.tau(), sp.branch(), ld));
        if trace_checks && cfg.enabled("identities") {
            let res = (ld - a).norm() / a.norm().max(1e-3);
            run.check(
                &format!("log_det_vs_density_{}", tag(*sp)),
                Ok(res),
                "trace",
            )?;
        }
    }
    run.json(
        "invariants.json",
        &InvariantsOut {
            conserved: set,
            a_log_det,
        },
    )?;
    if cfg.enabled("asymptotics") && !cfg.asymptotic_taus.is_empty() {
        let table = asymptotic_compare(pair, &cfg.asymptotic_taus)?;
        run.csv("asymptotics.csv", |w| table.write_csv(w))?;
        let slopes = [
            ("a_slope_one_term", table.slope_rem1, -1.0),
            ("a_slope_two_terms", table.slope_rem2, -2.0),
            ("a_slope_three_terms", table.slope_rem3, -3.0),
            ("gamma_slope", table.slope_gamma, -3.0),
            ("h21_slope", table.slope_h21, -3.0),
            ("h12_slope", table.slope_h12, -3.0),
        ];
        for (name, got, want) in slopes {
            run.check(name, Ok((got - want).abs()), "slope")?;
        }
    }
    Ok(())
}

fn flow_of(cfg: &ScenarioConfig) -> Flow {
    match cfg.flow.kind {
        FlowKind::Dnls => Flow::Dnls,
        FlowKind::AKappa => Flow::AKappa(cfg.generator()),
    }
}

fn evolve_stage(run: &mut Run, pair: &FieldPair) -> Result<Trajectory> {
    let cfg = run.cfg;
    let flow = flow_of(cfg);
    let opts = SnapshotOptions {
        stride: cfg.flow.stride,
        probes: cfg.taus.clone(),
    };
    let traj = evolve(pair, flow, cfg.flow.t_final, cfg.flow.dt, &opts)?;
    run.csv("trajectory.csv", |w| traj.write_csv(w))?;
    let gen_tau = match flow {
        Flow::AKappa(g) => Some(g.tau()),
        Flow::Dnls => None,
    };
    let probes: Vec<SpectralParameter> = cfg
        .taus
        .iter()
        .copied()
        .filter(|s| Some(s.tau()) != gen_tau)
        .collect();

    if cfg.enabled("conservation") {
        let (first, last) = (
            &traj.conserved[0],
            traj.conserved.last().expect("snapshots"),
        );
        run.check("mass_drift", Ok(rel_change(last.m, first.m)), "mass_drift")?;
        run.check(
            "hamiltonian_drift",
            Ok(rel_change(last.h_dnls, first.h_dnls)),
            "hamiltonian_drift",
        )?;
        for ((t, b, a0), (_, _, a1)) in first.a_values.iter().zip(&last.a_values) {
            let sp = SpectralParameter::with_branch(*t, *b)?;
            run.check(
                &format!("a_drift_{}", tag(sp)),
                Ok(rel_change(*a1, *a0)),
                "a_drift",
            )?;
        }
        if flow == Flow::Dnls && pair.gauge {
            let g = traj.gauge_deviation.iter().fold(0.0f64, |m, v| m.max(*v));
            run.check("gauge_preserved", Ok(g), "gauge")?;
        }
    }
    if traj.states.len() >= 3 {
        for sp in &probes {
            let t = tag(*sp);
            if cfg.enabled("continuity") {
                let kinds: &[FluxKind] = match flow {
                    Flow::Dnls => &[FluxKind::DnlsFlux],
                    Flow::AKappa(_) => &[FluxKind::AFlux, FluxKind::GammaFlux],
                };
                for kind in kinds {
                    let res = continuity_residual(&traj, *kind, *sp).map(|r| r.max());
                    let name = serde_json::to_value(kind)?
                        .as_str()
                        .unwrap_or("flux")
                        .to_string();
                    run.check(&format!("continuity_{name}_{t}"), res, "continuity")?;
                }
            }
            if cfg.enabled("dynamics") {
                let res = greens_dynamics_check(&traj, *sp)
                    .map(|r| r.max().iter().fold(0.0f64, |m, v| m.max(*v)));
                run.check(&format!("greens_dynamics_{t}"), res, "dynamics")?;
            }
        }
    } else if cfg.enabled("continuity") || cfg.enabled("dynamics") {
        run.warnings
            .push("fewer than three snapshots: continuity and dynamics checks skipped".into());
    }
    Ok(traj)
}

/// rho, gamma and the branch-free fluxes under kappa -> -kappa.
pub fn branch_parity_residual(
    pair: &FieldPair,
    sp: SpectralParameter,
    other: SpectralParameter,
) -> Result<f64> {
    let a = greens(pair, sp)?;
    let b = greens(pair, sp.flipped())?;
    let (ga, gb) = (greens(pair, other)?, greens(pair, other.flipped())?);
    let rho = sup_diff(
        rho_density(&a, pair)?.values(),
        rho_density(&b, pair)?.values(),
    );
    let gamma = sup_diff(a.gamma(), b.gamma());
    let jd = sup_diff(
        flux_dnls(pair, &a)?.j.values(),
        flux_dnls(pair, &b)?.j.values(),
    );
    let ja = sup_diff(flux_a(&a, &ga)?.j.values(), flux_a(&b, &gb)?.j.values());
    Ok(rho.max(gamma).max(jd).max(ja))
}

pub fn run_greens(cfg: &ScenarioConfig) -> Result<Outcome> {
    let mut run = Run::new(cfg);
    let pair = run.pair()?;
    greens_stage(&mut run, &pair, true)?;
    run.finish("greens_report.json")
}

pub fn run_invariants(cfg: &ScenarioConfig) -> Result<Outcome> {
    let mut run = Run::new(cfg);
    let pair = run.pair()?;
    invariants_stage(&mut run, &pair, true)?;
    run.finish("invariants_report.json")
}

pub fn run_evolve(cfg: &ScenarioConfig) -> Result<Outcome> {
    let mut run = Run::new(cfg);
    let pair = run.pair()?;
    evolve_stage(&mut run, &pair)?;
    run.finish("evolve_report.json")
}

/// Everything except the sweep.
pub fn run_verify(cfg: &ScenarioConfig) -> Result<Outcome> {
    let mut run = Run::new(cfg);
    let pair = run.pair()?;
    let suite = cfg.enabled("identities");
    greens_stage(&mut run, &pair, !suite)?;
    invariants_stage(&mut run, &pair, !suite)?;
    let sp = cfg.taus[0];
    let other = partner(cfg, sp);
    if suite {
        let suite = identity_suite(&pair, sp, other, &cfg.tolerances, &cfg.text)?;
        run.report.merge(suite);
    }
    if cfg.enabled("gradient") {
        let f = &random_test_fields(pair.grid(), 1, cfg.seed)[0][0];
        let res = functional_derivative_check(&pair, sp, f, 1e-5).map(|g| g.err_q.max(g.err_r));
        run.check(&format!("gradient_{}", tag(sp)), res, "gradient")?;
    }
    if cfg.enabled("lax") {
        let fields = random_test_fields(pair.grid(), cfg.lax_fields, cfg.seed);
        run.check(
            "lax_dnls",
            lax_residual(&pair, Flow::Dnls, sp, &fields),
            "lax",
        )?;
        let res = lax_residual(&pair, Flow::AKappa(other), sp, &fields);
        run.check(&format!("lax_akappa_gen_{}", tag(other)), res, "lax")?;
    }
    if cfg.enabled("branch_parity") {
        for s in cfg.taus.clone() {
            run.check(
                &format!("branch_parity_{}", tag(s)),
                branch_parity_residual(&pair, s, partner(cfg, s)),
                "branch",
            )?;
        }
    }
    evolve_stage(&mut run, &pair)?;
    run.finish("verify_report.json")
}

/// Amplitude 0 contributes the zero profile, reported as N/A.
pub fn sweep_family(cfg: &ScenarioConfig) -> Vec<ProfileSpec> {
    cfg.sweep
        .amplitudes
        .iter()
        .map(|a| {
            if *a == 0.0 {
                ProfileSpec::Zero
            } else {
                cfg.profile.with_amplitude(*a)
            }
        })
        .collect()
}

pub fn run_sweep(cfg: &ScenarioConfig) -> Result<(Outcome, SweepTable)> {
    let mut run = Run::new(cfg);
    let grid = Grid::new(cfg.grid.half_length, cfg.grid.n)?;
    let taus = if cfg.sweep.taus.is_empty() {
        cfg.taus.iter().map(|s| s.tau()).collect()
    } else {
        cfg.sweep.taus.clone()
    };
    let table = estimate_sweep(&grid, &sweep_family(cfg), &taus, cfg.sweep.s)?;
    run.csv("sweep.csv", |w| table.write_csv(w))?;
    if cfg.enabled("uniformity") {
        for name in ESTIMATES {
            let s = table.summary(name).expect("every estimate is summarised");
            let res = if s.all_finite {
                s.max_over_median
            } else {
                f64::INFINITY
            };
            run.check(&format!("uniformity_{name}"), Ok(res), "uniformity")?;
        }
    }
    Ok((run.finish("sweep_report.json")?, table))
}
