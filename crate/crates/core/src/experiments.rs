//! Reproducible convergence studies and the CSV harness behind the CLI.
//!
//! Two benchmark families run over a refining mesh ladder on the strip
//! (0, pi) x (0, 1):
//! * the data-completion problem driven by the oscillatory harmonic
//!   fields u_n = sin(nx) sinh(ny) / n with both data given on the
//!   bottom edge (optionally with homogeneous Dirichlet values on the
//!   lateral edges), whose severity grows rapidly with the mode n,
//! * a fully Dirichlet manufactured problem used to validate the
//!   discretization in the well-posed regime.
//!
//! Each run emits one CSV row per mesh with a fixed header, and the
//! whole pipeline is deterministic: the same configuration (seed
//! included) produces a byte-identical file.

use std::path::PathBuf;
use std::sync::Arc;

use crate::assembly::{self, ProblemSpec};
use crate::error::{Error, Result};
use crate::mesh::{build_face_table, generate_union_jack, Rect, tag_boundary};
use crate::metrics::{self, ErrorReport, RateTable};
use crate::solvers::{self, DiscreteSolution, SolverConfig};
use crate::spaces::perturb::Perturbation;
use crate::spaces::{SpaceConfig, Spaces, Variant};

/// Exact column order of every results file.
pub const CSV_HEADER: &str = "case,variant,k,l,m,n,gamma_T,delta,seed,nx,ny,h,dof_V,dof_D,dof_W,\
rel_l2_global,rel_l2_local,rel_h1s_global,rel_h1s_local,tnorm_residual,z_1h,max_cons_residual,\
flux_l2_sigma,outer_iters";

/// Which benchmark geometry and data layout to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Cauchy data on the bottom edge, homogeneous Dirichlet values on
    /// the lateral edges, nothing on top.
    Hadamard1,
    /// Cauchy data on the bottom edge only.
    Hadamard2,
    /// Dirichlet data on the whole boundary (validation).
    Wellposed,
}

impl Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Case::Hadamard1 => "hadamard1",
            Case::Hadamard2 => "hadamard2",
            Case::Wellposed => "wellposed",
        }
    }

    pub fn parse(s: &str) -> Result<Case> {
        match s {
            "hadamard1" => Ok(Case::Hadamard1),
            "hadamard2" => Ok(Case::Hadamard2),
            "wellposed" => Ok(Case::Wellposed),
            _ => Err(Error::Parse(format!(
                "unknown case {s:?} (expected hadamard1, hadamard2, or wellposed)"
            ))),
        }
    }
}

/// Discretization variant plus solution route for one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunVariant {
    /// Full saddle-point system with equal-order fluxes (k = 1 only).
    InfSup,
    /// Full saddle-point system, flux one order below the primal field.
    WellBalanced,
    /// Symmetric positive definite least-squares system, no multiplier.
    Reduced,
    /// Defect-correction iteration on the reduced operator.
    Defect,
}

impl RunVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunVariant::InfSup => "infsup",
            RunVariant::WellBalanced => "wellbalanced",
            RunVariant::Reduced => "reduced",
            RunVariant::Defect => "defect",
        }
    }

    pub fn parse(s: &str) -> Result<RunVariant> {
        match s {
            "infsup" => Ok(RunVariant::InfSup),
            "wellbalanced" => Ok(RunVariant::WellBalanced),
            "reduced" => Ok(RunVariant::Reduced),
            "defect" => Ok(RunVariant::Defect),
            _ => Err(Error::Parse(format!(
                "unknown variant {s:?} (expected infsup, wellbalanced, reduced, or defect)"
            ))),
        }
    }

    fn space_config(&self, k: usize, gamma_t: f64) -> Result<SpaceConfig> {
        let mut cfg = match self {
            RunVariant::InfSup => SpaceConfig::new(k, Variant::InfSup)?,
            RunVariant::WellBalanced => SpaceConfig::new(k, Variant::WellBalanced)?,
            RunVariant::Reduced => SpaceConfig::new(k, Variant::Reduced)?,
            RunVariant::Defect => SpaceConfig::defect_target(k)?,
        };
        cfg.gamma_t = gamma_t;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One convergence study: a case, one variant, one mesh ladder.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub case: Case,
    /// Mode number of the harmonic benchmark field (ignored for the
    /// well-posed case, reported as 0 there).
    pub n: usize,
    pub k: usize,
    pub variant: RunVariant,
    pub gamma_t: f64,
    /// Relative amplitude of the multiplicative noise on the flux datum.
    pub delta: f64,
    pub ladder: Vec<(usize, usize)>,
    pub seed: u64,
    /// CSV destination; in-memory only when absent.
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.case != Case::Wellposed && self.n < 1 {
            return Err(Error::Config(format!("mode number must be >= 1, got {}", self.n)));
        }
        if self.ladder.is_empty() {
            return Err(Error::Config("mesh ladder is empty".into()));
        }
        for w in self.ladder.windows(2) {
            let ((ax, ay), (bx, by)) = (w[0], w[1]);
            if bx <= ax || by <= ay {
                return Err(Error::Config(format!(
                    "mesh ladder must strictly refine: {ax}x{ay} then {bx}x{by}"
                )));
            }
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be >= 0, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Exact solution package of a benchmark: the scalar field, its
/// gradient, the conormal flux on the data boundary, and the source.
pub struct ExactFields {
    pub u: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub grad_u: Box<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>,
    pub psi: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

/// The harmonic mode family u_n(x, y) = sin(nx) sinh(ny) / n.
///
/// Each field vanishes on the bottom edge while its outward flux there
/// is -sin(nx); the data stay O(1) as n grows, but the field itself
/// blows up like sinh(n)/n at the top — the classic demonstration that
/// the reconstruction problem cannot depend continuously on the data.
pub fn hadamard_exact(n: usize) -> Result<ExactFields> {
    if n < 1 {
        return Err(Error::Config(format!("mode number must be >= 1, got {n}")));
    }
    let nf = n as f64;
    Ok(ExactFields {
        u: Box::new(move |x, y| (nf * x).sin() * (nf * y).sinh() / nf),
        grad_u: Box::new(move |x, y| {
            [(nf * x).cos() * (nf * y).sinh(), (nf * x).sin() * (nf * y).cosh()]
        }),
        // Outward normal on the bottom edge is (0, -1).
        psi: Box::new(move |x, _| -(nf * x).sin()),
        f: Box::new(|_, _| 0.0),
    })
}

/// Manufactured smooth solution for the all-Dirichlet validation:
/// u = sin(x) sin(pi y), with the matching volume source.
pub fn wellposed_exact() -> ExactFields {
    let pi = std::f64::consts::PI;
    ExactFields {
        u: Box::new(move |x, y| x.sin() * (pi * y).sin()),
        grad_u: Box::new(move |x, y| [x.cos() * (pi * y).sin(), pi * x.sin() * (pi * y).cos()]),
        psi: Box::new(|_, _| 0.0), // no flux-data boundary in this case
        f: Box::new(move |x, y| -(1.0 + pi * pi) * x.sin() * (pi * y).sin()),
    }
}

/// Discrete spaces of one benchmark on its canonical geometry: the
/// strip (0, pi) x (0, 1) with the data boundary along y = 0 (plus the
/// lateral edges for the first data layout, everything for the
/// well-posed study).
pub fn build_spaces(case: Case, nx: usize, ny: usize, cfg: SpaceConfig) -> Result<Spaces> {
    let bbox = Rect::new(0.0, 0.0, std::f64::consts::PI, 1.0)?;
    let mesh = Arc::new(generate_union_jack(nx, ny, bbox)?);
    let faces = Arc::new(build_face_table(&mesh)?);
    let tol = 1e-12 * mesh.domain_bbox.diameter();
    let (x1, y0) = (mesh.domain_bbox.x1, mesh.domain_bbox.y0);
    let bottom = move |_: f64, y: f64| (y - y0).abs() <= tol;
    let tags = Arc::new(match case {
        Case::Hadamard1 => tag_boundary(&mesh, &faces, bottom, move |x, y| {
            (y - y0).abs() <= tol || x.abs() <= tol || (x - x1).abs() <= tol
        })?,
        Case::Hadamard2 => tag_boundary(&mesh, &faces, bottom, bottom)?,
        Case::Wellposed => tag_boundary(&mesh, &faces, |_, _| false, |_, _| true)?,
    });
    Spaces::build(mesh, faces, tags, cfg)
}

/// Coefficients and data of the configured benchmark, with the noise
/// model attached when the amplitude is positive.
pub fn build_problem(config: &RunConfig) -> Result<ProblemSpec> {
    let identity = [[1.0, 0.0], [0.0, 1.0]];
    let problem = match config.case {
        Case::Wellposed => {
            let pi = std::f64::consts::PI;
            ProblemSpec::new(
                identity,
                0.0,
                move |x: f64, y: f64| -(1.0 + pi * pi) * x.sin() * (pi * y).sin(),
                move |x: f64, y: f64| x.sin() * (pi * y).sin(),
                |_, _| 0.0,
            )?
        }
        Case::Hadamard1 | Case::Hadamard2 => {
            let nf = config.n as f64;
            ProblemSpec::new(
                identity,
                0.0,
                |_, _| 0.0,
                move |x: f64, y: f64| (nf * x).sin() * (nf * y).sinh() / nf,
                move |x: f64, _: f64| -(nf * x).sin(),
            )?
        }
    };
    Ok(if config.delta > 0.0 {
        problem.with_perturbation(Perturbation {
            delta: config.delta,
            delta_f: 0.0,
            seed: config.seed,
        })
    } else {
        problem
    })
}

fn solve_one(
    spaces: &Spaces,
    problem: &ProblemSpec,
    variant: RunVariant,
    solver: &SolverConfig,
) -> Result<DiscreteSolution> {
    match variant {
        RunVariant::Defect => solvers::defect_correction(spaces, problem, solver),
        RunVariant::Reduced => {
            let sys = assembly::assemble_reduced(spaces, problem)?;
            solvers::solve_reduced(spaces, &sys, solver)
        }
        RunVariant::InfSup | RunVariant::WellBalanced => {
            let sys = assembly::assemble_full(spaces, problem)?;
            solvers::solve_full(spaces, &sys, solver)
        }
    }
}

fn csv_row(config: &RunConfig, cfg: &SpaceConfig, nx: usize, ny: usize, r: &ErrorReport) -> String {
    let n = if config.case == Case::Wellposed { 0 } else { config.n };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        config.case.as_str(),
        config.variant.as_str(),
        cfg.k,
        cfg.l,
        cfg.m,
        n,
        cfg.gamma_t,
        config.delta,
        config.seed,
        nx,
        ny,
        r.h,
        r.dof_v,
        r.dof_d,
        r.dof_w,
        r.rel_l2_global,
        r.rel_l2_local,
        r.rel_h1s_global,
        r.rel_h1s_local,
        r.tnorm_residual,
        r.z_1h_norm,
        r.max_conservation_residual,
        r.boundary_flux_error,
        r.iterations,
    )
}

fn flush_csv(out: &Option<PathBuf>, csv: &str) -> Result<()> {
    if let Some(path) = out {
        std::fs::write(path, csv)?;
    }
    Ok(())
}

/// Everything one study produced: per-mesh reports, the rate table
/// over the headline error metrics, iteration histories, and the CSV
/// text that was (optionally) written to disk.
pub struct RunRecord {
    pub reports: Vec<ErrorReport>,
    pub table: RateTable,
    pub increments: Vec<Vec<f64>>,
    pub csv: String,
}

impl RunRecord {
    /// Fitted convergence rates over the last `window` meshes, one
    /// line per metric.
    pub fn rate_summary(&self, window: usize) -> Result<String> {
        let rates = metrics::fit_rates(&self.table, window.min(self.table.h.len()).max(2))?;
        let mut out = String::new();
        for (name, slope) in rates {
            out.push_str(&format!("{name}: {slope:.3}\n"));
        }
        Ok(out)
    }
}

const RATE_METRICS: [&str; 5] =
    ["rel_l2_global", "rel_l2_local", "rel_h1s_global", "rel_h1s_local", "tnorm_residual"];

/// Run one benchmark over its mesh ladder.
///
/// A solver failure mid-ladder flushes the rows computed so far to the
/// output path (when one is set) before the error propagates.
pub fn run_case(config: &RunConfig) -> Result<RunRecord> {
    config.validate()?;
    let exact = match config.case {
        Case::Wellposed => wellposed_exact(),
        _ => hadamard_exact(config.n)?,
    };
    let solver = SolverConfig::default();
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    let mut table = RateTable::new(RATE_METRICS.iter().map(|s| s.to_string()).collect());
    let mut reports = Vec::new();
    let mut increments = Vec::new();
    for &(nx, ny) in &config.ladder {
        let scfg = config.variant.space_config(config.k, config.gamma_t)?;
        let spaces = build_spaces(config.case, nx, ny, scfg)?;
        let problem = build_problem(config)?;
        let solution = match solve_one(&spaces, &problem, config.variant, &solver) {
            Ok(s) => s,
            Err(e) => {
                flush_csv(&config.out, &csv)?;
                return Err(e);
            }
        };
        let report =
            metrics::error_norms(&spaces, &problem, &*exact.u, &*exact.grad_u, &solution, 0.5)?;
        csv.push_str(&csv_row(config, &spaces.config, nx, ny, &report));
        csv.push('\n');
        table.push_row(
            report.h,
            vec![
                report.rel_l2_global,
                report.rel_l2_local,
                report.rel_h1s_global,
                report.rel_h1s_local,
                report.tnorm_residual,
            ],
        )?;
        increments.push(solution.increment_history.clone());
        reports.push(report);
    }
    flush_csv(&config.out, &csv)?;
    Ok(RunRecord { reports, table, increments, csv })
}

/// The all-Dirichlet validation study; rejects any other case.
pub fn run_wellposed(config: &RunConfig) -> Result<RunRecord> {
    if config.case != Case::Wellposed {
        return Err(Error::Config(format!(
            "run_wellposed needs the wellposed case, got {}",
            config.case.as_str()
        )));
    }
    run_case(config)
}

/// Parse a mesh ladder of the form `12x4:5`: the base grid followed by
/// the number of dyadic refinements (`12x4` alone means one mesh).
pub fn parse_ladder(s: &str) -> Result<Vec<(usize, usize)>> {
    let (base, count) = match s.split_once(':') {
        Some((b, c)) => {
            let count: usize = c
                .parse()
                .map_err(|_| Error::Parse(format!("bad ladder length in {s:?}")))?;
            (b, count)
        }
        None => (s, 1),
    };
    let (nx, ny) = base
        .split_once('x')
        .ok_or_else(|| Error::Parse(format!("bad ladder base in {s:?} (expected NXxNY)")))?;
    let nx: usize =
        nx.parse().map_err(|_| Error::Parse(format!("bad ladder base in {s:?}")))?;
    let ny: usize =
        ny.parse().map_err(|_| Error::Parse(format!("bad ladder base in {s:?}")))?;
    if nx == 0 || ny == 0 || count == 0 {
        return Err(Error::Parse(format!("ladder {s:?} must have positive sizes and length")));
    }
    Ok((0..count).map(|i| (nx << i, ny << i)).collect())
}

/// Rebuild a rate table from a results file written by [`run_case`].
pub fn read_csv_rates(text: &str) -> Result<RateTable> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::Parse("results file does not start with the expected header".into())),
    }
    let mut table = RateTable::new(RATE_METRICS.iter().map(|s| s.to_string()).collect());
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 24 {
            return Err(Error::Parse(format!(
                "row {} has {} fields, expected 24",
                i + 2,
                fields.len()
            )));
        }
        let num = |idx: usize| -> Result<f64> {
            fields[idx]
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad number {:?}", i + 2, fields[idx])))
        };
        let h = num(11)?;
        let values = vec![num(15)?, num(16)?, num(17)?, num(18)?, num(19)?];
        table
            .push_row(h, values)
            .map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?;
    }
    Ok(table)
}

/// Grid search over the gradient-penalty weight on one fixed mesh.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub case: Case,
    pub n: usize,
    pub k: usize,
    pub variant: RunVariant,
    pub delta: f64,
    pub seed: u64,
    pub nx: usize,
    pub ny: usize,
    pub gammas: Vec<f64>,
}

impl SweepConfig {
    pub fn new(case: Case, n: usize, k: usize, variant: RunVariant) -> SweepConfig {
        SweepConfig {
            case,
            n,
            k,
            variant,
            delta: 0.0,
            seed: 42,
            nx: 240,
            ny: 80,
            gammas: vec![0.0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
        }
    }
}

/// One error value per candidate weight, plus the first weight at
/// which the error visibly exceeds the best seen before it.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub gammas: Vec<f64>,
    pub errors: Vec<f64>,
    pub first_increase: Option<f64>,
}

/// Solve the same problem once per candidate weight and scan for the
/// point where more smoothing starts hurting. Weights whose solve is
/// inadmissible or fails numerically yield NaN and are skipped by the
/// scan; configuration errors still propagate.
pub fn sweep_gamma(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.gammas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("gamma grid must be strictly increasing".into()));
    }
    let mut errors = Vec::with_capacity(cfg.gammas.len());
    for &g in &cfg.gammas {
        // The defect iteration needs a positive weight beyond first
        // order; skip rather than fail the whole sweep.
        if g == 0.0 && cfg.variant == RunVariant::Defect && cfg.k != 1 {
            errors.push(f64::NAN);
            continue;
        }
        let rc = RunConfig {
            case: cfg.case,
            n: cfg.n,
            k: cfg.k,
            variant: cfg.variant,
            gamma_t: g,
            delta: cfg.delta,
            ladder: vec![(cfg.nx, cfg.ny)],
            seed: cfg.seed,
            out: None,
        };
        match run_case(&rc) {
            Ok(rec) => errors.push(rec.reports[0].rel_l2_global),
            Err(Error::Singular(_))
            | Err(Error::CgStagnation { .. })
            | Err(Error::DefectNonConvergence { .. }) => errors.push(f64::NAN),
            Err(e) => return Err(e),
        }
    }
    let mut first_increase = None;
    let mut best = f64::INFINITY;
    for (i, &e) in errors.iter().enumerate() {
        if !e.is_finite() {
            continue;
        }
        if best.is_finite() && e > 1.1 * best {
            first_increase = Some(cfg.gammas[i]);
            break;
        }
        best = best.min(e);
    }
    Ok(SweepReport { gammas: cfg.gammas.clone(), errors, first_increase })
}
