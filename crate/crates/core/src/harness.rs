//! Sweep execution, empirical correlation-length fitting, inequality
//! verification suites, and CSV/JSON reporting.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{
    self, BoundReport, BoundsError, XiProvider, DEFAULT_LOCALITY_THRESHOLD, INEQUALITY_TOL,
};
use crate::lattice::{LatticeError, LatticeModel, ModelSpec, SiteId, Subsystem};
use crate::operators::{matmul, pauli, OperatorError};
use crate::thermometry::{ThermalContext, ThermalError};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Correlators below this are floating-point noise and excluded from fits.
pub const CORRELATOR_FLOOR: f64 = 1e-12;

/// Fixed, versioned column order of the sweep CSV.
pub const CSV_COLUMNS: &[&str] = &[
    "beta", "size_A", "edges_A", "boundary_A", "F", "var_HA", "var_HCR", "lhs", "rhs_thm1",
    "rhs_cor", "rhs_1d", "R_star", "xi", "xi_mode", "ratio_edges", "ratio_surface", "satisfied",
    "error_code",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Thermal(#[from] ThermalError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("correlation-length fit rejected: {0}")]
    FitRejected(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Where the lattice model comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Path(PathBuf),
    Inline(ModelSpec),
}

impl ModelSource {
    pub fn load(&self) -> Result<LatticeModel, HarnessError> {
        match self {
            ModelSource::Path(p) => Ok(LatticeModel::from_path(p)?),
            ModelSource::Inline(spec) => Ok(spec.to_model()?),
        }
    }
}

/// Which subsystems a sweep visits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsystemLadder {
    /// Explicit site lists.
    Explicit(Vec<Vec<SiteId>>),
    /// Index windows of the given sizes centered in 0..n_sites.
    CenteredWindows { sizes: Vec<usize> },
}

impl SubsystemLadder {
    pub fn resolve(&self, model: &LatticeModel) -> Result<Vec<Vec<SiteId>>, HarnessError> {
        let n = model.dims().len();
        let sets = match self {
            SubsystemLadder::Explicit(sets) => sets.clone(),
            SubsystemLadder::CenteredWindows { sizes } => sizes
                .iter()
                .map(|&k| {
                    if k == 0 || k > n {
                        return Err(HarnessError::Config(format!(
                            "window size {k} invalid for {n} sites"
                        )));
                    }
                    let start = (n - k) / 2;
                    Ok((start..start + k).collect())
                })
                .collect::<Result<_, _>>()?,
        };
        for s in &sets {
            if s.is_empty() {
                return Err(HarnessError::Config("empty subsystem in ladder".into()));
            }
        }
        Ok(sets)
    }
}

/// How the layer width R is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RPolicy {
    Fixed { r: usize },
    /// Scan the admissible widths up to `r_max` (lattice diameter when absent)
    /// and keep the one minimizing the layered bound.
    Optimize { r_max: Option<usize> },
}

impl Default for RPolicy {
    fn default() -> Self {
        RPolicy::Optimize { r_max: None }
    }
}

fn default_threshold() -> f64 {
    DEFAULT_LOCALITY_THRESHOLD
}

fn default_tolerance() -> f64 {
    INEQUALITY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    pub model: ModelSource,
    pub subsystems: SubsystemLadder,
    pub betas: Vec<f64>,
    pub xi: XiProvider,
    #[serde(default)]
    pub r_policy: RPolicy,
    #[serde(default = "default_threshold")]
    pub locality_threshold: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_csv: Option<PathBuf>,
    #[serde(default)]
    pub out_json: Option<PathBuf>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "unsupported config schema_version {} (expected {})",
                cfg.schema_version, CONFIG_SCHEMA_VERSION
            )));
        }
        if cfg.betas.iter().any(|b| !b.is_finite()) {
            return Err(HarnessError::Config("non-finite beta in grid".into()));
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// FNV-1a over the canonical JSON form; stable across runs.
    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Per-point error codes recorded in-row; the sweep itself keeps going.
pub const ROW_OK: u8 = 0;
pub const ROW_VIOLATION: u8 = 2;
pub const ROW_NUMERICAL: u8 = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub size_a: usize,
    pub error_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<BoundReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub config_hash: String,
    pub code_version: String,
    /// Unix seconds; present only in the JSON artifact, never in the CSV.
    pub timestamp: u64,
    pub rows: Vec<SweepRow>,
}

impl RunRecord {
    pub fn worst_error_code(&self) -> u8 {
        self.rows.iter().map(|r| r.error_code).max().unwrap_or(ROW_OK)
    }
}

/// True when every site touches at most two edges and every edge has at most
/// two sites: the geometry of the 1D specialization.
pub fn is_chain_geometry(model: &LatticeModel) -> bool {
    let n = model.dims().len();
    model.edges().iter().all(|e| e.len() <= 2)
        && (0..n).all(|s| model.incident_edges(s).len() <= 2)
}

/// Evaluates one (β, A) point against every bound.
pub fn evaluate_point(
    ctx: &ThermalContext,
    a: &[SiteId],
    xi_provider: &XiProvider,
    r_policy: &RPolicy,
    threshold: f64,
    tolerance: f64,
) -> Result<BoundReport, HarnessError> {
    let model = ctx.model();
    let sub = Subsystem::new(model, a.iter().copied())?;
    let g = model.geometry_constants()?;
    let beta = ctx.beta();
    let xi = xi_provider.value(beta)?;

    let f = ctx.local_qfi(sub.sites())?;
    let var_ha = ctx.variance_edges(sub.interior());
    let lhs = (f.sqrt() - var_ha.sqrt()).abs();

    let r_max = match r_policy {
        RPolicy::Fixed { r } => *r,
        RPolicy::Optimize { r_max } => r_max.unwrap_or_else(|| model.diameter().max(1)),
    };
    let rhs_at = |r: usize| -> Result<f64, BoundsError> {
        let var_hcr = ctx.variance_edges(&sub.shell(r));
        bounds::theorem1_rhs(var_hcr.sqrt(), g.j, g.m_growth, sub.sites().len(), g.n_boundary, xi, r)
    };
    let (r_star, rhs_thm1) = match r_policy {
        RPolicy::Fixed { r } => (*r, rhs_at(*r)?),
        RPolicy::Optimize { .. } => bounds::optimize_r(rhs_at, xi, r_max)?,
    };
    let var_hcr = ctx.variance_edges(&sub.shell(r_star));
    let rhs_cor = bounds::corollary_rhs(
        g.j,
        g.m_growth,
        g.n_max,
        g.n_boundary,
        xi,
        sub.shell(r_star).len(),
        sub.sites().len(),
        r_star,
    )?;
    let rhs_1d = if is_chain_geometry(model) && var_ha > 0.0 {
        Some(bounds::example_1d_rhs(g.j, xi, r_star, sub.sites().len(), var_ha)?)
    } else {
        None
    };
    let loc = bounds::locality_conditions(model, a, xi, threshold)?;

    let mut report = BoundReport {
        beta,
        size_a: sub.sites().len(),
        edges_a: sub.interior().len(),
        boundary_a: sub.boundary().len(),
        f,
        var_ha,
        var_hcr,
        lhs,
        rhs_thm1,
        rhs_cor,
        rhs_1d,
        r_star,
        xi,
        xi_mode: xi_provider.mode_label().to_string(),
        ratio_edges: loc.ratio_edges,
        ratio_surface: loc.ratio_surface,
        satisfied: false,
    };
    report.satisfied = report.satisfied_from_columns(tolerance);
    Ok(report)
}

/// Runs the whole grid; per-point failures become in-row error codes and the
/// sweep continues. Artifacts are written atomically when paths are set.
pub fn run_sweep(config: &SweepConfig) -> Result<RunRecord, HarnessError> {
    let model = config.model.load()?;
    let subsystems = config.subsystems.resolve(&model)?;
    let mut betas = config.betas.clone();
    betas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sets = subsystems;
    sets.sort_by_key(|s| s.len());

    let mut rows: Vec<SweepRow> = Vec::new();
    for &beta in &betas {
        let ctx = match ThermalContext::new(&model, beta) {
            Ok(c) => c,
            Err(e) => {
                for a in &sets {
                    rows.push(SweepRow {
                        beta,
                        size_a: a.len(),
                        error_code: ROW_NUMERICAL,
                        error: Some(e.to_string()),
                        report: None,
                    });
                }
                continue;
            }
        };
        for a in &sets {
            let row = match evaluate_point(
                &ctx,
                a,
                &config.xi,
                &config.r_policy,
                config.locality_threshold,
                config.tolerance,
            ) {
                Ok(report) => SweepRow {
                    beta,
                    size_a: a.len(),
                    error_code: if report.satisfied { ROW_OK } else { ROW_VIOLATION },
                    error: None,
                    report: Some(report),
                },
                Err(e) => SweepRow {
                    beta,
                    size_a: a.len(),
                    error_code: ROW_NUMERICAL,
                    error: Some(e.to_string()),
                    report: None,
                },
            };
            rows.push(row);
        }
    }
    rows.sort_by(|x, y| {
        x.beta
            .partial_cmp(&y.beta)
            .unwrap()
            .then(x.size_a.cmp(&y.size_a))
    });

    let record = RunRecord {
        schema_version: CONFIG_SCHEMA_VERSION,
        config_hash: config.content_hash(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        rows,
    };
    if let Some(path) = &config.out_csv {
        write_atomic(path, render_csv(&record).as_bytes())?;
    }
    if let Some(path) = &config.out_json {
        write_atomic(path, serde_json::to_string_pretty(&record)?.as_bytes())?;
    }
    Ok(record)
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.12e}")
    }
}

/// Deterministic CSV: fixed columns, fixed float format, no timestamp.
pub fn render_csv(record: &RunRecord) -> String {
    let mut out = String::new();
    out.push_str(&CSV_COLUMNS.join(","));
    out.push('\n');
    for row in &record.rows {
        match &row.report {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    fmt_f64(r.beta),
                    r.size_a,
                    r.edges_a,
                    r.boundary_a,
                    fmt_f64(r.f),
                    fmt_f64(r.var_ha),
                    fmt_f64(r.var_hcr),
                    fmt_f64(r.lhs),
                    fmt_f64(r.rhs_thm1),
                    fmt_f64(r.rhs_cor),
                    r.rhs_1d.map(fmt_f64).unwrap_or_default(),
                    r.r_star,
                    fmt_f64(r.xi),
                    r.xi_mode,
                    fmt_f64(r.ratio_edges),
                    fmt_f64(r.ratio_surface),
                    r.satisfied,
                    row.error_code,
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{},{},,,,,,,,,,,,,,,,{}",
                    fmt_f64(row.beta),
                    row.size_a,
                    row.error_code,
                );
            }
        }
    }
    out
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}

/// One checked inequality inside a verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub violations: usize,
}

impl VerifyReport {
    fn push(&mut self, name: String, lhs: f64, rhs: f64, tol: f64) {
        let margin = rhs - lhs;
        let passed = lhs <= rhs + tol;
        if !passed {
            self.violations += 1;
        }
        self.checks.push(Check { name, lhs, rhs, margin, passed });
    }
}

/// Runs every inequality as an assertion over the config's grid. `j_scale`
/// multiplies the interaction-strength constant in the right-hand sides only;
/// 1.0 for honest verification, anything smaller is fault injection for
/// testing the detector itself.
pub fn verify_suite(config: &SweepConfig, j_scale: f64) -> Result<VerifyReport, HarnessError> {
    let model = config.model.load()?;
    let subsystems = config.subsystems.resolve(&model)?;
    let g = model.geometry_constants()?;
    let j = g.j * j_scale;
    let tol = config.tolerance;
    let mut report = VerifyReport { checks: Vec::new(), violations: 0 };
    let paulis: [(&str, DMatrix<Complex64>); 3] =
        [("sx", pauli::sx()), ("sy", pauli::sy()), ("sz", pauli::sz())];
    let n = model.dims().len();

    for &beta in &config.betas {
        let ctx = ThermalContext::new(&model, beta)?;
        let xi = config.xi.value(beta)?;

        // clustering: every pair of single-site Pauli observables
        for x in 0..n {
            for y in (x + 1)..n {
                let Some(d) = model.site_distance(x, y)? else { continue };
                let min_bdy = model.incident_edges(x).len().min(model.incident_edges(y).len());
                let rho_xy = ctx.reduced_state(&[x, y]);
                let rho_x = ctx.reduced_state(&[x]);
                let rho_y = ctx.reduced_state(&[y]);
                for (nx, ox) in &paulis {
                    for (ny, oy) in &paulis {
                        let joint = matmul(&rho_xy, &ox.kronecker(oy)).trace().re;
                        let mx = matmul(&rho_x, ox).trace().re;
                        let my = matmul(&rho_y, oy).trace().re;
                        let corr = (joint - mx * my).abs();
                        let rhs = bounds::clustering_rhs(xi, min_bdy, 1.0, 1.0, d)?;
                        report.push(
                            format!("clustering beta={beta} x={x} y={y} {nx}{ny}"),
                            corr,
                            rhs,
                            tol,
                        );
                    }
                }
            }
        }

        for a in &subsystems {
            let sub = Subsystem::new(&model, a.iter().copied())?;
            let f = ctx.local_qfi(sub.sites())?;
            let var_ha = ctx.variance_edges(sub.interior());
            let lhs = (f.sqrt() - var_ha.sqrt()).abs();
            let label = format!("beta={beta} A={:?}", sub.sites());

            // Theorem 2 on the subsystem's own edges and the whole lattice
            report.push(
                format!("thm2 {label} G=A"),
                var_ha,
                bounds::theorem2_bound(g.n_boundary, j, sub.interior().len(), g.n_max, g.m_growth, xi)?,
                tol,
            );
            let all = model.all_edge_indices();
            report.push(
                format!("thm2 {label} G=all"),
                ctx.variance_edges(&all),
                bounds::theorem2_bound(g.n_boundary, j, all.len(), g.n_max, g.m_growth, xi)?,
                tol,
            );

            let r_min = (2.0 * xi + 1.0).ceil() as usize;
            for r in r_min..=model.diameter().max(r_min) {
                let shell = sub.shell(r);
                let var_hcr = ctx.variance_edges(&shell);
                report.push(
                    format!("thm2 {label} G=C_{r}"),
                    var_hcr,
                    bounds::theorem2_bound(g.n_boundary, j, shell.len(), g.n_max, g.m_growth, xi)?,
                    tol,
                );
                let rhs1 = bounds::theorem1_rhs(
                    var_hcr.sqrt(),
                    j,
                    g.m_growth,
                    sub.sites().len(),
                    g.n_boundary,
                    xi,
                    r,
                )?;
                report.push(format!("thm1 {label} R={r}"), lhs, rhs1, tol);
                let rhsc = bounds::corollary_rhs(
                    j,
                    g.m_growth,
                    g.n_max,
                    g.n_boundary,
                    xi,
                    shell.len(),
                    sub.sites().len(),
                    r,
                )?;
                report.push(format!("corollary {label} R={r}"), lhs, rhsc, tol);
                // corollary dominates theorem 1 with the true variance root
                report.push(format!("cor>=thm1 {label} R={r}"), rhs1, rhsc, tol);
            }
        }
    }
    Ok(report)
}

/// Least-squares slope of ln c vs d over (distance, |correlator|) points;
/// the fitted length is -1/slope. Exposed separately as a test hook.
pub fn fit_xi_from_points(points: &[(usize, f64)]) -> Result<f64, HarnessError> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, c)| *c > CORRELATOR_FLOOR)
        .map(|&(d, c)| (d as f64, c.ln()))
        .collect();
    if usable.len() < 3 {
        return Err(HarnessError::FitRejected(format!(
            "only {} usable correlator points (need 3)",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let sx: f64 = usable.iter().map(|p| p.0).sum();
    let sy: f64 = usable.iter().map(|p| p.1).sum();
    let sxx: f64 = usable.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = usable.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(HarnessError::FitRejected("degenerate distance spread".into()));
    }
    let slope = (n * sxy - sx * sy) / denom;
    if slope >= 0.0 {
        return Err(HarnessError::FitRejected(format!(
            "correlators do not decay (slope {slope:.3e})"
        )));
    }
    Ok(-1.0 / slope)
}

/// Fits a correlation length from exact connected correlators of a
/// single-site observable over all site pairs up to `max_distance`.
pub fn fit_xi_empirical(
    model: &LatticeModel,
    beta: f64,
    observable: &DMatrix<Complex64>,
    max_distance: usize,
) -> Result<f64, HarnessError> {
    if model.diameter() < 3 {
        return Err(HarnessError::FitRejected(format!(
            "lattice diameter {} too small for a fit (need 3)",
            model.diameter()
        )));
    }
    let ctx = ThermalContext::new(model, beta)?;
    let n = model.dims().len();
    let mut points: Vec<(usize, f64)> = Vec::new();
    let mut means = vec![0.0f64; n];
    for x in 0..n {
        means[x] = matmul(&ctx.reduced_state(&[x]), observable).trace().re;
    }
    let two_site = observable.kronecker(observable);
    for x in 0..n {
        for y in (x + 1)..n {
            let Some(d) = model.site_distance(x, y)? else { continue };
            if d == 0 || d > max_distance {
                continue;
            }
            let rho_xy = ctx.reduced_state(&[x, y]);
            let joint = matmul(&rho_xy, &two_site).trace().re;
            points.push((d, (joint - means[x] * means[y]).abs()));
        }
    }
    fit_xi_from_points(&points)
}

/// Default observable for empirical fits.
pub fn default_fit_observable() -> DMatrix<Complex64> {
    pauli::sz()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_chain, Edge};
    use approx::assert_relative_eq;

    fn chain_config(n: usize, betas: Vec<f64>, sizes: Vec<usize>) -> SweepConfig {
        SweepConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            model: ModelSource::Inline(ModelSpec::ising_chain(n, 0.3, false)),
            subsystems: SubsystemLadder::CenteredWindows { sizes },
            betas,
            xi: XiProvider::ClosedFormIsing { j: 1.0 },
            r_policy: RPolicy::default(),
            locality_threshold: DEFAULT_LOCALITY_THRESHOLD,
            tolerance: INEQUALITY_TOL,
            seed: 0,
            out_csv: None,
            out_json: None,
        }
    }

    #[test]
    fn config_roundtrip_and_hash_stability() {
        let cfg = chain_config(6, vec![0.05, 0.1], vec![2, 4]);
        let json = serde_json::to_string(&cfg).unwrap();
        let back = SweepConfig::from_json(&json).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.content_hash(), back.content_hash());
        let other = chain_config(6, vec![0.05], vec![2, 4]);
        assert_ne!(cfg.content_hash(), other.content_hash());
    }

    #[test]
    fn config_rejects_bad_schema_version() {
        let cfg = chain_config(4, vec![0.1], vec![2]);
        let mut v: serde_json::Value = serde_json::to_value(&cfg).unwrap();
        v["schema_version"] = serde_json::json!(99);
        assert!(matches!(
            SweepConfig::from_json(&v.to_string()),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn centered_windows_resolve() {
        let m = build_chain(10, 0.3, false).unwrap();
        let ladder = SubsystemLadder::CenteredWindows { sizes: vec![2, 4] };
        let sets = ladder.resolve(&m).unwrap();
        assert_eq!(sets, vec![vec![4, 5], vec![3, 4, 5, 6]]);
        let bad = SubsystemLadder::CenteredWindows { sizes: vec![11] };
        assert!(bad.resolve(&m).is_err());
    }

    #[test]
    fn empty_beta_grid_gives_empty_record() {
        let cfg = chain_config(4, vec![], vec![2]);
        let rec = run_sweep(&cfg).unwrap();
        assert!(rec.rows.is_empty());
        assert_eq!(rec.worst_error_code(), ROW_OK);
    }

    #[test]
    fn two_spin_full_system_row() {
        // A = 𝓥 → lhs ≈ 0 by the canonical identity
        let mut cfg = chain_config(2, vec![0.1], vec![2]);
        cfg.r_policy = RPolicy::Optimize { r_max: Some(4) };
        let rec = run_sweep(&cfg).unwrap();
        assert_eq!(rec.rows.len(), 1);
        let rep = rec.rows[0].report.as_ref().unwrap();
        assert!(rep.lhs < 1e-8, "lhs = {}", rep.lhs);
        assert!(rep.satisfied);
        assert_eq!(rec.rows[0].error_code, ROW_OK);
    }

    #[test]
    fn ten_spin_sweep_all_satisfied() {
        let cfg = chain_config(10, vec![0.05, 0.1], vec![2, 4, 6]);
        let rec = run_sweep(&cfg).unwrap();
        assert_eq!(rec.rows.len(), 6);
        for row in &rec.rows {
            let rep = row.report.as_ref().expect("no numerical failures");
            assert!(rep.satisfied, "row beta={} |A|={} lhs={} rhs={}",
                rep.beta, rep.size_a, rep.lhs, rep.rhs_thm1);
            assert!(rep.rhs_1d.is_some(), "chain rows carry the 1D bound");
        }
        // sorted by (beta, |A|)
        for w in rec.rows.windows(2) {
            assert!(
                (w[0].beta, w[0].size_a) <= (w[1].beta, w[1].size_a),
                "rows out of order"
            );
        }
    }

    #[test]
    fn sweep_csv_deterministic_and_self_consistent() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = chain_config(6, vec![0.1], vec![2, 4]);
        cfg.out_csv = Some(dir.path().join("out.csv"));
        cfg.out_json = Some(dir.path().join("out.json"));
        run_sweep(&cfg).unwrap();
        let first = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
        run_sweep(&cfg).unwrap();
        let second = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
        assert_eq!(first, second, "CSV not byte-identical across reruns");
        let header = first.lines().next().unwrap();
        assert_eq!(header, CSV_COLUMNS.join(","));
        // satisfied recomputable from the row's own columns
        for line in first.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), CSV_COLUMNS.len());
            let lhs: f64 = cols[7].parse().unwrap();
            let rhs1: f64 = cols[8].parse().unwrap();
            let rhsc: f64 = cols[9].parse().unwrap();
            let flag: bool = cols[16].parse().unwrap();
            assert_eq!(flag, lhs <= rhs1 + INEQUALITY_TOL && lhs <= rhsc + INEQUALITY_TOL);
        }
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("out.json")).unwrap())
                .unwrap();
        assert!(json["timestamp"].is_u64());
        assert!(!first.contains("timestamp"));
    }

    #[test]
    fn numerical_failure_recorded_in_row() {
        // β far outside the exponent guard for the closed-form ξ domain →
        // ξ domain error at that point, sweep still returns
        let cfg = chain_config(6, vec![0.05, 0.4], vec![2]);
        let rec = run_sweep(&cfg).unwrap();
        assert_eq!(rec.rows.len(), 2);
        assert_eq!(rec.rows[0].error_code, ROW_OK);
        assert_eq!(rec.rows[1].error_code, ROW_NUMERICAL);
        assert!(rec.rows[1].error.as_ref().unwrap().contains("correlation length"));
        assert_eq!(rec.worst_error_code(), ROW_NUMERICAL);
    }

    #[test]
    fn verify_suite_clean_on_small_chain() {
        let cfg = chain_config(8, vec![0.1], vec![2, 4, 6, 8]);
        let rep = verify_suite(&cfg, 1.0).unwrap();
        assert!(rep.violations == 0, "violations: {:?}",
            rep.checks.iter().filter(|c| !c.passed).take(3).collect::<Vec<_>>());
        assert!(!rep.checks.is_empty());
    }

    #[test]
    fn verify_suite_decoupled_model_exact_margins() {
        // two decoupled 3-site chains: A = one chain → lhs = 0 exactly
        let edges = vec![
            Edge::new([0, 1]),
            Edge::new([1, 2]),
            Edge::new([3, 4]),
            Edge::new([4, 5]),
        ];
        let terms = vec![
            crate::operators::pauli::sx().kronecker(&crate::operators::pauli::sx());
            4
        ];
        let spec = ModelSpec::explicit(vec![2; 6], edges, terms);
        let cfg = SweepConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            model: ModelSource::Inline(spec),
            subsystems: SubsystemLadder::Explicit(vec![vec![0, 1, 2]]),
            betas: vec![0.2],
            xi: XiProvider::UserConstant { xi: 0.5 },
            r_policy: RPolicy::default(),
            locality_threshold: 0.1,
            tolerance: INEQUALITY_TOL,
            seed: 0,
            out_csv: None,
            out_json: None,
        };
        let rep = verify_suite(&cfg, 1.0).unwrap();
        assert_eq!(
            rep.violations,
            0,
            "violations: {:?}",
            rep.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>()
        );
        for c in rep.checks.iter().filter(|c| c.name.starts_with("thm1")) {
            assert_relative_eq!(c.margin, c.rhs, max_relative = 1e-6);
        }
    }

    #[test]
    fn verify_suite_detects_fault_injection() {
        let cfg = chain_config(8, vec![0.1], vec![2, 4]);
        // shrinking the J constant in the rhs by 1000× must break something
        let rep = verify_suite(&cfg, 1e-3).unwrap();
        assert!(rep.violations > 0);
    }

    #[test]
    fn fit_xi_synthetic_exponential() {
        let points: Vec<(usize, f64)> = (1..=6).map(|d| (d, (-(d as f64) / 2.0).exp())).collect();
        let xi = fit_xi_from_points(&points).unwrap();
        assert_relative_eq!(xi, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn fit_xi_rejections() {
        // flat correlators below the floor
        let flat: Vec<(usize, f64)> = (1..=6).map(|d| (d, 1e-15)).collect();
        assert!(matches!(fit_xi_from_points(&flat), Err(HarnessError::FitRejected(_))));
        // growing correlators → nonnegative slope
        let grow: Vec<(usize, f64)> = (1..=6).map(|d| (d, (d as f64).exp())).collect();
        assert!(matches!(fit_xi_from_points(&grow), Err(HarnessError::FitRejected(_))));
        // too few points
        assert!(fit_xi_from_points(&[(1, 0.5), (2, 0.2)]).is_err());
    }

    #[test]
    fn fit_xi_decoupled_model_rejected() {
        let edges: Vec<Edge> = (0..4).map(|i| Edge::new([i])).collect();
        let terms = vec![crate::operators::pauli::sz(); 4];
        let m = crate::lattice::LatticeModel::new(vec![2; 4], edges, terms).unwrap();
        // no inter-site edges → diameter 0 → too small
        assert!(fit_xi_empirical(&m, 0.3, &default_fit_observable(), 8).is_err());
    }

    #[test]
    fn fit_xi_ising_chain_order_of_magnitude() {
        let m = build_chain(10, 0.3, false).unwrap();
        let beta = 0.1;
        let xi_emp = fit_xi_empirical(&m, beta, &default_fit_observable(), 9).unwrap();
        let xi_cf = crate::bounds::ising_xi(beta, 1.0).unwrap();
        assert!(
            xi_emp < 2.0 * xi_cf && xi_emp > xi_cf / 2.0 || (xi_emp - xi_cf).abs() < xi_cf,
            "xi_emp {xi_emp} vs closed form {xi_cf}"
        );
    }

    #[test]
    fn chain_geometry_detection() {
        assert!(is_chain_geometry(&build_chain(6, 0.3, false).unwrap()));
        assert!(is_chain_geometry(&build_chain(6, 0.3, true).unwrap()));
        let m = crate::lattice::build_square(3, 3, 0.0).unwrap();
        assert!(!is_chain_geometry(&m));
    }
}
