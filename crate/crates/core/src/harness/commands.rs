//! The five front-end operations. Each returns an in-memory result that
//! can render a stdout summary and write its CSV files; nothing here prints.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kdvref::{analytic_soliton_at, fit_speed, locate_extremum};
use crate::nls::{compensate_seam, density_velocity, hamiltonian, norms, Boundary, Evolution, FieldState};
use crate::reduction::{
    kdv_coefficients, kdv_from_column, madelung_synthesize, reconstruct_fields, soliton_profile, Branch,
    BranchKind, ClosedForm, ClosedFormPhase, KdvModel, SolitonProfile,
};
use crate::spectrum::{
    degeneracy_report, eigensystem_with, positivity_report, DegeneracyReport, Direction, EigenpairTracker,
    LinearSpectrum, PositivityReport,
};

use super::config::{RunConfig, REFERENCE_QUOTED};
use super::csv::{format_number, Cell, Table};

/// Half-width of the search window used to follow a soliton peak.
pub const PEAK_WINDOW: f64 = 5.0;

fn spectrum_of(cfg: &RunConfig) -> Result<LinearSpectrum> {
    eigensystem_with(&cfg.coupling, &cfg.bg, cfg.normalization)
}

/// Comment block shared by every CSV: numbering convention, resolved
/// configuration, projection coefficients and, for the reference parameter
/// set, the quoted values next to them.
pub fn header_block(cfg: &RunConfig, command: &str) -> Vec<String> {
    let mut out = vec![
        format!("vnls-kdv {command}"),
        "branches: j = 1..N in ascending order of sound speed; +j moves right, -j moves left; \
         the fastest right mover is +N"
            .to_string(),
        "configuration:".to_string(),
    ];
    out.extend(cfg.to_toml().lines().map(|l| format!("  {l}")));
    if let Ok(sp) = spectrum_of(cfg) {
        out.push("projection coefficients (right movers): branch, lambda, A, B, lab_speed".into());
        for j in 1..=sp.n() {
            match kdv_coefficients(&sp, &cfg.bg, Branch::right(j)) {
                Ok(m) => out.push(format!(
                    "  +{j}, {}, {}, {}, {}",
                    format_number(m.lambda),
                    format_number(m.dispersion),
                    format_number(m.nonlinearity),
                    format_number(m.lab_speed(&cfg.scaling))
                )),
                Err(_) => out.push(format!(
                    "  +{j}, {}, repeated speed (coupled KdV system, not reduced)",
                    format_number(sp.lambda[j - 1])
                )),
            }
        }
        if cfg.is_reference_set() {
            out.push(
                "reference quoted values (lambda, A, B, lab_speed) and projection/quoted B ratio:".into(),
            );
            for (pos, (lam, a, b, lab)) in REFERENCE_QUOTED.iter().enumerate() {
                let j = sp.n() - pos;
                let ratio = kdv_coefficients(&sp, &cfg.bg, Branch::right(j))
                    .map(|m| m.nonlinearity / b)
                    .unwrap_or(f64::NAN);
                out.push(format!("  +{j}, {lam}, {a}, {b}, {lab}, ratio_B = {ratio:.6}"));
            }
        }
    }
    out
}

fn write_table(table: &Table, dir: &Path, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    table.write(&path)?;
    Ok(path)
}

// ---------------------------------------------------------------- spectrum

#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub positivity: PositivityReport,
    pub degeneracy: Option<DegeneracyReport>,
    pub spectrum: Option<LinearSpectrum>,
    /// Eigenvalues of `αρ` (ascending) when the background is unstable.
    pub unstable_lambda_sq: Vec<f64>,
    pub table: Table,
}

pub fn spectrum(cfg: &RunConfig) -> Result<SpectrumRun> {
    let positivity = positivity_report(&cfg.coupling);
    let degeneracy = cfg
        .coupling
        .as_structured()
        .map(|s| degeneracy_report(s, &cfg.bg))
        .transpose()?;
    let mut table = Table::new(&["branch", "lambda", "multiplicity"]);
    table.comments(header_block(cfg, "spectrum"));
    table.comment(format!("positivity: {positivity}"));
    let (spectrum, unstable) = match spectrum_of(cfg) {
        Ok(sp) => {
            for d in [Direction::Right, Direction::Left] {
                for j in 0..sp.n() {
                    let signed = Branch { index: j + 1, direction: d }.signed();
                    table.push(vec![
                        signed.into(),
                        (d.sign() * sp.lambda[j]).into(),
                        sp.multiplicity(j).into(),
                    ]);
                }
            }
            (Some(sp), Vec::new())
        }
        Err(Error::NotPositiveDefinite(_)) => {
            let alpha = cfg.coupling.alpha();
            let n = cfg.bg.n();
            let s = nalgebra::DMatrix::from_fn(n, n, |i, j| {
                cfg.bg.rho0[i].sqrt() * alpha[(i, j)] * cfg.bg.rho0[j].sqrt()
            });
            let mut ev: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            (None, ev)
        }
        Err(e) => return Err(e),
    };
    Ok(SpectrumRun {
        positivity,
        degeneracy,
        spectrum,
        unstable_lambda_sq: unstable,
        table,
    })
}

impl SpectrumRun {
    pub fn is_stable(&self) -> bool {
        self.spectrum.is_some()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "positivity: {}", self.positivity);
        if let Some(d) = &self.degeneracy {
            if d.repeated.is_empty() {
                let _ = writeln!(s, "degeneracy: none (all (rho0*g, rho0) pairs distinct)");
            }
            for r in &d.repeated {
                let members: Vec<String> = r.members.iter().map(|m| (m + 1).to_string()).collect();
                match r.lambda() {
                    Some(l) => {
                        let _ = writeln!(
                            s,
                            "degeneracy: components {{{}}} share (rho0*g, rho0); speed {l:.10} repeated, multiplicity {}",
                            members.join(","),
                            r.multiplicity
                        );
                    }
                    None => {
                        let _ = writeln!(
                            s,
                            "degeneracy: components {{{}}} share (rho0*g, rho0); lambda^2 = {:.6e} <= 0 (non-real, unstable)",
                            members.join(","),
                            r.lambda_sq
                        );
                    }
                }
            }
        }
        match &self.spectrum {
            Some(sp) => {
                let _ = writeln!(s, "{:>8} {:>22} {:>12}", "branch", "lambda", "multiplicity");
                for j in (0..sp.n()).rev() {
                    let _ = writeln!(s, "{:>8} {:>22.16} {:>12}", format!("+{}", j + 1), sp.lambda[j], sp.multiplicity(j));
                }
                let _ = writeln!(s, "(left movers -j have speed -lambda_j)");
            }
            None => {
                let _ = writeln!(
                    s,
                    "UNSTABLE: the coupling matrix is not positive definite; eigenvalues of alpha*rho0:"
                );
                for v in &self.unstable_lambda_sq {
                    let kind = if *v < 0.0 { "exponentially growing mode" } else { "stable" };
                    let _ = writeln!(s, "  lambda^2 = {v:.10e} ({kind})");
                }
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        if !self.is_stable() {
            return Ok(Vec::new());
        }
        Ok(vec![write_table(&self.table, dir, "spectrum.csv")?])
    }

    /// The instability as an error, for the exit status.
    pub fn check(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite(self.positivity))
        }
    }
}

// ------------------------------------------------------------------ coeffs

#[derive(Debug, Clone)]
pub struct CoeffRow {
    pub branch: Branch,
    pub lambda: f64,
    pub model: Option<KdvModel>,
    pub multiplicity: usize,
    pub lab_speed: Option<f64>,
    pub closed_form: Option<(f64, f64, f64)>,
}

impl CoeffRow {
    pub fn kind(&self) -> &'static str {
        match &self.model {
            None => "degenerate",
            Some(m) => match m.kind() {
                BranchKind::Nonlinear => "nonlinear",
                BranchKind::Linear => "linear",
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct CoeffsRun {
    pub rows: Vec<CoeffRow>,
    pub table: Table,
}

/// KdV coefficients of every branch, or of `requested` alone (which must
/// then have a simple speed).
pub fn coeffs(cfg: &RunConfig, requested: Option<Branch>) -> Result<CoeffsRun> {
    let sp = spectrum_of(cfg)?;
    let closed = cfg
        .coupling
        .as_structured()
        .and_then(|s| ClosedForm::detect(s, &cfg.bg))
        .map(|c| c.branches(cfg.bg.hbar));
    let branches: Vec<Branch> = match requested {
        Some(b) => {
            kdv_coefficients(&sp, &cfg.bg, b)?;
            vec![b]
        }
        None => [Direction::Right, Direction::Left]
            .into_iter()
            .flat_map(|d| (1..=sp.n()).rev().map(move |j| Branch { index: j, direction: d }))
            .collect(),
    };
    let mut table = Table::new(&[
        "branch",
        "lambda",
        "A",
        "B",
        "lab_speed",
        "kind",
        "closed_lambda",
        "closed_A",
        "closed_B",
    ]);
    table.comments(header_block(cfg, "coeffs"));
    if closed.is_some() {
        table.comment("closed_* columns: printed closed forms, B for eigenvectors with last component 1");
    }
    let mut rows = Vec::new();
    for br in branches {
        let idx = br.index - 1;
        let model = kdv_coefficients(&sp, &cfg.bg, br).ok();
        let closed_form = closed.as_ref().and_then(|list| list.get(idx)).map(|c| {
            let s = br.direction.sign();
            (s * c.lambda, s * c.dispersion, c.nonlinearity)
        });
        let row = CoeffRow {
            branch: br,
            lambda: br.direction.sign() * sp.lambda[idx],
            lab_speed: model
                .as_ref()
                .filter(|m| m.kind() == BranchKind::Nonlinear)
                .map(|m| m.lab_speed(&cfg.scaling)),
            multiplicity: sp.multiplicity(idx),
            model,
            closed_form,
        };
        table.push(vec![
            row.branch.signed().into(),
            row.lambda.into(),
            row.model.as_ref().map(|m| m.dispersion).into(),
            row.model.as_ref().map(|m| m.nonlinearity).into(),
            row.lab_speed.into(),
            row.kind().into(),
            row.closed_form.map(|c| c.0).into(),
            row.closed_form.map(|c| c.1).into(),
            row.closed_form.map(|c| c.2).into(),
        ]);
        rows.push(row);
    }
    Ok(CoeffsRun { rows, table })
}

impl CoeffsRun {
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>7} {:>20} {:>20} {:>20} {:>20}  kind",
            "branch", "lambda", "A", "B", "lab_speed"
        );
        let num = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.12}"));
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>7} {:>20} {:>20} {:>20} {:>20}  {}",
                format!("{:+}", r.branch.signed()),
                format!("{:.12}", r.lambda),
                num(r.model.as_ref().map(|m| m.dispersion)),
                num(r.model.as_ref().map(|m| m.nonlinearity)),
                num(r.lab_speed),
                r.kind()
            );
            if r.model.is_none() {
                let _ = writeln!(
                    s,
                    "        refused: speed repeated {} times; its dynamics is a coupled KdV system",
                    r.multiplicity
                );
            } else if r.kind() == "linear" {
                let _ = writeln!(s, "        linear branch: f_tau + A f''' = 0, no soliton");
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![write_table(&self.table, dir, "kdv_coeffs.csv")?])
    }
}

// ----------------------------------------------------- initial data, runs

/// The selected branch, its soliton, and the NLS state that realises it.
#[derive(Debug, Clone)]
pub struct SolitonSetup {
    pub model: KdvModel,
    pub profile: SolitonProfile,
    /// Signed peak perturbation `ε² a_k f(0, 0)` per species.
    pub amplitudes: Vec<f64>,
    pub state: FieldState,
    /// Phase mismatch removed at the periodic seam, per species.
    pub seam: Vec<f64>,
}

pub fn soliton_setup(cfg: &RunConfig) -> Result<SolitonSetup> {
    let sp = spectrum_of(cfg)?;
    let branch = Branch::from_signed(cfg.branch, sp.n())?;
    let model = kdv_coefficients(&sp, &cfg.bg, branch)?;
    let profile = soliton_profile(&model, &cfg.scaling)?;
    let x = cfg.grid.points();
    let fields = reconstruct_fields(&model, &profile, &cfg.scaling, &cfg.bg, &x, 0.0);
    let phase = ClosedFormPhase::from_soliton(&model, &profile, &cfg.scaling);
    let mut state = madelung_synthesize(&fields, &cfg.grid, &cfg.bg, Some(&phase))?;
    let seam = match cfg.integrator.boundary {
        Boundary::Periodic => compensate_seam(&mut state, cfg.seam_band)?,
        Boundary::ClampedBackground => vec![0.0; cfg.bg.n()],
    };
    let eps2 = cfg.scaling.epsilon.powi(2);
    let amplitudes = model.a.iter().map(|a| eps2 * a * profile.peak()).collect();
    Ok(SolitonSetup {
        model,
        profile,
        amplitudes,
        state,
        seam,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservedSample {
    pub time: f64,
    pub norms: Vec<f64>,
    pub hamiltonian: f64,
}

fn conserved_sample(state: &FieldState, cfg: &RunConfig) -> Result<ConservedSample> {
    Ok(ConservedSample {
        time: state.time,
        norms: norms(state),
        hamiltonian: hamiltonian(state, &cfg.coupling, &cfg.bg, cfg.integrator.boundary)?,
    })
}

fn conserved_table(cfg: &RunConfig, command: &str, samples: &[ConservedSample]) -> Table {
    let n = cfg.bg.n();
    let mut cols = vec!["time".to_string()];
    cols.extend((1..=n).map(|k| format!("norm_{k}")));
    cols.push("hamiltonian".into());
    cols.extend((1..=n).map(|k| format!("norm_drift_{k}")));
    cols.push("hamiltonian_drift".into());
    let mut t = Table::new(&cols);
    t.comments(header_block(cfg, command));
    if let Some(first) = samples.first() {
        for s in samples {
            let mut row: Vec<Cell> = vec![s.time.into()];
            row.extend(s.norms.iter().map(|v| Cell::Num(*v)));
            row.push(s.hamiltonian.into());
            row.extend(s.norms.iter().zip(&first.norms).map(|(v, v0)| Cell::Num(v / v0 - 1.0)));
            row.push((s.hamiltonian / first.hamiltonian - 1.0).into());
            t.push(row);
        }
    }
    t
}

/// Times at which the run stops: every diagnostic interval plus every
/// snapshot, up to the last snapshot.
fn event_times(cfg: &RunConfig) -> Vec<(f64, bool)> {
    let t_end = *cfg.snapshot_times.last().expect("non-empty");
    let mut events: Vec<(f64, bool)> = Vec::new();
    let mut i = 0usize;
    loop {
        let t = i as f64 * cfg.diagnostic_interval;
        if t > t_end * (1.0 + 1e-12) {
            break;
        }
        events.push((t, false));
        i += 1;
    }
    for &t in &cfg.snapshot_times {
        match events.iter_mut().find(|(e, _)| (e - t).abs() <= 1e-9 * t.max(1.0)) {
            Some(e) => e.1 = true,
            None => events.push((t, true)),
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events
}

fn snapshot_name(prefix: &str, t: f64) -> String {
    format!("{prefix}_t{t:08.3}.csv")
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub setup: SolitonSetup,
    pub snapshots: Vec<(f64, FieldState)>,
    pub conserved: Vec<ConservedSample>,
    header: Vec<String>,
}

pub fn simulate(cfg: &RunConfig) -> Result<SimulationRun> {
    let setup = soliton_setup(cfg)?;
    let mut ev = Evolution::new(setup.state.clone(), &cfg.coupling, &cfg.bg, cfg.integrator)?;
    let mut snapshots = Vec::new();
    let mut conserved = Vec::new();
    for (t, is_snap) in event_times(cfg) {
        let steps = ev.steps_until(t);
        ev.run_steps(steps)?;
        conserved.push(conserved_sample(ev.state(), cfg)?);
        if is_snap {
            snapshots.push((t, ev.state().clone()));
        }
    }
    let mut header = header_block(cfg, "simulate");
    header.push(seam_note(cfg, &setup));
    Ok(SimulationRun {
        setup,
        snapshots,
        conserved,
        header,
    })
}

fn seam_note(cfg: &RunConfig, setup: &SolitonSetup) -> String {
    match cfg.integrator.boundary {
        Boundary::Periodic => {
            let s: Vec<String> = setup.seam.iter().map(|v| format_number(*v)).collect();
            format!(
                "boundary: periodic; seam phase mismatch per species [{}] removed by tapered linear \
                 ramps over the outer {} of the domain at each end",
                s.join(", "),
                cfg.seam_band
            )
        }
        Boundary::ClampedBackground => "boundary: clamped to the background at both edges".into(),
    }
}

impl SimulationRun {
    pub fn write(&self, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        let n = cfg.bg.n();
        let mut cols = vec!["x".to_string()];
        for k in 1..=n {
            cols.push(format!("re_psi_{k}"));
            cols.push(format!("im_psi_{k}"));
            cols.push(format!("abs2_psi_{k}"));
        }
        let mut paths = Vec::new();
        for (t, st) in &self.snapshots {
            let mut table = Table::new(&cols);
            table.comments(self.header.iter().cloned());
            table.comment(format!("time = {}", format_number(st.time)));
            for i in 0..st.grid.n_points {
                let mut row: Vec<Cell> = vec![st.grid.x(i).into()];
                for p in &st.psi {
                    row.push(p[i].re.into());
                    row.push(p[i].im.into());
                    row.push(p[i].norm_sqr().into());
                }
                table.push(row);
            }
            paths.push(write_table(&table, dir, &snapshot_name("snapshot", *t))?);
        }
        let mut cons = conserved_table(cfg, "simulate", &self.conserved);
        cons.comments = self.header.clone();
        paths.push(write_table(&cons, dir, "conserved.csv")?);
        Ok(paths)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let (first, last) = (&self.conserved[0], self.conserved.last().expect("samples"));
        let _ = writeln!(s, "branch {:+}: {} snapshots up to t = {:.6}", self.setup.model.branch.signed(), self.snapshots.len(), last.time);
        for (k, (a, b)) in first.norms.iter().zip(&last.norms).enumerate() {
            let _ = writeln!(s, "norm {}: {:.12} -> {:.12} (relative drift {:.3e})", k + 1, a, b, b / a - 1.0);
        }
        let _ = writeln!(
            s,
            "hamiltonian: {:.12} -> {:.12} (relative drift {:.3e})",
            first.hamiltonian,
            last.hamiltonian,
            last.hamiltonian / first.hamiltonian - 1.0
        );
        s
    }
}

// ----------------------------------------------------------------- compare

#[derive(Debug, Clone)]
pub struct SnapshotComparison {
    /// Requested snapshot time; the state sits at the nearest step.
    pub target_time: f64,
    pub time: f64,
    pub nls: Vec<Vec<f64>>,
    pub kdv: Vec<Vec<f64>>,
    pub linf: Vec<f64>,
    pub l2: Vec<f64>,
    /// `linf` over the initial perturbation amplitude `|ε² a_k f(0,0)|`.
    pub relative_linf: Vec<f64>,
    /// Tracked NLS extremum position and signed density deviation there.
    pub nls_peak: Vec<Option<f64>>,
    pub nls_peak_deviation: Vec<f64>,
    pub kdv_peak: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonRun {
    pub setup: SolitonSetup,
    pub lab_speed: f64,
    pub x: Vec<f64>,
    pub snapshots: Vec<SnapshotComparison>,
    pub track_times: Vec<f64>,
    /// Per species, peak positions at `track_times` (NaN once lost).
    pub track_positions: Vec<Vec<f64>>,
    pub fitted_speeds: Vec<f64>,
    pub conserved: Vec<ConservedSample>,
    /// Largest `|N_k(t)/N_k(0) − 1|` per species.
    pub norm_drift: Vec<f64>,
    pub hamiltonian_drift: f64,
    /// Largest `|v_NLS − v_KdV|` at `t = 0` where both are defined.
    pub initial_velocity_error: Vec<f64>,
    header: Vec<String>,
}

pub fn compare(cfg: &RunConfig) -> Result<ComparisonRun> {
    let setup = soliton_setup(cfg)?;
    let model = setup.model.clone();
    let lab_speed = model.lab_speed(&cfg.scaling);
    let x = cfg.grid.points();
    let n_sp = cfg.bg.n();
    let dx = cfg.grid.dx();

    let kdv0 = reconstruct_fields(&model, &setup.profile, &cfg.scaling, &cfg.bg, &x, 0.0);
    let hydro0 = density_velocity(&setup.state, &cfg.bg, cfg.integrator.boundary);
    // interior only: the seam ramps alter the edge velocities on purpose
    let interior = |xx: f64| (xx - cfg.grid.x_min) > cfg.seam_band * cfg.grid.length + 2.0 * dx
        && (cfg.grid.x_max() - xx) > cfg.seam_band * cfg.grid.length + 2.0 * dx;
    let initial_velocity_error = (0..n_sp)
        .map(|k| {
            (0..x.len())
                .filter(|&i| interior(x[i]) && hydro0.v[k][i].is_finite())
                .map(|i| (hydro0.v[k][i] - kdv0.v[k][i]).abs())
                .fold(0.0, f64::max)
        })
        .collect();

    let mut ev = Evolution::new(setup.state.clone(), &cfg.coupling, &cfg.bg, cfg.integrator)?;
    let signs: Vec<f64> = setup.amplitudes.iter().map(|a| a.signum()).collect();
    let mut centers = vec![0.0f64; n_sp];
    let mut track_times = Vec::new();
    let mut track_positions = vec![Vec::new(); n_sp];
    let mut conserved = Vec::new();
    let mut snapshots = Vec::new();

    for (t, is_snap) in event_times(cfg) {
        let steps = ev.steps_until(t);
        ev.run_steps(steps)?;
        let st = ev.state();
        conserved.push(conserved_sample(st, cfg)?);
        let dens = st.densities();
        let dev: Vec<Vec<f64>> = (0..n_sp)
            .map(|k| dens[k].iter().map(|r| r - cfg.bg.rho0[k]).collect())
            .collect();
        track_times.push(st.time);
        let mut peaks = Vec::with_capacity(n_sp);
        for k in 0..n_sp {
            let p = if signs[k] == 0.0 || !centers[k].is_finite() {
                None
            } else {
                locate_extremum(&x, &dev[k], signs[k], centers[k], PEAK_WINDOW)
            };
            centers[k] = p.unwrap_or(f64::NAN);
            track_positions[k].push(centers[k]);
            peaks.push(p);
        }
        if is_snap {
            let kdv = analytic_soliton_at(&model, &cfg.scaling, &cfg.bg, &x, st.time)?;
            let mut linf = Vec::with_capacity(n_sp);
            let mut l2 = Vec::with_capacity(n_sp);
            let mut rel = Vec::with_capacity(n_sp);
            let mut peak_dev = Vec::with_capacity(n_sp);
            for k in 0..n_sp {
                let errs: Vec<f64> = dens[k].iter().zip(&kdv[k]).map(|(a, b)| (a - b).abs()).collect();
                let m = errs.iter().copied().fold(0.0, f64::max);
                linf.push(m);
                l2.push((errs.iter().map(|e| e * e).sum::<f64>() * dx).sqrt());
                rel.push(m / setup.amplitudes[k].abs());
                peak_dev.push(match peaks[k] {
                    Some(p) => {
                        let i = (((p - cfg.grid.x_min) / dx).round() as usize).min(x.len() - 1);
                        dev[k][i]
                    }
                    None => f64::NAN,
                });
            }
            snapshots.push(SnapshotComparison {
                target_time: t,
                time: st.time,
                nls: dens,
                kdv,
                linf,
                l2,
                relative_linf: rel,
                nls_peak: peaks,
                nls_peak_deviation: peak_dev,
                kdv_peak: lab_speed * st.time,
            });
        }
    }

    let fitted_speeds = track_positions
        .iter()
        .map(|pos| {
            let (t, p): (Vec<f64>, Vec<f64>) = track_times
                .iter()
                .zip(pos)
                .filter(|(_, p)| p.is_finite())
                .map(|(t, p)| (*t, *p))
                .unzip();
            if t.len() >= 2 {
                fit_speed(&t, &p)
            } else {
                f64::NAN
            }
        })
        .collect();
    let first = conserved[0].clone();
    let norm_drift = (0..n_sp)
        .map(|k| {
            conserved
                .iter()
                .map(|c| (c.norms[k] / first.norms[k] - 1.0).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let hamiltonian_drift = conserved
        .iter()
        .map(|c| (c.hamiltonian / first.hamiltonian - 1.0).abs())
        .fold(0.0, f64::max);
    let mut header = header_block(cfg, "compare");
    header.push(seam_note(cfg, &setup));
    Ok(ComparisonRun {
        setup,
        lab_speed,
        x,
        snapshots,
        track_times,
        track_positions,
        fitted_speeds,
        conserved,
        norm_drift,
        hamiltonian_drift,
        initial_velocity_error,
        header,
    })
}

impl ComparisonRun {
    pub fn write(&self, cfg: &RunConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        let n = cfg.bg.n();
        let mut paths = Vec::new();
        let mut cols = vec!["x".to_string()];
        for k in 1..=n {
            cols.push(format!("nls_rho_{k}"));
            cols.push(format!("kdv_rho_{k}"));
        }
        for s in &self.snapshots {
            let mut table = Table::new(&cols);
            table.comments(self.header.iter().cloned());
            table.comment(format!("time = {}", format_number(s.time)));
            for (i, xx) in self.x.iter().enumerate() {
                let mut row: Vec<Cell> = vec![(*xx).into()];
                for k in 0..n {
                    row.push(s.nls[k][i].into());
                    row.push(s.kdv[k][i].into());
                }
                table.push(row);
            }
            paths.push(write_table(&table, dir, &snapshot_name("profile", s.target_time))?);
        }

        let mut report = Table::new(&[
            "time",
            "species",
            "linf",
            "l2",
            "relative_linf",
            "nls_peak",
            "kdv_peak",
            "nls_peak_deviation",
            "initial_amplitude",
        ]);
        report.comments(self.header.iter().cloned());
        for s in &self.snapshots {
            for k in 0..n {
                report.push(vec![
                    s.time.into(),
                    (k + 1).into(),
                    s.linf[k].into(),
                    s.l2[k].into(),
                    s.relative_linf[k].into(),
                    s.nls_peak[k].into(),
                    s.kdv_peak.into(),
                    s.nls_peak_deviation[k].into(),
                    self.setup.amplitudes[k].into(),
                ]);
            }
        }
        paths.push(write_table(&report, dir, "report.csv")?);

        let mut fit = Table::new(&["species", "fitted_speed", "lab_speed", "relative_error"]);
        fit.comments(self.header.iter().cloned());
        fit.comment(format!(
            "peak positions sampled every {} time units, window +-{PEAK_WINDOW} around the previous peak",
            cfg.diagnostic_interval
        ));
        for (k, v) in self.fitted_speeds.iter().enumerate() {
            fit.push(vec![
                (k + 1).into(),
                (*v).into(),
                self.lab_speed.into(),
                (v / self.lab_speed - 1.0).into(),
            ]);
        }
        paths.push(write_table(&fit, dir, "speed_fit.csv")?);

        let mut cons = conserved_table(cfg, "compare", &self.conserved);
        cons.comments = self.header.clone();
        paths.push(write_table(&cons, dir, "conserved.csv")?);
        Ok(paths)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let m = &self.setup.model;
        let _ = writeln!(
            s,
            "branch {:+}: lambda = {:.10}, A = {:.10}, B = {:.10}, lab speed = {:.10}",
            m.branch.signed(),
            m.lambda,
            m.dispersion,
            m.nonlinearity,
            self.lab_speed
        );
        for snap in &self.snapshots {
            let rel: Vec<String> = snap.relative_linf.iter().map(|v| format!("{v:.4}")).collect();
            let _ = writeln!(s, "t = {:>10.4}: relative L-inf density error per species [{}]", snap.time, rel.join(", "));
        }
        for (k, v) in self.fitted_speeds.iter().enumerate() {
            let _ = writeln!(
                s,
                "species {}: fitted peak speed {:.6} ({:+.3}% from lab speed)",
                k + 1,
                v,
                100.0 * (v / self.lab_speed - 1.0)
            );
        }
        let drift: Vec<String> = self.norm_drift.iter().map(|v| format!("{v:.3e}")).collect();
        let _ = writeln!(
            s,
            "max norm drift [{}], max hamiltonian drift {:.3e}",
            drift.join(", "),
            self.hamiltonian_drift
        );
        s
    }
}

// ------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub h: f64,
    /// Right-moving branches in ascending order of speed at `h = 0`.
    pub lambda: Vec<f64>,
    pub dispersion: Vec<f64>,
    pub nonlinearity: Vec<f64>,
    /// Largest relative `λ²` difference to the direct decomposition, on
    /// cross-check rows.
    pub crosscheck: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepRun {
    pub rows: Vec<SweepRow>,
    pub table: Table,
}

/// Every this many samples the continuation is compared with a direct
/// eigen-decomposition.
pub const CROSSCHECK_EVERY: usize = 10;
pub const CROSSCHECK_TOLERANCE: f64 = 1e-8;
/// Relative size below which a squared speed counts as zero.
pub const SPEED_SQ_FLOOR: f64 = 1e-12;

pub fn sweep(cfg: &RunConfig) -> Result<SweepRun> {
    let coupling = cfg
        .coupling
        .as_structured()
        .ok_or_else(|| Error::Unsupported("h-sweeps need the structured (g, h) coupling".into()))?;
    let n = coupling.n();
    let (h_min, h_max, samples) = (cfg.sweep.h_min, cfg.sweep.h_max, cfg.sweep.samples);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (coupling.g[a] * cfg.bg.rho0[a]).total_cmp(&(coupling.g[b] * cfg.bg.rho0[b]))
    });
    let mut trackers = order
        .iter()
        .map(|&k| EigenpairTracker::new(coupling, &cfg.bg, k))
        .collect::<Result<Vec<_>>>()?;

    let mut cols = vec!["h".to_string()];
    for j in 1..=n {
        cols.push(format!("lambda_{j}"));
        cols.push(format!("A_{j}"));
        cols.push(format!("B_{j}"));
    }
    cols.push("crosscheck".into());
    let mut table = Table::new(&cols);
    table.comments(header_block(cfg, "sweep-h"));
    table.comment(format!(
        "branches tracked by continuation from h = 0, numbered by ascending rho0*g; \
         direct-decomposition cross-check every {CROSSCHECK_EVERY} samples"
    ));

    // largest λ² at h = 0 sets the scale for a vanishing speed
    let scale = (0..n)
        .map(|k| coupling.g[k] * cfg.bg.rho0[k])
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut rows = Vec::with_capacity(samples);
    for i in 0..samples {
        let h = if i + 1 == samples {
            h_max
        } else {
            h_min + (h_max - h_min) * i as f64 / (samples - 1) as f64
        };
        let mut lambda = Vec::with_capacity(n);
        let mut dispersion = Vec::with_capacity(n);
        let mut nonlinearity = Vec::with_capacity(n);
        let mut lambda_sq = Vec::with_capacity(n);
        for tr in trackers.iter_mut() {
            let smp = tr.advance_to(h)?;
            lambda_sq.push(smp.lambda_sq);
            // a vanishing speed (semidefinite endpoint) has no KdV limit
            let zero = smp.lambda_sq <= SPEED_SQ_FLOOR * scale;
            let speed = if zero { 0.0 } else { smp.lambda_sq.sqrt() };
            let mut q = smp.eigenvector.clone();
            cfg.normalization.apply(&mut q);
            lambda.push(speed);
            match kdv_from_column(&q, speed, Branch::right(1), &cfg.bg).ok().filter(|_| !zero) {
                Some(m) => {
                    dispersion.push(m.dispersion);
                    nonlinearity.push(m.nonlinearity);
                }
                None => {
                    dispersion.push(f64::NAN);
                    nonlinearity.push(f64::NAN);
                }
            }
        }
        let crosscheck = if i % CROSSCHECK_EVERY == 0 || i + 1 == samples {
            let c = crate::spectrum::CouplingModel::Structured(coupling.with_h(h));
            match eigensystem_with(&c, &cfg.bg, cfg.normalization) {
                Ok(sp) => {
                    let mut direct: Vec<f64> = sp.lambda.iter().map(|l| l * l).collect();
                    direct.sort_by(f64::total_cmp);
                    let mut tracked = lambda_sq.clone();
                    tracked.sort_by(f64::total_cmp);
                    let worst = direct
                        .iter()
                        .zip(&tracked)
                        .map(|(d, t)| (d - t).abs() / d.abs().max(1.0))
                        .fold(0.0, f64::max);
                    if worst > CROSSCHECK_TOLERANCE {
                        return Err(Error::BranchTrackingLost {
                            h,
                            reason: format!(
                                "continued eigenvalues differ from the direct decomposition by {worst:e}"
                            ),
                        });
                    }
                    Some(worst)
                }
                Err(Error::NotPositiveDefinite(_)) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        let mut row: Vec<Cell> = vec![h.into()];
        for j in 0..n {
            row.push(lambda[j].into());
            row.push(dispersion[j].into());
            row.push(nonlinearity[j].into());
        }
        row.push(crosscheck.into());
        table.push(row);
        rows.push(SweepRow {
            h,
            lambda,
            dispersion,
            nonlinearity,
            crosscheck,
        });
    }
    Ok(SweepRun { rows, table })
}

impl SweepRun {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        Ok(vec![write_table(&self.table, dir, "sweep.csv")?])
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let (first, last) = (&self.rows[0], self.rows.last().expect("rows"));
        let checks = self.rows.iter().filter_map(|r| r.crosscheck).fold(0.0, f64::max);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.8}")).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "{} samples, h from {} to {}", self.rows.len(), first.h, last.h);
        let _ = writeln!(s, "speeds at h = {}: [{}]", first.h, fmt(&first.lambda));
        let _ = writeln!(s, "speeds at h = {}: [{}]", last.h, fmt(&last.lambda));
        let _ = writeln!(s, "largest cross-check discrepancy: {checks:.3e}");
        s
    }
}
