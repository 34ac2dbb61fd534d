//! Time integration of the coupled NLS system
//!
//! ```text
//! iħ ∂_t ψ_k = −(ħ²/2m) ∂_xx ψ_k + (Σ_j α_kj |ψ_j|²) ψ_k
//! ```
//!
//! on a uniform 1-D grid. The method of record is the explicit leapfrog
//! ("classical explicit") scheme with a 3-point Laplacian, started with one
//! RK4 step. A Strang split-step Fourier integrator is provided for
//! cross-checking on periodic grids.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectrum::{BackgroundState, CouplingModel};

/// Densities below this are treated as vacuum when extracting velocities.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Uniform grid `x_i = x_min + i·dx`, `dx = length / n_points`. On periodic
/// domains `x_min + length` is identified with `x_min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x_min: f64,
    pub length: f64,
    pub n_points: usize,
}

impl Grid {
    pub fn new(x_min: f64, length: f64, n_points: usize) -> Result<Self> {
        if n_points < 16 {
            return Err(Error::invalid("n_points", format!("at least 16 required, got {n_points}")));
        }
        if !(length.is_finite() && length > 0.0) || !x_min.is_finite() {
            return Err(Error::invalid("length", format!("must be positive and finite, got {length}")));
        }
        Ok(Grid {
            x_min,
            length,
            n_points,
        })
    }

    /// Grid symmetric about the origin.
    pub fn centered(length: f64, n_points: usize) -> Result<Self> {
        Self::new(-0.5 * length, length, n_points)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n_points as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn x_max(&self) -> f64 {
        self.x_min + self.length
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n)
            .map(|i| {
                let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                2.0 * PI * m / self.length
            })
            .collect()
    }
}

/// N complex wavefunctions sampled on a grid at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: Grid,
    pub time: f64,
    pub psi: Vec<Vec<Complex64>>,
}

impl FieldState {
    pub fn new(grid: Grid, time: f64, psi: Vec<Vec<Complex64>>) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::invalid("psi", "at least one species is required"));
        }
        if let Some(bad) = psi.iter().find(|p| p.len() != grid.n_points) {
            return Err(Error::DimensionMismatch {
                what: "wavefunction samples vs grid points",
                expected: grid.n_points,
                actual: bad.len(),
            });
        }
        Ok(FieldState { grid, time, psi })
    }

    /// `ψ_k = √ρ0k` everywhere.
    pub fn uniform(grid: Grid, bg: &BackgroundState) -> Self {
        let psi = bg
            .rho0
            .iter()
            .map(|r| vec![Complex64::new(r.sqrt(), 0.0); grid.n_points])
            .collect();
        FieldState {
            grid,
            time: 0.0,
            psi,
        }
    }

    pub fn n_species(&self) -> usize {
        self.psi.len()
    }

    pub fn densities(&self) -> Vec<Vec<f64>> {
        self.psi.iter().map(|p| p.iter().map(|z| z.norm_sqr()).collect()).collect()
    }

    fn is_finite(&self) -> bool {
        self.psi.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Multiply every amplitude by `e^{iθ}`.
    pub fn rotate_phase(&mut self, theta: f64) {
        let r = Complex64::from_polar(1.0, theta);
        self.psi.iter_mut().flatten().for_each(|z| *z *= r);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ExplicitLeapfrog,
    SplitStepVerification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Periodic,
    /// Edge samples carry no Laplacian and rotate with the background
    /// chemical potential, so they stay at the background amplitude.
    ClampedBackground,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub boundary: Boundary,
}

impl IntegratorConfig {
    pub fn leapfrog(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            scheme: Scheme::ExplicitLeapfrog,
            boundary: Boundary::Periodic,
        }
    }
}

/// Largest admissible leapfrog step, `dx²·m/(4ħ)`.
pub fn stability_bound(grid: &Grid, bg: &BackgroundState) -> f64 {
    grid.dx().powi(2) * bg.mass / (4.0 * bg.hbar)
}

/// Default step `dx²·m/(8ħ)`, half the stability bound.
pub fn default_dt(grid: &Grid, bg: &BackgroundState) -> f64 {
    grid.dx().powi(2) * bg.mass / (8.0 * bg.hbar)
}

/// Chemical potentials `Σ_j α_kj ρ0j` of the uniform background.
pub fn background_potentials(alpha: &DMatrix<f64>, bg: &BackgroundState) -> Vec<f64> {
    (0..bg.n())
        .map(|k| (0..bg.n()).map(|j| alpha[(k, j)] * bg.rho0[j]).sum())
        .collect()
}

/// `∫|ψ_k|² dx` per species (rectangle rule, exact for periodic trapezoid).
pub fn norms(state: &FieldState) -> Vec<f64> {
    let dx = state.grid.dx();
    state
        .psi
        .iter()
        .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx)
        .collect()
}

/// `∫ Σ_k (ħ²|∂_xψ_k|²/2m + Σ_j α_kj/2 |ψ_k|²|ψ_j|²) dx` with centered
/// differences (one-sided at the ends of a clamped domain).
pub fn hamiltonian(
    state: &FieldState,
    coupling: &CouplingModel,
    bg: &BackgroundState,
    boundary: Boundary,
) -> Result<f64> {
    let n_sp = state.n_species();
    if coupling.n() != n_sp || bg.n() != n_sp {
        return Err(Error::DimensionMismatch {
            what: "species in state vs coupling matrix",
            expected: coupling.n(),
            actual: n_sp,
        });
    }
    let alpha = coupling.alpha();
    let n = state.grid.n_points;
    let dx = state.grid.dx();
    let kin = bg.hbar * bg.hbar / (2.0 * bg.mass);
    let dens = state.densities();
    let mut total = 0.0;
    for (k, p) in state.psi.iter().enumerate() {
        for i in 0..n {
            let grad = match boundary {
                Boundary::Periodic => (p[(i + 1) % n] - p[(i + n - 1) % n]) / (2.0 * dx),
                Boundary::ClampedBackground => {
                    if i == 0 {
                        (p[1] - p[0]) / dx
                    } else if i == n - 1 {
                        (p[n - 1] - p[n - 2]) / dx
                    } else {
                        (p[i + 1] - p[i - 1]) / (2.0 * dx)
                    }
                }
            };
            let mut pot = 0.0;
            for j in 0..n_sp {
                pot += 0.5 * alpha[(k, j)] * dens[k][i] * dens[j][i];
            }
            total += kin * grad.norm_sqr() + pot;
        }
    }
    Ok(total * dx)
}

/// Hydrodynamic fields of a state. `v[k][i]` is `NaN` where the density is
/// below [`DENSITY_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct HydroFields {
    pub rho: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// `ρ = |ψ|²`, `v = (ħ/m) ∂_x arg ψ` from the phase increment between the
/// two neighbours, `arg(ψ_{i+1} ψ*_{i−1}) / 2dx`, which is free of branch
/// cuts and exact for plane waves. One-sided increments at the ends.
pub fn density_velocity(state: &FieldState, bg: &BackgroundState, boundary: Boundary) -> HydroFields {
    let n = state.grid.n_points;
    let dx = state.grid.dx();
    let scale = bg.hbar / bg.mass;
    let rho = state.densities();
    let v = state
        .psi
        .iter()
        .zip(&rho)
        .map(|(p, r)| {
            (0..n)
                .map(|i| {
                    let (lo, hi, span) = match boundary {
                        Boundary::Periodic => ((i + n - 1) % n, (i + 1) % n, 2.0 * dx),
                        Boundary::ClampedBackground if i == 0 => (0, 1, dx),
                        Boundary::ClampedBackground if i == n - 1 => (n - 2, n - 1, dx),
                        Boundary::ClampedBackground => (i - 1, i + 1, 2.0 * dx),
                    };
                    if r[i] < DENSITY_FLOOR || r[lo] < DENSITY_FLOOR || r[hi] < DENSITY_FLOOR {
                        f64::NAN
                    } else {
                        scale * (p[hi] * p[lo].conj()).arg() / span
                    }
                })
                .collect()
        })
        .collect();
    HydroFields { rho, v }
}

/// Raised-cosine-cornered unit ramp on `[0, 1]`: linear in the middle,
/// with a derivative that rises and falls smoothly over a fraction `taper`
/// at each end. `R(0) = 0`, `R(1) = 1`, `R'` continuous.
fn tapered_ramp(u: f64, taper: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let integral = |s: f64| {
        if s < taper {
            0.5 * s - taper / (2.0 * PI) * (PI * s / taper).sin()
        } else {
            0.5 * taper + (s - taper)
        }
    };
    let total = 1.0 - taper;
    let value = if u <= 0.5 {
        integral(u)
    } else {
        total - integral(1.0 - u)
    };
    value / total
}

const SEAM_TAPER: f64 = 0.2;

/// Cancel the phase jump across the periodic seam of each species.
///
/// The mismatch `δ_k = arg(ψ_k[0] ψ*_k[n−1])` is split into two smooth
/// linear phase ramps confined to bands of width `band_fraction·L` at each
/// end of the domain (`+δ/2` on the right, `−δ/2` on the left), so the
/// interior is untouched and the wrapped phase is continuous. Returns the
/// removed mismatches.
pub fn compensate_seam(state: &mut FieldState, band_fraction: f64) -> Result<Vec<f64>> {
    if !(band_fraction > 0.0 && band_fraction < 0.5) {
        return Err(Error::invalid(
            "seam band",
            format!("fraction must lie in (0, 0.5), got {band_fraction}"),
        ));
    }
    let grid = state.grid;
    let n = grid.n_points;
    let w = band_fraction * grid.length;
    let x_lo = grid.x(0);
    let x_hi = grid.x(n - 1);
    let mut removed = Vec::with_capacity(state.n_species());
    for p in &mut state.psi {
        let delta = (p[0] * p[n - 1].conj()).arg();
        for (i, z) in p.iter_mut().enumerate() {
            let x = grid.x(i);
            let s = if x > x_hi - w {
                0.5 * tapered_ramp((x - (x_hi - w)) / w, SEAM_TAPER)
            } else if x < x_lo + w {
                -0.5 * tapered_ramp(((x_lo + w) - x) / w, SEAM_TAPER)
            } else {
                0.0
            };
            if s != 0.0 {
                *z *= Complex64::from_polar(1.0, delta * s);
            }
        }
        removed.push(delta);
    }
    Ok(removed)
}

/// An integration run. Owns the current and previous time levels.
pub struct Evolution {
    alpha: DMatrix<f64>,
    bg: BackgroundState,
    cfg: IntegratorConfig,
    current: FieldState,
    previous: Option<Vec<Vec<Complex64>>>,
    potentials: Vec<f64>,
    steps: usize,
    fft: Option<SpectralPlan>,
}

struct SpectralPlan {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    k2: Vec<f64>,
}

impl Evolution {
    pub fn new(
        state: FieldState,
        coupling: &CouplingModel,
        bg: &BackgroundState,
        cfg: IntegratorConfig,
    ) -> Result<Self> {
        let n_sp = state.n_species();
        if coupling.n() != n_sp || bg.n() != n_sp {
            return Err(Error::DimensionMismatch {
                what: "species in state vs coupling matrix",
                expected: coupling.n(),
                actual: n_sp,
            });
        }
        if !(cfg.dt.is_finite() && cfg.dt != 0.0) {
            return Err(Error::invalid("dt", format!("must be finite and non-zero, got {}", cfg.dt)));
        }
        if !state.is_finite() {
            return Err(Error::IntegrationFailure {
                step: 0,
                reason: "non-finite initial data".into(),
            });
        }
        let fft = match cfg.scheme {
            Scheme::ExplicitLeapfrog => {
                let bound = stability_bound(&state.grid, bg);
                if cfg.dt.abs() > bound {
                    return Err(Error::StabilityViolation { dt: cfg.dt, bound });
                }
                None
            }
            Scheme::SplitStepVerification => {
                if cfg.boundary != Boundary::Periodic {
                    return Err(Error::Unsupported(
                        "split-step integration requires a periodic boundary".into(),
                    ));
                }
                let n = state.grid.n_points;
                let mut planner = FftPlanner::new();
                Some(SpectralPlan {
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                    k2: state.grid.wavenumbers().iter().map(|k| k * k).collect(),
                })
            }
        };
        let alpha = coupling.alpha();
        Ok(Evolution {
            potentials: background_potentials(&alpha, bg),
            alpha,
            bg: bg.clone(),
            cfg,
            current: state,
            previous: None,
            steps: 0,
            fft,
        })
    }

    pub fn state(&self) -> &FieldState {
        &self.current
    }

    pub fn into_state(self) -> FieldState {
        self.current
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// `dψ/dt` at the given level, `−(i/ħ) H ψ`.
    fn rhs(&self, psi: &[Vec<Complex64>], out: &mut [Vec<Complex64>]) {
        let n = self.current.grid.n_points;
        let dx2 = self.current.grid.dx().powi(2);
        let kin = self.bg.hbar / (2.0 * self.bg.mass * dx2);
        let inv_hbar = 1.0 / self.bg.hbar;
        let n_sp = psi.len();
        let dens: Vec<Vec<f64>> = psi.iter().map(|p| p.iter().map(|z| z.norm_sqr()).collect()).collect();
        let periodic = self.cfg.boundary == Boundary::Periodic;
        for k in 0..n_sp {
            let p = &psi[k];
            let o = &mut out[k];
            for i in 0..n {
                let edge = i == 0 || i == n - 1;
                if edge && !periodic {
                    // edge samples follow the uniform background
                    let h_psi = self.potentials[k] * inv_hbar * p[i];
                    o[i] = Complex64::new(h_psi.im, -h_psi.re);
                    continue;
                }
                let (lo, hi) = if i == 0 {
                    (p[n - 1], p[1])
                } else if i == n - 1 {
                    (p[n - 2], p[0])
                } else {
                    (p[i - 1], p[i + 1])
                };
                let lap = lo + hi - 2.0 * p[i];
                let mut pot = 0.0;
                for j in 0..n_sp {
                    pot += self.alpha[(k, j)] * dens[j][i];
                }
                // −i(−kin·lap + pot/ħ·ψ)
                let h_psi = -kin * lap + pot * inv_hbar * p[i];
                o[i] = Complex64::new(h_psi.im, -h_psi.re);
            }
        }
    }

    fn rk4_step(&self) -> Vec<Vec<Complex64>> {
        let dt = self.cfg.dt;
        let y = &self.current.psi;
        let zeros = || y.iter().map(|p| vec![Complex64::new(0.0, 0.0); p.len()]).collect::<Vec<_>>();
        let axpy = |a: f64, k: &[Vec<Complex64>]| -> Vec<Vec<Complex64>> {
            y.iter()
                .zip(k)
                .map(|(p, q)| p.iter().zip(q).map(|(u, v)| u + v * a).collect())
                .collect()
        };
        let mut k1 = zeros();
        self.rhs(y, &mut k1);
        let mut k2 = zeros();
        self.rhs(&axpy(0.5 * dt, &k1), &mut k2);
        let mut k3 = zeros();
        self.rhs(&axpy(0.5 * dt, &k2), &mut k3);
        let mut k4 = zeros();
        self.rhs(&axpy(dt, &k3), &mut k4);
        y.iter()
            .enumerate()
            .map(|(s, p)| {
                (0..p.len())
                    .map(|i| p[i] + (k1[s][i] + 2.0 * k2[s][i] + 2.0 * k3[s][i] + k4[s][i]) * (dt / 6.0))
                    .collect()
            })
            .collect()
    }

    fn leapfrog_step(&mut self) {
        let dt = self.cfg.dt;
        let next = match self.previous.take() {
            None => self.rk4_step(),
            Some(mut prev) => {
                let mut k = prev.clone();
                self.rhs(&self.current.psi, &mut k);
                for (p, ks) in prev.iter_mut().zip(&k) {
                    for (u, v) in p.iter_mut().zip(ks) {
                        *u += v * (2.0 * dt);
                    }
                }
                prev
            }
        };
        let prev = std::mem::replace(&mut self.current.psi, next);
        self.previous = Some(prev);
    }

    fn split_step(&mut self) {
        let plan = self.fft.as_ref().expect("spectral plan for split-step");
        let dt = self.cfg.dt;
        let n = self.current.grid.n_points;
        let disp = self.bg.hbar / (2.0 * self.bg.mass);
        let half_phase: Vec<Complex64> = plan
            .k2
            .iter()
            .map(|k2| Complex64::from_polar(1.0 / n as f64, -disp * k2 * 0.5 * dt))
            .collect();
        let linear_half = |psi: &mut Vec<Vec<Complex64>>| {
            for p in psi.iter_mut() {
                plan.forward.process(p);
                p.iter_mut().zip(&half_phase).for_each(|(z, f)| *z *= f);
                plan.inverse.process(p);
            }
        };
        let mut psi = std::mem::take(&mut self.current.psi);
        linear_half(&mut psi);
        let dens: Vec<Vec<f64>> = psi.iter().map(|p| p.iter().map(|z| z.norm_sqr()).collect()).collect();
        let n_sp = psi.len();
        for k in 0..n_sp {
            for i in 0..n {
                let mut pot = 0.0;
                for j in 0..n_sp {
                    pot += self.alpha[(k, j)] * dens[j][i];
                }
                psi[k][i] *= Complex64::from_polar(1.0, -pot * dt / self.bg.hbar);
            }
        }
        linear_half(&mut psi);
        self.current.psi = psi;
    }

    pub fn step(&mut self) -> Result<()> {
        match self.cfg.scheme {
            Scheme::ExplicitLeapfrog => self.leapfrog_step(),
            Scheme::SplitStepVerification => self.split_step(),
        }
        self.steps += 1;
        self.current.time += self.cfg.dt;
        let t = self.current.time;
        if !self.current.is_finite() {
            return Err(Error::IntegrationFailure {
                step: self.steps,
                reason: format!("non-finite amplitude at t = {t}"),
            });
        }
        Ok(())
    }

    pub fn run_steps(&mut self, count: usize) -> Result<()> {
        for _ in 0..count {
            self.step()?;
        }
        Ok(())
    }

    /// Number of steps needed to go from the current time to `t`.
    pub fn steps_until(&self, t: f64) -> usize {
        let span = (t - self.current.time) / self.cfg.dt;
        if span <= 0.0 {
            0
        } else {
            // Tolerate rounding in time values that are exact multiples of dt.
            (span - 1e-9).ceil() as usize
        }
    }

    /// Reverse the direction of time. For leapfrog the two stored levels
    /// are swapped, which makes the scheme retrace its steps exactly.
    pub fn reverse(&mut self) {
        let dt = self.cfg.dt;
        self.cfg.dt = -dt;
        if let Some(prev) = self.previous.as_mut() {
            std::mem::swap(prev, &mut self.current.psi);
            self.current.time -= dt;
        }
    }
}
