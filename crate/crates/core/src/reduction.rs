//! KdV coefficients of each linear branch and the map back to physical fields.
//!
//! For branch `j` with direction `s = ±1`, the hydrodynamic eigen-direction
//! is `(a; b) = (s ρ q/λ; q)` and the dual direction `(w_ρ; w_v)` is the
//! matching column of `(V⁻¹)ᵀ`. Projecting the quadratic terms
//! `δρ δv`, `δv²/2 − (ħ²/4ρ0) δρ''` onto the dual direction gives
//!
//! ```text
//! ∂_τ f + B f f' + A f''' = 0,
//! A = −(ħ²/4) Σ_k w_v[k] a[k] / ρ0k,
//! B = Σ_k (2 w_ρ[k] a[k] b[k] + w_v[k] b[k]²).
//! ```
//!
//! `A` changes sign with the direction, `B` does not. `B` is proportional
//! to the scale of the eigenvector column, so quoted values depend on the
//! column normalization; `ε² a f` does not.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::nls::{FieldState, Grid, HydroFields};
use crate::spectrum::{
    degeneracy_report, BackgroundState, Direction, LinearSpectrum, StructuredGh, PAIR_TOLERANCE,
};

/// Branches with `|B|` at or below this are treated as linear.
pub const LINEAR_NONLINEARITY: f64 = 1e-12;

/// A KdV branch: 1-based position in the ascending list of sound speeds,
/// and a direction. Signed form: `+j` right mover, `−j` left mover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Branch {
    pub index: usize,
    pub direction: Direction,
}

impl Branch {
    pub fn right(index: usize) -> Self {
        Branch {
            index,
            direction: Direction::Right,
        }
    }

    pub fn left(index: usize) -> Self {
        Branch {
            index,
            direction: Direction::Left,
        }
    }

    pub fn from_signed(branch: i32, n: usize) -> Result<Self> {
        let index = branch.unsigned_abs() as usize;
        if branch == 0 || index > n {
            return Err(Error::BranchOutOfRange { branch, n });
        }
        Ok(Branch {
            index,
            direction: if branch > 0 {
                Direction::Right
            } else {
                Direction::Left
            },
        })
    }

    pub fn signed(&self) -> i32 {
        let j = self.index as i32;
        match self.direction {
            Direction::Right => j,
            Direction::Left => -j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Nonlinear,
    /// Vanishing nonlinearity: the branch obeys `f_τ + A f''' = 0`.
    Linear,
}

/// Effective KdV equation of one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvModel {
    pub branch: Branch,
    /// Signed sound speed (negative for left movers).
    pub lambda: f64,
    /// Coefficient of `f'''`.
    pub dispersion: f64,
    /// Coefficient of `f f'`.
    pub nonlinearity: f64,
    /// Density eigen-direction.
    pub a: Vec<f64>,
    /// Velocity eigen-direction.
    pub b: Vec<f64>,
    pub w_rho: Vec<f64>,
    pub w_v: Vec<f64>,
}

impl KdvModel {
    pub fn kind(&self) -> BranchKind {
        if self.nonlinearity.abs() <= LINEAR_NONLINEARITY {
            BranchKind::Linear
        } else {
            BranchKind::Nonlinear
        }
    }

    /// Lab-frame speed of a soliton, `λ + A 𝒱 ε²`.
    pub fn lab_speed(&self, scaling: &ScalingParams) -> f64 {
        self.lambda + self.dispersion * scaling.soliton_speed * scaling.epsilon.powi(2)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }
}

fn projected(
    branch: Branch,
    lambda: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    w_rho: Vec<f64>,
    w_v: Vec<f64>,
    bg: &BackgroundState,
) -> KdvModel {
    let hbar2 = bg.hbar * bg.hbar;
    let n = a.len();
    let dispersion = -0.25 * hbar2 * (0..n).map(|k| w_v[k] * a[k] / bg.rho0[k]).sum::<f64>();
    let nonlinearity = (0..n)
        .map(|k| 2.0 * w_rho[k] * a[k] * b[k] + w_v[k] * b[k] * b[k])
        .sum();
    KdvModel {
        branch,
        lambda,
        dispersion,
        nonlinearity,
        a,
        b,
        w_rho,
        w_v,
    }
}

/// KdV coefficients of `branch` from the eigen-decomposition.
pub fn kdv_coefficients(spectrum: &LinearSpectrum, bg: &BackgroundState, branch: Branch) -> Result<KdvModel> {
    let n = spectrum.n();
    if bg.n() != n {
        return Err(Error::DimensionMismatch {
            what: "background densities vs spectrum",
            expected: n,
            actual: bg.n(),
        });
    }
    if branch.index == 0 || branch.index > n {
        return Err(Error::BranchOutOfRange {
            branch: branch.signed(),
            n,
        });
    }
    let idx = branch.index - 1;
    let multiplicity = spectrum.multiplicity(idx);
    if multiplicity > 1 {
        return Err(Error::DegenerateBranch {
            branch: branch.signed(),
            multiplicity,
        });
    }
    let v = spectrum.mode(idx, branch.direction);
    let w = spectrum.dual_mode(idx, branch.direction);
    let head = |x: &DVector<f64>| x.rows(0, n).iter().copied().collect::<Vec<_>>();
    let tail = |x: &DVector<f64>| x.rows(n, n).iter().copied().collect::<Vec<_>>();
    Ok(projected(
        branch,
        branch.direction.sign() * spectrum.lambda[idx],
        head(&v),
        tail(&v),
        head(&w),
        tail(&w),
        bg,
    ))
}

/// KdV coefficients from a single eigenvector `q` of `αρ` with eigenvalue
/// `speed²`, without assembling the full decomposition. The dual column is
/// `(s q λ/2l; ρ q/2l)` with `l = Σ ρ q²`.
pub fn kdv_from_column(q: &[f64], speed: f64, branch: Branch, bg: &BackgroundState) -> Result<KdvModel> {
    let n = q.len();
    if bg.n() != n {
        return Err(Error::DimensionMismatch {
            what: "background densities vs eigenvector",
            expected: n,
            actual: bg.n(),
        });
    }
    if !(speed > 0.0) {
        return Err(Error::invalid("speed", format!("must be positive, got {speed}")));
    }
    let s = branch.direction.sign();
    let l: f64 = q.iter().zip(&bg.rho0).map(|(q, r)| r * q * q).sum();
    let a = q.iter().zip(&bg.rho0).map(|(q, r)| s * r * q / speed).collect();
    let w_rho = q.iter().map(|q| s * 0.5 * q * speed / l).collect();
    let w_v = q.iter().zip(&bg.rho0).map(|(q, r)| 0.5 * r * q / l).collect();
    Ok(projected(branch, s * speed, a, q.to_vec(), w_rho, w_v, bg))
}

/// KdV coefficients of every right- and left-moving branch whose speed is
/// simple, ordered `+1..+N, −1..−N`; repeated speeds are skipped.
pub fn all_branches(spectrum: &LinearSpectrum, bg: &BackgroundState) -> Vec<Result<KdvModel>> {
    let n = spectrum.n();
    [Direction::Right, Direction::Left]
        .into_iter()
        .flat_map(|d| (1..=n).map(move |j| Branch { index: j, direction: d }))
        .map(|br| kdv_coefficients(spectrum, bg, br))
        .collect()
}

/// Amplitude/length scaling `ε` and the KdV-frame soliton speed `𝒱`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingParams {
    pub epsilon: f64,
    pub soliton_speed: f64,
}

impl ScalingParams {
    pub fn new(epsilon: f64, soliton_speed: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("must lie in (0, 1), got {epsilon}")));
        }
        if !(soliton_speed.is_finite() && soliton_speed > 0.0) {
            return Err(Error::invalid(
                "soliton_speed",
                format!("must be positive, got {soliton_speed}"),
            ));
        }
        Ok(ScalingParams {
            epsilon,
            soliton_speed,
        })
    }
}

/// A KdV profile `f(ξ, τ)`.
pub trait WaveProfile {
    fn eval(&self, xi: f64, tau: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64> WaveProfile for F {
    fn eval(&self, xi: f64, tau: f64) -> f64 {
        self(xi, tau)
    }
}

/// `f = (3𝒱A/B) sech²((√𝒱/2)(ξ − A𝒱τ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonProfile {
    pub amplitude: f64,
    pub wavenumber: f64,
    pub drift: f64,
}

impl SolitonProfile {
    pub fn new(dispersion: f64, nonlinearity: f64, soliton_speed: f64) -> Result<Self> {
        if nonlinearity.abs() <= LINEAR_NONLINEARITY {
            return Err(Error::LinearBranch { nonlinearity });
        }
        if !(soliton_speed > 0.0) {
            return Err(Error::invalid(
                "soliton_speed",
                format!("must be positive, got {soliton_speed}"),
            ));
        }
        Ok(SolitonProfile {
            amplitude: 3.0 * soliton_speed * dispersion / nonlinearity,
            wavenumber: 0.5 * soliton_speed.sqrt(),
            drift: dispersion * soliton_speed,
        })
    }

    pub fn peak(&self) -> f64 {
        self.amplitude
    }
}

impl WaveProfile for SolitonProfile {
    fn eval(&self, xi: f64, tau: f64) -> f64 {
        let c = (self.wavenumber * (xi - self.drift * tau)).cosh();
        self.amplitude / (c * c)
    }
}

pub fn soliton_profile(model: &KdvModel, scaling: &ScalingParams) -> Result<SolitonProfile> {
    SolitonProfile::new(model.dispersion, model.nonlinearity, scaling.soliton_speed)
}

/// `ρ_k = ρ0k + ε² a_k f(ε(x − λt), ε³t)`, `v_k = ε² b_k f(…)`.
pub fn reconstruct_fields(
    model: &KdvModel,
    profile: &dyn WaveProfile,
    scaling: &ScalingParams,
    bg: &BackgroundState,
    x: &[f64],
    t: f64,
) -> HydroFields {
    let eps = scaling.epsilon;
    let eps2 = eps * eps;
    let tau = eps2 * eps * t;
    let f: Vec<f64> = x
        .iter()
        .map(|xx| profile.eval(eps * (xx - model.lambda * t), tau))
        .collect();
    let rho = (0..model.n())
        .map(|k| f.iter().map(|fv| bg.rho0[k] + eps2 * model.a[k] * fv).collect())
        .collect();
    let v = (0..model.n())
        .map(|k| f.iter().map(|fv| eps2 * model.b[k] * fv).collect())
        .collect();
    HydroFields { rho, v }
}

/// Exact antiderivative of the soliton velocity field:
/// `Φ_k(x) = amplitude_k · tanh(wavenumber · (x − center))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormPhase {
    pub amplitudes: Vec<f64>,
    pub wavenumber: f64,
    pub center: f64,
}

impl ClosedFormPhase {
    /// Phase of the soliton reconstruction at `t = 0`.
    pub fn from_soliton(model: &KdvModel, profile: &SolitonProfile, scaling: &ScalingParams) -> Self {
        let eps = scaling.epsilon;
        let k = profile.wavenumber * eps;
        ClosedFormPhase {
            // ∫ε² b A sech²(k x) dx = ε² b A tanh(k x)/k
            amplitudes: model.b.iter().map(|b| eps * eps * b * profile.amplitude / k).collect(),
            wavenumber: k,
            center: 0.0,
        }
    }

    pub fn eval(&self, species: usize, x: f64) -> f64 {
        self.amplitudes[species] * (self.wavenumber * (x - self.center)).tanh()
    }
}

/// `ψ_k = √ρ_k exp(i (m/ħ) Φ_k)` with `Φ_k` from the closed form when given,
/// otherwise the cumulative trapezoid integral of `v_k` from the left edge.
pub fn madelung_synthesize(
    fields: &HydroFields,
    grid: &Grid,
    bg: &BackgroundState,
    phase: Option<&ClosedFormPhase>,
) -> Result<FieldState> {
    let n_sp = fields.rho.len();
    if n_sp != bg.n() || fields.v.len() != n_sp {
        return Err(Error::DimensionMismatch {
            what: "species in fields vs background",
            expected: bg.n(),
            actual: n_sp,
        });
    }
    let n = grid.n_points;
    let dx = grid.dx();
    let factor = bg.mass / bg.hbar;
    let mut psi = Vec::with_capacity(n_sp);
    for k in 0..n_sp {
        let rho = &fields.rho[k];
        let v = &fields.v[k];
        if rho.len() != n || v.len() != n {
            return Err(Error::DimensionMismatch {
                what: "field samples vs grid points",
                expected: n,
                actual: rho.len().min(v.len()),
            });
        }
        if let Some((index, &value)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::NonPositiveDensity {
                species: k,
                index,
                value,
            });
        }
        let phi: Vec<f64> = match phase {
            Some(p) => (0..n).map(|i| p.eval(k, grid.x(i))).collect(),
            None => {
                let mut acc = 0.0;
                let mut out = Vec::with_capacity(n);
                out.push(0.0);
                for i in 1..n {
                    acc += 0.5 * dx * (v[i - 1] + v[i]);
                    out.push(acc);
                }
                out
            }
        };
        psi.push(
            rho.iter()
                .zip(&phi)
                .map(|(r, ph)| Complex64::from_polar(r.sqrt(), factor * ph))
                .collect(),
        );
    }
    FieldState::new(*grid, 0.0, psi)
}

/// Sound speed and KdV coefficients from a printed closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormBranch {
    pub lambda: f64,
    pub dispersion: f64,
    pub nonlinearity: f64,
}

/// Two components: `A = g₁ρ01 + g₂ρ02`, `C = g₁ρ01 − g₂ρ02`,
/// `B = √(C² + 4h²ρ01ρ02)`, speeds `√((A ± B)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormN2 {
    pub a_sum: f64,
    pub c_diff: f64,
    pub b_disc: f64,
    h: f64,
    rho01: f64,
}

impl ClosedFormN2 {
    pub fn new(coupling: &StructuredGh, bg: &BackgroundState) -> Result<Self> {
        if coupling.n() != 2 || bg.n() != 2 {
            return Err(Error::invalid("closed form", "the two-component formulas need N = 2"));
        }
        let (g1, g2, h) = (coupling.g[0], coupling.g[1], coupling.h);
        let (r1, r2) = (bg.rho0[0], bg.rho0[1]);
        let b2 = g1 * g1 * r1 * r1 - 2.0 * g1 * g2 * r1 * r2 + 4.0 * h * h * r1 * r2 + g2 * g2 * r2 * r2;
        Ok(ClosedFormN2 {
            a_sum: g1 * r1 + g2 * r2,
            c_diff: g1 * r1 - g2 * r2,
            b_disc: b2.sqrt(),
            h,
            rho01: r1,
        })
    }

    /// Slow then fast branch.
    pub fn branches(&self, hbar: f64) -> [ClosedFormBranch; 2] {
        let (a, b, c, h, r) = (self.a_sum, self.b_disc, self.c_diff, self.h, self.rho01);
        let pre = 3.0 / (8.0 * h * b * r);
        let disp = |s: f64| -hbar * hbar / (4.0 * 2f64.sqrt()) / s.sqrt();
        [
            ClosedFormBranch {
                lambda: (0.5 * (a - b)).sqrt(),
                dispersion: disp(a - b),
                nonlinearity: -pre * ((c - b).powi(2) - 2.0 * h * (c + b) * r),
            },
            ClosedFormBranch {
                lambda: (0.5 * (a + b)).sqrt(),
                dispersion: disp(a + b),
                nonlinearity: pre * ((c + b).powi(2) + 2.0 * h * (b - c) * r),
            },
        ]
    }
}

/// Three components with the first two sharing `(g, ρ0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormN3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    g1: f64,
    h: f64,
    rho01: f64,
    rho03: f64,
}

impl ClosedFormN3 {
    pub fn new(coupling: &StructuredGh, bg: &BackgroundState) -> Result<Self> {
        if coupling.n() != 3 || bg.n() != 3 {
            return Err(Error::invalid("closed form", "the three-component formulas need N = 3"));
        }
        let same = |a: f64, b: f64| (a - b).abs() <= PAIR_TOLERANCE * a.abs().max(b.abs());
        if !same(coupling.g[0], coupling.g[1]) || !same(bg.rho0[0], bg.rho0[1]) {
            return Err(Error::invalid(
                "closed form",
                "the three-component formulas need g1 = g2 and rho01 = rho02",
            ));
        }
        let (g1, g3, h) = (coupling.g[0], coupling.g[2], coupling.h);
        let (r1, r3) = (bg.rho0[0], bg.rho0[2]);
        let y2 = (g1 + h).powi(2) * r1 * r1 - 2.0 * (g1 * g3 + h * (g3 - 4.0 * h)) * r1 * r3
            + g3 * g3 * r3 * r3;
        Ok(ClosedFormN3 {
            x: g1 * r1 + h * r1 + g3 * r3,
            y: y2.sqrt(),
            z: (g1 + h) * r1 - g3 * r3 + 2.0 * h * r3,
            w: g1 * r1 - 3.0 * h * r1 - g3 * r3,
            g1,
            h,
            rho01: r1,
            rho03: r3,
        })
    }

    /// Linear (repeated-pair) branch, then `√((X−Y)/2)`, then `√((X+Y)/2)`.
    pub fn branches(&self, hbar: f64) -> [ClosedFormBranch; 3] {
        let (x, y, z, w, r1, r3) = (self.x, self.y, self.z, self.w, self.rho01, self.rho03);
        let disp = |s: f64| -hbar * hbar / (4.0 * 2f64.sqrt()) / s.sqrt();
        let lin = ((self.g1 - self.h) * r1).sqrt();
        let b2 = 3.0 * (2.0 * (y - z).powi(3) * r1 + (w + y).powi(3) * r3)
            / (4.0 * (w + y) * (y - z).powi(2) * r1 + 2.0 * (w + y).powi(3) * r3);
        let b3 = 3.0 * (-2.0 * (y + z).powi(3) * r1 + (w - y).powi(3) * r3)
            / (4.0 * (w - y) * (y + z).powi(2) * r1 + 2.0 * (w - y).powi(3) * r3);
        [
            ClosedFormBranch {
                lambda: lin,
                dispersion: -hbar * hbar / (8.0 * lin),
                nonlinearity: 0.0,
            },
            ClosedFormBranch {
                lambda: (0.5 * (x - y)).sqrt(),
                dispersion: disp(x - y),
                nonlinearity: b2,
            },
            ClosedFormBranch {
                lambda: (0.5 * (x + y)).sqrt(),
                dispersion: disp(x + y),
                nonlinearity: b3,
            },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedForm {
    N2(ClosedFormN2),
    N3(ClosedFormN3),
}

impl ClosedForm {
    /// Applicable closed form for the given parameters, if any.
    pub fn detect(coupling: &StructuredGh, bg: &BackgroundState) -> Option<Self> {
        if coupling.h <= 0.0 {
            return None;
        }
        match coupling.n() {
            2 => ClosedFormN2::new(coupling, bg).ok().map(ClosedForm::N2),
            3 => ClosedFormN3::new(coupling, bg).ok().map(ClosedForm::N3),
            _ => None,
        }
    }

    /// Right-moving branches in ascending order of speed. The coefficients
    /// assume eigenvector columns with last component 1.
    pub fn branches(&self, hbar: f64) -> Vec<ClosedFormBranch> {
        let mut out: Vec<ClosedFormBranch> = match self {
            ClosedForm::N2(c) => c.branches(hbar).to_vec(),
            ClosedForm::N3(c) => c.branches(hbar).to_vec(),
        };
        out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        out
    }
}

/// Closed form evaluated for one branch; left movers flip `λ` and `A`.
pub fn kdv_coefficients_closed_form(
    coupling: &StructuredGh,
    bg: &BackgroundState,
    branch: Branch,
) -> Result<(ClosedFormBranch, ClosedForm)> {
    let form = ClosedForm::detect(coupling, bg).ok_or_else(|| {
        Error::invalid(
            "closed form",
            "available only for N = 2, or N = 3 with g1 = g2 and rho01 = rho02, and h > 0",
        )
    })?;
    let list = form.branches(bg.hbar);
    if branch.index == 0 || branch.index > list.len() {
        return Err(Error::BranchOutOfRange {
            branch: branch.signed(),
            n: list.len(),
        });
    }
    let mut br = list[branch.index - 1];
    if branch.direction == Direction::Left {
        br.lambda = -br.lambda;
        br.dispersion = -br.dispersion;
    }
    Ok((br, form))
}

/// True when some `(ρ0 g, ρ0)` pair repeats, which fixes a sound speed for
/// every `h` and makes that branch linear. Used for reporting only.
pub fn has_repeated_pair(coupling: &StructuredGh, bg: &BackgroundState) -> bool {
    degeneracy_report(coupling, bg).is_ok_and(|r| r.has_repeated())
}
