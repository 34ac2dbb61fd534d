//! Spectral analysis of the linearised hydrodynamic operator
//!
//! ```text
//!        | 0   ρ |
//!   𝒜 =  |       |        (2N × 2N, ρ = diag(ρ0), α symmetric)
//!        | α   0 |
//! ```
//!
//! The eigenvalues of 𝒜 are `±λ_i` with `λ_i²` the eigenvalues of `αρ`. The
//! decomposition is always carried out on the symmetric congruence
//! `ρ^{1/2} α ρ^{1/2}`, so the spectrum is real and the eigenvectors of `αρ`
//! are `ρ`-orthogonal by construction.

mod continuation;

pub use continuation::{
    continue_eigenpair, second_order_eigenvalue, ContinuationSample, ContinuationStage,
    EigenpairTracker, TrackerSettings,
};

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::symprod::{elem_sym_all, GammaList};

/// Relative tolerance used to decide that two `(ρ0 g, ρ0)` pairs coincide.
pub const PAIR_TOLERANCE: f64 = 1e-12;

/// Relative tolerance on `λ²` used to group numerically repeated eigenvalues.
pub const EIGENVALUE_GROUP_TOLERANCE: f64 = 1e-9;

/// Diagonal-`g`, constant off-diagonal `h` coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredGh {
    pub g: Vec<f64>,
    pub h: f64,
}

impl StructuredGh {
    pub fn new(g: Vec<f64>, h: f64) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::invalid("g", "at least one component is required"));
        }
        if let Some(bad) = g.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid("g", format!("entries must be positive, got {bad}")));
        }
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::invalid("h", format!("must be non-negative, got {h}")));
        }
        Ok(StructuredGh { g, h })
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn alpha(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| if i == j { self.g[i] } else { self.h })
    }

    pub fn with_h(&self, h: f64) -> Self {
        StructuredGh {
            g: self.g.clone(),
            h,
        }
    }
}

/// Symmetric coupling matrix α of the vector NLS.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingModel {
    Structured(StructuredGh),
    General(DMatrix<f64>),
}

impl CouplingModel {
    pub fn structured(g: Vec<f64>, h: f64) -> Result<Self> {
        StructuredGh::new(g, h).map(CouplingModel::Structured)
    }

    pub fn general(alpha: DMatrix<f64>) -> Result<Self> {
        if alpha.nrows() != alpha.ncols() || alpha.nrows() == 0 {
            return Err(Error::invalid("alpha", "must be a non-empty square matrix"));
        }
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("alpha", "entries must be finite"));
        }
        let scale = alpha.amax().max(f64::MIN_POSITIVE);
        let asym = (&alpha - alpha.transpose()).amax();
        if asym > 1e-14 * scale {
            return Err(Error::invalid(
                "alpha",
                format!("matrix is not symmetric (max asymmetry {asym:e})"),
            ));
        }
        Ok(CouplingModel::General(alpha))
    }

    pub fn n(&self) -> usize {
        match self {
            CouplingModel::Structured(s) => s.n(),
            CouplingModel::General(a) => a.nrows(),
        }
    }

    pub fn alpha(&self) -> DMatrix<f64> {
        match self {
            CouplingModel::Structured(s) => s.alpha(),
            CouplingModel::General(a) => a.clone(),
        }
    }

    pub fn as_structured(&self) -> Option<&StructuredGh> {
        match self {
            CouplingModel::Structured(s) => Some(s),
            CouplingModel::General(_) => None,
        }
    }
}

/// Uniform background: densities `ρ0k`, particle mass and ħ.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundState {
    pub rho0: Vec<f64>,
    pub mass: f64,
    pub hbar: f64,
}

impl BackgroundState {
    pub fn new(rho0: Vec<f64>) -> Result<Self> {
        Self::with_units(rho0, 1.0, 1.0)
    }

    pub fn with_units(rho0: Vec<f64>, mass: f64, hbar: f64) -> Result<Self> {
        if rho0.is_empty() {
            return Err(Error::invalid("rho0", "at least one component is required"));
        }
        if let Some(bad) = rho0.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(
                "rho0",
                format!("background densities must be positive, got {bad}"),
            ));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::invalid("mass", format!("must be positive, got {mass}")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::invalid("hbar", format!("must be positive, got {hbar}")));
        }
        Ok(BackgroundState { rho0, mass, hbar })
    }

    pub fn n(&self) -> usize {
        self.rho0.len()
    }

    fn check_dims(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                what: "background densities vs coupling matrix",
                expected: n,
                actual: self.n(),
            });
        }
        Ok(())
    }
}

/// Travel direction of a branch: the sign of its sound speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Right,
    Left,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Right => 1.0,
            Direction::Left => -1.0,
        }
    }
}

/// `𝒜 = [[0, diag(ρ0)], [α, 0]]`.
pub fn assemble_block_matrix(coupling: &CouplingModel, bg: &BackgroundState) -> Result<DMatrix<f64>> {
    let n = coupling.n();
    bg.check_dims(n)?;
    let alpha = coupling.alpha();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = bg.rho0[i];
        for j in 0..n {
            a[(n + i, j)] = alpha[(i, j)];
        }
    }
    Ok(a)
}

/// Positive-definiteness of α and, for the structured form, the cheap
/// necessary (`h < √(g₍₁₎g₍₂₎)`, two smallest g) and sufficient (`h < min g`)
/// threshold tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PositivityReport {
    pub is_positive_definite: bool,
    pub necessary_pass: Option<bool>,
    pub sufficient_pass: Option<bool>,
}

impl fmt::Display for PositivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flag = |v: Option<bool>| match v {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "n/a",
        };
        write!(
            f,
            "positive definite: {}, necessary condition: {}, sufficient condition: {}",
            self.is_positive_definite,
            flag(self.necessary_pass),
            flag(self.sufficient_pass)
        )
    }
}

pub fn is_positive_definite(alpha: &DMatrix<f64>) -> bool {
    alpha.clone().cholesky().is_some()
}

pub fn positivity_report(coupling: &CouplingModel) -> PositivityReport {
    let is_positive_definite = is_positive_definite(&coupling.alpha());
    let (necessary_pass, sufficient_pass) = match coupling {
        CouplingModel::Structured(s) => {
            let mut g = s.g.clone();
            g.sort_by(f64::total_cmp);
            let necessary = if g.len() >= 2 { s.h < (g[0] * g[1]).sqrt() } else { true };
            (Some(necessary), Some(s.h < g[0]))
        }
        CouplingModel::General(_) => (None, None),
    };
    PositivityReport {
        is_positive_definite,
        necessary_pass,
        sufficient_pass,
    }
}

/// Closed-form characteristic polynomial evaluated at `μ = λ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPolyEvaluation {
    pub mu: f64,
    pub gammas: GammaList,
    pub value: f64,
    /// `Π_i ρ0i h`; `value · scale = det(αρ − μ)`.
    pub scale: f64,
}

impl CharPolyEvaluation {
    pub fn determinant(&self) -> f64 {
        self.value * self.scale
    }
}

fn gammas(coupling: &StructuredGh, bg: &BackgroundState, mu: f64) -> Vec<f64> {
    coupling
        .g
        .iter()
        .zip(&bg.rho0)
        .map(|(g, r)| (r * g - mu) / (r * coupling.h))
        .collect()
}

/// `e_N(γ) + Σ_{k=2}^{N} (−1)^{k−1}(k−1) e_{N−k}(γ)` with
/// `γ_i = (ρ0i g_i − μ)/(ρ0i h)`. Vanishes exactly at eigenvalues of `αρ`.
pub fn char_poly(coupling: &StructuredGh, bg: &BackgroundState, mu: f64) -> Result<CharPolyEvaluation> {
    bg.check_dims(coupling.n())?;
    if coupling.h == 0.0 {
        return Err(Error::ZeroCrossCoupling);
    }
    let n = coupling.n();
    let gam = gammas(coupling, bg, mu);
    let e = elem_sym_all(&gam);
    let mut value = e[n];
    for k in 2..=n {
        let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
        value += sign * (k as f64 - 1.0) * e[n - k];
    }
    let scale = bg.rho0.iter().map(|r| r * coupling.h).product();
    Ok(CharPolyEvaluation {
        mu,
        gammas: GammaList::new(gam),
        value,
        scale,
    })
}

/// The characteristic polynomial in the factored form that exposes the
/// permanent roots of up to two repeated `(ρ0 g, ρ0)` groups.
///
/// With one group of size `m` (γ its common gamma, β the remaining gammas,
/// `M = N − m`):
/// `(γ−1)^{m−1} Σ_p e_p(β) (−1)^{M−p} (m + (1−M+p)(γ−1))`.
///
/// With two groups `m, m'`:
/// `(γ−1)^{m−1}(γ'−1)^{m'−1} Σ_p e_p(β)(−1)^{M−p} f_p`,
/// `f_p = m(γ'−1) + m'(γ−1) + (γ−1)(γ'−1)(1 − M + p)`, `M = N − m − m'`.
pub fn factored_char_poly(coupling: &StructuredGh, bg: &BackgroundState, mu: f64) -> Result<f64> {
    bg.check_dims(coupling.n())?;
    if coupling.h == 0.0 {
        return Err(Error::ZeroCrossCoupling);
    }
    let n = coupling.n();
    let report = degeneracy_report(coupling, bg)?;
    let gam = gammas(coupling, bg, mu);
    let repeated: Vec<&Vec<usize>> = report.groups.iter().filter(|g| g.len() >= 2).collect();
    let sign = |e: usize| if e % 2 == 0 { 1.0 } else { -1.0 };
    let rest = |excluded: &[usize]| -> Vec<f64> {
        (0..n).filter(|i| !excluded.contains(i)).map(|i| gam[i]).collect()
    };
    match repeated.as_slice() {
        [] => char_poly(coupling, bg, mu).map(|c| c.value),
        [grp] => {
            let m = grp.len();
            let d = gam[grp[0]] - 1.0;
            let beta = rest(grp);
            let big_m = n - m;
            let e = elem_sym_all(&beta);
            let sum: f64 = (0..=big_m)
                .map(|p| {
                    e[p] * sign(big_m - p)
                        * (m as f64 + (1.0 - big_m as f64 + p as f64) * d)
                })
                .sum();
            Ok(d.powi(m as i32 - 1) * sum)
        }
        [g1, g2] => {
            let (m, mp) = (g1.len() as f64, g2.len() as f64);
            let d = gam[g1[0]] - 1.0;
            let dp = gam[g2[0]] - 1.0;
            let excluded: Vec<usize> = g1.iter().chain(g2.iter()).copied().collect();
            let beta = rest(&excluded);
            let big_m = beta.len();
            let e = elem_sym_all(&beta);
            let sum: f64 = (0..=big_m)
                .map(|p| {
                    let f = m * dp + mp * d + d * dp * (1.0 - big_m as f64 + p as f64);
                    e[p] * sign(big_m - p) * f
                })
                .sum();
            Ok(d.powi(g1.len() as i32 - 1) * dp.powi(g2.len() as i32 - 1) * sum)
        }
        _ => Err(Error::Unsupported(
            "factored characteristic polynomial with more than two repeated groups".into(),
        )),
    }
}

/// A permanently repeated eigenvalue `λ² = ρ0*(g* − h)` of `αρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedEigenvalue {
    pub members: Vec<usize>,
    pub rho_g: f64,
    pub rho: f64,
    pub lambda_sq: f64,
    pub multiplicity: usize,
}

impl RepeatedEigenvalue {
    /// Positive sound speed, or `None` when `g* ≤ h` makes it non-real.
    pub fn lambda(&self) -> Option<f64> {
        (self.lambda_sq > 0.0).then(|| self.lambda_sq.sqrt())
    }

    pub fn is_stable(&self) -> bool {
        self.lambda_sq > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyReport {
    /// Partition of the (0-based) component indices by equal `(ρ0 g, ρ0)`.
    pub groups: Vec<Vec<usize>>,
    pub repeated: Vec<RepeatedEigenvalue>,
}

impl DegeneracyReport {
    pub fn has_repeated(&self) -> bool {
        !self.repeated.is_empty()
    }

    pub fn group_of(&self, component: usize) -> Option<&Vec<usize>> {
        self.groups.iter().find(|g| g.contains(&component))
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PAIR_TOLERANCE * a.abs().max(b.abs())
}

pub fn degeneracy_report(coupling: &StructuredGh, bg: &BackgroundState) -> Result<DegeneracyReport> {
    bg.check_dims(coupling.n())?;
    let pairs: Vec<(f64, f64)> = coupling
        .g
        .iter()
        .zip(&bg.rho0)
        .map(|(g, r)| (r * g, *r))
        .collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        match groups
            .iter_mut()
            .find(|grp| close(pairs[grp[0]].0, p.0) && close(pairs[grp[0]].1, p.1))
        {
            Some(grp) => grp.push(i),
            None => groups.push(vec![i]),
        }
    }
    let repeated = groups
        .iter()
        .filter(|grp| grp.len() >= 2)
        .map(|grp| {
            let (rho_g, rho) = pairs[grp[0]];
            RepeatedEigenvalue {
                members: grp.clone(),
                rho_g,
                rho,
                lambda_sq: rho_g - rho * coupling.h,
                multiplicity: grp.len() - 1,
            }
        })
        .collect();
    Ok(DegeneracyReport { groups, repeated })
}

/// Explicit eigenvectors for a permanently repeated eigenvalue.
///
/// For group indices `i_1, …, i_{m+1}`, vector `k` has `q_{i_1} = 1`,
/// `q_{i_{k+1}} = −1` and zeros elsewhere; the returned 2N-vector is
/// `(±ρq/λ ; q)`.
pub fn degenerate_eigenvectors(
    group_indices: &[usize],
    direction: Direction,
    coupling: &StructuredGh,
    bg: &BackgroundState,
    lambda_value: f64,
) -> Result<Vec<DVector<f64>>> {
    let n = coupling.n();
    bg.check_dims(n)?;
    if group_indices.len() < 2 || group_indices.iter().any(|&i| i >= n) {
        return Err(Error::NotDegenerate {
            indices: group_indices.to_vec(),
        });
    }
    let first = group_indices[0];
    let (rg, r) = (bg.rho0[first] * coupling.g[first], bg.rho0[first]);
    let shared = group_indices
        .iter()
        .all(|&i| close(bg.rho0[i] * coupling.g[i], rg) && close(bg.rho0[i], r));
    let mut distinct = group_indices.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if !shared || distinct.len() != group_indices.len() {
        return Err(Error::NotDegenerate {
            indices: group_indices.to_vec(),
        });
    }
    let expected = (r * (coupling.g[first] - coupling.h)).sqrt();
    if !(lambda_value > 0.0) || (lambda_value - expected).abs() > 1e-10 * expected.max(1.0) {
        return Err(Error::invalid(
            "lambda_value",
            format!("expected sqrt(rho0*(g*-h)) = {expected}, got {lambda_value}"),
        ));
    }
    let s = direction.sign();
    Ok(group_indices[1..]
        .iter()
        .map(|&other| {
            let mut v = DVector::zeros(2 * n);
            v[first] = s * bg.rho0[first] / lambda_value;
            v[other] = -s * bg.rho0[other] / lambda_value;
            v[n + first] = 1.0;
            v[n + other] = -1.0;
            v
        })
        .collect())
}

/// Scaling convention for the columns of `Q`. Physical fields are invariant
/// under column rescaling; the KdV nonlinearity coefficient `B` is not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Last component equal to +1; falls back to [`Normalization::LargestEntry`]
    /// when the last component vanishes (below `1e-8` of the largest entry).
    #[default]
    LastComponent,
    /// Largest-magnitude entry (first one on ties) equal to +1.
    LargestEntry,
}

impl Normalization {
    pub fn apply(self, q: &mut [f64]) {
        let max = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return;
        }
        let last = q[q.len() - 1];
        let pivot = match self {
            Normalization::LastComponent if last.abs() > 1e-8 * max => last,
            _ => *q
                .iter()
                .find(|v| v.abs() >= (1.0 - 1e-9) * max)
                .expect("max is attained"),
        };
        q.iter_mut().for_each(|v| *v /= pivot);
    }
}

/// Eigen-decomposition of 𝒜 built from the eigenvectors `Q` of `αρ`.
#[derive(Debug, Clone)]
pub struct LinearSpectrum {
    /// Positive sound speeds, ascending.
    pub lambda: Vec<f64>,
    /// Columns `q^i` with `αρ q^i = λ_i² q^i`.
    pub q: DMatrix<f64>,
    /// Diagonal of `L = QᵀρQ`.
    pub l: Vec<f64>,
    /// Eigenvectors of 𝒜; columns `0..N` belong to `+λ`, `N..2N` to `−λ`.
    pub v: DMatrix<f64>,
    /// `(V⁻¹)ᵀ`.
    pub w: DMatrix<f64>,
    /// Partition of the branch indices (0-based, ascending order) by equal λ.
    pub degeneracy: Vec<Vec<usize>>,
    pub rho0: Vec<f64>,
}

impl LinearSpectrum {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Number of branches sharing the sound speed of `index` (0-based).
    pub fn multiplicity(&self, index: usize) -> usize {
        self.degeneracy
            .iter()
            .find(|g| g.contains(&index))
            .map_or(1, |g| g.len())
    }

    pub fn column(&self, index: usize) -> Vec<f64> {
        self.q.column(index).iter().copied().collect()
    }

    /// Column of V for branch `index` travelling in `direction`.
    pub fn mode(&self, index: usize, direction: Direction) -> DVector<f64> {
        let col = match direction {
            Direction::Right => index,
            Direction::Left => self.n() + index,
        };
        self.v.column(col).into_owned()
    }

    pub fn dual_mode(&self, index: usize, direction: Direction) -> DVector<f64> {
        let col = match direction {
            Direction::Right => index,
            Direction::Left => self.n() + index,
        };
        self.w.column(col).into_owned()
    }

    /// `diag(λ, −λ)`: eigenvalues of 𝒜 in the column order of V.
    pub fn signed_eigenvalues(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .copied()
            .chain(self.lambda.iter().map(|l| -l))
            .collect()
    }
}

pub fn eigensystem(coupling: &CouplingModel, bg: &BackgroundState) -> Result<LinearSpectrum> {
    eigensystem_with(coupling, bg, Normalization::default())
}

pub fn eigensystem_with(
    coupling: &CouplingModel,
    bg: &BackgroundState,
    normalization: Normalization,
) -> Result<LinearSpectrum> {
    let n = coupling.n();
    bg.check_dims(n)?;
    let report = positivity_report(coupling);
    if !report.is_positive_definite {
        return Err(Error::NotPositiveDefinite(report));
    }
    let alpha = coupling.alpha();
    let sqrt_rho: Vec<f64> = bg.rho0.iter().map(|r| r.sqrt()).collect();
    let s = DMatrix::from_fn(n, n, |i, j| sqrt_rho[i] * alpha[(i, j)] * sqrt_rho[j]);
    let eig = s.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut lambda_sq: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut q = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])] / sqrt_rho[i]);

    if let CouplingModel::Structured(sgh) = coupling {
        if sgh.h > 0.0 {
            insert_exact_degenerate_columns(sgh, bg, &mut lambda_sq, &mut q)?;
        }
    }

    for j in 0..n {
        let mut col: Vec<f64> = q.column(j).iter().copied().collect();
        normalization.apply(&mut col);
        q.set_column(j, &DVector::from_vec(col));
    }

    let lambda: Vec<f64> = lambda_sq.iter().map(|v| v.sqrt()).collect();
    let l: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| bg.rho0[i] * q[(i, j)] * q[(i, j)]).sum())
        .collect();

    let mut v = DMatrix::zeros(2 * n, 2 * n);
    let mut w = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for i in 0..n {
            let rq = bg.rho0[i] * q[(i, j)];
            v[(i, j)] = rq / lambda[j];
            v[(i, n + j)] = -rq / lambda[j];
            v[(n + i, j)] = q[(i, j)];
            v[(n + i, n + j)] = q[(i, j)];

            w[(i, j)] = 0.5 * q[(i, j)] * lambda[j] / l[j];
            w[(i, n + j)] = -0.5 * q[(i, j)] * lambda[j] / l[j];
            w[(n + i, j)] = 0.5 * rq / l[j];
            w[(n + i, n + j)] = 0.5 * rq / l[j];
        }
    }

    let mut degeneracy: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        match degeneracy.last_mut() {
            Some(grp)
                if (lambda_sq[j] - lambda_sq[grp[0]]).abs()
                    <= EIGENVALUE_GROUP_TOLERANCE * lambda_sq[j].abs() =>
            {
                grp.push(j)
            }
            _ => degeneracy.push(vec![j]),
        }
    }

    Ok(LinearSpectrum {
        lambda,
        q,
        l,
        v,
        w,
        degeneracy,
        rho0: bg.rho0.clone(),
    })
}

/// Replace the numerically computed columns for each permanent repeated
/// eigenvalue by the exact explicit eigenvectors (ρ-orthogonalised within the
/// group), and pin the eigenvalue to `ρ0*(g* − h)`.
fn insert_exact_degenerate_columns(
    coupling: &StructuredGh,
    bg: &BackgroundState,
    lambda_sq: &mut [f64],
    q: &mut DMatrix<f64>,
) -> Result<()> {
    let n = coupling.n();
    let report = degeneracy_report(coupling, bg)?;
    let mut used = vec![false; n];
    for rep in report.repeated.iter().filter(|r| r.is_stable()) {
        let target = rep.lambda_sq;
        let mut candidates: Vec<usize> = (0..n)
            .filter(|&j| !used[j])
            .filter(|&j| (lambda_sq[j] - target).abs() <= 1e-8 * target.abs().max(1.0))
            .collect();
        candidates.sort_by(|&a, &b| {
            (lambda_sq[a] - target)
                .abs()
                .total_cmp(&(lambda_sq[b] - target).abs())
        });
        if candidates.len() < rep.multiplicity {
            continue;
        }
        let mut cols: Vec<usize> = candidates[..rep.multiplicity].to_vec();
        cols.sort_unstable();

        let first = rep.members[0];
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(rep.multiplicity);
        for &other in &rep.members[1..] {
            let mut vec = vec![0.0; n];
            vec[first] = 1.0;
            vec[other] = -1.0;
            for b in &basis {
                let num: f64 = (0..n).map(|i| bg.rho0[i] * b[i] * vec[i]).sum();
                let den: f64 = (0..n).map(|i| bg.rho0[i] * b[i] * b[i]).sum();
                for i in 0..n {
                    vec[i] -= num / den * b[i];
                }
            }
            basis.push(vec);
        }
        for (&col, vec) in cols.iter().zip(basis) {
            q.set_column(col, &DVector::from_vec(vec));
            lambda_sq[col] = target;
            used[col] = true;
        }
    }
    Ok(())
}
