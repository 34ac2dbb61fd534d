//! Tracking a single eigenpair of `αρ = D + h·α₁ρ` as the cross coupling `h`
//! grows from zero (`D = diag(ρ0 g)`, `α₁` the all-ones matrix minus the
//! identity).
//!
//! First stage, from `h = 0`: write the eigenvector as `e_k + h q` with
//! `q_k = 0`, eigenvalue `d_k + h μ`, `μ = h Σ_{j≠k} ρ_j q_j`, and iterate
//!
//! ```text
//! q_i = [μ h q_i − Σ_{j≠i} ρ_j (e_k + h q)_j] / (d_i − d_k),   i ≠ k.
//! ```
//!
//! Restarts, from a converged `(Λ0, q0)` at `h0`: the eigenpair at
//! `h0 + δh` is `(Λ0 + δh ν, q0 + δh p)` with
//!
//! ```text
//! (M0 − Λ0) p = (ν − α₁ρ)(q0 + δh p),   ⟨ρ q0, p⟩ = 0,
//! ```
//!
//! `ν` fixed by the solvability condition against the left null vector
//! `ρ q0`. The singular system is solved through the bordered matrix
//! `[[M0 − Λ0, q0], [(ρ q0)ᵀ, 0]]`.

use nalgebra::{DMatrix, DVector};

use super::{degeneracy_report, BackgroundState, StructuredGh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContinuationStage {
    Unperturbed,
    FirstStage,
    Restart,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSample {
    /// Component index (0-based) the branch starts from at `h = 0`.
    pub k: usize,
    pub h: f64,
    pub lambda_sq: f64,
    /// Eigenvector of `αρ`, scaled to unit max-norm.
    pub eigenvector: Vec<f64>,
    /// Last correction solved for: `q` (first stage, `q_k = 0`) or `p`.
    pub correction: Vec<f64>,
    /// `μ` in the first stage, `ν` in restarts.
    pub mu: f64,
    pub stage: ContinuationStage,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerSettings {
    /// Convergence threshold on successive fixed-point iterates (relative).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Smallest admissible step in `h` before giving up.
    pub min_step: f64,
    /// Accepted eigen-residual of a converged step, relative to `‖αρ‖`.
    pub residual_tolerance: f64,
}

impl Default for TrackerSettings {
    fn default() -> Self {
        TrackerSettings {
            tolerance: 1e-12,
            max_iterations: 200,
            min_step: 1e-10,
            residual_tolerance: 1e-9,
        }
    }
}

/// Incremental eigenpair tracker; `h` only moves forward.
#[derive(Debug, Clone)]
pub struct EigenpairTracker {
    g: Vec<f64>,
    rho: Vec<f64>,
    d: Vec<f64>,
    k: usize,
    settings: TrackerSettings,
    current: ContinuationSample,
    step_hint: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `(α₁ ρ x)_i = Σ_{j≠i} ρ_j x_j`.
fn offdiag_apply(rho: &[f64], x: &[f64]) -> Vec<f64> {
    let total: f64 = rho.iter().zip(x).map(|(r, v)| r * v).sum();
    rho.iter().zip(x).map(|(r, v)| total - r * v).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

enum StepFailure {
    NoContraction,
    Residual(f64),
}

impl EigenpairTracker {
    pub fn new(coupling: &StructuredGh, bg: &BackgroundState, k: usize) -> Result<Self> {
        Self::with_settings(coupling, bg, k, TrackerSettings::default())
    }

    pub fn with_settings(
        coupling: &StructuredGh,
        bg: &BackgroundState,
        k: usize,
        settings: TrackerSettings,
    ) -> Result<Self> {
        let n = coupling.n();
        if k >= n {
            return Err(Error::invalid("k", format!("component {k} out of range for N = {n}")));
        }
        let report = degeneracy_report(coupling, bg)?;
        if report.group_of(k).is_some_and(|g| g.len() > 1) {
            return Err(Error::invalid(
                "k",
                format!("component {k} belongs to a permanently repeated (rho0*g, rho0) pair"),
            ));
        }
        let d: Vec<f64> = coupling.g.iter().zip(&bg.rho0).map(|(g, r)| g * r).collect();
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        Ok(EigenpairTracker {
            g: coupling.g.clone(),
            rho: bg.rho0.clone(),
            k,
            settings,
            current: ContinuationSample {
                k,
                h: 0.0,
                lambda_sq: d[k],
                eigenvector: e,
                correction: vec![0.0; n],
                mu: 0.0,
                stage: ContinuationStage::Unperturbed,
            },
            d,
            step_hint: f64::INFINITY,
        })
    }

    pub fn current(&self) -> &ContinuationSample {
        &self.current
    }

    fn n(&self) -> usize {
        self.d.len()
    }

    fn matrix(&self, h: f64) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.d[i]
            } else {
                h * self.rho[j]
            }
        })
    }

    fn check_positivity(&self, h: f64) -> Result<()> {
        let coupling = StructuredGh {
            g: self.g.clone(),
            h,
        };
        // Semi-definite endpoints are admitted, indefinite couplings are not.
        let alpha = coupling.alpha();
        let eig = alpha.symmetric_eigenvalues();
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-12 * alpha.amax() {
            return Err(Error::NotPositiveDefinite(super::positivity_report(
                &super::CouplingModel::Structured(coupling),
            )));
        }
        Ok(())
    }

    /// Advance the tracked eigenpair to `h_target ≥` the current `h`.
    pub fn advance_to(&mut self, h_target: f64) -> Result<&ContinuationSample> {
        if !(h_target.is_finite() && h_target >= self.current.h) {
            return Err(Error::invalid(
                "h_target",
                format!("must be finite and at least the current h = {}", self.current.h),
            ));
        }
        self.check_positivity(h_target)?;
        let min_step = self.settings.min_step * h_target.max(1.0);
        while self.current.h < h_target {
            let remaining = h_target - self.current.h;
            let mut step = remaining.min(self.step_hint);
            loop {
                let h_new = if step >= remaining {
                    h_target
                } else {
                    self.current.h + step
                };
                let attempt = if self.current.h == 0.0 {
                    self.first_stage(h_new)
                } else {
                    self.restart(h_new)
                };
                match attempt {
                    Ok(sample) => {
                        self.current = sample;
                        self.step_hint = (2.0 * step).min(f64::MAX);
                        break;
                    }
                    Err(failure) => {
                        step *= 0.5;
                        if step < min_step {
                            let reason = match failure {
                                StepFailure::NoContraction => format!(
                                    "fixed-point iteration did not contract within {} iterations \
                                     (step collapsed below {min_step:e})",
                                    self.settings.max_iterations
                                ),
                                StepFailure::Residual(r) => format!(
                                    "eigen-residual {r:e} too large (step collapsed below {min_step:e})"
                                ),
                            };
                            return Err(Error::BranchTrackingLost {
                                h: self.current.h,
                                reason,
                            });
                        }
                    }
                }
            }
        }
        Ok(&self.current)
    }

    fn finish(
        &self,
        h: f64,
        lambda_sq: f64,
        mut q: Vec<f64>,
        correction: Vec<f64>,
        mu: f64,
        stage: ContinuationStage,
    ) -> std::result::Result<ContinuationSample, StepFailure> {
        let scale = max_abs(&q);
        q.iter_mut().for_each(|v| *v /= scale);
        let m = self.matrix(h);
        let qv = DVector::from_column_slice(&q);
        let residual = (&m * &qv - &qv * lambda_sq).amax() / m.amax().max(f64::MIN_POSITIVE);
        if !residual.is_finite() || residual > self.settings.residual_tolerance {
            return Err(StepFailure::Residual(residual));
        }
        Ok(ContinuationSample {
            k: self.k,
            h,
            lambda_sq,
            eigenvector: q,
            correction,
            mu,
            stage,
        })
    }

    fn first_stage(&self, h: f64) -> std::result::Result<ContinuationSample, StepFailure> {
        let n = self.n();
        let k = self.k;
        if (0..n).any(|i| i != k && self.d[i] == self.d[k]) {
            return Err(StepFailure::NoContraction);
        }
        let mut q = vec![0.0; n];
        for _ in 0..self.settings.max_iterations {
            let mut u = q.iter().map(|v| h * v).collect::<Vec<_>>();
            u[k] = 1.0;
            let mu = h * dot(&self.rho, &q);
            let off = offdiag_apply(&self.rho, &u);
            let next: Vec<f64> = (0..n)
                .map(|i| {
                    if i == k {
                        0.0
                    } else {
                        (mu * h * q[i] - off[i]) / (self.d[i] - self.d[k])
                    }
                })
                .collect();
            let change = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            q = next;
            if !change.is_finite() {
                return Err(StepFailure::NoContraction);
            }
            if change <= self.settings.tolerance * max_abs(&q).max(1.0) {
                let mu = h * dot(&self.rho, &q);
                let lambda_sq = self.d[k] + h * mu;
                let mut v: Vec<f64> = q.iter().map(|x| h * x).collect();
                v[k] = 1.0;
                return self.finish(h, lambda_sq, v, q, mu, ContinuationStage::FirstStage);
            }
        }
        Err(StepFailure::NoContraction)
    }

    fn restart(&self, h: f64) -> std::result::Result<ContinuationSample, StepFailure> {
        let n = self.n();
        let h0 = self.current.h;
        let dh = h - h0;
        let lam0 = self.current.lambda_sq;
        let q0 = &self.current.eigenvector;
        let rq0: Vec<f64> = self.rho.iter().zip(q0).map(|(r, q)| r * q).collect();

        let mut bordered = DMatrix::zeros(n + 1, n + 1);
        let m0 = self.matrix(h0);
        for i in 0..n {
            for j in 0..n {
                bordered[(i, j)] = m0[(i, j)] - if i == j { lam0 } else { 0.0 };
            }
            bordered[(i, n)] = q0[i];
            bordered[(n, i)] = rq0[i];
        }
        let lu = bordered.lu();

        let a1q0 = offdiag_apply(&self.rho, q0);
        let num0 = dot(&rq0, &a1q0);
        let den0 = dot(&rq0, q0);
        let mut p = vec![0.0; n];
        for _ in 0..self.settings.max_iterations {
            let a1p = offdiag_apply(&self.rho, &p);
            let nu = (num0 + dh * dot(&rq0, &a1p)) / (den0 + dh * dot(&rq0, &p));
            let mut rhs = DVector::zeros(n + 1);
            for i in 0..n {
                let shifted = q0[i] + dh * p[i];
                rhs[i] = nu * shifted - (a1q0[i] + dh * a1p[i]);
            }
            let Some(sol) = lu.solve(&rhs) else {
                return Err(StepFailure::NoContraction);
            };
            let next: Vec<f64> = sol.iter().take(n).copied().collect();
            let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            p = next;
            if !change.is_finite() {
                return Err(StepFailure::NoContraction);
            }
            if change <= self.settings.tolerance * max_abs(&p).max(1.0) {
                let a1p = offdiag_apply(&self.rho, &p);
                let nu = (num0 + dh * dot(&rq0, &a1p)) / (den0 + dh * dot(&rq0, &p));
                let q: Vec<f64> = q0.iter().zip(&p).map(|(a, b)| a + dh * b).collect();
                return self.finish(h, lam0 + dh * nu, q, p, nu, ContinuationStage::Restart);
            }
        }
        Err(StepFailure::NoContraction)
    }
}

/// Eigenpair samples at `h = i·h_target/n_steps`, `i = 0..=n_steps`.
pub fn continue_eigenpair(
    coupling: &StructuredGh,
    bg: &BackgroundState,
    k: usize,
    h_target: f64,
    n_steps: usize,
) -> Result<Vec<ContinuationSample>> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps", "must be positive"));
    }
    if !(h_target.is_finite() && h_target >= 0.0) {
        return Err(Error::invalid("h_target", format!("must be non-negative, got {h_target}")));
    }
    let mut tracker = EigenpairTracker::new(coupling, bg, k)?;
    let mut out = vec![tracker.current().clone()];
    if h_target == 0.0 {
        return Ok(out);
    }
    for i in 1..=n_steps {
        let h = if i == n_steps {
            h_target
        } else {
            h_target * i as f64 / n_steps as f64
        };
        out.push(tracker.advance_to(h)?.clone());
    }
    Ok(out)
}

/// `d_k − h² Σ'_j ρ_j ρ_k / (d_j − d_k)`: the eigenvalue through second order.
pub fn second_order_eigenvalue(coupling: &StructuredGh, bg: &BackgroundState, k: usize, h: f64) -> f64 {
    let d: Vec<f64> = coupling.g.iter().zip(&bg.rho0).map(|(g, r)| g * r).collect();
    let sum: f64 = (0..d.len())
        .filter(|&j| j != k)
        .map(|j| bg.rho0[j] * bg.rho0[k] / (d[j] - d[k]))
        .sum();
    d[k] - h * h * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{eigensystem, CouplingModel};

    fn sec5() -> (StructuredGh, BackgroundState) {
        (
            StructuredGh::new(vec![1.0, 1.0], 0.5).unwrap(),
            BackgroundState::new(vec![1.0, 0.1]).unwrap(),
        )
    }

    #[test]
    fn zero_target_is_unperturbed() {
        let (c, bg) = sec5();
        let s = continue_eigenpair(&c, &bg, 1, 0.0, 5).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].lambda_sq, 0.1);
        assert_eq!(s[0].eigenvector, vec![0.0, 1.0]);
    }

    #[test]
    fn sec5_matches_eigensystem() {
        let (c, bg) = sec5();
        let sp = eigensystem(&CouplingModel::Structured(c.clone()), &bg).unwrap();
        let fast = continue_eigenpair(&c, &bg, 0, 0.5, 10).unwrap();
        let last = fast.last().unwrap();
        assert!((last.lambda_sq - 1.027).abs() < 1e-3);
        assert!((last.lambda_sq - sp.lambda[1].powi(2)).abs() < 1e-8);
        let ratio = last.eigenvector[0] / last.eigenvector[1];
        assert!((ratio - sp.q[(0, 1)] / sp.q[(1, 1)]).abs() < 1e-8);

        let slow = continue_eigenpair(&c, &bg, 1, 0.5, 10).unwrap();
        assert!((slow.last().unwrap().lambda_sq - sp.lambda[0].powi(2)).abs() < 1e-8);
    }

    #[test]
    fn first_stage_correction_is_orthogonal() {
        let c = StructuredGh::new(vec![1.0, 2.0, 0.7], 0.2).unwrap();
        let bg = BackgroundState::new(vec![0.5, 0.8, 1.3]).unwrap();
        for k in 0..3 {
            let s = continue_eigenpair(&c, &bg, k, 0.2, 4).unwrap();
            assert_eq!(s[1].stage, ContinuationStage::FirstStage);
            assert_eq!(s[1].correction[k], 0.0);
            for smp in &s[2..] {
                assert_eq!(smp.stage, ContinuationStage::Restart);
            }
        }
    }

    #[test]
    fn repeated_component_rejected() {
        let c = StructuredGh::new(vec![1.0, 1.0, 2.0], 0.3).unwrap();
        let bg = BackgroundState::new(vec![1.0, 1.0, 0.5]).unwrap();
        assert!(EigenpairTracker::new(&c, &bg, 0).is_err());
        assert!(EigenpairTracker::new(&c, &bg, 2).is_ok());
    }

    #[test]
    fn indefinite_target_rejected() {
        let (c, bg) = sec5();
        assert!(matches!(
            continue_eigenpair(&c, &bg, 0, 1.5, 10),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn semidefinite_endpoint_reached() {
        let (c, bg) = sec5();
        let s = continue_eigenpair(&c, &bg, 1, 1.0, 40).unwrap();
        assert!(s.last().unwrap().lambda_sq.abs() < 1e-9);
    }
}
