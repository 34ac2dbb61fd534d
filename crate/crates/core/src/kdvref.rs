//! Reference solutions on the KdV side: the analytic soliton mapped to lab
//! coordinates, the exact Fourier solution of the linear equation
//! `f_τ + A f''' = 0`, and a pseudo-spectral integrator for
//! `f_τ + B f f' + A f''' = 0` on a periodic grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::reduction::{reconstruct_fields, soliton_profile, KdvModel, ScalingParams, WaveProfile};
use crate::spectrum::BackgroundState;

/// Time step constant for the dispersive scale, `dt ≤ C·dξ³/|A|`. The
/// dispersive term is integrated exactly, so this bounds phase accuracy
/// of the nonlinear coupling rather than stability.
pub const DISPERSIVE_STEP: f64 = 1.0;
/// Advective constant, `dt ≤ C·dξ/(|B| max|f|)`.
pub const ADVECTIVE_STEP: f64 = 0.2;
/// Growth of the L² norm beyond this factor aborts the integration.
pub const BLOWUP_FACTOR: f64 = 10.0;

/// Real samples of a KdV profile on a periodic `ξ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdvGridState {
    pub xi_min: f64,
    pub length: f64,
    pub tau: f64,
    pub f: Vec<f64>,
}

impl KdvGridState {
    pub fn new(xi_min: f64, length: f64, tau: f64, f: Vec<f64>) -> Result<Self> {
        if f.len() < 4 {
            return Err(Error::invalid("f", "at least 4 samples are required"));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid("length", format!("must be positive, got {length}")));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("f", "samples must be finite"));
        }
        Ok(KdvGridState {
            xi_min,
            length,
            tau,
            f,
        })
    }

    pub fn from_profile(
        profile: &dyn WaveProfile,
        xi_min: f64,
        length: f64,
        n_points: usize,
        tau: f64,
    ) -> Result<Self> {
        let d = length / n_points as f64;
        let f = (0..n_points).map(|i| profile.eval(xi_min + i as f64 * d, tau)).collect();
        Self::new(xi_min, length, tau, f)
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.f.len() as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.f.len()).map(|i| self.xi_min + i as f64 * d).collect()
    }

    /// `∫ f dξ`.
    pub fn mass(&self) -> f64 {
        self.f.iter().sum::<f64>() * self.spacing()
    }

    /// `∫ f² dξ`.
    pub fn energy(&self) -> f64 {
        self.f.iter().map(|v| v * v).sum::<f64>() * self.spacing()
    }

    fn wavenumbers(&self) -> Vec<f64> {
        let n = self.f.len();
        (0..n)
            .map(|i| {
                let m = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
                2.0 * PI * m / self.length
            })
            .collect()
    }
}

/// Lab-frame densities of the soliton on branch `model` at time `t`.
pub fn analytic_soliton_at(
    model: &KdvModel,
    scaling: &ScalingParams,
    bg: &BackgroundState,
    x: &[f64],
    t: f64,
) -> Result<Vec<Vec<f64>>> {
    let profile = soliton_profile(model, scaling)?;
    Ok(reconstruct_fields(model, &profile, scaling, bg, x, t).rho)
}

/// Exact solution of `f_τ + A f''' = 0`: mode `k` picks up `exp(i A k³ τ)`.
pub fn linear_kdv_evolve(f0: &KdvGridState, dispersion: f64, tau_end: f64) -> KdvGridState {
    let n = f0.f.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex64> = f0.f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fwd.process(&mut buf);
    for (z, k) in buf.iter_mut().zip(f0.wavenumbers()) {
        *z *= Complex64::from_polar(1.0 / n as f64, dispersion * k * k * k * tau_end);
    }
    inv.process(&mut buf);
    KdvGridState {
        xi_min: f0.xi_min,
        length: f0.length,
        tau: f0.tau + tau_end,
        f: buf.iter().map(|z| z.re).collect(),
    }
}

/// Integrating-factor RK4 pseudo-spectral solution of
/// `f_τ + B f f' + A f''' = 0` over a slow-time span `tau_end`.
pub fn numeric_kdv_evolve(
    f0: &KdvGridState,
    dispersion: f64,
    nonlinearity: f64,
    tau_end: f64,
) -> Result<KdvGridState> {
    if !(tau_end.is_finite() && tau_end >= 0.0) {
        return Err(Error::invalid("tau_end", format!("must be non-negative, got {tau_end}")));
    }
    let n = f0.f.len();
    let d = f0.spacing();
    let fmax = f0.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut dt_max = f64::INFINITY;
    if dispersion != 0.0 {
        dt_max = dt_max.min(DISPERSIVE_STEP * d.powi(3) / dispersion.abs());
    }
    if nonlinearity != 0.0 && fmax > 0.0 {
        dt_max = dt_max.min(ADVECTIVE_STEP * d / (nonlinearity.abs() * fmax));
    }
    if tau_end == 0.0 {
        return Ok(f0.clone());
    }
    let steps = if dt_max.is_finite() {
        (tau_end / dt_max).ceil().max(1.0) as usize
    } else {
        1
    };
    let dt = tau_end / steps as f64;

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let k = f0.wavenumbers();
    // derivative symbol with the unpaired Nyquist mode removed
    let ik: Vec<Complex64> = k
        .iter()
        .enumerate()
        .map(|(i, kk)| {
            if n % 2 == 0 && i == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, *kk)
            }
        })
        .collect();
    let half: Vec<Complex64> = k
        .iter()
        .map(|kk| Complex64::from_polar(1.0, dispersion * kk * kk * kk * 0.5 * dt))
        .collect();
    let full: Vec<Complex64> = half.iter().map(|e| e * e).collect();
    let scale = 1.0 / n as f64;

    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    let mut nonlinear = |u: &[Complex64], out: &mut Vec<Complex64>| {
        scratch.copy_from_slice(u);
        inv.process(&mut scratch);
        for z in scratch.iter_mut() {
            let r = z.re * scale;
            *z = Complex64::new(r * r, 0.0);
        }
        fwd.process(&mut scratch);
        out.clear();
        out.extend(scratch.iter().zip(&ik).map(|(s, d)| -0.5 * nonlinearity * d * s));
    };

    let mut u: Vec<Complex64> = f0.f.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fwd.process(&mut u);
    let norm0 = f0.energy().sqrt().max(f64::MIN_POSITIVE);
    let (mut k1, mut k2, mut k3, mut k4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut tmp = vec![Complex64::new(0.0, 0.0); n];
    for step in 1..=steps {
        nonlinear(&u, &mut k1);
        for i in 0..n {
            tmp[i] = half[i] * (u[i] + 0.5 * dt * k1[i]);
        }
        nonlinear(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = half[i] * u[i] + 0.5 * dt * k2[i];
        }
        nonlinear(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = full[i] * u[i] + dt * half[i] * k3[i];
        }
        nonlinear(&tmp, &mut k4);
        for i in 0..n {
            u[i] = full[i] * u[i]
                + dt / 6.0 * (full[i] * k1[i] + 2.0 * half[i] * (k2[i] + k3[i]) + k4[i]);
        }
        if step % 64 == 0 || step == steps {
            let energy: f64 = u.iter().map(|z| z.norm_sqr()).sum::<f64>() * scale * scale * n as f64 * d;
            if !energy.is_finite() || energy.sqrt() > BLOWUP_FACTOR * norm0 && norm0 > f64::MIN_POSITIVE {
                return Err(Error::IntegrationFailure {
                    step,
                    reason: format!("KdV norm grew beyond {BLOWUP_FACTOR}x its initial value"),
                });
            }
        }
    }
    inv.process(&mut u);
    Ok(KdvGridState {
        xi_min: f0.xi_min,
        length: f0.length,
        tau: f0.tau + tau_end,
        f: u.iter().map(|z| z.re * scale).collect(),
    })
}

/// Position of the extremum of `sign·values` within `half_width` of
/// `center`, refined by a parabola through the three samples around the
/// discrete extremum. `None` if the window holds fewer than three samples.
pub fn locate_extremum(x: &[f64], values: &[f64], sign: f64, center: f64, half_width: f64) -> Option<f64> {
    let idx: Vec<usize> = (0..x.len()).filter(|&i| (x[i] - center).abs() <= half_width).collect();
    if idx.len() < 3 {
        return None;
    }
    let best = *idx
        .iter()
        .max_by(|&&a, &&b| (sign * values[a]).total_cmp(&(sign * values[b])))?;
    if best == 0 || best + 1 >= x.len() {
        return Some(x[best]);
    }
    let (ym, y0, yp) = (sign * values[best - 1], sign * values[best], sign * values[best + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let shift = if denom != 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
    let h = x[best + 1] - x[best];
    Some(x[best] + shift.clamp(-0.5, 0.5) * h)
}

/// Least-squares slope of `positions` against `times`.
pub fn fit_speed(times: &[f64], positions: &[f64]) -> f64 {
    let n = times.len() as f64;
    let mt = times.iter().sum::<f64>() / n;
    let mp = positions.iter().sum::<f64>() / n;
    let num: f64 = times.iter().zip(positions).map(|(t, p)| (t - mt) * (p - mp)).sum();
    let den: f64 = times.iter().map(|t| (t - mt).powi(2)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::SolitonProfile;

    #[test]
    fn linear_single_mode() {
        let n = 64;
        let l = 2.0 * PI;
        let kk = 3.0;
        let f0: Vec<f64> = (0..n).map(|i| (kk * i as f64 * l / n as f64).sin()).collect();
        let s = KdvGridState::new(0.0, l, 0.0, f0.clone()).unwrap();
        let a = -0.37;
        let tau = 1.3;
        let out = linear_kdv_evolve(&s, a, tau);
        for (i, v) in out.f.iter().enumerate() {
            let xi = i as f64 * l / n as f64;
            assert!((v - (kk * xi + a * kk.powi(3) * tau).sin()).abs() < 1e-12);
        }
        let same = linear_kdv_evolve(&s, a, 0.0);
        for (u, v) in same.f.iter().zip(&f0) {
            assert!((u - v).abs() < 1e-14);
        }
        assert!((out.energy() - s.energy()).abs() < 1e-12 * s.energy());
    }

    #[test]
    fn zero_stays_zero() {
        let s = KdvGridState::new(0.0, 10.0, 0.0, vec![0.0; 32]).unwrap();
        let out = numeric_kdv_evolve(&s, 1.0, 2.0, 1.0).unwrap();
        assert!(out.f.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn soliton_travels_undistorted() {
        let (a, b, speed) = (1.0, 6.0, 1.0);
        let prof = SolitonProfile::new(a, b, speed).unwrap();
        // width 2/√𝒱 = 2, ten widths at speed A𝒱 = 1
        let tau = 20.0;
        let s = KdvGridState::from_profile(&prof, -40.0, 80.0, 512, 0.0).unwrap();
        let out = numeric_kdv_evolve(&s, a, b, tau).unwrap();
        let exact = KdvGridState::from_profile(&prof, -40.0, 80.0, 512, tau).unwrap();
        let err = out.f.iter().zip(&exact.f).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4 * prof.peak().abs(), "{err}");
        assert!((out.mass() - s.mass()).abs() < 1e-10 * s.mass().abs());
        assert!((out.energy() - s.energy()).abs() < 1e-6 * s.energy());
    }

    #[test]
    fn zero_nonlinearity_matches_exact_solution() {
        let f: Vec<f64> = (0..128).map(|i| (-((i as f64 - 64.0) * 0.2).powi(2)).exp()).collect();
        let s = KdvGridState::new(-12.8, 25.6, 0.0, f).unwrap();
        let a = -0.15;
        let num = numeric_kdv_evolve(&s, a, 0.0, 3.0).unwrap();
        let ex = linear_kdv_evolve(&s, a, 3.0);
        let err = num.f.iter().zip(&ex.f).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn extremum_refinement() {
        let x: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| -(v - 4.321).powi(2)).collect();
        let p = locate_extremum(&x, &y, 1.0, 4.0, 1.0).unwrap();
        assert!((p - 4.321).abs() < 1e-10);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((locate_extremum(&x, &neg, -1.0, 4.5, 2.0).unwrap() - 4.321).abs() < 1e-10);
        assert_eq!(locate_extremum(&x, &y, 1.0, 50.0, 1.0), None);
        assert!((fit_speed(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }
}
