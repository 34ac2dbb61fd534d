#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vnls_kdv::spectrum::{is_positive_definite, BackgroundState, StructuredGh};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    match n {
        0 => 1.0,
        1 => m[(0, 0)],
        _ => (0..n)
            .map(|j| {
                let minor = m.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * m[(0, j)] * cofactor_det(&minor)
            })
            .sum(),
    }
}

/// `Π_i Σ_j |m_ij|`, an upper bound on `|det m|` used to scale tolerances.
pub fn hadamard_bound(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).product()
}

/// `α ρ − μ I`.
pub fn shifted(coupling: &StructuredGh, bg: &BackgroundState, mu: f64) -> DMatrix<f64> {
    let n = coupling.n();
    let alpha = coupling.alpha();
    DMatrix::from_fn(n, n, |i, j| alpha[(i, j)] * bg.rho0[j] - if i == j { mu } else { 0.0 })
}

/// Random positive-definite structured coupling with `h > 0`.
pub fn random_instance(rng: &mut StdRng, n: usize) -> (StructuredGh, BackgroundState) {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
        let h = rng.random_range(0.02..0.95) * gmin;
        let c = StructuredGh::new(g, h).unwrap();
        if is_positive_definite(&c.alpha()) {
            return (c, BackgroundState::new(rho).unwrap());
        }
    }
}

/// Random instance whose `(ρ0 g, ρ0)` pairs are all distinct, with `h > 0`.
pub fn random_nondegenerate(rng: &mut StdRng, n: usize) -> (StructuredGh, BackgroundState) {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
        let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let mut d: Vec<f64> = g.iter().zip(&rho).map(|(a, b)| a * b).collect();
        d.sort_by(f64::total_cmp);
        if d.windows(2).any(|w| w[1] - w[0] < 0.05) {
            continue;
        }
        let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
        let h = rng.random_range(0.05..0.6) * gmin;
        let c = StructuredGh::new(g, h).unwrap();
        return (c, BackgroundState::new(rho).unwrap());
    }
}

/// Random instance with two repeated `(ρ0 g, ρ0)` groups of sizes `m1, m2`
/// plus `rest` generic components.
pub fn random_two_groups(
    rng: &mut StdRng,
    m1: usize,
    m2: usize,
    rest: usize,
) -> (StructuredGh, BackgroundState) {
    loop {
        let (g1, r1): (f64, f64) = (rng.random_range(0.5..3.0), rng.random_range(0.1..2.0));
        let (g2, r2): (f64, f64) = (rng.random_range(0.5..3.0), rng.random_range(0.1..2.0));
        if (g1 * r1 - g2 * r2).abs() < 0.05 {
            continue;
        }
        let mut g = vec![g1; m1];
        let mut rho = vec![r1; m1];
        g.extend(std::iter::repeat_n(g2, m2));
        rho.extend(std::iter::repeat_n(r2, m2));
        for _ in 0..rest {
            g.push(rng.random_range(0.5..3.0));
            rho.push(rng.random_range(0.1..2.0));
        }
        let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
        let h = rng.random_range(0.05..0.9) * gmin;
        let c = StructuredGh::new(g, h).unwrap();
        if is_positive_definite(&c.alpha()) {
            return (c, BackgroundState::new(rho).unwrap());
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
