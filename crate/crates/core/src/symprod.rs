//! Elementary symmetric polynomials.
//!
//! `e_k(γ_1, …, γ_N)` is the sum over all k-subsets of the product of their
//! entries, with `e_0 = 1` and `e_k = 0` for `k > N`. All orders are built
//! with the triangle recurrence `e_k(n) = e_k(n-1) + γ_n e_{k-1}(n-1)`,
//! which costs `O(N·k)` and never enumerates subsets.

use std::ops::Deref;

/// Ordered list of real values fed to the symmetric polynomials.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GammaList(Vec<f64>);

impl GammaList {
    pub fn new(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        GammaList(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn elem_sym(&self, k: usize) -> f64 {
        elem_sym(&self.0, k)
    }

    pub fn elem_sym_all(&self) -> Vec<f64> {
        elem_sym_all(&self.0)
    }

    /// The list with `value` appended.
    pub fn with(&self, value: f64) -> Self {
        let mut v = self.0.clone();
        v.push(value);
        GammaList(v)
    }

    /// The list with the entry at `index` removed.
    pub fn without(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v.remove(index);
        GammaList(v)
    }
}

impl Deref for GammaList {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for GammaList {
    fn from(v: Vec<f64>) -> Self {
        GammaList::new(v)
    }
}

/// `e_k` of `values`. Total: `k = 0` gives 1 and `k > N` gives 0.
pub fn elem_sym(values: &[f64], k: usize) -> f64 {
    if k > values.len() {
        return 0.0;
    }
    // Only orders up to k are needed.
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for (n, &g) in values.iter().enumerate() {
        let top = k.min(n + 1);
        for j in (1..=top).rev() {
            e[j] += g * e[j - 1];
        }
    }
    e[k]
}

/// `(e_0, e_1, …, e_N)` of `values` in a single pass.
pub fn elem_sym_all(values: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; values.len() + 1];
    e[0] = 1.0;
    for (n, &g) in values.iter().enumerate() {
        for j in (1..=n + 1).rev() {
            e[j] += g * e[j - 1];
        }
    }
    e
}
