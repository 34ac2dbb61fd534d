//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails. Tolerances are the constants below.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use vnls_kdv::harness::{self, ComparisonRun, RunConfig};
use vnls_kdv::reduction::{kdv_coefficients, Branch};
use vnls_kdv::spectrum::{
    char_poly, continue_eigenpair, eigensystem, factored_char_poly, second_order_eigenvalue, BackgroundState,
    CouplingModel,
};
use vnls_kdv::symprod::GammaList;

const QUOTED_TOL: f64 = 1e-3;
const CLOSED_FORM_REL: f64 = 1e-10;
const SPECTRUM_RUNTIME: Duration = Duration::from_secs(1);
const B_RATIO: f64 = 2.00;
const B_RATIO_TOL: f64 = 0.01;
const PEAK_TOL: f64 = 1e-3;
const SPEED_REL: f64 = 0.02;
const DEGENERATE_TOL: f64 = 1e-12;
const CHARPOLY_INSTANCES: usize = 200;
const CHARPOLY_REL: f64 = 1e-8;
const CONTINUATION_INSTANCES: usize = 50;
const CONTINUATION_TOL: f64 = 1e-8;
const RICHARDSON_SLOPE: f64 = 2.9;
const SERIES_REL: f64 = 1e-14;
const NORM_DRIFT: f64 = 1e-6;
const HAMILTONIAN_DRIFT: f64 = 1e-4;
const DESK_RUNTIME: Duration = Duration::from_secs(300);
const MATCH_FRACTION: f64 = 0.25;
const SYMPROD_LISTS: usize = 1000;
const SYMPROD_REL: f64 = 1e-12;

type Outcome = (bool, String);

struct DeskRun {
    cfg: RunConfig,
    run: ComparisonRun,
    elapsed: Duration,
}

/// Desk comparison for the fast (index 0) and slow (index 1) right movers,
/// computed once and shared by criteria 4, 8 and 9.
fn desk_runs() -> &'static [DeskRun; 2] {
    static RUNS: OnceLock<[DeskRun; 2]> = OnceLock::new();
    RUNS.get_or_init(|| {
        let go = |branch: i32| {
            let cfg = RunConfig::preset("desk").unwrap().with_branch(branch).unwrap();
            let start = Instant::now();
            let run = harness::compare(&cfg).expect("desk comparison");
            DeskRun {
                cfg,
                run,
                elapsed: start.elapsed(),
            }
        };
        std::thread::scope(|s| {
            let fast = s.spawn(|| go(2));
            let slow = s.spawn(|| go(1));
            [fast.join().unwrap(), slow.join().unwrap()]
        })
    })
}

fn sec5() -> RunConfig {
    RunConfig::preset("paper-sec5").unwrap()
}

fn check(pass: bool, msg: String) -> Outcome {
    (pass, msg)
}

// 1. sound speeds
fn sound_speeds() -> Outcome {
    let cfg = sec5();
    let start = Instant::now();
    let run = harness::spectrum(&cfg).unwrap();
    let elapsed = start.elapsed();
    let sp = run.spectrum.expect("stable");
    // ascending order: +2 is the fast branch
    let (fast, slow) = (sp.lambda[1], sp.lambda[0]);
    let pass = (fast - 1.013).abs() <= QUOTED_TOL
        && (slow - 0.270).abs() <= QUOTED_TOL
        && elapsed < SPECTRUM_RUNTIME;
    check(
        pass,
        format!("lambda fast = {fast:.6} (1.013), slow = {slow:.6} (0.270), runtime {elapsed:?}"),
    )
}

/// Printed two-component closed forms with `A = g1ρ1 + g2ρ2`,
/// `C = g1ρ1 − g2ρ2`, `B` the discriminant root; fast branch first.
fn printed_n2(g: [f64; 2], h: f64, rho: [f64; 2], hbar: f64) -> [(f64, f64, f64); 2] {
    let a = g[0] * rho[0] + g[1] * rho[1];
    let c = g[0] * rho[0] - g[1] * rho[1];
    let b = (c * c + 4.0 * h * h * rho[0] * rho[1]).sqrt();
    let pre = 3.0 / (8.0 * h * b * rho[0]);
    let disp = |s: f64| -hbar * hbar / (4.0 * 2f64.sqrt()) / s.sqrt();
    [
        (
            ((a + b) / 2.0).sqrt(),
            disp(a + b),
            pre * ((c + b).powi(2) + 2.0 * h * (b - c) * rho[0]),
        ),
        (
            ((a - b) / 2.0).sqrt(),
            disp(a - b),
            -pre * ((c - b).powi(2) - 2.0 * h * (c + b) * rho[0]),
        ),
    ]
}

// 2. dispersion coefficients
fn dispersion() -> Outcome {
    let cfg = sec5();
    let run = harness::coeffs(&cfg, None).unwrap();
    let get = |j: i32| run.rows.iter().find(|r| r.branch.signed() == j).unwrap().model.clone().unwrap();
    let (fast, slow) = (get(2), get(1));
    let printed = printed_n2([1.0, 1.0], 0.5, [1.0, 0.1], 1.0);
    let r1 = rel_err(fast.dispersion, printed[0].1);
    let r2 = rel_err(slow.dispersion, printed[1].1);
    let pass = (fast.dispersion + 0.123).abs() <= QUOTED_TOL
        && (slow.dispersion + 0.462).abs() <= QUOTED_TOL
        && r1 <= CLOSED_FORM_REL
        && r2 <= CLOSED_FORM_REL;
    check(
        pass,
        format!(
            "A fast = {:.6} (-0.123), slow = {:.6} (-0.462); closed-form rel. err {r1:.1e}, {r2:.1e}",
            fast.dispersion, slow.dispersion
        ),
    )
}

// 3. nonlinearity coefficients and the physical peak
fn nonlinearity() -> Outcome {
    let cfg = sec5();
    let run = harness::coeffs(&cfg, None).unwrap();
    let get = |j: i32| run.rows.iter().find(|r| r.branch.signed() == j).unwrap().model.clone().unwrap();
    let (fast, slow) = (get(2), get(1));
    let printed = printed_n2([1.0, 1.0], 0.5, [1.0, 0.1], 1.0);
    let r1 = rel_err(fast.nonlinearity, printed[0].2);
    let r2 = rel_err(slow.nonlinearity, printed[1].2);
    let ratio1 = fast.nonlinearity / 1.372;
    let ratio2 = slow.nonlinearity / 0.728;
    let header = run.table.render();
    let recorded = header.contains("ratio_B = 2.000") && header.contains("ratio_B = 1.999");

    // field-level peak of species 1 from the projection route
    let eps2 = cfg.scaling.epsilon.powi(2);
    let v = cfg.scaling.soliton_speed;
    let peak = eps2 * fast.a[0] * 3.0 * v * fast.dispersion / fast.nonlinearity;
    // the quoted construction: amplitude (C+B)/(4hλ) with f built from the quoted B
    let (c, b) = (0.9f64, 0.91f64.sqrt());
    let quoted = eps2 * (c + b) / (4.0 * 0.5 * 1.013) * 3.0 * v * (-0.123) / 1.372;
    let pass = r1 <= CLOSED_FORM_REL
        && r2 <= CLOSED_FORM_REL
        && (ratio1 - B_RATIO).abs() <= B_RATIO_TOL
        && (ratio2 - B_RATIO).abs() <= B_RATIO_TOL
        && recorded
        && (peak - quoted).abs() <= PEAK_TOL;
    check(
        pass,
        format!(
            "B fast = {:.6}, slow = {:.6} (closed-form rel. err {r1:.1e}, {r2:.1e}); ratio to quoted {ratio1:.4}, {ratio2:.4} \
             (recorded in CSV: {recorded}); peak drho1 = {peak:.5} vs quoted construction {quoted:.5}",
            fast.nonlinearity, slow.nonlinearity
        ),
    )
}

// 4. lab-frame speeds and measured peak speeds
fn lab_speeds() -> Outcome {
    let cfg = sec5();
    let sp = eigensystem(&cfg.coupling, &cfg.bg).unwrap();
    let lab = |j| kdv_coefficients(&sp, &cfg.bg, Branch::right(j)).unwrap().lab_speed(&cfg.scaling);
    let (fast, slow) = (lab(2), lab(1));
    let runs = desk_runs();
    let measured: Vec<(f64, f64)> = runs
        .iter()
        .map(|d| (d.run.fitted_speeds[0], d.run.lab_speed))
        .collect();
    let errs: Vec<f64> = measured.iter().map(|(m, l)| (m / l - 1.0).abs()).collect();
    let second: Vec<f64> = runs.iter().map(|d| d.run.fitted_speeds[1] / d.run.lab_speed - 1.0).collect();
    let pass = (fast - 1.001).abs() <= QUOTED_TOL
        && (slow - 0.224).abs() <= QUOTED_TOL
        && errs.iter().all(|e| *e <= SPEED_REL);
    check(
        pass,
        format!(
            "Lambda fast = {fast:.6} (1.001), slow = {slow:.6} (0.224); species-1 peak speed {:.5} ({:+.2}%), {:.5} ({:+.2}%) \
             [species 2: {:+.2}%, {:+.2}%]",
            measured[0].0,
            100.0 * (measured[0].0 / measured[0].1 - 1.0),
            measured[1].0,
            100.0 * (measured[1].0 / measured[1].1 - 1.0),
            100.0 * second[0],
            100.0 * second[1]
        ),
    )
}

// 5. degenerate branch
fn degenerate_branch() -> Outcome {
    let mut worst = 0.0f64;
    let mut found = 0;
    let cases = [
        (vec![1.0, 1.0, 2.0], 0.3, vec![1.0, 1.0, 0.5]),
        (vec![1.7, 1.7, 0.9], 0.45, vec![0.6, 0.6, 1.3]),
    ];
    for (g, h, rho) in cases {
        let c = CouplingModel::structured(g.clone(), h).unwrap();
        let bg = BackgroundState::new(rho.clone()).unwrap();
        let sp = eigensystem(&c, &bg).unwrap();
        let expect = ((g[0] - h) * rho[0]).sqrt();
        for j in 0..3 {
            if (sp.lambda[j] - expect).abs() <= DEGENERATE_TOL {
                found += 1;
                let m = kdv_coefficients(&sp, &bg, Branch::right(j + 1)).unwrap();
                worst = worst
                    .max((m.lambda - expect).abs())
                    .max(m.nonlinearity.abs())
                    .max((m.dispersion + 1.0 / (8.0 * expect)).abs());
            }
        }
    }
    check(
        found == 2 && worst <= DEGENERATE_TOL,
        format!("{found}/2 instances expose lambda = sqrt((g1-h)rho01); max deviation in lambda, B, A: {worst:.1e}"),
    )
}

// 6. characteristic polynomial
fn characteristic_polynomial() -> Outcome {
    let mut r = rng(6);
    let mut worst = 0.0f64;
    let mut worst_factored = 0.0f64;
    for i in 0..CHARPOLY_INSTANCES {
        let n = 2 + i % 5;
        let (c, bg) = random_instance(&mut r, n);
        let mu = r.random_range(-1.0..8.0);
        let m = shifted(&c, &bg, mu);
        let det = cofactor_det(&m);
        let eval = char_poly(&c, &bg, mu).unwrap();
        let denom = det.abs().max(1e-6 * hadamard_bound(&m));
        worst = worst.max((eval.determinant() - det).abs() / denom);

        let (m1, m2, rest) = (2 + i % 2, 2 + (i / 2) % 2, (i / 4) % 3);
        let (c2, bg2) = random_two_groups(&mut r, m1, m2, rest);
        let mu = r.random_range(-1.0..8.0);
        let direct = char_poly(&c2, &bg2, mu).unwrap();
        let factored = factored_char_poly(&c2, &bg2, mu).unwrap();
        let abs: Vec<f64> = direct.gammas.iter().map(|g| g.abs() + 1.0).collect();
        let floor = 1e-6 * abs.iter().product::<f64>();
        worst_factored = worst_factored.max((factored - direct.value).abs() / direct.value.abs().max(floor));
    }
    check(
        worst <= CHARPOLY_REL && worst_factored <= CHARPOLY_REL,
        format!(
            "{CHARPOLY_INSTANCES} instances: max rel. error vs cofactor determinant {worst:.1e}, two-group factored form {worst_factored:.1e}"
        ),
    )
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `λ² − d_k` for the branch starting at component `k`, from the secular
/// equation `1 + h Σ_j ρ_j / ((g_j − h)ρ_j − λ²) = 0` solved for the shift
/// itself so that it keeps full relative precision at small `h`.
fn secular_shift(d: &[f64], rho: &[f64], k: usize, h: f64) -> f64 {
    let curvature: f64 = (0..d.len())
        .filter(|&j| j != k)
        .map(|j| rho[j] * rho[k] / (d[j] - d[k]))
        .sum();
    let mut delta = -h * h * curvature;
    for _ in 0..100 {
        let (mut f, mut df) = (1.0, 0.0);
        for j in 0..d.len() {
            let den = (d[j] - d[k]) - h * rho[j] - delta;
            f += h * rho[j] / den;
            df += h * rho[j] / (den * den);
        }
        let step = f / df;
        delta -= step;
        if step.abs() <= 1e-17 * delta.abs() {
            break;
        }
    }
    delta
}

// 7. continuation
fn continuation() -> Outcome {
    let mut r = rng(7);
    let mut worst_val = 0.0f64;
    let mut worst_vec = 0.0f64;
    let mut worst_series = 0.0f64;
    let mut min_slope = f64::INFINITY;
    for i in 0..CONTINUATION_INSTANCES {
        let n = 2 + i % 4;
        let (c, bg) = random_nondegenerate(&mut r, n);
        let model = CouplingModel::Structured(c.clone());
        let sp = eigensystem(&model, &bg).unwrap();
        let base = c.with_h(0.0);
        for k in 0..n {
            let end = continue_eigenpair(&base, &bg, k, c.h, 10).unwrap().pop().unwrap();
            // match to the direct pair with the closest eigenvalue
            let j = (0..n)
                .min_by(|&a, &b| {
                    (sp.lambda[a].powi(2) - end.lambda_sq)
                        .abs()
                        .total_cmp(&(sp.lambda[b].powi(2) - end.lambda_sq).abs())
                })
                .unwrap();
            let l2 = sp.lambda[j].powi(2);
            worst_val = worst_val.max((end.lambda_sq - l2).abs() / l2.max(1.0));
            let col = sp.column(j);
            let scale = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            let pivot = end
                .eigenvector
                .iter()
                .copied()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            for (a, b) in end.eigenvector.iter().zip(&col) {
                worst_vec = worst_vec.max((a / pivot - b / scale).abs());
            }
        }
        // second-order series remainder on a geometric ladder of small h,
        // against the shift solved from the secular equation
        let d: Vec<f64> = c.g.iter().zip(&bg.rho0).map(|(g, r)| g * r).collect();
        let mut gap = f64::INFINITY;
        for a in 0..n {
            for b in 0..a {
                gap = gap.min((d[a] - d[b]).abs());
            }
        }
        let h0 = 1e-3 * gap / bg.rho0.iter().copied().fold(0.0, f64::max);
        for k in 0..n {
            let curvature: f64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| bg.rho0[j] * bg.rho0[k] / (d[j] - d[k]))
                .sum();
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for s in 0..5 {
                let h = h0 / 2f64.powi(s);
                let shift = secular_shift(&d, &bg.rho0, k, h);
                let series = second_order_eigenvalue(&c, &bg, k, h);
                worst_series = worst_series.max((series - (d[k] - h * h * curvature)).abs() / d[k]);
                let tracked = continue_eigenpair(&base, &bg, k, h, 2).unwrap().pop().unwrap().lambda_sq;
                worst_val = worst_val.max((tracked - (d[k] + shift)).abs() / d[k].max(1.0));
                xs.push(h.ln());
                ys.push((shift + h * h * curvature).abs().ln());
            }
            min_slope = min_slope.min(least_squares_slope(&xs, &ys));
        }
    }
    check(
        worst_val <= CONTINUATION_TOL
            && worst_vec <= CONTINUATION_TOL
            && worst_series <= SERIES_REL
            && min_slope >= RICHARDSON_SLOPE,
        format!(
            "{CONTINUATION_INSTANCES} instances: max eigenvalue error {worst_val:.1e}, eigenvector error {worst_vec:.1e}, \
             series coefficient error {worst_series:.1e}, min log-log remainder slope {min_slope:.3}"
        ),
    )
}

// 8. conservation
fn conservation() -> Outcome {
    let runs = desk_runs();
    let norm = runs.iter().flat_map(|d| d.run.norm_drift.iter().copied()).fold(0.0, f64::max);
    let ham = runs.iter().map(|d| d.run.hamiltonian_drift).fold(0.0, f64::max);
    let t_end = runs.iter().map(|d| d.run.conserved.last().unwrap().time).fold(f64::INFINITY, f64::min);
    let slowest = runs.iter().map(|d| d.elapsed).max().unwrap();
    check(
        norm < NORM_DRIFT && ham < HAMILTONIAN_DRIFT && t_end >= 30.0 && slowest < DESK_RUNTIME,
        format!("desk runs to t = {t_end:.4}: max norm drift {norm:.2e}, Hamiltonian drift {ham:.2e}, runtime {slowest:.1?}"),
    )
}

// 9. NLS-vs-KdV match and sign structure
fn profile_match() -> Outcome {
    let runs = desk_runs();
    let worst: Vec<f64> = runs
        .iter()
        .map(|d| {
            d.run
                .snapshots
                .iter()
                .flat_map(|s| s.relative_linf.iter().copied())
                .fold(0.0, f64::max)
        })
        .collect();
    let slow = &runs[1].run;
    let signs_ok = slow.setup.amplitudes[0] > 0.0
        && slow.setup.amplitudes[1] < 0.0
        && slow
            .snapshots
            .iter()
            .all(|s| s.nls_peak_deviation[0] > 0.0 && s.nls_peak_deviation[1] < 0.0);
    let last = slow.snapshots.last().unwrap();
    let t_end = runs[0].cfg.snapshot_times.last().copied().unwrap();
    check(
        worst.iter().all(|w| *w < MATCH_FRACTION) && signs_ok,
        format!(
            "max relative L-inf error through t = {t_end}: fast {:.4}, slow {:.4} (limit {MATCH_FRACTION}); \
             slow branch at t = {:.2}: species 1 {:+.4} (bump), species 2 {:+.4} (dip)",
            worst[0], worst[1], last.time, last.nls_peak_deviation[0], last.nls_peak_deviation[1]
        ),
    )
}

// 10. symmetric-product identities
fn symmetric_products() -> Outcome {
    let mut r = rng(10);
    let mut worst = 0.0f64;
    for _ in 0..SYMPROD_LISTS {
        let n = r.random_range(1..=10);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let x: f64 = r.random_range(-2.0..2.0);
        let list = GammaList::new(v.clone());
        let abs = GammaList::new(v.iter().map(|a| a.abs()).collect());
        let ext = list.with(x);
        let ext_abs = abs.with(x.abs());
        for k in 1..=n + 1 {
            let rhs = list.elem_sym(k) + x * list.elem_sym(k - 1);
            worst = worst.max((ext.elem_sym(k) - rhs).abs() / ext_abs.elem_sym(k).max(f64::MIN_POSITIVE));
        }
        for k in 0..=n {
            let sum: f64 = (0..n).map(|i| list.without(i).elem_sym(k)).sum();
            let rhs = (n - k) as f64 * list.elem_sym(k);
            let scale = ((n - k) as f64 * abs.elem_sym(k)).max(f64::MIN_POSITIVE);
            if n > k {
                worst = worst.max((sum - rhs).abs() / scale);
            }
        }
    }
    check(
        worst <= SYMPROD_REL,
        format!("{SYMPROD_LISTS} lists, N <= 10: max relative deviation {worst:.1e}"),
    )
}

fn invoke(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_vnls-kdv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

// 11. determinism
fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    // full-resolution runs are shortened to the first half time unit
    let mut short = sec5().to_toml();
    let line = short.lines().find(|l| l.starts_with("snapshot_times")).unwrap().to_string();
    short = short.replace(&line, "snapshot_times = [0.0, 0.5]");
    let short_path = tmp.path().join("paper-sec5-short.toml");
    std::fs::write(&short_path, short).unwrap();
    let short_arg = short_path.to_str().unwrap();

    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("paper-sec5 spectrum", vec!["spectrum", "--preset", "paper-sec5"]),
        ("paper-sec5 coeffs", vec!["coeffs", "--preset", "paper-sec5"]),
        ("paper-sec5 sweep-h", vec!["sweep-h", "--preset", "paper-sec5"]),
        ("paper-sec5 compare (t <= 0.5)", vec!["compare", "--config", short_arg]),
        ("paper-sec5 simulate (t <= 0.5)", vec!["simulate", "--config", short_arg]),
        ("desk spectrum", vec!["spectrum", "--preset", "desk"]),
        ("desk coeffs", vec!["coeffs", "--preset", "desk"]),
        ("desk sweep-h", vec!["sweep-h", "--preset", "desk"]),
        ("desk compare", vec!["compare", "--preset", "desk"]),
        ("desk simulate", vec!["simulate", "--preset", "desk"]),
    ];
    let mut files = 0;
    let mut failures = Vec::new();
    for (i, (name, args)) in runs.iter().enumerate() {
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        if !(invoke(args, &a) && invoke(args, &b)) {
            failures.push(format!("{name}: run failed"));
            continue;
        }
        let (x, y) = (dir_bytes(&a), dir_bytes(&b));
        files += x.len();
        if x.is_empty() || x != y {
            failures.push(format!("{name}: outputs differ"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{} invocations run twice, {files} CSV files byte-identical", runs.len())
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("sound speeds", sound_speeds),
        ("dispersion coefficients", dispersion),
        ("nonlinearity coefficients", nonlinearity),
        ("lab-frame speeds", lab_speeds),
        ("degenerate branch", degenerate_branch),
        ("characteristic polynomial", characteristic_polynomial),
        ("continuation", continuation),
        ("conservation", conservation),
        ("NLS vs KdV match", profile_match),
        ("symmetric products", symmetric_products),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (pass, detail) = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        });
        if !pass {
            failed += 1;
        }
        println!("criterion {:>2} [{}] {name}: {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
