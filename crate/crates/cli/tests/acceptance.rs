//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances, sizes and seeds are fixed below.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use adjwalk_cli::experiments::{
    self, approaches_one, coupling_pair_trials, random_interval_pairs, scheme_suite, stationary_ks,
    two_site_envelope,
};
use adjwalk_cli::manifest::{ExperimentKind, ExperimentManifest, ParamsSpec};
use adjwalk_cli::output::Outcome;
use adjwalk_core::coupling::simulate_coupled;
use adjwalk_core::distributions::{IntervalBeta, tv_interval_betas};
use adjwalk_core::hydro::{
    SchemeKind, Transform, default_dt, empirical_t_of_mean, exact_fx, initial_profile, integrate_scheme,
    pde_residual_s, smooth_interior_points,
};
use adjwalk_core::mixing::{Regime, cutoff_scale, cutoff_sweep, tv_profile, window_from_profile};
use adjwalk_core::process::{Configuration, ModelParams, sample_stationary, simulate_x};
use adjwalk_core::quadrature::integrate;
use adjwalk_core::rng::{derive_seed, par_trajectories, seed_stream};
use adjwalk_core::spectral::{decay_check, gamma_n};

const MASTER_SEED: u64 = 20_250_101;

// Criterion 1 and 2
const KS_SAMPLES: usize = 10_000;
const KS_P_MIN: f64 = 0.01;
// Criterion 3
const DECAY_TRAJECTORIES: usize = 10_000;
const BOOTSTRAP_REPS: usize = 1000;
// Criterion 4
const PAIRS: usize = 10;
const PAIR_TRIALS: usize = 100_000;
const MERGE_SE: f64 = 3.0;
/// Twenty marginal KS tests share a 1% family level.
const PAIR_KS_P_MIN: f64 = 0.01 / 20.0;
const ORACLE_AGREEMENT: f64 = 1e-9;
// Criterion 6
const TWO_SITE_TRAJECTORIES: usize = 10_000;
const TWO_SITE_FINE_STEP: f64 = 0.01;
const TWO_SITE_WIDTH: f64 = 0.2;
// Criterion 7
const SCHEME_AGREEMENT: f64 = 1e-6;
const EMPIRICAL_TRAJECTORIES: usize = 10_000;
const EMPIRICAL_SE: f64 = 3.0;
// Criterion 8
const SUP_EPS: f64 = 0.1;
const SUP_FX_MAX: f64 = 0.1;
const SUP_FM_MAX: f64 = 0.15;
// Criterion 12
const RESIDUAL_POINTS: usize = 1000;
const RESIDUAL_H: f64 = 1e-4;
const RESIDUAL_MAX: f64 = 1e-6;
const RESIDUAL_MARGIN: f64 = 0.05;
/// Halving `h` must divide the residual by a factor in this range.
const SECOND_ORDER_RATIO: (f64, f64) = (3.5, 4.5);
// Criterion 13 and 14
const MIXING_TRAJECTORIES: usize = 1000;
const EPSILON: f64 = 0.25;
const CUTOFF_LOWER_MIN: f64 = 0.9;
const CUTOFF_UPPER_MAX: f64 = 0.1;
const FIXED_SLACK: f64 = 0.25;

struct Verdict {
    id: usize,
    name: &'static str,
    passed: bool,
    detail: String,
    seconds: f64,
    budget: Option<f64>,
}

struct Suite {
    verdicts: Vec<Verdict>,
    /// Order violations over every coupled run, for criterion 5.
    violations: u64,
    coupled_runs: usize,
}

impl Suite {
    fn run<F>(&mut self, id: usize, name: &'static str, budget: Option<f64>, f: F)
    where
        F: FnOnce(&mut Suite) -> Result<(bool, String), String>,
    {
        let start = Instant::now();
        let (ok, detail) = f(self).unwrap_or_else(|e| (false, format!("error: {e}")));
        let seconds = start.elapsed().as_secs_f64();
        let in_time = budget.is_none_or(|b| seconds <= b);
        let detail = if in_time { detail } else { format!("{detail}; over the runtime budget") };
        let v = Verdict { id, name, passed: ok && in_time, detail, seconds, budget };
        println!("{}", line(&v));
        self.verdicts.push(v);
    }
}

fn line(v: &Verdict) -> String {
    let budget = v.budget.map_or(String::new(), |b| format!(" / {b:.0} s"));
    format!(
        "criterion {:>2} {}  {}: {} [{:.1} s{budget}]",
        v.id,
        if v.passed { "PASS" } else { "FAIL" },
        v.name,
        v.detail,
        v.seconds
    )
}

fn params(n: usize, lambda: f64) -> ModelParams {
    ModelParams::new(n, lambda, 1.0).expect("valid parameters")
}

fn manifest(kind: ExperimentKind, f: impl FnOnce(&mut ExperimentManifest)) -> ExperimentManifest {
    let mut m = ExperimentManifest::defaults(kind);
    f(&mut m);
    m
}

fn failed_checks(o: &Outcome) -> Vec<String> {
    o.checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({})", c.name, c.detail)).collect()
}

fn ks_verdict(rows: &[(usize, f64, f64, f64, f64)]) -> (bool, String) {
    let ok = rows.iter().all(|r| r.4 > KS_P_MIN);
    let detail = rows.iter().map(|r| format!("k={} p={:.3}", r.0, r.4)).collect::<Vec<_>>().join(", ");
    (ok, format!("{detail}; need p > {KS_P_MIN}"))
}

fn c1(_: &mut Suite) -> Result<(bool, String), String> {
    let p = params(64, 0.2);
    let samples = par_trajectories(KS_SAMPLES, derive_seed(MASTER_SEED, "c1"), |_, rng| sample_stationary(&p, rng));
    Ok(ks_verdict(&stationary_ks(&p, &samples)))
}

fn c2(_: &mut Suite) -> Result<(bool, String), String> {
    let p = params(32, 0.3);
    let samples = par_trajectories(KS_SAMPLES, derive_seed(MASTER_SEED, "c2"), |_, rng| {
        let start = sample_stationary(&p, rng);
        simulate_x(&start, &p, 10.0, &[], rng, |_, _, _| {})
    });
    Ok(ks_verdict(&stationary_ks(&p, &samples)))
}

fn c3(_: &mut Suite) -> Result<(bool, String), String> {
    let p = params(32, 0.3);
    let times: Vec<f64> = (1..=10).map(|i| 2.0 * i as f64).collect();
    let fit = decay_check(&p, &times, DECAY_TRAJECTORIES, derive_seed(MASTER_SEED, "c3"), BOOTSTRAP_REPS)
        .map_err(|e| e.to_string())?;
    let gamma = gamma_n(&p);
    let expected = -(1.0 - 0.91f64.sqrt() * (std::f64::consts::PI / 32.0).cos());
    let ok = (gamma - expected).abs() < 1e-15 && fit.ci_low <= gamma && gamma <= fit.ci_high;
    Ok((ok, format!("slope {:.6}, 95% CI [{:.6}, {:.6}], γ_N = {gamma:.6}", fit.slope, fit.ci_low, fit.ci_high)))
}

/// `1 - TV` by adaptive quadrature of `min(ρ_lower, ρ_upper)`.
fn overlap_by_quadrature(lo: &IntervalBeta, up: &IntervalBeta) -> f64 {
    let (a, b) = (up.left, lo.right);
    if b <= a {
        return 0.0;
    }
    let mut cuts = vec![a, b];
    // Split where the densities cross, located on a fine grid.
    let grid = 4096;
    let diff = |x: f64| lo.pdf(x) - up.pdf(x);
    for i in 1..grid {
        let (x0, x1) = (a + (b - a) * (i - 1) as f64 / grid as f64, a + (b - a) * i as f64 / grid as f64);
        if diff(x0).signum() != diff(x1).signum() {
            let (mut l, mut r) = (x0, x1);
            for _ in 0..100 {
                let mid = 0.5 * (l + r);
                if diff(mid).signum() == diff(l).signum() {
                    l = mid;
                } else {
                    r = mid;
                }
            }
            cuts.push(0.5 * (l + r));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| integrate(|x| lo.pdf(x).min(up.pdf(x)), w[0], w[1], 1e-13)).sum()
}

fn c4(s: &mut Suite) -> Result<(bool, String), String> {
    let seed = derive_seed(MASTER_SEED, "c4");
    let mut ok = true;
    let mut worst_z: f64 = 0.0;
    let mut worst_ks: f64 = 1.0;
    let mut worst_oracle: f64 = 0.0;
    for (i, (lo, up)) in random_interval_pairs(PAIRS, seed).iter().enumerate() {
        let p_merge = overlap_by_quadrature(lo, up);
        let closed_form = 1.0 - tv_interval_betas(lo, up).map_err(|e| e.to_string())?;
        worst_oracle = worst_oracle.max((p_merge - closed_form).abs());
        let r = coupling_pair_trials(lo, up, p_merge, PAIR_TRIALS, derive_seed(seed, &format!("pair/{i}")))
            .map_err(|e| e.to_string())?;
        s.violations += r.order_violations as u64;
        s.coupled_runs += PAIR_TRIALS;
        let z = (r.merge_frequency - p_merge).abs() / r.se;
        worst_z = worst_z.max(z);
        worst_ks = worst_ks.min(r.ks_lower).min(r.ks_upper);
        ok &= z <= MERGE_SE && r.ks_lower > PAIR_KS_P_MIN && r.ks_upper > PAIR_KS_P_MIN;
    }
    ok &= worst_oracle <= ORACLE_AGREEMENT;
    Ok((
        ok,
        format!(
            "max |freq - (1-TV)|/se = {worst_z:.2} ≤ {MERGE_SE}, min KS p = {worst_ks:.4} > {PAIR_KS_P_MIN}, \
             quadrature vs closed form {worst_oracle:.1e}"
        ),
    ))
}

fn c5(s: &mut Suite) -> Result<(bool, String), String> {
    // A long coupled run from the extremes, on top of the runs of criteria 4, 6, 13 and 14.
    let p = params(32, 0.3);
    let extra = par_trajectories(200, derive_seed(MASTER_SEED, "c5"), |_, rng| {
        let lower = Configuration::min(32);
        simulate_coupled(&Configuration::max(32), &lower, &p, 2.0 * cutoff_scale(&p), &[], false, rng, |_, _, _| {})
            .map(|r| r.order_violations)
    });
    for v in extra {
        s.violations += v.map_err(|e| e.to_string())?;
        s.coupled_runs += 1;
    }
    Ok((s.violations == 0, format!("{} violations over {} coupled runs and draws", s.violations, s.coupled_runs)))
}

fn c6(s: &mut Suite) -> Result<(bool, String), String> {
    let p = params(2, 0.3);
    let coarse: Vec<f64> = (1..=8).map(|i| 0.5 * i as f64).collect();
    let profile = tv_profile(&p, &coarse, TWO_SITE_TRAJECTORIES, derive_seed(MASTER_SEED, "c6/coarse"))
        .map_err(|e| e.to_string())?;
    let (envelope_ok, worst) = two_site_envelope(&profile);
    s.violations += profile.order_violations;
    s.coupled_runs += TWO_SITE_TRAJECTORIES;
    let fine: Vec<f64> = (1..=400).map(|i| TWO_SITE_FINE_STEP * i as f64).collect();
    let profile = tv_profile(&p, &fine, TWO_SITE_TRAJECTORIES, derive_seed(MASTER_SEED, "c6/fine"))
        .map_err(|e| e.to_string())?;
    s.violations += profile.order_violations;
    s.coupled_runs += TWO_SITE_TRAJECTORIES;
    let w = window_from_profile(profile, EPSILON);
    let target = 4.0f64.ln();
    let width = w.t_upper.map(|tu| (tu - w.t_lower) / target);
    let window_ok = w.contains(target) && width.is_some_and(|x| x <= TWO_SITE_WIDTH);
    Ok((
        envelope_ok && window_ok,
        format!(
            "max |TV est - e^-t|/se = {worst:.2} ≤ 3; window [{:.2}, {:?}] ∋ log 4, relative width {:?} ≤ {TWO_SITE_WIDTH}",
            w.t_lower, w.t_upper, width
        ),
    ))
}

fn c7(_: &mut Suite) -> Result<(bool, String), String> {
    let p = params(16, 0.5);
    let times = [0.5, 1.0, 2.0, 4.0];
    let exact = exact_fx(&p, &times).map_err(|e| e.to_string())?;
    let init = initial_profile(&SchemeKind::X, &p);
    let rk4 = integrate_scheme(&SchemeKind::X, &init, &p, 4.0, default_dt(&p), 0.5).map_err(|e| e.to_string())?;
    // The spectral solution evaluated at the times RK4 actually stored.
    let mut scheme_gap: f64 = 0.0;
    for &t in &times {
        let r = rk4.iter().min_by(|a, b| (a.time - t).abs().total_cmp(&(b.time - t).abs())).ok_or("no RK4 output")?;
        let g = &exact_fx(&p, &[r.time]).map_err(|e| e.to_string())?[0];
        for (a, b) in g.values.iter().zip(&r.values) {
            scheme_gap = scheme_gap.max((a - b).abs());
        }
    }
    let emp = empirical_t_of_mean(&p, &times, EMPIRICAL_TRAJECTORIES, derive_seed(MASTER_SEED, "c7"))
        .map_err(|e| e.to_string())?;
    let n = p.n();
    let tr = Transform::new(&p).map_err(|e| e.to_string())?;
    // Sites that no run has moved have zero sample variance; the floor is the
    // mean shift that leaves all runs unmoved with probability 1e-6.
    let floor = n as f64 * 1e6f64.ln() / EMPIRICAL_TRAJECTORIES as f64;
    let mut worst: f64 = 0.0;
    for ((g, se), fx) in emp.iter().zip(&exact) {
        for k in 0..=n {
            let d = (g.values[k] - fx.values[k]).abs();
            let u = (tr.invert(fx.values[k]) - floor).max(0.0);
            worst = worst.max(d / (EMPIRICAL_SE * se[k] + tr.derivative(u).abs() * floor));
        }
    }
    Ok((
        scheme_gap <= SCHEME_AGREEMENT && worst <= 1.0,
        format!("spectral vs RK4 {scheme_gap:.2e} ≤ {SCHEME_AGREEMENT:e}; max |T(Ê X) - f_X|/(3 se + floor) = {worst:.3} ≤ 1"),
    ))
}

struct SchemeRuns {
    sizes: Vec<usize>,
    suites: Vec<experiments::SchemeSuite>,
}

fn scheme_runs() -> Result<SchemeRuns, String> {
    let sizes = vec![64, 128, 256, 512];
    let suites = sizes
        .iter()
        .map(|&n| scheme_suite(&params(n, (n as f64).powf(-0.5)), 4.0).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    Ok(SchemeRuns { sizes, suites })
}

fn c8(runs: &SchemeRuns) -> Result<(bool, String), String> {
    let mut ok = true;
    let mut rows = Vec::new();
    for t in [1.0, 2.0, 3.0, 4.0] {
        let fx: Vec<f64> = runs.suites.iter().map(|s| s.sup_fx(t, SUP_EPS).ok_or("missing time")).collect::<Result<_, _>>()?;
        let fm: Vec<f64> = runs.suites.iter().map(|s| s.sup_fm(t, SUP_EPS).ok_or("missing time")).collect::<Result<_, _>>()?;
        let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
        ok &= decreasing(&fx) && decreasing(&fm);
        ok &= fx.last().is_some_and(|v| *v < SUP_FX_MAX) && fm.last().is_some_and(|v| *v < SUP_FM_MAX);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
        rows.push(format!("t={t}: f_X [{}] f_M [{}]", fmt(&fx), fmt(&fm)));
    }
    Ok((
        ok,
        format!(
            "sup on [{SUP_EPS}, 1] for N = {:?}: {}; need strictly decreasing, < {SUP_FX_MAX} (f_X) and < {SUP_FM_MAX} (f_M) at N = 512",
            runs.sizes,
            rows.join("; ")
        ),
    ))
}

fn c9(runs: &SchemeRuns) -> Result<(bool, String), String> {
    let mut failed = Vec::new();
    for (n, s) in runs.sizes.iter().zip(&runs.suites) {
        for c in s.checks.iter().filter(|c| !c.passed) {
            failed.push(format!("N={n} {} ({})", c.name, c.detail));
        }
    }
    let checks = runs.suites.first().map_or(0, |s| s.checks.len());
    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            format!("{checks} orderings hold at every stored step for each N")
        } else {
            failed.join("; ")
        },
    ))
}

fn run_experiment(m: &ExperimentManifest) -> Result<(bool, String), String> {
    let o = experiments::run(m).map_err(|e| e.to_string())?;
    let failed = failed_checks(&o);
    let summary = o.checks.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
    Ok((failed.is_empty(), if failed.is_empty() { summary } else { failed.join("; ") }))
}

fn c10(_: &mut Suite) -> Result<(bool, String), String> {
    run_experiment(&manifest(ExperimentKind::HydroTransformed, |m| {
        m.params = Some(ParamsSpec { n: 64, lambda: 0.3, alpha1: 1.0 });
        m.t_max = Some(1.0);
        m.trajectories = 1000;
        m.seed = derive_seed(MASTER_SEED, "c10");
    }))
}

fn c11(_: &mut Suite) -> Result<(bool, String), String> {
    run_experiment(&manifest(ExperimentKind::HydroNaive, |m| {
        m.params = Some(ParamsSpec { n: 512, lambda: 0.8, alpha1: 1.0 });
        m.t_max = Some(0.5);
        m.trajectories = 500;
        m.seed = derive_seed(MASTER_SEED, "c11");
    }))
}

fn c12(_: &mut Suite) -> Result<(bool, String), String> {
    let mut rng = seed_stream(derive_seed(MASTER_SEED, "c12"), 0);
    let pts = smooth_interior_points(RESIDUAL_POINTS, RESIDUAL_MARGIN, &mut rng);
    let r = pde_residual_s(&pts, RESIDUAL_H);
    let (coarse, fine) = (pde_residual_s(&pts, 4e-3), pde_residual_s(&pts, 2e-3));
    let ratio = coarse / fine;
    Ok((
        r <= RESIDUAL_MAX && (SECOND_ORDER_RATIO.0..=SECOND_ORDER_RATIO.1).contains(&ratio),
        format!("max residual {r:.2e} ≤ {RESIDUAL_MAX:e} at h = {RESIDUAL_H:e}; residual(4e-3)/residual(2e-3) = {ratio:.3}"),
    ))
}

fn c13(s: &mut Suite) -> Result<(bool, String), String> {
    let p = params(128, 0.25);
    let scale = cutoff_scale(&p);
    let profile = tv_profile(&p, &[0.5 * scale, 1.5 * scale], MIXING_TRAJECTORIES, derive_seed(MASTER_SEED, "c13"))
        .map_err(|e| e.to_string())?;
    s.violations += profile.order_violations;
    s.coupled_runs += MIXING_TRAJECTORIES;
    let (lower, upper) = (profile.lower[0].bound, profile.upper[1].ci_high);
    let schedule: Vec<(usize, f64, Regime)> =
        [64usize, 128, 256].iter().map(|&n| (n, (n as f64).powf(-0.5), Regime::Vanishing)).collect();
    let fractions: Vec<f64> = (1..=80).map(|i| 0.025 * i as f64).collect();
    let rows = cutoff_sweep(&schedule, EPSILON, &fractions, MIXING_TRAJECTORIES, FIXED_SLACK, derive_seed(MASTER_SEED, "c13/sweep"))
        .map_err(|e| e.to_string())?;
    for r in &rows {
        s.violations += r.order_violations;
        s.coupled_runs += MIXING_TRAJECTORIES;
    }
    let mids: Vec<Option<f64>> = rows.iter().map(|r| r.midpoint_ratio()).collect();
    Ok((
        lower >= CUTOFF_LOWER_MIN && upper <= CUTOFF_UPPER_MAX && approaches_one(&mids),
        format!(
            "tv_lower(0.5·4N/λ) = {lower:.3} ≥ {CUTOFF_LOWER_MIN}, tv_upper(1.5·4N/λ) upper CI = {upper:.3} ≤ {CUTOFF_UPPER_MAX}; \
             normalized midpoints N = 64, 128, 256: {mids:.3?}"
        ),
    ))
}

fn c14(s: &mut Suite) -> Result<(bool, String), String> {
    let schedule: Vec<(usize, f64, Regime)> = [32usize, 64, 128].iter().map(|&n| (n, 0.6, Regime::Fixed)).collect();
    let fractions: Vec<f64> = (1..=80).map(|i| 0.025 * i as f64).collect();
    let rows = cutoff_sweep(&schedule, EPSILON, &fractions, MIXING_TRAJECTORIES, FIXED_SLACK, derive_seed(MASTER_SEED, "c14"))
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for r in &rows {
        s.violations += r.order_violations;
        s.coupled_runs += MIXING_TRAJECTORIES;
        ok &= r.within_bracket() == Some(true);
        let (lo, hi) = r.bracket.unwrap_or((f64::NAN, f64::NAN));
        parts.push(format!("N={}: [{:.1}, {:?}] in [{lo:.1}, {hi:.1}]", r.n, r.t_lower, r.t_upper.map(|t| (t * 10.0).round() / 10.0)));
    }
    Ok((ok, parts.join("; ")))
}

fn run_binary(manifest: &Path, out: &Path, threads: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_adjwalk"))
        .args(["--threads", &threads.to_string(), "run", "--manifest"])
        .arg(manifest)
        .arg("--out-dir")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    match status.status.code() {
        Some(0 | 1) => Ok(()),
        c => Err(format!("exit {c:?}: {}", String::from_utf8_lossy(&status.stderr))),
    }
}

fn files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = e.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        out.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
    }
    out.sort();
    Ok(out)
}

fn c15(_: &mut Suite) -> Result<(bool, String), String> {
    let root: PathBuf = std::env::temp_dir().join(format!("adjwalk-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    let manifests = [
        manifest(ExperimentKind::Simulate, |m| m.seed = 7),
        manifest(ExperimentKind::Coupling, |m| {
            m.params = Some(ParamsSpec { n: 16, lambda: 0.3, alpha1: 1.0 });
            m.trajectories = 50;
            m.trials = Some(20_000);
        }),
        manifest(ExperimentKind::Mixing, |m| {
            m.params = Some(ParamsSpec { n: 16, lambda: 0.5, alpha1: 1.0 });
            m.trajectories = 1000;
        }),
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for m in &manifests {
        let kind = m.kind.as_str();
        let path = root.join(format!("{kind}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (one, eight) = (root.join(format!("{kind}-1")), root.join(format!("{kind}-8")));
        run_binary(&path, &one, 1)?;
        run_binary(&path, &eight, 8)?;
        let (a, b) = (files(&one)?, files(&eight)?);
        if a != b {
            mismatched.push(kind);
        }
        compared += a.len();
    }
    std::fs::remove_dir_all(&root).map_err(|e| e.to_string())?;
    Ok((
        mismatched.is_empty() && compared > 0,
        format!("{compared} files from 3 manifests compared byte for byte; mismatches: {mismatched:?}"),
    ))
}

fn main() {
    let mut suite = Suite { verdicts: Vec::new(), violations: 0, coupled_runs: 0 };
    suite.run(1, "stationary marginals", Some(10.0), c1);
    suite.run(2, "stationarity preserved", Some(60.0), c2);
    suite.run(3, "eigenfunction decay", Some(300.0), c3);
    suite.run(4, "single-event coupling", Some(120.0), c4);
    suite.run(6, "two-site mixing oracle", Some(60.0), c6);
    suite.run(7, "scheme identity", Some(300.0), c7);
    let mut runs = None;
    suite.run(8, "convergence to the Lax solution", Some(120.0), |_| {
        let r = scheme_runs()?;
        let verdict = c8(&r);
        runs = Some(r);
        verdict
    });
    suite.run(9, "sandwich and comparison", None, |_| c9(runs.as_ref().ok_or("scheme runs failed")?));
    suite.run(10, "M-domination", Some(300.0), c10);
    suite.run(11, "naive front", Some(600.0), c11);
    suite.run(12, "Lax residual", Some(1.0), c12);
    suite.run(13, "cutoff window", Some(1800.0), c13);
    suite.run(14, "fixed-λ bracket", Some(900.0), c14);
    suite.run(15, "determinism across thread counts", None, c15);
    suite.run(5, "monotonicity", None, c5);

    suite.verdicts.sort_by_key(|v| v.id);
    println!("\nsummary");
    for v in &suite.verdicts {
        println!("{}", line(v));
    }
    let failed: Vec<usize> = suite.verdicts.iter().filter(|v| !v.passed).map(|v| v.id).collect();
    println!(
        "{} of {} criteria passed{}",
        suite.verdicts.len() - failed.len(),
        suite.verdicts.len(),
        if failed.is_empty() { String::new() } else { format!("; failed: {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
