//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs every criterion even when an earlier one fails and exits non-zero if
//! any of them failed. Build with optimizations for realistic runtimes.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robust_lrt::densities::{
    fit_gmm, fit_rayleigh, to_grid, GaussianMixtureParams, NominalModel, RayleighParams,
};
use robust_lrt::detector::{CountUnit, DetectorSpec};
use robust_lrt::lfd::{
    density_criterion, fixed_point_residual, solve_lfds, LfdOptions, LfdSolution, LogLrCurve,
    LrCase,
};
use robust_lrt::numerics::{quadrature, DensityGrid, GridSampler, IntensityGrid};
use robust_lrt::pipeline::{build_detector, run_multiview, DetectorKind};
use robust_lrt::synth::{generate, Roughness, SceneSpec};
use robust_lrt::uncertainty::{build_band, contains, BandKind, BandSpec, DensityBand, Hypothesis};

const GRID_POINTS: usize = 4096;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn reference_solution(spec: BandSpec, delta: f64) -> LfdSolution {
    let grid = IntensityGrid::unit(GRID_POINTS).unwrap();
    LfdSolution::from_model(
        &NominalModel::reference(),
        grid,
        &spec,
        LfdOptions::with_delta(delta),
    )
    .unwrap()
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

/// Union of the grid points carrying `case`, as a list of closed runs.
fn fmt_runs(runs: &[(f64, f64)]) -> String {
    let parts: Vec<String> = runs
        .iter()
        .map(|(a, b)| format!("[{a:.4},{b:.4}]"))
        .collect();
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join("+")
    }
}

/// Whether every grid point in `[lo, hi]` lies in one of `runs`.
fn covers(runs: &[(f64, f64)], lo: f64, hi: f64, grid: &IntensityGrid) -> bool {
    grid.points()
        .filter(|x| (lo..=hi).contains(x))
        .all(|x| runs.iter().any(|(a, b)| (*a..=*b).contains(&x)))
}

fn inside(runs: &[(f64, f64)], lo: f64, hi: f64) -> bool {
    !runs.is_empty() && runs.iter().all(|(a, b)| *a >= lo && *b <= hi)
}

/// Case label whose plateau value is the lower (or upper) clip level.
fn plateau_cases(sol: &LfdSolution) -> (LrCase, LrCase) {
    if sol.pair.a1.ln() <= -sol.pair.a0.ln() {
        (LrCase::ClipA1, LrCase::ClipInvA0)
    } else {
        (LrCase::ClipInvA0, LrCase::ClipA1)
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let sol = reference_solution(BandSpec::band(0.8, 2.5).unwrap(), 1e-3);
    let elapsed = start.elapsed();
    let (lower, upper) = sol.clip_levels();
    // The reported constants are the plateau levels: the lower plateau is
    // quoted as ln a1 and the upper one as -ln a0.
    let lower_ok = within(lower, -1.175, -1.075);
    let upper_ok = within(-upper, -0.85, -0.75);
    let fast = elapsed < Duration::from_secs(10);
    outcome(
        lower_ok && upper_ok && fast,
        format!(
            "lower plateau {lower:+.4} (want [-1.175,-1.075]) {}; upper plateau {upper:+.4} i.e. -level {:+.4} (want [-0.85,-0.75]) {}; \
             raw ln a0 {:+.4}, ln a1 {:+.4}; {} sweeps in {:.2?}",
            ok(lower_ok),
            -upper,
            ok(upper_ok),
            sol.pair.a0.ln(),
            sol.pair.a1.ln(),
            sol.pair.iterations,
            elapsed
        ),
    )
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISS"
    }
}

fn criterion_2() -> Outcome {
    let sol = reference_solution(BandSpec::band(0.8, 2.5).unwrap(), 1e-3);
    let lr = sol.robust_log_lr().unwrap();
    let grid = *lr.curve.grid();
    let (low_case, high_case) = plateau_cases(&sol);
    let low = lr.case_intervals(low_case);
    let high = lr.case_intervals(high_case);
    let low_sup = covers(&low, 0.040, 0.053, &grid);
    let low_sub = inside(&low, 0.032, 0.061);
    let high_sup = covers(&high, 0.080, 0.090, &grid);
    let high_sub = inside(&high, 0.073, 0.097);
    outcome(
        low_sup && low_sub && high_sup && high_sub,
        format!(
            "lower plateau ({}) on {}: covers [0.040,0.053] {}, within [0.032,0.061] {}; \
             upper plateau ({}) on {}: covers [0.080,0.090] {}, within [0.073,0.097] {}",
            low_case,
            fmt_runs(&low),
            ok(low_sup),
            ok(low_sub),
            high_case,
            fmt_runs(&high),
            ok(high_sup),
            ok(high_sub)
        ),
    )
}

fn criterion_3() -> Outcome {
    let sol = reference_solution(BandSpec::outlier(0.4).unwrap(), 1e-3);
    let lr = sol.robust_log_lr().unwrap();
    let (lower, upper) = sol.clip_levels();
    let lower_ok = (lower - -0.205).abs() <= 0.02;
    let upper_ok = (upper - 0.241).abs() <= 0.02;
    let nominal = lr.case_intervals(LrCase::RatioLl);
    let grid = *lr.curve.grid();
    let region_ok = covers(&nominal, 0.066, 0.069, &grid);
    outcome(
        lower_ok && upper_ok && region_ok,
        format!(
            "clip levels {lower:+.4} (want -0.205±0.02) {}, {upper:+.4} (want 0.241±0.02) {}; \
             nominal-ratio region {} covers [0.066,0.069] {}",
            ok(lower_ok),
            ok(upper_ok),
            fmt_runs(&nominal),
            ok(region_ok)
        ),
    )
}

fn random_model(rng: &mut ChaCha8Rng) -> NominalModel {
    let h0 = RayleighParams::new(rng.gen_range(0.02..0.15)).unwrap();
    let k = rng.gen_range(1..=3);
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let means = (0..k).map(|_| rng.gen_range(0.15..0.75)).collect();
    let sigmas = (0..k).map(|_| rng.gen_range(0.02..0.08)).collect();
    NominalModel {
        h0,
        h1: GaussianMixtureParams::normalized(weights, means, sigmas).unwrap(),
    }
}

fn random_band(rng: &mut ChaCha8Rng) -> BandSpec {
    if rng.gen_bool(0.5) {
        BandSpec::band(rng.gen_range(0.5..1.0), rng.gen_range(1.05..4.0)).unwrap()
    } else {
        BandSpec::outlier(rng.gen_range(0.02..0.6)).unwrap()
    }
}

/// Whether the density criterion of each hypothesis, driven by the other
/// nominal, reaches zero below the solver's bracket cap. When the nominal
/// supports barely overlap it cannot, and the solver reports an error.
fn has_finite_multipliers(model: &NominalModel, grid: IntensityGrid, spec: &BandSpec) -> bool {
    let p0 = to_grid(&model.h0, grid).unwrap().density;
    let p1 = to_grid(&model.h1, grid).unwrap().density;
    let (Ok(b0), Ok(b1)) = (
        build_band(&p0, spec, Hypothesis::H0),
        build_band(&p1, spec, Hypothesis::H1),
    ) else {
        return false;
    };
    let cap = 2f64.powi(62);
    density_criterion(cap, &p1, &b0).unwrap() >= 0.0
        && density_criterion(cap, &p0, &b1).unwrap() >= 0.0
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = IntensityGrid::unit(2048).unwrap();
    let mut failures = Vec::new();
    let mut worst_residual: f64 = 0.0;
    let mut worst_mass: f64 = 0.0;
    let mut redrawn = 0;
    for case in 0..25 {
        let (model, spec) = loop {
            let model = random_model(&mut rng);
            let spec = random_band(&mut rng);
            if has_finite_multipliers(&model, grid, &spec) {
                break (model, spec);
            }
            redrawn += 1;
        };
        let sol = match LfdSolution::from_model(&model, grid, &spec, LfdOptions::with_delta(1e-10))
        {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("#{case}: {e}"));
                continue;
            }
        };
        let pair = &sol.pair;
        let mass = (quadrature(&pair.g0).unwrap() - 1.0)
            .abs()
            .max((quadrature(&pair.g1).unwrap() - 1.0).abs());
        let residual = fixed_point_residual(pair, &sol.band0, &sol.band1);
        worst_mass = worst_mass.max(mass);
        worst_residual = worst_residual.max(residual);
        let member =
            contains(&sol.band0, &pair.g0).unwrap() && contains(&sol.band1, &pair.g1).unwrap();
        let lr = sol.robust_log_lr().unwrap();
        let allowed: &[LrCase] = match spec.kind {
            BandKind::Band => &LrCase::ALL,
            BandKind::Outlier => &[LrCase::RatioLl, LrCase::ClipA1, LrCase::ClipInvA0],
        };
        let labels_ok = lr.cases.iter().flatten().all(|c| allowed.contains(c));
        if !(pair.converged && mass <= 1e-6 && residual <= 1e-6 && member && labels_ok) {
            failures.push(format!(
                "#{case} {spec:?}: mass err {mass:.1e}, residual {residual:.1e}, member {member}, labels {labels_ok}"
            ));
        }
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(120);
    outcome(
        failures.is_empty() && fast,
        format!(
            "{}/25 valid ({redrawn} draws without finite multipliers skipped); worst mass error {worst_mass:.1e}, worst fixed-point residual {worst_residual:.1e}; {elapsed:.2?}{}",
            25 - failures.len(),
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join("; ")) }
        ),
    )
}

fn criterion_5() -> Outcome {
    let grid = IntensityGrid::unit(GRID_POINTS).unwrap();
    let model = NominalModel::reference();
    let n = 1_000_000;
    let mut lines = Vec::new();
    let mut all = true;
    for (kind, name) in [
        (DetectorKind::Nominal, "nominal"),
        (DetectorKind::Robust, "band"),
    ] {
        let (curve, density) = detector_parts(&model, grid, kind);
        let sampler = GridSampler::new(&density).unwrap();
        for (a_idx, alpha) in [0.01, 0.05, 0.1].into_iter().enumerate() {
            let spec = DetectorSpec::calibrated(curve.clone(), &density, alpha).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(500 + a_idx as u64);
            let hits = (0..n)
                .filter(|_| spec.decide(sampler.sample(&mut rng)))
                .count();
            let rate = hits as f64 / n as f64;
            let tol = 3.0 * (alpha * (1.0 - alpha) / n as f64).sqrt();
            let pass = (rate - alpha).abs() <= tol;
            all &= pass;
            lines.push(format!(
                "{name}@{alpha}: {rate:.5} (±{tol:.5}) {}",
                ok(pass)
            ));
        }
    }
    outcome(all, lines.join(", "))
}

/// Log-LR curve and calibration density of a detector on the reference model.
fn detector_parts(
    model: &NominalModel,
    grid: IntensityGrid,
    kind: DetectorKind,
) -> (LogLrCurve, DensityGrid) {
    match kind {
        DetectorKind::Nominal => {
            let p0 = to_grid(&model.h0, grid).unwrap().density;
            let p1 = to_grid(&model.h1, grid).unwrap().density;
            (
                LogLrCurve::ratio(&p0, &p1).unwrap(),
                p0.normalized().unwrap(),
            )
        }
        DetectorKind::Robust => {
            let sol =
                LfdSolution::from_model(model, grid, &BandSpec::default(), LfdOptions::default())
                    .unwrap();
            (
                sol.robust_log_lr().unwrap().curve,
                sol.pair.g0.normalized().unwrap(),
            )
        }
    }
}

/// Clutter densities inside the default band around `p0`: the lower
/// envelope plus the remaining 20% of mass spread over a random slice of
/// `p0`, kept below the upper envelope.
fn stress_density(p0: &DensityGrid, band: &DensityBand, rng: &mut ChaCha8Rng) -> DensityGrid {
    let grid = *p0.grid();
    let sampler = GridSampler::new(p0).unwrap();
    let headroom = 1.0 - quadrature(band.lower()).unwrap();
    loop {
        let mass = rng.gen_range(0.12..0.4);
        let start = rng.gen_range(0.0..1.0 - mass);
        let (lo, hi) = (sampler.quantile(start), sampler.quantile(start + mass));
        let slice = DensityGrid::new(
            grid,
            p0.values()
                .iter()
                .zip(grid.points())
                .map(|(v, x)| if (lo..=hi).contains(&x) { *v } else { 0.0 })
                .collect(),
        )
        .unwrap();
        let Ok(slice) = slice.normalized() else {
            continue;
        };
        let q = DensityGrid::new(
            grid,
            band.lower()
                .values()
                .iter()
                .zip(slice.values())
                .map(|(l, s)| l + headroom * s)
                .collect(),
        )
        .unwrap();
        if contains(band, &q).unwrap() {
            return q;
        }
    }
}

fn criterion_6() -> Outcome {
    let grid = IntensityGrid::unit(GRID_POINTS).unwrap();
    let model = NominalModel::reference();
    let alpha = 0.05;
    let p0 = to_grid(&model.h0, grid).unwrap().density;
    let band = build_band(&p0, &BandSpec::default(), Hypothesis::H0).unwrap();
    let nominal = build_detector(
        &model,
        grid,
        DetectorKind::Nominal,
        &BandSpec::default(),
        alpha,
        LfdOptions::default(),
    )
    .unwrap();
    let robust = build_detector(
        &model,
        grid,
        DetectorKind::Robust,
        &BandSpec::default(),
        alpha,
        LfdOptions::default(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 100_000;
    let (mut max_nom, mut max_rob, mut strictly) = (0.0f64, 0.0f64, 0);
    for _ in 0..50 {
        let q = stress_density(&p0, &band, &mut rng);
        let sampler = GridSampler::new(&q).unwrap();
        let xs: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let fa = |d: &DetectorSpec| xs.iter().filter(|x| d.decide(**x)).count() as f64 / n as f64;
        let (fn_, fr) = (fa(&nominal), fa(&robust));
        max_nom = max_nom.max(fn_);
        max_rob = max_rob.max(fr);
        if fr < fn_ {
            strictly += 1;
        }
    }
    outcome(
        max_rob <= max_nom && strictly >= 45,
        format!("max FA robust {max_rob:.4} vs nominal {max_nom:.4}; robust strictly lower on {strictly}/50 densities"),
    )
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2]) as f64
    }
}

fn criterion_7() -> Outcome {
    let grid = IntensityGrid::unit(GRID_POINTS).unwrap();
    let model = NominalModel::reference();
    let alpha = 0.05;
    let opts = LfdOptions::default();
    let detectors = [
        (
            "outlier",
            build_detector(
                &model,
                grid,
                DetectorKind::Robust,
                &BandSpec::outlier(0.4).unwrap(),
                alpha,
                opts,
            )
            .unwrap(),
        ),
        (
            "band",
            build_detector(
                &model,
                grid,
                DetectorKind::Robust,
                &BandSpec::default(),
                alpha,
                opts,
            )
            .unwrap(),
        ),
        (
            "parametric",
            build_detector(
                &model,
                grid,
                DetectorKind::Nominal,
                &BandSpec::default(),
                alpha,
                opts,
            )
            .unwrap(),
        ),
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    let mut parametric = Vec::new();
    for tier in [Roughness::Low, Roughness::Mixed, Roughness::High] {
        let start = Instant::now();
        let mut fa: Vec<Vec<usize>> = vec![Vec::new(); 3];
        let mut md: Vec<Vec<usize>> = vec![Vec::new(); 3];
        for seed in 0..20 {
            let (views, truth) = generate(&SceneSpec::reference(tier, seed)).unwrap();
            for (d, (_, spec)) in detectors.iter().enumerate() {
                let r = run_multiview(&views, spec, Some(&truth), CountUnit::Region)
                    .unwrap()
                    .report
                    .unwrap();
                fa[d].push(r.false_alarms);
                md[d].push(r.missed);
            }
        }
        let med: Vec<f64> = fa.into_iter().map(median).collect();
        let mmd: Vec<f64> = md.into_iter().map(median).collect();
        let ordered = med[0] <= med[1] && med[1] <= med[2];
        let fast = start.elapsed() < Duration::from_secs(300);
        pass &= ordered && fast;
        parametric.push(med[2]);
        lines.push(format!(
            "{}: median FA outlier/band/parametric {}/{}/{} (MD {}/{}/{}) {} in {:.1?}",
            tier.as_str(),
            med[0],
            med[1],
            med[2],
            mmd[0],
            mmd[1],
            mmd[2],
            ok(ordered),
            start.elapsed()
        ));
    }
    let trend = parametric[2] > parametric[0];
    pass &= trend;
    lines.push(format!(
        "parametric LOW {} -> HIGH {} {}",
        parametric[0],
        parametric[2],
        ok(trend)
    ));
    outcome(pass, lines.join("; "))
}

/// Brute-force LFD multipliers: grid search over `(ln a0, ln a1)`, scoring
/// each pair by the best mass defect over its pointwise fixed points.
struct Oracle<'a> {
    weights: Vec<f64>,
    bins: usize,
    b0: &'a DensityBand,
    b1: &'a DensityBand,
}

const LATTICE: usize = 800;
const LN_A_MIN: f64 = -4.0;
const LN_A_STEP: f64 = 0.01;

/// Pointwise fixed points of one bin: isolated pairs, or a segment
/// `g0 = a0 g1` with `g1` in `[lo, hi]` when `a0 a1 = 1`.
enum FixedPoint {
    Point(f64, f64),
    Segment(f64, f64),
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

impl Oracle<'_> {
    fn bin_fixed_points(&self, k: usize, a0: f64, a1: f64, diagonal: bool) -> Vec<FixedPoint> {
        let (l0, u0) = (self.b0.lower().values()[k], self.b0.upper().at(k));
        let (l1, u1) = (self.b1.lower().values()[k], self.b1.upper().at(k));
        let mut candidates = Vec::new();
        for b0 in [l0, u0] {
            for b1 in [l1, u1] {
                candidates.push((b0, b1));
            }
            candidates.push((b0, a1 * b0));
        }
        for b1 in [l1, u1] {
            candidates.push((a0 * b1, b1));
        }
        let mut out: Vec<FixedPoint> = Vec::new();
        for (g0, g1) in candidates {
            let fixed =
                close(g0, self.b0.clamp_at(k, a0 * g1)) && close(g1, self.b1.clamp_at(k, a1 * g0));
            let seen = out
                .iter()
                .any(|f| matches!(f, FixedPoint::Point(x, y) if close(*x, g0) && close(*y, g1)));
            if fixed && !seen {
                out.push(FixedPoint::Point(g0, g1));
            }
        }
        if diagonal {
            let (lo, hi) = (l1.max(l0 / a0), u1.min(u0 / a0));
            if lo < hi {
                out.push(FixedPoint::Segment(lo, hi));
            }
        }
        out
    }

    /// Smallest mass defect `|m0 - 1| + |m1 - 1|` over all choices of
    /// pointwise fixed points at multipliers `(a0, a1)`.
    fn residual(&self, a0: f64, a1: f64, diagonal: bool) -> f64 {
        let options: Vec<Vec<FixedPoint>> = (0..self.bins)
            .map(|k| self.bin_fixed_points(k, a0, a1, diagonal))
            .collect();
        let mut best = f64::INFINITY;
        self.search(&options, 0, a0, (0.0, 0.0, 0.0, 0.0), &mut best);
        best
    }

    /// Depth-first over bins, carrying the fixed masses and the range of the
    /// weighted segment parameter.
    fn search(
        &self,
        options: &[Vec<FixedPoint>],
        k: usize,
        a0: f64,
        acc: (f64, f64, f64, f64),
        best: &mut f64,
    ) {
        if k == options.len() {
            let (m0, m1, lo, hi) = acc;
            let f = |t: f64| (m0 + a0 * t - 1.0).abs() + (m1 + t - 1.0).abs();
            let value = [
                lo,
                hi,
                ((1.0 - m0) / a0).clamp(lo, hi),
                (1.0 - m1).clamp(lo, hi),
            ]
            .into_iter()
            .map(f)
            .fold(f64::INFINITY, f64::min);
            *best = best.min(value);
            return;
        }
        let w = self.weights[k];
        for option in &options[k] {
            let (m0, m1, lo, hi) = acc;
            let next = match *option {
                FixedPoint::Point(g0, g1) => (m0 + w * g0, m1 + w * g1, lo, hi),
                FixedPoint::Segment(a, b) => (m0, m1, lo + w * a, hi + w * b),
            };
            self.search(options, k + 1, a0, next, best);
        }
    }

    /// Lattice points whose residual is within `slack` of the minimum.
    fn argmin(&self, slack: f64) -> (f64, Vec<(usize, usize)>) {
        let ln = |i: usize| LN_A_MIN + LN_A_STEP * i as f64;
        let mut res = vec![0.0; LATTICE * LATTICE];
        for i in 0..LATTICE {
            for j in 0..LATTICE {
                res[i * LATTICE + j] = self.residual(ln(i).exp(), ln(j).exp(), i + j == LATTICE);
            }
        }
        let best = res.iter().copied().fold(f64::INFINITY, f64::min);
        let set = (0..res.len())
            .filter(|&k| res[k] <= best + slack)
            .map(|k| (k / LATTICE, k % LATTICE))
            .collect();
        (best, set)
    }
}

fn criterion_8() -> Outcome {
    let grid = IntensityGrid::unit(8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut matched = 0;
    let mut notes = Vec::new();
    let cases = 6;
    let mut done = 0;
    while done < cases {
        let draw = |rng: &mut ChaCha8Rng| {
            DensityGrid::new(grid, (0..8).map(|_| rng.gen_range(0.05..1.0)).collect())
                .unwrap()
                .normalized()
                .unwrap()
        };
        let (p0, p1) = (draw(&mut rng), draw(&mut rng));
        let spec = BandSpec::band(rng.gen_range(0.5..0.95), rng.gen_range(1.2..3.0)).unwrap();
        let b0 = build_band(&p0, &spec, Hypothesis::H0).unwrap();
        let b1 = build_band(&p1, &spec, Hypothesis::H1).unwrap();
        let pair = solve_lfds(&b0, &b1, &p0, &p1, LfdOptions::with_delta(1e-12)).unwrap();
        let (l0, l1) = (pair.a0.ln(), pair.a1.ln());
        let top = LN_A_MIN + LN_A_STEP * (LATTICE - 1) as f64;
        if !(l0 > LN_A_MIN && l0 < top && l1 > LN_A_MIN && l1 < top) {
            continue;
        }
        done += 1;
        let oracle = Oracle {
            weights: grid.trapezoid_weights(),
            bins: 8,
            b0: &b0,
            b1: &b1,
        };
        let (best, set) = oracle.argmin(1e-12);
        let dist = set
            .iter()
            .map(|&(i, j)| {
                let (o0, o1) = (
                    LN_A_MIN + LN_A_STEP * i as f64,
                    LN_A_MIN + LN_A_STEP * j as f64,
                );
                ((o0 - l0).abs().max((o1 - l1).abs()) / LN_A_STEP).ceil() as usize
            })
            .min()
            .unwrap_or(usize::MAX);
        if dist <= 2 {
            matched += 1;
        }
        notes.push(format!(
            "ln a ({l0:+.3},{l1:+.3}) {dist} steps, residual {best:.1e}"
        ));
    }
    outcome(
        matched == cases,
        format!(
            "{matched}/{cases} within 2 lattice steps: {}",
            notes.join("; ")
        ),
    )
}

fn criterion_9() -> Outcome {
    let truth = NominalModel::reference();
    let n = 30_000;
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
        let clutter: Vec<f64> = (0..n).map(|_| truth.h0.sample(&mut rng)).collect();
        let targets: Vec<f64> = (0..n).map(|_| truth.h1.sample(&mut rng)).collect();
        let r = fit_rayleigh(&clutter).unwrap();
        let g = fit_gmm(&targets, 3, seed).unwrap();
        let mut err = (r.sigma0() - truth.h0.sigma0()).abs();
        for k in 0..3 {
            err = err
                .max((g.weights()[k] - truth.h1.weights()[k]).abs())
                .max((g.means()[k] - truth.h1.means()[k]).abs())
                .max((g.sigmas()[k] - truth.h1.sigmas()[k]).abs());
        }
        worst = worst.max(err);
        if err <= 0.02 {
            good += 1;
        }
    }
    outcome(
        good >= 19,
        format!("{good}/20 seeds within 0.02 (worst parameter error {worst:.4})"),
    )
}

fn main() {
    let _ = env_logger::builder()
        .is_test(true)
        .filter_level(log::LevelFilter::Error)
        .try_init();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("clipping constants", criterion_1),
        ("clip intervals", criterion_2),
        ("outlier clip levels", criterion_3),
        ("LFD validity suite", criterion_4),
        ("FA calibration", criterion_5),
        ("minimax sanity", criterion_6),
        ("FA ordering on synthetic scenes", criterion_7),
        ("brute-force oracle", criterion_8),
        ("fitting recovery", criterion_9),
    ];
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = Vec::new();
    for (n, (name, run)) in criteria.iter().enumerate() {
        let id = n + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id} {verdict} {name} ({:.1?}): {}",
            start.elapsed(),
            result.detail
        );
        if !result.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
