//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs with the default (current) rayon pool.

use std::time::{Duration, Instant};

use relulab::affine::{
    classify_regime, companion_matrix, complex_onset_beta, eigenvalues, simulate_affine, OptimConfig, Regime,
};
use relulab::basin::{dead_fraction, export_basin, map_basin, BasinConfig, ExportFormat, OutcomeKind};
use relulab::mc::{gradient_check, GradientCheckConfig};
use relulab::nn::{
    self, backward, batch_loss, depth_sweep_experiment, gamma_sweep_experiment, init_mlp, write_sweep_csv,
    ExperimentSetup, Optimizer, TrainConfig,
};
use relulab::output::fmt_f64;
use relulab::relu_field::{expected_gradient_2d, expected_gradient_full};
use relulab::rng::Stream;
use relulab::{ParamPoint, TargetSpec, Vector};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn theta(w: Vec<f64>, b: f64) -> ParamPoint {
    ParamPoint::new(Vector::new(w).unwrap(), b).unwrap()
}

// 1 -------------------------------------------------------------------------

fn onset() -> Verdict {
    let beta = complex_onset_beta(0.1).unwrap();
    // Smaller root of 1.21β² − 2.02β + 0.81.
    let (a, b, c) = (1.21f64, -2.02f64, 0.81f64);
    let root = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
    let pass = (beta - 0.6694).abs() <= 1e-3 && (beta - root).abs() <= 1e-9;
    verdict(pass, format!("onset {} quadratic root {}", fmt_f64(beta), fmt_f64(root)))
}

// 2 -------------------------------------------------------------------------

fn modulus() -> Verdict {
    let mut s = Stream::new(2);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    while n < 20 {
        let eta = s.uniform_in(0.01, 1.99);
        let beta = s.uniform_in(0.0, 1.0);
        if classify_regime(eta, beta).unwrap() != Regime::ConvergentOscillatory {
            continue;
        }
        let (l1, l2) = eigenvalues(&companion_matrix(eta, beta).unwrap());
        let r = l1.norm().max(l2.norm());
        worst = worst.max((r * r - beta).abs());
        n += 1;
    }
    verdict(worst <= 1e-12, format!("20 complex pairs, max |ρ² − β| = {}", fmt_f64(worst)))
}

// 3 -------------------------------------------------------------------------

type M2 = [[f64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn power(a: &M2, mut t: usize) -> M2 {
    let mut out = [[1.0, 0.0], [0.0, 1.0]];
    let mut base = *a;
    while t > 0 {
        if t & 1 == 1 {
            out = mul(&out, &base);
        }
        base = mul(&base, &base);
        t >>= 1;
    }
    out
}

fn trajectory_oracle() -> Verdict {
    let mut s = Stream::new(3);
    let mut worst: f64 = 0.0;
    let mut steps = Vec::new();
    for _ in 0..10 {
        let dim = 1 + (s.next_u64() % 4) as usize;
        let eta = s.uniform_in(0.05, 1.95);
        let beta = s.uniform_in(0.0, 0.99);
        let target = TargetSpec::new(s.uniform_in(0.1, 2.0), s.uniform_in(-1.0, 1.0), dim).unwrap();
        let w: Vec<f64> = (0..dim).map(|_| s.normal()).collect();
        let th = theta(w, s.normal());
        let m0: Vec<f64> = (0..=dim).map(|_| 0.3 * s.normal()).collect();
        let cfg = OptimConfig::new(eta, beta, 1e-300, 1000).unwrap();
        let traj = simulate_affine(&th, Some(&m0), &target, &cfg, 1).unwrap();
        // State per coordinate: (m, a) with a = θ − θ*, evolving as s ← A s.
        let a_mat: M2 = [[beta, 1.0 - beta], [-eta * beta, 1.0 - eta * (1.0 - beta)]];
        let opt = target.optimum();
        let start: Vec<f64> = th.w.iter().chain([&th.b]).zip(opt.w.iter().chain([&opt.b])).map(|(p, q)| p - q).collect();
        for p in traj.points() {
            let at = power(&a_mat, p.t);
            let now: Vec<f64> = p.theta.w.iter().chain([&p.theta.b]).zip(opt.w.iter().chain([&opt.b])).map(|(x, q)| x - q).collect();
            for k in 0..=dim {
                let m = at[0][0] * m0[k] + at[0][1] * start[k];
                let a = at[1][0] * m0[k] + at[1][1] * start[k];
                worst = worst.max((m - p.m[k]).abs()).max((a - now[k]).abs());
            }
        }
        steps.push(traj.last().t);
    }
    verdict(worst <= 1e-9, format!("10 configs, steps covered {steps:?}, max deviation {}", fmt_f64(worst)))
}

// 4 -------------------------------------------------------------------------

fn ripples() -> Verdict {
    // Off-axis coordinate: Γ₁ = 0, so a₁ = w₁ with no cancellation.
    let target = TargetSpec::new(1.0, 0.0, 2).unwrap();
    let cfg = OptimConfig::new(1.5, 0.0, 1e-300, 60).unwrap();
    let traj = simulate_affine(&theta(vec![1.0, 0.7], 0.4), None, &target, &cfg, 1).unwrap();
    let a: Vec<f64> = traj.points().iter().map(|p| p.theta.w[0]).collect();
    let alternating = a.windows(2).take_while(|w| w[0] * w[1] < 0.0).count();
    verdict(alternating >= 50, format!("{alternating} consecutive sign flips of a_t"))
}

// 5 -------------------------------------------------------------------------

fn gradient_suite() -> (Verdict, Vec<u8>) {
    let report = gradient_check(&GradientCheckConfig::default()).unwrap();
    let within2 = report.fraction_within(2.0);
    let pass = report.passed() && within2 >= 0.95;
    let mut csv = String::from("trial,component,analytic,estimate,std_error,z\n");
    for (i, t) in report.trials.iter().enumerate() {
        for j in 0..t.z.len() {
            csv.push_str(&format!(
                "{i},{j},{},{},{},{}\n",
                fmt_f64(t.analytic[j]),
                fmt_f64(t.estimate.value[j]),
                fmt_f64(t.estimate.std_error[j]),
                fmt_f64(t.z[j])
            ));
        }
    }
    let detail = format!(
        "50 points × 4 components, max |z| = {}, within 2 SE = {}",
        fmt_f64(report.max_abs_z()),
        fmt_f64(within2)
    );
    (verdict(pass, detail), csv.into_bytes())
}

// 6 -------------------------------------------------------------------------

fn reduced_equals_full() -> Verdict {
    let mut s = Stream::new(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = 1 + (s.next_u64() % 5) as usize;
        let target = TargetSpec::new(s.uniform_in(0.01, 3.0), s.uniform_in(-2.0, 2.0), dim).unwrap();
        let w_last = s.uniform_in(-3.0, 3.0);
        let b = s.uniform_in(-3.0, 3.0);
        let full = expected_gradient_full(&ParamPoint::axis_aligned(dim, w_last, b), &target).unwrap();
        let (gw, gb) = expected_gradient_2d(w_last, b, &target).unwrap();
        worst = worst.max((full.dw[dim - 1] - gw).abs()).max((full.db - gb).abs());
        for k in 0..dim - 1 {
            worst = worst.max(full.dw[k].abs());
        }
    }
    verdict(worst <= 1e-12, format!("100 axis-aligned points, max difference {}", fmt_f64(worst)))
}

// 7 -------------------------------------------------------------------------

fn cone_limits() -> Verdict {
    let mut s = Stream::new(7);
    let draw = |s: &mut Stream, lo: f64, hi: f64| {
        let dim = 1 + (s.next_u64() % 4) as usize;
        let target = TargetSpec::new(s.uniform_in(0.1, 2.0), s.uniform_in(-1.0, 1.0), dim).unwrap();
        let mut w = vec![0.0; dim];
        s.fill_normal(&mut w);
        let r = s.uniform_in(lo, hi);
        let n = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        (theta(w, r * n), target, r)
    };
    let (mut worst_rel, mut worst_r, mut linear_fail) = (0.0f64, f64::NAN, 0);
    for _ in 0..500 {
        let (th, target, r) = draw(&mut s, 4.0, 12.0);
        let g = expected_gradient_full(&th, &target).unwrap();
        let (a, c) = target.residual(&th).unwrap();
        let diff: f64 = g.dw.iter().zip(a.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() + (g.db - c).powi(2);
        let scale = (a.norm().powi(2) + c * c).sqrt();
        let rel = diff.sqrt() / scale;
        if rel > 1e-4 {
            linear_fail += 1;
        }
        if rel > worst_rel {
            worst_rel = rel;
            worst_r = r;
        }
    }
    let mut worst_dead: f64 = 0.0;
    for _ in 0..500 {
        let (th, target, _) = draw(&mut s, -12.0, -6.0);
        worst_dead = worst_dead.max(expected_gradient_full(&th, &target).unwrap().norm());
    }
    let pass = linear_fail == 0 && worst_dead < 1e-6;
    verdict(
        pass,
        format!(
            "linear cone: {linear_fail}/500 above 1e-4, worst {} at r = {}; dead cone: max ‖g‖ = {}",
            fmt_f64(worst_rel),
            fmt_f64(worst_r),
            fmt_f64(worst_dead)
        ),
    )
}

// 8 -------------------------------------------------------------------------

fn basins() -> (Verdict, Vec<u8>) {
    let betas = [0.0, 0.7, 0.8, 0.9, 0.95];
    let mut fractions = Vec::new();
    let mut unresolved = Vec::new();
    let mut csv = Vec::new();
    for &beta in &betas {
        let grid = map_basin(&BasinConfig::reference(0.001, 0.1, beta).unwrap()).unwrap();
        fractions.push(dead_fraction(&grid));
        unresolved.push(grid.count(OutcomeKind::Unresolved));
        export_basin(&grid, ExportFormat::Csv, &mut csv).unwrap();
    }
    let monotone = fractions[1..].windows(2).all(|w| w[1] >= w[0]);
    let pass = fractions[0] < 0.5 && fractions[3] > 0.5 && monotone;
    let shown: Vec<String> = betas
        .iter()
        .zip(&fractions)
        .zip(&unresolved)
        .map(|((b, f), u)| format!("β={b}: {f:.4} ({u} unresolved)"))
        .collect();
    (verdict(pass, format!("dead fractions {}", shown.join(", "))), csv)
}

// 9 -------------------------------------------------------------------------

fn backprop() -> Verdict {
    let mut s = Stream::new(9);
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for seed in 0..20u64 {
        let depth = 1 + (s.next_u64() % 3) as usize;
        let mut dims = vec![2 + (s.next_u64() % 4) as usize];
        for _ in 0..depth {
            dims.push(2 + (s.next_u64() % 5) as usize);
        }
        dims.push(1);
        let mlp = init_mlp(&dims, seed).unwrap();
        let x = ndarray::Array2::from_shape_simple_fn((16, dims[0]), || s.normal());
        let y = ndarray::Array1::from_shape_simple_fn(16, || s.normal());
        let (_, g) = backward(&mlp, x.view(), y.view()).unwrap();
        for k in 0..mlp.layers().len() {
            let nw = mlp.layers()[k].weight.len();
            for idx in 0..nw + mlp.layers()[k].bias.len() {
                let loss_at = |d: f64| {
                    let mut m = mlp.clone();
                    let l = &mut m.layers_mut()[k];
                    if idx < nw {
                        l.weight.as_slice_mut().unwrap()[idx] += d;
                    } else {
                        l.bias[idx - nw] += d;
                    }
                    batch_loss(&m, x.view(), y.view()).unwrap()
                };
                let fd = (loss_at(h) - loss_at(-h)) / (2.0 * h);
                let an = if idx < nw { g[k].weight.as_slice().unwrap()[idx] } else { g[k].bias[idx - nw] };
                let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-4);
                worst = worst.max(rel);
            }
        }
    }
    verdict(worst <= 1e-6, format!("20 networks, max relative error {}", fmt_f64(worst)))
}

// 10 ------------------------------------------------------------------------

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn gamma_sweep(setup: &ExperimentSetup) -> (Verdict, Vec<u8>) {
    let adam = Optimizer::adam(Optimizer::ADAM_LR);
    let sgd = Optimizer::Sgd { lr: Optimizer::SGD_LR };
    let base = TrainConfig::new(adam, 0);
    let adam_rows = gamma_sweep_experiment(&[1e-4, 1.0], &[0.0], &[adam], &base, &[200], setup, 4).unwrap();
    let sgd_rows = gamma_sweep_experiment(&[1e-4], &[0.0], &[sgd], &base, &[200], setup, 4).unwrap();
    let last = base.steps;
    let final_of = |rows: &[nn::SweepRow], g: f64| -> Vec<f64> {
        rows.iter().filter(|r| r.gamma == g && r.step == last).map(|r| r.max_dead_fraction).collect()
    };
    let small = mean(&final_of(&adam_rows, 1e-4));
    let unit = mean(&final_of(&adam_rows, 1.0));
    let sgd_start: Vec<f64> = sgd_rows.iter().filter(|r| r.step == 0).map(|r| r.max_dead_fraction).collect();
    let growth = mean(&final_of(&sgd_rows, 1e-4)) - mean(&sgd_start);
    let pass = small - unit >= 0.3 && growth < 0.05;
    let mut csv = Vec::new();
    write_sweep_csv(&adam_rows, &mut csv).unwrap();
    write_sweep_csv(&sgd_rows, &mut csv).unwrap();
    let detail = format!(
        "Adam final max dead: γ=1e-4 {small:.4}, γ=1 {unit:.4} (gap {:.4}); SGD γ=1e-4 growth {growth:.4}",
        small - unit
    );
    (verdict(pass, detail), csv)
}

// 11 ------------------------------------------------------------------------

fn depth_sweep(setup: &ExperimentSetup) -> Verdict {
    let base = TrainConfig::new(Optimizer::adam(Optimizer::ADAM_LR), 0);
    let rows = depth_sweep_experiment(&[1, 2, 4], 64, &base, 1e-4, setup, 4).unwrap();
    let finals: Vec<f64> = [1, 2, 4]
        .iter()
        .map(|&d| {
            let v: Vec<f64> =
                rows.iter().filter(|r| r.depth == d && r.step == base.steps).map(|r| r.max_dead_fraction).collect();
            mean(&v)
        })
        .collect();
    let pass = finals.windows(2).all(|w| w[1] >= w[0]);
    verdict(pass, format!("mean final max-layer dead ratio, depth 1/2/4: {:.4} / {:.4} / {:.4}", finals[0], finals[1], finals[2]))
}

// 12 ------------------------------------------------------------------------

fn rescaling() -> Verdict {
    let gamma = 0.5;
    let probes = nn::gaussian_probes(200, 4, 2.0, 22);
    let unit = theta(vec![0.3, -1.2, 0.8, 0.1], -0.4);
    let gap0 = nn::single_unit_rescaling_gap(&unit, gamma, probes.view()).unwrap();
    let affine = init_mlp(&[4, 1], 21).unwrap();
    let gap0_affine = nn::rescaling_check(&affine, gamma, gamma, probes.view()).unwrap();

    let mlp = init_mlp(&[4, 8, 1], 21).unwrap();
    let acts = nn::forward_batch(&mlp, probes.view()).unwrap();
    let mixed = acts.pre[0].columns().into_iter().all(|c| c.iter().any(|&z| z > 0.0) && c.iter().any(|&z| z <= 0.0));
    let nus: Vec<f64> = (1..=200).map(|k| 2.0 * k as f64 / 200.0).collect();
    let (nu, gap1) = nn::min_rescaling_gap(&mlp, gamma, &nus, probes.view()).unwrap();
    let pass = gap0 <= 1e-15 && gap0_affine <= 1e-15 && mixed && gap1 > 1e-3;
    verdict(
        pass,
        format!(
            "0 hidden: gap {} (unit), {} (affine); 1 hidden: min gap {} at ν = {}, every unit active and inactive on probes: {mixed}",
            fmt_f64(gap0),
            fmt_f64(gap0_affine),
            fmt_f64(gap1),
            fmt_f64(nu)
        ),
    )
}

// ---------------------------------------------------------------------------

fn report(n: u32, budget: Duration, elapsed: Duration, v: &Verdict, failures: &mut Vec<u32>) {
    let in_time = elapsed <= budget;
    let pass = v.pass && in_time;
    if !pass {
        failures.push(n);
    }
    println!(
        "criterion {n:>2}: {} [{:.1}s / budget {}s{}] {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" },
        v.detail
    );
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed())
}

fn main() {
    let secs = Duration::from_secs;
    let mut failures = Vec::new();
    println!("acceptance: {} rayon thread(s)", rayon::current_num_threads());

    let (v, t) = timed(onset);
    report(1, secs(1), t, &v, &mut failures);
    let (v, t) = timed(modulus);
    report(2, secs(1), t, &v, &mut failures);
    let (v, t) = timed(trajectory_oracle);
    report(3, secs(5), t, &v, &mut failures);
    let (v, t) = timed(ripples);
    report(4, secs(1), t, &v, &mut failures);
    let ((v, csv5), t) = timed(gradient_suite);
    report(5, secs(60), t, &v, &mut failures);
    let (v, t) = timed(reduced_equals_full);
    report(6, secs(1), t, &v, &mut failures);
    let (v, t) = timed(cone_limits);
    report(7, secs(1), t, &v, &mut failures);
    let ((v, csv8), t) = timed(basins);
    report(8, secs(300), t, &v, &mut failures);
    let (v, t) = timed(backprop);
    report(9, secs(10), t, &v, &mut failures);
    let setup = ExperimentSetup::reference().unwrap();
    let ((v, csv10), t) = timed(|| gamma_sweep(&setup));
    report(10, secs(900), t, &v, &mut failures);
    let (v, t) = timed(|| depth_sweep(&setup));
    report(11, secs(1200), t, &v, &mut failures);
    let (v, t) = timed(rescaling);
    report(12, secs(10), t, &v, &mut failures);

    let (v, t) = timed(|| {
        let same5 = gradient_suite().1 == csv5;
        let same8 = basins().1 == csv8;
        let same10 = gamma_sweep(&setup).1 == csv10;
        verdict(
            same5 && same8 && same10,
            format!("bitwise rerun: criterion 5 {same5}, criterion 8 {same8}, criterion 10 {same10}"),
        )
    });
    report(13, secs(3600), t, &v, &mut failures);

    if failures.is_empty() {
        println!("acceptance: all 13 criteria passed");
    } else {
        println!("acceptance: failed criteria {failures:?}");
        std::process::exit(1);
    }
}
