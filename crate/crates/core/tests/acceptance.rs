//! Acceptance suite. Runs every criterion in sequence (the training runs are
//! timed, so nothing else should compete for the CPU), prints one line per
//! criterion and fails at the end if any gating criterion failed.
//!
//! `ACCEPTANCE_ONLY=<substring>[,<substring>...]` restricts the run to matching criteria for
//! local iteration; skipped gating criteria still fail the test.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::Instant;

use hermite_pde::benchmark::{run_dfg, surface_forces, Circle, DfgSetup, ForceReport};
use hermite_pde::domain::{Boundary, DomainSpec, Physics};
use hermite_pde::field::{
    render, sample_scalar, velocity_at, CoefficientState, FieldLayout, FieldName, PdeKind, RenderField,
};
use hermite_pde::model::{Checkpoint, PdeModel};
use hermite_pde::nn::{Architecture, NetworkCache};
use hermite_pde::residual::{
    draw_samples, evaluate_loss, momentum_residual_at, wave_residuals_at, CoefficientGradient, LossWeights,
    SamplePlan,
};
use hermite_pde::spline::build_kernel;
use hermite_pde::training::{median, randomize_domain, train, StepMetrics, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

struct Outcome {
    name: &'static str,
    gating: bool,
    verdict: Option<Verdict>,
}

fn artifacts() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Written past the test harness's output capture so the lines show up live
/// whether or not the suite passes.
fn report(line: String) {
    use std::io::Write;
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{line}");
}

fn run(name: &'static str, gating: bool, f: impl FnOnce() -> Verdict) -> Outcome {
    let selected = std::env::var("ACCEPTANCE_ONLY").map_or(true, |s| s.split(',').any(|p| name.contains(p)));
    if !selected {
        report(format!("SKIP {name}"));
        return Outcome { name, gating, verdict: None };
    }
    let started = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        (false, format!("panicked: {msg}"))
    });
    let tag = match (verdict.0, gating) {
        (true, _) => "PASS",
        (false, true) => "FAIL",
        (false, false) => "FAIL (not gating)",
    };
    report(format!("{tag} {name}: {} [{:.1} s]", verdict.1, started.elapsed().as_secs_f64()));
    Outcome {
        name,
        gating,
        verdict: Some(verdict),
    }
}

// ---------------------------------------------------------------- kernels

/// `d`-th derivative of the ascending monomial series `c` at `x`.
fn poly_deriv(c: &[f64], d: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &ck) in c.iter().enumerate().skip(d) {
        let falling: f64 = (k - d + 1..=k).map(|j| j as f64).product();
        acc += ck * falling * x.powi((k - d) as i32);
    }
    acc
}

/// Same sum with absolute terms, the scale of its rounding error.
fn poly_deriv_mag(c: &[f64], d: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &ck) in c.iter().enumerate().skip(d) {
        let falling: f64 = (k - d + 1..=k).map(|j| j as f64).product();
        acc += (ck * falling * x.powi((k - d) as i32)).abs();
    }
    acc
}

fn kernel_correctness() -> Verdict {
    let started = Instant::now();
    let mut worst_constraint = 0.0f64;
    let mut worst_norm = 0.0f64;
    for n in 0..=2 {
        let k = build_kernel(n).unwrap();
        for i in 0..=n {
            let left = k.piece(i, false);
            let right = k.piece(i, true);
            // sanity: the pieces are what the evaluator uses
            for x in [-0.7, -0.2, 0.3, 0.9] {
                let piece = if x < 0.0 { left } else { right };
                assert!((poly_deriv(piece, 0, x) - k.eval_unchecked(i, x, 0)).abs() < 1e-12);
            }
            for d in 0..=n {
                // C^n at the centre knot
                let jump = poly_deriv(left, d, 0.0) - poly_deriv(right, d, 0.0);
                worst_constraint = worst_constraint.max(jump.abs());
                // interpolation conditions: only the own derivative is nonzero
                let want = if d == i { k.scale(i) } else { 0.0 };
                worst_constraint = worst_constraint.max((poly_deriv(right, d, 0.0) - want).abs());
                // support ends: every derivative up to n vanishes, which is
                // also C^n continuity against the zero extension
                for (piece, x) in [(left, -1.0), (right, 1.0)] {
                    let v = poly_deriv(piece, d, x);
                    let tol_scale = poly_deriv_mag(piece, d, x).max(1.0);
                    worst_constraint = worst_constraint.max(v.abs() / tol_scale);
                }
            }
            // peak magnitude over the support
            let m = 200_000;
            let peak = (0..=m)
                .map(|s| -1.0 + 2.0 * s as f64 / m as f64)
                .map(|x| k.eval_unchecked(i, x, 0).abs())
                .fold(0.0, f64::max);
            worst_norm = worst_norm.max((peak - 1.0).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    (
        worst_constraint < 1e-10 && worst_norm < 1e-6 && secs < 1.0,
        format!("constraints {worst_constraint:.1e} (< 1e-10), |max|h| - 1| {worst_norm:.1e} (< 1e-6), {secs:.3} s (< 1 s)"),
    )
}

// ---------------------------------------------------------------- fields

fn divergence_free() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let s = common::random_state(&mut rng, FieldLayout::default_flow(), 8, 8, 1.0);
        for _ in 0..10 {
            let p = [rng.gen_range(0.0..7.0), rng.gen_range(0.0..7.0), rng.gen_range(0.0..1.0)];
            worst = worst.max(velocity_at(&s, p).unwrap().divergence().abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    (
        worst < 1e-9 && secs < 10.0,
        format!("max |div v| {worst:.1e} (< 1e-9) over 10000 points, {secs:.2} s (< 10 s)"),
    )
}

fn constant_reproduction() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let layouts = [
        FieldLayout::wave(1).unwrap(),
        FieldLayout::wave(2).unwrap(),
        FieldLayout::wave(3).unwrap(),
        FieldLayout::default_flow(),
    ];
    let mut worst = 0.0f64;
    let mut points = 0;
    for layout in layouts {
        let (w, h) = (9, 7);
        let plane = w * h;
        let consts: Vec<f64> = layout.fields().iter().map(|_| rng.gen_range(-50.0..50.0)).collect();
        let mut slice = vec![0.0; layout.channels() * plane];
        for (desc, &c) in layout.fields().iter().zip(&consts) {
            let ch = desc.channel(0, 0);
            slice[ch * plane..(ch + 1) * plane].fill(c);
        }
        let s = CoefficientState::from_slices(layout.clone(), w, h, 0.0, 1.0, slice.clone(), slice).unwrap();
        for _ in 0..1000 {
            let p = [
                rng.gen_range(0.0..=(w - 1) as f64),
                rng.gen_range(0.0..=(h - 1) as f64),
                rng.gen_range(0.0..=1.0),
            ];
            for (desc, &c) in layout.fields().iter().zip(&consts) {
                let v = sample_scalar(&s, desc.name, p, (0, 0, 0)).unwrap();
                worst = worst.max((v - c).abs());
            }
        }
        points += 1000;
    }
    (worst < 1e-9, format!("max deviation {worst:.1e} (< 1e-9) at {points} points"))
}

fn render_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = 4;
    let mut worst = 0.0f64;
    let mut compared = 0usize;
    for layout in [FieldLayout::default_flow(), FieldLayout::default_wave()] {
        for _ in 0..3 {
            let (w, h) = (rng.gen_range(5..12), rng.gen_range(5..12));
            let mut s = common::random_state(&mut rng, layout.clone(), w, h, 1.0);
            let t0 = rng.gen_range(0.0..10.0);
            let [a, b] = s.clone().into_slices();
            s = CoefficientState::from_slices(layout.clone(), w, h, t0, 0.5, a, b).unwrap();
            let tau = rng.gen_range(0.0..=1.0);
            let t = t0 + 0.5 * tau;
            let fields: &[RenderField] = match layout.kind() {
                PdeKind::Flow => &[RenderField::Az, RenderField::P, RenderField::Vx, RenderField::Vy, RenderField::VMag],
                PdeKind::Wave => &[RenderField::Z, RenderField::Vz],
            };
            for &field in fields {
                let g = render(&s, field, f, tau).unwrap();
                assert_eq!((g.width, g.height), (w * f, h * f));
                for py in 0..g.height {
                    for px in 0..g.width {
                        let (x, y) = (px as f64 / f as f64, py as f64 / f as f64);
                        if x > (w - 1) as f64 || y > (h - 1) as f64 {
                            continue;
                        }
                        let p = [x, y, t];
                        let want = match field {
                            RenderField::Az => sample_scalar(&s, FieldName::Az, p, (0, 0, 0)).unwrap(),
                            RenderField::P => sample_scalar(&s, FieldName::P, p, (0, 0, 0)).unwrap(),
                            RenderField::Z => sample_scalar(&s, FieldName::Z, p, (0, 0, 0)).unwrap(),
                            RenderField::Vz => sample_scalar(&s, FieldName::Vz, p, (0, 0, 0)).unwrap(),
                            RenderField::Vx => velocity_at(&s, p).unwrap().v[0],
                            RenderField::Vy => velocity_at(&s, p).unwrap().v[1],
                            RenderField::VMag => {
                                let v = velocity_at(&s, p).unwrap().v;
                                v[0].hypot(v[1])
                            }
                        };
                        worst = worst.max((g.get(px, py) - want).abs());
                        compared += 1;
                    }
                }
            }
        }
    }
    (worst < 1e-9, format!("max |render - sample| {worst:.1e} (< 1e-9) over {compared} pixels at upsample {f}"))
}

// ---------------------------------------------------------------- residuals

fn residual_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (w, h) = (10, 9);
    // truncation error falls as h^2 until rounding in the third differences
    // takes over near 1e-4
    let h_fd = 2.5e-4;
    let (rho, mu, force) = (1.7, 0.3, [0.2, -0.1]);
    let flow = DomainSpec::closed(w, h, Physics::Flow { rho, mu, force }).frame(1.0);
    let (k, delta) = (10.0, 0.1);
    let wave = DomainSpec::closed(w, h, Physics::Wave { k, delta }).frame(1.0);
    let mut worst_m = 0.0f64;
    let mut worst_w = 0.0f64;
    for _ in 0..100 {
        let s = common::random_state(&mut rng, FieldLayout::default_flow(), w, h, 0.5);
        let p = common::junction_free_point(&mut rng, w, h, 0.05);
        let got = momentum_residual_at(&s, &flow, p).unwrap();
        let want = common::fd_momentum(&s, p, rho, mu, force, h_fd);
        worst_m = worst_m.max(common::rel_err(&got, &want));

        let s = common::random_state(&mut rng, FieldLayout::default_wave(), w, h, 0.5);
        let p = common::junction_free_point(&mut rng, w, h, 0.05);
        let (a, b) = wave_residuals_at(&s, &wave, p).unwrap();
        let (c, d) = common::fd_wave(&s, p, k, delta, h_fd);
        worst_w = worst_w.max(common::rel_err(&[a, b], &[c, d]));
    }
    (
        worst_m < 1e-4 && worst_w < 1e-4,
        format!("max relative error momentum {worst_m:.1e}, wave {worst_w:.1e} (< 1e-4) at 100 points each"),
    )
}

fn tiny_domain(kind: PdeKind) -> DomainSpec {
    match kind {
        PdeKind::Flow => {
            let mut d = DomainSpec::closed(8, 8, Physics::Flow { rho: 2.0, mu: 0.2, force: [0.0; 2] });
            let b = d.add_boundary(Boundary::Velocity { vx: 0.8, vy: 0.0 });
            for y in 1..7 {
                d.set_solid(0, y, b);
                d.set_solid(7, y, b);
            }
            let spin = d.add_boundary(Boundary::Rotation { cx: 4.0, cy: 4.0, omega: 0.2 });
            d.set_solid(4, 4, spin);
            d
        }
        PdeKind::Wave => {
            let mut d = DomainSpec::closed(8, 8, Physics::Wave { k: 10.0, delta: 0.1 });
            let b = d.add_boundary(Boundary::Oscillator { amplitude: 1.0, omega: 0.7, phase: 0.0 });
            d.set_solid(3, 4, b);
            d
        }
    }
}

fn gradient_check() -> Verdict {
    let mut worst = 0.0f64;
    let mut checked = 0;
    for kind in [PdeKind::Flow, PdeKind::Wave] {
        let layout = match kind {
            PdeKind::Flow => FieldLayout::default_flow(),
            PdeKind::Wave => FieldLayout::default_wave(),
        };
        let model = PdeModel::<f64>::new(layout.clone(), Architecture::Plain { hidden: 4, layers: 2 }, 9).unwrap();
        let domain = tiny_domain(kind);
        let frame = domain.frame(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let c0: Vec<f64> = (0..layout.channels() * 64).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let samples = draw_samples(&frame, &SamplePlan::default(), 0.0, 1.0, &mut rng).unwrap();
        let weights = LossWeights::default_for(kind);
        let loss = |m: &PdeModel<f64>| {
            let next = m.predict(&frame, &c0).unwrap();
            let s = CoefficientState::from_slices(layout.clone(), 8, 8, 0.0, 1.0, c0.clone(), next).unwrap();
            evaluate_loss(&s, &frame, &samples, &weights, None).unwrap().l_tot
        };
        let mut cache = NetworkCache::default();
        let next = model.predict_cached(&frame, &c0, &mut cache).unwrap();
        let s = CoefficientState::from_slices(layout.clone(), 8, 8, 0.0, 1.0, c0.clone(), next).unwrap();
        let mut cg = CoefficientGradient::new(c0.len(), [false, true]);
        evaluate_loss(&s, &frame, &samples, &weights, Some(&mut cg)).unwrap();
        let mut grad = vec![0.0; model.network().param_count()];
        model.backward(&mut cache, &cg.slices[1], &mut grad).unwrap();
        for _ in 0..20 {
            let i = rng.gen_range(0..grad.len());
            let eps = 1e-6;
            let mut plus = model.clone();
            plus.network_mut().params[i] += eps;
            let mut minus = model.clone();
            minus.network_mut().params[i] -= eps;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            // parameters the loss does not see (dead units) give 0 on both sides
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-12);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst < 1e-3, format!("max relative error {worst:.1e} (< 1e-3) over {checked} parameters"))
}

// ---------------------------------------------------------------- forces

fn force_oracle() -> Verdict {
    let setup = DfgSetup::new(20).unwrap();
    let (w, h) = (setup.width, setup.height);
    let layout = FieldLayout::default_flow();
    let p_desc = *layout.field(FieldName::P).unwrap();
    let s_p = build_kernel(p_desc.order).unwrap().scale(1);
    let plane = w * h;
    let state = |p0: f64, gx: f64| {
        let mut c = vec![0.0; layout.channels() * plane];
        for y in 0..h {
            for x in 0..w {
                c[p_desc.channel(0, 0) * plane + y * w + x] = p0 + gx * x as f64;
                c[p_desc.channel(1, 0) * plane + y * w + x] = gx / s_p;
            }
        }
        CoefficientState::from_slices(layout.clone(), w, h, 0.0, 1.0, c.clone(), c).unwrap()
    };
    let circle: Circle = setup.circle;
    let r = circle.radius;
    let area = std::f64::consts::PI * r * r;
    let f = surface_forces(&state(0.0, -1.0), circle, setup.mu, 256, 1.0).unwrap();
    let err_area = ((f.pressure[0] - area).powi(2) + f.pressure[1].powi(2)).sqrt() / area;

    let p0 = 3.7;
    let f = surface_forces(&state(p0, 0.0), circle, setup.mu, 256, 1.0).unwrap();
    let scale = p0 * 2.0 * std::f64::consts::PI * r;
    let err_const = f.total()[0].hypot(f.total()[1]) / scale;
    (
        err_area < 1e-3 && err_const < 1e-9,
        format!("p = -x: relative error {err_area:.1e} (< 1e-3); constant p: {err_const:.1e} (< 1e-9)"),
    )
}

// ---------------------------------------------------------------- training

struct SmokeRun {
    checkpoint: Checkpoint,
    metrics: Vec<StepMetrics>,
    seconds: f64,
}

fn smoke_train(config: TrainConfig, name: &str) -> SmokeRun {
    let dir = artifacts();
    let mut log = std::fs::File::create(dir.join(format!("{name}.log"))).unwrap();
    let started = Instant::now();
    let out = train(config, Some(&mut log), Some(&dir.join(format!("{name}.hpck")))).unwrap();
    SmokeRun {
        checkpoint: out.checkpoint,
        metrics: out.metrics,
        seconds: started.elapsed().as_secs_f64(),
    }
}

fn directional(run: &SmokeRun, limit_s: f64) -> Verdict {
    let tot: Vec<f64> = run.metrics.iter().map(|m| m.l_tot).collect();
    let first = median(&tot[..50]);
    let last = median(&tot[tot.len() - 50..]);
    (
        last < 0.5 * first && run.seconds < limit_s,
        format!(
            "median L_tot first 50 {first:.4e}, last 50 {last:.4e} (ratio {:.3} < 0.5), {:.0} s (< {limit_s:.0} s)",
            last / first,
            run.seconds
        ),
    )
}

/// Mean `L_z` of 100-step rollouts from rest on eight fixed random domains.
fn wave_eval_lz(model: &PdeModel<f32>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let layout = model.layout().clone();
    let mut total = 0.0;
    let mut count = 0;
    for _ in 0..8 {
        let domain = randomize_domain(&mut rng, PdeKind::Wave, 64, 64);
        let n = layout.channels() * 64 * 64;
        let mut state = CoefficientState::at_rest(layout.clone(), 64, 64, 0.0, domain.dt, vec![0.0; n]).unwrap();
        for _ in 0..100 {
            state = model.step(&domain, &state).unwrap();
            let frame = domain.frame(state.t1());
            let samples = draw_samples(&frame, &SamplePlan::default(), state.t0(), state.dt(), &mut rng).unwrap();
            total += evaluate_loss(&state, &frame, &samples, &LossWeights::WAVE, None).unwrap().l_z;
            count += 1;
        }
    }
    total / count as f64
}

fn within_band(values: &[f64]) -> (bool, f64, f64) {
    let m = median(values);
    let (lo, hi) = values.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    (values.iter().all(|v| v.is_finite()) && hi <= 3.0 * m && lo >= m / 3.0, lo / m, hi / m)
}

fn stability(model: &PdeModel<f32>) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for re in [20, 100] {
        let report = match run_dfg(model, re, 450, 50, 5) {
            Ok(r) => r,
            Err(e) => return (false, format!("Re {re}: {e}")),
        };
        save_report(&report, &format!("stability_re{re}.csv"));
        for (name, values) in [
            ("L_p", report.losses.iter().map(|l| l.l_p).collect::<Vec<_>>()),
            ("L_b", report.losses.iter().map(|l| l.l_b).collect()),
            ("L_tot", report.losses.iter().map(|l| l.l_tot).collect()),
        ] {
            let (ok, lo, hi) = within_band(&values);
            pass &= ok;
            parts.push(format!("Re {re} {name} [{lo:.2}, {hi:.2}]x median"));
        }
    }
    (pass, format!("{} (band [1/3, 3])", parts.join(", ")))
}

fn save_report(report: &ForceReport, name: &str) {
    let mut f = std::fs::File::create(artifacts().join(name)).unwrap();
    report.write_csv(&mut f).unwrap();
}

fn extended_dfg(model: &PdeModel<f32>) -> Verdict {
    let r20 = match run_dfg(model, 20, 300, 50, 6) {
        Ok(r) => r,
        Err(e) => return (false, format!("Re 20: {e}")),
    };
    save_report(&r20, "dfg_re20.csv");
    let r100 = match run_dfg(model, 100, 300, 50, 7) {
        Ok(r) => r,
        Err(e) => return (false, format!("Re 100: {e}")),
    };
    save_report(&r100, "dfg_re100.csv");
    let cd = r20.c_d();
    let cl = r100.c_l();
    let series: Vec<f64> = r100.samples.iter().map(|s| s.c_l - cl.avg).collect();
    let crossings = series.windows(2).filter(|p| p[0].signum() != p[1].signum()).count();
    let std = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    let half = series.len() / 2;
    let (early, late) = (std(&series[..half]), std(&series[half..]));
    let oscillating = crossings >= 4 && late > 1e-3 && late >= 0.5 * early;
    (
        (4.0..=6.0).contains(&cd.avg) && oscillating && (-0.5..=0.8).contains(&cl.avg),
        format!(
            "Re 20 C_D avg {:.3} (in [4, 6]); Re 100 C_L min/avg/max {:.3}/{:.3}/{:.3} (avg in [-0.5, 0.8]), {crossings} mean crossings, std {early:.2e} -> {late:.2e}",
            cd.avg, cl.min, cl.avg, cl.max
        ),
    )
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        run("kernel correctness", true, kernel_correctness),
        run("divergence-free identity", true, divergence_free),
        run("constant reproduction", true, constant_reproduction),
        run("render/sample equivalence", true, render_equivalence),
        run("residual oracles", true, residual_oracles),
        run("end-to-end gradient check", true, gradient_check),
        run("force oracle", true, force_oracle),
    ];

    let mut wave_model: Option<PdeModel<f32>> = None;
    outcomes.push(run("training smoke (wave)", true, || {
        let mut cfg = TrainConfig::default_for(PdeKind::Wave);
        cfg.steps = 500;
        let run = smoke_train(cfg, "wave_smoke");
        wave_model = Some(run.checkpoint.model.clone());
        directional(&run, 30.0 * 60.0)
    }));

    outcomes.push(run("spline-order ablation (wave)", true, || {
        let l2 = wave_model.clone().unwrap_or_else(|| {
            let mut cfg = TrainConfig::default_for(PdeKind::Wave);
            cfg.steps = 500;
            smoke_train(cfg, "wave_smoke").checkpoint.model
        });
        let mut cfg = TrainConfig::default_for(PdeKind::Wave);
        cfg.steps = 500;
        cfg.spatial_order = 1;
        let l1 = smoke_train(cfg, "wave_order1").checkpoint.model;
        let (e2, e1) = (wave_eval_lz(&l2), wave_eval_lz(&l1));
        (e2 < e1, format!("mean evaluation L_z order 2 {e2:.4e} vs order 1 {e1:.4e} (order 2 must be lower)"))
    }));

    let flow_ckpt = artifacts().join("flow_smoke.hpck");
    let mut flow_model: Option<PdeModel<f32>> = None;
    outcomes.push(run("training smoke (flow)", true, || {
        let mut cfg = TrainConfig::default_for(PdeKind::Flow);
        cfg.steps = 2000;
        let run = smoke_train(cfg, "flow_smoke");
        flow_model = Some(run.checkpoint.model.clone());
        directional(&run, 4.0 * 3600.0)
    }));
    // a filtered run reuses the checkpoint of an earlier full run
    let flow_model = flow_model.or_else(|| Checkpoint::load(&flow_ckpt).ok().map(|c| c.model));

    outcomes.push(run("stability (DFG rollout)", true, || match &flow_model {
        Some(m) => stability(m),
        None => (false, "no trained flow checkpoint".into()),
    }));
    outcomes.push(run("full-budget DFG reproduction", false, || match &flow_model {
        Some(m) => extended_dfg(m),
        None => (false, "no trained flow checkpoint".into()),
    }));

    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| o.gating && !matches!(o.verdict, Some((true, _))))
        .map(|o| o.name)
        .collect();
    report(format!(
        "{} of {} gating criteria passed",
        outcomes.iter().filter(|o| o.gating).count() - failed.len(),
        outcomes.iter().filter(|o| o.gating).count()
    ));
    assert!(failed.is_empty(), "failed or skipped: {}", failed.join(", "));
}
