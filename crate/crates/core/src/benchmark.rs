//! Cylinder-in-channel drag/lift benchmark, surface force quadrature,
//! Reynolds numbers and the boundary leak metric.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Boundary, DomainFrame, DomainSpec, Physics};
use crate::error::{Error, Result};
use crate::field::{sample_scalar, velocity_at, CoefficientState, FieldLayout, FieldName, PdeKind};
use crate::model::PdeModel;
use crate::nn::Real;
use crate::residual::{draw_samples, evaluate_loss, LossReport, LossWeights, SamplePlan};

/// `rho * v * l / mu`.
pub fn reynolds(rho: f64, v: f64, l: f64, mu: f64) -> Result<f64> {
    if !(rho > 0.0 && v > 0.0 && l > 0.0 && mu > 0.0) {
        return Err(Error::Argument(format!(
            "Reynolds number needs positive inputs, got rho={rho}, v={v}, L={l}, mu={mu}"
        )));
    }
    Ok(rho * v * l / mu)
}

/// `C = 2 F / (rho U^2 L)` for drag and lift.
pub fn drag_lift_coefficients(f_d: f64, f_l: f64, rho: f64, u_mean: f64, l: f64) -> Result<(f64, f64)> {
    if !(u_mean > 0.0 && l > 0.0 && rho > 0.0) {
        return Err(Error::Argument(format!(
            "coefficients need positive rho, U and L, got rho={rho}, U={u_mean}, L={l}"
        )));
    }
    let q = 2.0 / (rho * u_mean * u_mean * l);
    Ok((q * f_d, q * f_l))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Viscous and pressure force on a circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceForces {
    pub viscous: [f64; 2],
    pub pressure: [f64; 2],
}

impl SurfaceForces {
    pub fn total(&self) -> [f64; 2] {
        [self.viscous[0] + self.pressure[0], self.viscous[1] + self.pressure[1]]
    }
}

/// Midpoint quadrature over `m` equal arcs of the analytic circle, with
/// fields sampled at time `t`: `F_mu = sum mu (grad v) n ds` and
/// `F_p = sum -p n ds`, `n` the outward unit normal.
pub fn surface_forces(state: &CoefficientState, circle: Circle, mu: f64, m: usize, t: f64) -> Result<SurfaceForces> {
    if m < 16 {
        return Err(Error::Argument(format!("force quadrature needs at least 16 points, got {m}")));
    }
    if state.layout().kind() != PdeKind::Flow {
        return Err(Error::Layout("surface forces need a flow layout".into()));
    }
    let ds = std::f64::consts::TAU * circle.radius / m as f64;
    let mut f = SurfaceForces {
        viscous: [0.0; 2],
        pressure: [0.0; 2],
    };
    for k in 0..m {
        let th = std::f64::consts::TAU * (k as f64 + 0.5) / m as f64;
        let n = [th.cos(), th.sin()];
        let pt = [circle.center[0] + circle.radius * n[0], circle.center[1] + circle.radius * n[1], t];
        let v = velocity_at(state, pt)?;
        let p = sample_scalar(state, FieldName::P, pt, (0, 0, 0))?;
        for i in 0..2 {
            f.viscous[i] += mu * (v.grad[i][0] * n[0] + v.grad[i][1] * n[1]) * ds;
            f.pressure[i] -= p * n[i] * ds;
        }
    }
    Ok(f)
}

/// Rejects circles whose quadrature points fall outside the grid or inside
/// solid cells that do not belong to the circle's own rasterization.
pub fn check_circle(frame: &DomainFrame, circle: Circle, m: usize) -> Result<()> {
    for k in 0..m {
        let th = std::f64::consts::TAU * (k as f64 + 0.5) / m as f64;
        let (x, y) = (
            circle.center[0] + circle.radius * th.cos(),
            circle.center[1] + circle.radius * th.sin(),
        );
        let Some(cell) = frame.cell_at(x, y) else {
            return Err(Error::Geometry(format!("quadrature point ({x:.3}, {y:.3}) lies outside the grid")));
        };
        if frame.solid[cell] {
            let (cx, cy) = ((cell % frame.width) as f64, (cell / frame.width) as f64);
            let d = ((cx - circle.center[0]).powi(2) + (cy - circle.center[1]).powi(2)).sqrt();
            if d > circle.radius + 0.75 {
                return Err(Error::Geometry(format!(
                    "circle intersects a foreign solid cell at ({cx}, {cy})"
                )));
            }
        }
    }
    Ok(())
}

/// Mean `|v . n|` over boundary-face points whose prescribed normal
/// velocity is zero, evaluated at the slab end. Two points per face at the
/// quarter positions.
pub fn divergence_leak(state: &CoefficientState, frame: &DomainFrame) -> Result<f64> {
    let t = state.t1();
    let (mut sum, mut n) = (0.0, 0usize);
    for face in &frame.faces {
        for s in [-0.25, 0.25] {
            let x = face.center[0] + s * face.tangent[0];
            let y = face.center[1] + s * face.tangent[1];
            let vd = frame.face_velocity(face, x, y);
            if (vd[0] * face.normal[0] + vd[1] * face.normal[1]).abs() >= 1e-12 {
                continue;
            }
            let v = velocity_at(state, [x, y, t])?.v;
            sum += (v[0] * face.normal[0] + v[1] * face.normal[1]).abs();
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Channel with a cylinder: 41 x 220 fluid cells, diameter 10, centre 20
/// cells from the inlet and from the lower wall, parabolic inflow and an
/// outlet carrying the same profile. The grid is padded with solid cells to
/// 48 x 224 so that it divides by 16.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfgSetup {
    pub re: f64,
    pub rho: f64,
    pub mu: f64,
    pub u_mean: f64,
    pub diameter: f64,
    pub circle: Circle,
    pub width: usize,
    pub height: usize,
    pub fluid_rows: usize,
    pub fluid_cols: usize,
}

impl DfgSetup {
    pub const TARGETS: [u32; 3] = [2, 20, 100];

    pub fn new(re: u32) -> Result<Self> {
        let (rho, mu, u_mean) = match re {
            2 => (1.0, 1.0, 0.2),
            20 => (1.0, 0.1, 0.2),
            100 => (1.0, 0.1, 1.0),
            other => {
                return Err(Error::Argument(format!(
                    "unsupported Reynolds target {other}; expected 2, 20 or 100"
                )))
            }
        };
        Ok(Self {
            re: re as f64,
            rho,
            mu,
            u_mean,
            diameter: 10.0,
            circle: Circle {
                center: [20.5, 20.5],
                radius: 5.0,
            },
            width: 224,
            height: 48,
            fluid_rows: 41,
            fluid_cols: 220,
        })
    }

    pub fn reynolds(&self) -> f64 {
        reynolds(self.rho, self.u_mean, self.diameter, self.mu).expect("positive parameters")
    }

    pub fn domain(&self) -> DomainSpec {
        let mut d = DomainSpec::closed(
            self.width,
            self.height,
            Physics::Flow {
                rho: self.rho,
                mu: self.mu,
                force: [0.0; 2],
            },
        );
        for y in 0..self.height {
            for x in 0..self.width {
                if x > self.fluid_cols || y > self.fluid_rows {
                    d.set_solid(x, y, 0);
                }
            }
        }
        let inflow = d.add_boundary(Boundary::Parabolic {
            y_lo: 0.5,
            y_hi: self.fluid_rows as f64 + 0.5,
            u_max: 1.5 * self.u_mean,
        });
        for y in 1..=self.fluid_rows {
            d.set_solid(0, y, inflow);
            d.set_solid(self.fluid_cols + 1, y, inflow);
        }
        d.paint_disk(self.circle.center[0], self.circle.center[1], self.circle.radius, 0);
        d
    }
}

/// Forces and coefficients at one rollout step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceSample {
    pub step: usize,
    pub forces: SurfaceForces,
    pub f_d: f64,
    pub f_l: f64,
    pub c_d: f64,
    pub c_l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinAvgMax {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
}

impl MinAvgMax {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            n += 1;
        }
        Self {
            min,
            avg: if n == 0 { f64::NAN } else { sum / n as f64 },
            max,
        }
    }
}

/// Per-step forces, losses and leak over the measurement window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForceReport {
    pub setup: DfgSetup,
    pub warmup: usize,
    pub samples: Vec<ForceSample>,
    pub losses: Vec<LossReport>,
    pub leak: Vec<f64>,
}

impl ForceReport {
    pub fn c_d(&self) -> MinAvgMax {
        MinAvgMax::of(self.samples.iter().map(|s| s.c_d))
    }
    pub fn c_l(&self) -> MinAvgMax {
        MinAvgMax::of(self.samples.iter().map(|s| s.c_l))
    }
    pub fn f_d(&self) -> MinAvgMax {
        MinAvgMax::of(self.samples.iter().map(|s| s.f_d))
    }
    pub fn f_l(&self) -> MinAvgMax {
        MinAvgMax::of(self.samples.iter().map(|s| s.f_l))
    }

    /// CSV with header `step,FD,FL,CD,CL,Lp,Lb,leak`, summary appended as
    /// `#` comment lines.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "step,FD,FL,CD,CL,Lp,Lb,leak")?;
        for ((s, l), leak) in self.samples.iter().zip(&self.losses).zip(&self.leak) {
            writeln!(
                w,
                "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
                s.step, s.f_d, s.f_l, s.c_d, s.c_l, l.l_p, l.l_b, leak
            )?;
        }
        writeln!(
            w,
            "# Re={} rho={} mu={} U_mean={} L={} warmup={} steps={}",
            self.setup.re,
            self.setup.rho,
            self.setup.mu,
            self.setup.u_mean,
            self.setup.diameter,
            self.warmup,
            self.samples.len()
        )?;
        for (name, s) in [("FD", self.f_d()), ("FL", self.f_l()), ("CD", self.c_d()), ("CL", self.c_l())] {
            writeln!(w, "# {name} min/avg/max: {:.6}/{:.6}/{:.6}", s.min, s.avg, s.max)?;
        }
        let lp = MinAvgMax::of(self.losses.iter().map(|l| l.l_p));
        let lb = MinAvgMax::of(self.losses.iter().map(|l| l.l_b));
        let leak = MinAvgMax::of(self.leak.iter().copied());
        writeln!(w, "# Lp avg: {:.6e}", lp.avg)?;
        writeln!(w, "# Lb avg: {:.6e}", lb.avg)?;
        writeln!(w, "# leak avg: {:.6e}", leak.avg)?;
        Ok(())
    }
}

/// Rolls `model` out from rest on the benchmark channel for
/// `warmup + steps` steps and records the last `steps` of them. Losses are
/// estimated with samples drawn from `seed`.
pub fn run_dfg<T: Real>(model: &PdeModel<T>, re: u32, steps: usize, warmup: usize, seed: u64) -> Result<ForceReport> {
    let setup = DfgSetup::new(re)?;
    let domain = setup.domain();
    let layout: FieldLayout = model.layout().clone();
    if layout.kind() != PdeKind::Flow {
        return Err(Error::Layout("benchmark needs a flow model".into()));
    }
    check_circle(&domain.frame(0.0), setup.circle, 256)?;
    let n = layout.channels() * setup.width * setup.height;
    let mut state = CoefficientState::at_rest(layout, setup.width, setup.height, 0.0, domain.dt, vec![0.0; n])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = SamplePlan::default();
    let mut report = ForceReport {
        setup,
        warmup,
        samples: Vec::with_capacity(steps),
        losses: Vec::with_capacity(steps),
        leak: Vec::with_capacity(steps),
    };
    for step in 1..=warmup + steps {
        state = model.step(&domain, &state)?;
        if !state.is_finite() {
            return Err(Error::Rollout { step });
        }
        if step <= warmup {
            continue;
        }
        let frame = domain.frame(state.t1());
        let samples = draw_samples(&frame, &plan, state.t0(), state.dt(), &mut rng)?;
        let loss = evaluate_loss(&state, &frame, &samples, &LossWeights::FLOW, None)?;
        let forces = surface_forces(&state, setup.circle, setup.mu, 256, state.t1())?;
        let [f_d, f_l] = forces.total();
        let (c_d, c_l) = drag_lift_coefficients(f_d, f_l, setup.rho, setup.u_mean, setup.diameter)?;
        if !loss.is_finite() || !c_d.is_finite() || !c_l.is_finite() {
            return Err(Error::Rollout { step });
        }
        report.samples.push(ForceSample {
            step,
            forces,
            f_d,
            f_l,
            c_d,
            c_l,
        });
        report.losses.push(loss);
        report.leak.push(divergence_leak(&state, &frame)?);
    }
    Ok(report)
}
