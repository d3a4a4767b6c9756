//! Monte Carlo estimates of the physics-informed losses over one time slab,
//! with exact reverse-mode gradients with respect to the spline
//! coefficients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainFrame, Physics};
use crate::error::{Error, Result};
use crate::field::{az, velocity_from_probe, CoefficientState, FieldName, FieldProbe, PdeKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossWeights {
    /// `L_tot = alpha * L_p + beta * L_b`
    Flow { alpha: f64, beta: f64 },
    /// `L_tot = alpha * L_z + beta * L_v + gamma * L_b`
    Wave { alpha: f64, beta: f64, gamma: f64 },
}

impl LossWeights {
    pub const FLOW: Self = Self::Flow {
        alpha: 10.0,
        beta: 20.0,
    };
    pub const WAVE: Self = Self::Wave {
        alpha: 0.1,
        beta: 1.0,
        gamma: 10.0,
    };

    pub fn default_for(kind: PdeKind) -> Self {
        match kind {
            PdeKind::Flow => Self::FLOW,
            PdeKind::Wave => Self::WAVE,
        }
    }

    pub fn kind(&self) -> PdeKind {
        match self {
            Self::Flow { .. } => PdeKind::Flow,
            Self::Wave { .. } => PdeKind::Wave,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Flow { alpha, beta } => alpha > 0.0 && beta > 0.0,
            Self::Wave { alpha, beta, gamma } => alpha > 0.0 && beta > 0.0 && gamma > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("loss weights must be strictly positive".into()))
        }
    }
}

/// How many Monte Carlo points are drawn per slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    /// Jittered points per fluid cell.
    pub interior_per_cell: usize,
    /// Stratified points per boundary face.
    pub boundary_per_face: usize,
    /// Stratified time draws per spatial point.
    pub time_per_point: usize,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            interior_per_cell: 1,
            boundary_per_face: 2,
            time_per_point: 1,
        }
    }
}

impl SamplePlan {
    pub fn validate(&self) -> Result<()> {
        if self.interior_per_cell == 0 || self.boundary_per_face == 0 || self.time_per_point == 0 {
            return Err(Error::Config("sample counts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub face: usize,
    pub point: [f64; 3],
}

/// Sample points of one slab, shared between a loss and its gradient.
#[derive(Debug, Clone, Default)]
pub struct SlabSamples {
    pub interior: Vec<[f64; 3]>,
    pub boundary: Vec<BoundarySample>,
}

/// Draws stratified samples: `interior_per_cell` uniform points inside each
/// fluid cell, `boundary_per_face` points on equal sub-segments of each
/// face, and `time_per_point` stratified times in `[t0, t0 + dt]`.
pub fn draw_samples<R: Rng + ?Sized>(
    frame: &DomainFrame,
    plan: &SamplePlan,
    t0: f64,
    dt: f64,
    rng: &mut R,
) -> Result<SlabSamples> {
    plan.validate()?;
    if frame.fluid.is_empty() {
        return Err(Error::Domain("domain has no fluid cells".into()));
    }
    let st = plan.time_per_point;
    let time = |rng: &mut R, k: usize| t0 + dt * (k as f64 + rng.gen::<f64>()) / st as f64;
    let mut interior = Vec::with_capacity(frame.fluid.len() * plan.interior_per_cell * st);
    for &cell in &frame.fluid {
        let (cx, cy) = ((cell % frame.width) as f64, (cell / frame.width) as f64);
        for _ in 0..plan.interior_per_cell {
            let x = cx + rng.gen::<f64>() - 0.5;
            let y = cy + rng.gen::<f64>() - 0.5;
            for k in 0..st {
                interior.push([x, y, time(rng, k)]);
            }
        }
    }
    let nb = plan.boundary_per_face;
    let mut boundary = Vec::with_capacity(frame.faces.len() * nb * st);
    for (fi, face) in frame.faces.iter().enumerate() {
        for seg in 0..nb {
            let s = (seg as f64 + rng.gen::<f64>()) / nb as f64 - 0.5;
            let x = face.center[0] + s * face.tangent[0];
            let y = face.center[1] + s * face.tangent[1];
            for k in 0..st {
                boundary.push(BoundarySample {
                    face: fi,
                    point: [x, y, time(rng, k)],
                });
            }
        }
    }
    Ok(SlabSamples { interior, boundary })
}

/// Loss components of one slab. Terms that do not apply to the PDE kind are 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub kind: PdeKind,
    pub l_p: f64,
    pub l_z: f64,
    pub l_v: f64,
    pub l_b: f64,
    pub l_tot: f64,
    pub interior_samples: usize,
    pub boundary_samples: usize,
}

impl LossReport {
    fn empty(kind: PdeKind) -> Self {
        Self {
            kind,
            l_p: 0.0,
            l_z: 0.0,
            l_v: 0.0,
            l_b: 0.0,
            l_tot: 0.0,
            interior_samples: 0,
            boundary_samples: 0,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.l_p, self.l_z, self.l_v, self.l_b, self.l_tot]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Gradient of a loss with respect to both coefficient slices.
#[derive(Debug, Clone)]
pub struct CoefficientGradient {
    pub slices: [Vec<f64>; 2],
    pub wanted: [bool; 2],
}

impl CoefficientGradient {
    pub fn new(len: usize, wanted: [bool; 2]) -> Self {
        let alloc = |w: bool| if w { vec![0.0; len] } else { Vec::new() };
        Self {
            slices: [alloc(wanted[0]), alloc(wanted[1])],
            wanted,
        }
    }

    fn views(&mut self) -> [&mut [f64]; 2] {
        let [a, b] = &mut self.slices;
        [a.as_mut_slice(), b.as_mut_slice()]
    }
}

fn flow_params(frame: &DomainFrame) -> Result<(f64, f64, [f64; 2])> {
    match frame.physics {
        Physics::Flow { rho, mu, force } => Ok((rho, mu, force)),
        _ => Err(Error::Layout("flow residual on a wave domain".into())),
    }
}

fn wave_params(frame: &DomainFrame) -> Result<(f64, f64)> {
    match frame.physics {
        Physics::Wave { k, delta } => Ok((k, delta)),
        _ => Err(Error::Layout("wave residual on a flow domain".into())),
    }
}

fn check_interior(state: &CoefficientState, frame: &DomainFrame, point: [f64; 3]) -> Result<()> {
    state.check_point(point[0], point[1], point[2])?;
    if !frame.is_fluid_at(point[0], point[1]) {
        return Err(Error::SolidSample {
            x: point[0],
            y: point[1],
        });
    }
    Ok(())
}

fn momentum(a: &FieldProbe, p: &FieldProbe, rho: f64, mu: f64, force: [f64; 2]) -> [f64; 2] {
    let v = velocity_from_probe(a);
    let adv = [
        v.v[0] * v.grad[0][0] + v.v[1] * v.grad[0][1],
        v.v[0] * v.grad[1][0] + v.v[1] * v.grad[1][1],
    ];
    [
        rho * (v.dv_dt[0] + adv[0]) - mu * v.laplacian[0] + p.d(1, 0, 0) - force[0],
        rho * (v.dv_dt[1] + adv[1]) - mu * v.laplacian[1] + p.d(0, 1, 0) - force[1],
    ]
}

/// `rho (dv/dt + (v . grad) v) - mu lap v + grad p - f` at a fluid point.
pub fn momentum_residual_at(state: &CoefficientState, frame: &DomainFrame, point: [f64; 3]) -> Result<[f64; 2]> {
    let (rho, mu, force) = flow_params(frame)?;
    let layout = state.layout();
    if layout.kind() != PdeKind::Flow {
        return Err(Error::Layout("momentum residual requires a flow layout".into()));
    }
    check_interior(state, frame, point)?;
    let [x, y, t] = point;
    let a = FieldProbe::new(state, layout.field(FieldName::Az)?, x, y, t);
    let p = FieldProbe::new(state, layout.field(FieldName::P)?, x, y, t);
    Ok(momentum(&a, &p, rho, mu, force))
}

/// `(dz/dt - v_z, dv_z/dt - k lap z + delta v_z)` at a fluid point.
pub fn wave_residuals_at(state: &CoefficientState, frame: &DomainFrame, point: [f64; 3]) -> Result<(f64, f64)> {
    let (k, delta) = wave_params(frame)?;
    let layout = state.layout();
    if layout.kind() != PdeKind::Wave {
        return Err(Error::Layout("wave residuals require a wave layout".into()));
    }
    check_interior(state, frame, point)?;
    let [x, y, t] = point;
    let z = FieldProbe::new(state, layout.field(FieldName::Z)?, x, y, t);
    let v = FieldProbe::new(state, layout.field(FieldName::Vz)?, x, y, t);
    Ok(wave_pointwise(&z, &v, k, delta))
}

fn wave_pointwise(z: &FieldProbe, v: &FieldProbe, k: f64, delta: f64) -> (f64, f64) {
    let vz = v.d(0, 0, 0);
    let rz = z.d(0, 0, 1) - vz;
    let rv = v.d(0, 0, 1) - k * (z.d(2, 0, 0) + z.d(0, 2, 0)) + delta * vz;
    (rz, rv)
}

/// Evaluates the slab loss on fixed samples. When `grad` is given, the exact
/// gradient of `l_tot` is accumulated into it.
pub fn evaluate_loss(
    state: &CoefficientState,
    frame: &DomainFrame,
    samples: &SlabSamples,
    weights: &LossWeights,
    grad: Option<&mut CoefficientGradient>,
) -> Result<LossReport> {
    weights.validate()?;
    if weights.kind() != state.layout().kind() || frame.kind() != state.layout().kind() {
        return Err(Error::Layout("state, domain and weights disagree on the PDE kind".into()));
    }
    if frame.fluid.is_empty() {
        return Err(Error::Domain("domain has no fluid cells".into()));
    }
    if frame.width != state.width() || frame.height != state.height() {
        return Err(Error::Shape(format!(
            "domain {}x{} does not match state {}x{}",
            frame.width,
            frame.height,
            state.width(),
            state.height()
        )));
    }
    match *weights {
        LossWeights::Flow { alpha, beta } => flow_slab(state, frame, samples, alpha, beta, grad),
        LossWeights::Wave { alpha, beta, gamma } => wave_slab(state, frame, samples, alpha, beta, gamma, grad),
    }
}

fn flow_slab(
    state: &CoefficientState,
    frame: &DomainFrame,
    samples: &SlabSamples,
    alpha: f64,
    beta: f64,
    mut grad: Option<&mut CoefficientGradient>,
) -> Result<LossReport> {
    let (rho, mu, force) = flow_params(frame)?;
    let layout = state.layout();
    let az_desc = *layout.field(FieldName::Az)?;
    let p_desc = *layout.field(FieldName::P)?;
    let mut report = LossReport::empty(PdeKind::Flow);
    let ni = samples.interior.len();
    let nb = samples.boundary.len();
    report.interior_samples = ni;
    report.boundary_samples = nb;

    let mut sum_p = 0.0;
    for &pt in &samples.interior {
        check_interior(state, frame, pt)?;
        let [x, y, t] = pt;
        let a = FieldProbe::new(state, &az_desc, x, y, t);
        let p = FieldProbe::new(state, &p_desc, x, y, t);
        let r = momentum(&a, &p, rho, mu, force);
        sum_p += r[0] * r[0] + r[1] * r[1];
        if let Some(g) = grad.as_deref_mut() {
            let wanted = g.wanted;
            let mut out = g.views();
            let gx = alpha * 2.0 * r[0] / ni as f64;
            let gy = alpha * 2.0 * r[1] / ni as f64;
            let d = |c: (usize, usize, usize)| a.d(c.0, c.1, c.2);
            let (vx, vy) = (d(az::Y), -d(az::X));
            let (a_xx, a_xy, a_yy) = (d(az::XX), d(az::XY), d(az::YY));
            let g_vx = rho * (a_xy * gx - a_xx * gy);
            let g_vy = rho * (a_yy * gx - a_xy * gy);
            let adj: [((usize, usize, usize), f64); 11] = [
                (az::TY, rho * gx),
                (az::TX, -rho * gy),
                (az::Y, g_vx),
                (az::X, -g_vy),
                (az::XY, rho * (vx * gx - vy * gy)),
                (az::YY, rho * vy * gx),
                (az::XX, -rho * vx * gy),
                (az::XXY, -mu * gx),
                (az::YYY, -mu * gx),
                (az::XXX, mu * gy),
                (az::XYY, mu * gy),
            ];
            for (c, gv) in adj {
                a.scatter(&mut out, wanted, c.0, c.1, c.2, gv);
            }
            p.scatter(&mut out, wanted, 1, 0, 0, gx);
            p.scatter(&mut out, wanted, 0, 1, 0, gy);
        }
    }

    let mut sum_b = 0.0;
    for s in &samples.boundary {
        let [x, y, t] = s.point;
        state.check_point(x, y, t)?;
        let face = &frame.faces[s.face];
        let a = FieldProbe::new(state, &az_desc, x, y, t);
        let v = [a.d(0, 1, 0), -a.d(1, 0, 0)];
        let vd = frame.face_velocity(face, x, y);
        let e = [v[0] - vd[0], v[1] - vd[1]];
        sum_b += e[0] * e[0] + e[1] * e[1];
        if let Some(g) = grad.as_deref_mut() {
            let wanted = g.wanted;
            let mut out = g.views();
            let scale = beta * 2.0 / nb as f64;
            a.scatter(&mut out, wanted, 0, 1, 0, scale * e[0]);
            a.scatter(&mut out, wanted, 1, 0, 0, -scale * e[1]);
        }
    }

    report.l_p = if ni > 0 { sum_p / ni as f64 } else { 0.0 };
    report.l_b = if nb > 0 { sum_b / nb as f64 } else { 0.0 };
    report.l_tot = alpha * report.l_p + beta * report.l_b;
    Ok(report)
}

fn wave_slab(
    state: &CoefficientState,
    frame: &DomainFrame,
    samples: &SlabSamples,
    alpha: f64,
    beta: f64,
    gamma: f64,
    mut grad: Option<&mut CoefficientGradient>,
) -> Result<LossReport> {
    let (k, delta) = wave_params(frame)?;
    let layout = state.layout();
    let z_desc = *layout.field(FieldName::Z)?;
    let v_desc = *layout.field(FieldName::Vz)?;
    let mut report = LossReport::empty(PdeKind::Wave);
    let ni = samples.interior.len();
    let nb = samples.boundary.len();
    report.interior_samples = ni;
    report.boundary_samples = nb;

    let (mut sum_z, mut sum_v) = (0.0, 0.0);
    for &pt in &samples.interior {
        check_interior(state, frame, pt)?;
        let [x, y, t] = pt;
        let z = FieldProbe::new(state, &z_desc, x, y, t);
        let v = FieldProbe::new(state, &v_desc, x, y, t);
        let (rz, rv) = wave_pointwise(&z, &v, k, delta);
        sum_z += rz * rz;
        sum_v += rv * rv;
        if let Some(g) = grad.as_deref_mut() {
            let wanted = g.wanted;
            let mut out = g.views();
            let gz = alpha * 2.0 * rz / ni as f64;
            let gv = beta * 2.0 * rv / ni as f64;
            z.scatter(&mut out, wanted, 0, 0, 1, gz);
            z.scatter(&mut out, wanted, 2, 0, 0, -k * gv);
            z.scatter(&mut out, wanted, 0, 2, 0, -k * gv);
            v.scatter(&mut out, wanted, 0, 0, 0, -gz + delta * gv);
            v.scatter(&mut out, wanted, 0, 0, 1, gv);
        }
    }

    let mut sum_b = 0.0;
    for s in &samples.boundary {
        let [x, y, t] = s.point;
        state.check_point(x, y, t)?;
        let face = &frame.faces[s.face];
        let z = FieldProbe::new(state, &z_desc, x, y, t);
        let e = z.d(0, 0, 0) - frame.face_height(face, t);
        sum_b += e * e;
        if let Some(g) = grad.as_deref_mut() {
            let wanted = g.wanted;
            let mut out = g.views();
            z.scatter(&mut out, wanted, 0, 0, 0, gamma * 2.0 * e / nb as f64);
        }
    }

    report.l_z = if ni > 0 { sum_z / ni as f64 } else { 0.0 };
    report.l_v = if ni > 0 { sum_v / ni as f64 } else { 0.0 };
    report.l_b = if nb > 0 { sum_b / nb as f64 } else { 0.0 };
    report.l_tot = alpha * report.l_z + beta * report.l_v + gamma * report.l_b;
    Ok(report)
}

/// Draws samples over the state's slab and evaluates the flow loss.
pub fn flow_loss<R: Rng + ?Sized>(
    state: &CoefficientState,
    frame: &DomainFrame,
    plan: &SamplePlan,
    weights: &LossWeights,
    rng: &mut R,
) -> Result<LossReport> {
    if state.layout().kind() != PdeKind::Flow {
        return Err(Error::Layout("flow loss requires a flow layout".into()));
    }
    let samples = draw_samples(frame, plan, state.t0(), state.dt(), rng)?;
    evaluate_loss(state, frame, &samples, weights, None)
}

/// Draws samples over the state's slab and evaluates the wave loss.
pub fn wave_loss<R: Rng + ?Sized>(
    state: &CoefficientState,
    frame: &DomainFrame,
    plan: &SamplePlan,
    weights: &LossWeights,
    rng: &mut R,
) -> Result<LossReport> {
    if state.layout().kind() != PdeKind::Wave {
        return Err(Error::Layout("wave loss requires a wave layout".into()));
    }
    let samples = draw_samples(frame, plan, state.t0(), state.dt(), rng)?;
    evaluate_loss(state, frame, &samples, weights, None)
}
