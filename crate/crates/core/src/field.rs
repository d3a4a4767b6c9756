//! Spline-coefficient grids and continuous evaluation of the fields they
//! encode.
//!
//! Nodes sit at integer coordinates `(x, y)` with `0 <= x < W`, `0 <= y < H`.
//! Each field stores `(l+1)^2` mode channels per node and two time slices;
//! time is interpolated linearly between them (temporal order zero).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{kernel, KernelTable, MAX_ORDER};

pub(crate) const MAX_MODES: usize = (MAX_ORDER + 1) * (MAX_ORDER + 1);
const MAX_DERIV: usize = MAX_ORDER + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Flow,
    Wave,
}

impl std::str::FromStr for PdeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Self::Flow),
            "wave" => Ok(Self::Wave),
            other => Err(Error::Config(format!("unknown pde kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FieldName {
    #[serde(rename = "a_z")]
    Az,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "v_z")]
    Vz,
}

impl FieldName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Az => "a_z",
            Self::P => "p",
            Self::Z => "z",
            Self::Vz => "v_z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDesc {
    pub name: FieldName,
    /// Spatial order `l = m`.
    pub order: usize,
    /// First channel of this field in the packed coefficient array.
    pub offset: usize,
}

impl FieldDesc {
    pub fn modes(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    /// Channel holding mode `(i, j)` (x-mode `i`, y-mode `j`).
    pub fn channel(&self, i: usize, j: usize) -> usize {
        self.offset + i * (self.order + 1) + j
    }
}

/// Which fields exist and at which spline orders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLayout {
    kind: PdeKind,
    fields: Vec<FieldDesc>,
}

impl FieldLayout {
    /// Flow layout: vector potential `a_z` and pressure `p`.
    ///
    /// The momentum residual needs third spatial derivatives of `a_z`, so
    /// `az_order` must be at least 2.
    pub fn flow(az_order: usize, p_order: usize) -> Result<Self> {
        if az_order < 2 {
            return Err(Error::Config(format!(
                "a_z needs spatial order >= 2 for a bounded-variation momentum residual, got {az_order}"
            )));
        }
        if az_order > MAX_ORDER || p_order > MAX_ORDER {
            return Err(Error::Config(format!(
                "spatial order exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        Ok(Self::build(
            PdeKind::Flow,
            &[(FieldName::Az, az_order), (FieldName::P, p_order)],
        ))
    }

    /// Wave layout: height `z` and vertical velocity `v_z` at the same order.
    pub fn wave(order: usize) -> Result<Self> {
        if order < 1 {
            return Err(Error::Config(
                "z needs spatial order >= 1 for a bounded-variation Laplacian".into(),
            ));
        }
        if order > MAX_ORDER {
            return Err(Error::Config(format!(
                "spatial order exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        Ok(Self::build(
            PdeKind::Wave,
            &[(FieldName::Z, order), (FieldName::Vz, order)],
        ))
    }

    /// `a_z` at order 2, pressure at order 1.
    pub fn default_flow() -> Self {
        Self::flow(2, 1).expect("valid orders")
    }

    pub fn default_wave() -> Self {
        Self::wave(2).expect("valid order")
    }

    fn build(kind: PdeKind, spec: &[(FieldName, usize)]) -> Self {
        let mut offset = 0;
        let fields = spec
            .iter()
            .map(|&(name, order)| {
                let desc = FieldDesc {
                    name,
                    order,
                    offset,
                };
                offset += desc.modes();
                desc
            })
            .collect();
        Self { kind, fields }
    }

    pub fn kind(&self) -> PdeKind {
        self.kind
    }

    pub fn fields(&self) -> &[FieldDesc] {
        &self.fields
    }

    pub fn channels(&self) -> usize {
        self.fields.iter().map(FieldDesc::modes).sum()
    }

    pub fn field(&self, name: FieldName) -> Result<&FieldDesc> {
        self.fields
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::Layout(format!("field {} not in {:?} layout", name.as_str(), self.kind)))
    }

    /// Channels that are mean-normalized after every model step: the value
    /// mode of `a_z` and `p`, which are only defined up to a constant.
    pub fn gauge_channels(&self) -> Vec<usize> {
        match self.kind {
            PdeKind::Flow => self.fields.iter().map(|f| f.channel(0, 0)).collect(),
            PdeKind::Wave => Vec::new(),
        }
    }

    /// Checks the layout against the per-kind order rules.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = match self.kind {
            PdeKind::Flow => Self::flow(
                self.field(FieldName::Az)?.order,
                self.field(FieldName::P)?.order,
            )?,
            PdeKind::Wave => Self::wave(self.field(FieldName::Z)?.order)?,
        };
        if rebuilt != *self {
            return Err(Error::Layout("inconsistent field layout".into()));
        }
        Ok(())
    }
}

/// Spline coefficients of every field at the two ends of a time slab.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    layout: FieldLayout,
    width: usize,
    height: usize,
    t0: f64,
    dt: f64,
    slices: [Vec<f64>; 2],
}

impl CoefficientState {
    pub fn zeros(layout: FieldLayout, width: usize, height: usize, t0: f64, dt: f64) -> Self {
        let n = layout.channels() * width * height;
        Self {
            layout,
            width,
            height,
            t0,
            dt,
            slices: [vec![0.0; n], vec![0.0; n]],
        }
    }

    /// State whose slab is `[t0, t0 + dt]` with the given slices.
    pub fn from_slices(
        layout: FieldLayout,
        width: usize,
        height: usize,
        t0: f64,
        dt: f64,
        start: Vec<f64>,
        end: Vec<f64>,
    ) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Shape(format!("grid {width}x{height} is smaller than 2x2")));
        }
        let n = layout.channels() * width * height;
        if start.len() != n || end.len() != n {
            return Err(Error::Shape(format!(
                "expected {n} coefficients per slice, got {} and {}",
                start.len(),
                end.len()
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            layout,
            width,
            height,
            t0,
            dt,
            slices: [start, end],
        })
    }

    /// Rollout start: the state holds `slice` at time `t` as its newest
    /// slice, so the next step predicts `t + dt`.
    pub fn at_rest(layout: FieldLayout, width: usize, height: usize, t: f64, dt: f64, slice: Vec<f64>) -> Result<Self> {
        Self::from_slices(layout, width, height, t - dt, dt, slice.clone(), slice)
    }

    pub fn layout(&self) -> &FieldLayout {
        &self.layout
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    /// Start time of the slab.
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t1(&self) -> f64 {
        self.t0 + self.dt
    }
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.slices[k]
    }
    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.slices[k]
    }
    pub fn into_slices(self) -> [Vec<f64>; 2] {
        self.slices
    }

    /// One channel (`H * W` values) of slice `k`.
    pub fn channel(&self, k: usize, channel: usize) -> &[f64] {
        let plane = self.width * self.height;
        &self.slices[k][channel * plane..(channel + 1) * plane]
    }

    /// Promotes the end slice to the start and installs `next` as the new end.
    pub fn advance(&mut self, next: Vec<f64>) -> Result<()> {
        if next.len() != self.slices[1].len() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                self.slices[1].len(),
                next.len()
            )));
        }
        let old_end = std::mem::replace(&mut self.slices[1], next);
        self.slices[0] = old_end;
        self.t0 += self.dt;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.slices.iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_point(&self, x: f64, y: f64, t: f64) -> Result<()> {
        let tol = 1e-12 * self.dt.max(1.0);
        let ok = x >= 0.0
            && x <= (self.width - 1) as f64
            && y >= 0.0
            && y <= (self.height - 1) as f64
            && t >= self.t0 - tol
            && t <= self.t1() + tol;
        if ok {
            Ok(())
        } else {
            Err(Error::Sampling { x, y, t })
        }
    }

    /// Normalized time offset inside the slab, clamped to `[0, 1]`.
    pub(crate) fn tau(&self, t: f64) -> f64 {
        ((t - self.t0) / self.dt).clamp(0.0, 1.0)
    }
}

/// Kernel weights along one axis for the two neighbouring nodes.
#[derive(Clone, Copy)]
pub(crate) struct AxisWeights {
    pub base: usize,
    /// `w[node][mode][deriv]`
    pub w: [[[f64; MAX_DERIV + 1]; MAX_ORDER + 1]; 2],
}

impl AxisWeights {
    pub fn new(table: &KernelTable, coord: f64, nodes: usize, max_deriv: usize) -> Self {
        let base = (coord.floor().max(0.0) as usize).min(nodes - 2);
        let mut w = [[[0.0; MAX_DERIV + 1]; MAX_ORDER + 1]; 2];
        for (node, wn) in w.iter_mut().enumerate() {
            let off = coord - (base + node) as f64;
            for (mode, wm) in wn.iter_mut().enumerate().take(table.modes()) {
                for (d, wd) in wm.iter_mut().enumerate().take(max_deriv + 1) {
                    *wd = table.eval_unchecked(mode, off, d);
                }
            }
        }
        Self { base, w }
    }
}

/// Local view of one field around a sample point: the 2x2 node patch of
/// both time slices together with all kernel weights needed for derivatives
/// up to order `l + 1` in space and 1 in time.
pub(crate) struct FieldProbe {
    desc: FieldDesc,
    ax: AxisWeights,
    ay: AxisWeights,
    /// `[slice][dt]` time weights.
    wt: [[f64; 2]; 2],
    /// `tc[dt][mode][node]`, slices already combined with the time weights.
    tc: [[[f64; 4]; MAX_MODES]; 2],
    width: usize,
    plane: usize,
}

impl FieldProbe {
    pub fn new(state: &CoefficientState, desc: &FieldDesc, x: f64, y: f64, t: f64) -> Self {
        let table = kernel(desc.order).expect("validated order");
        let dmax = desc.order + 1;
        let ax = AxisWeights::new(table, x, state.width, dmax);
        let ay = AxisWeights::new(table, y, state.height, dmax);
        let tau = state.tau(t);
        let wt = [[1.0 - tau, -1.0 / state.dt], [tau, 1.0 / state.dt]];
        let plane = state.width * state.height;
        let mut tc = [[[0.0; 4]; MAX_MODES]; 2];
        let n = desc.order + 1;
        for i in 0..n {
            for j in 0..n {
                let mode = i * n + j;
                let base = (desc.offset + mode) * plane;
                for node in 0..4 {
                    let (ox, oy) = (node & 1, node >> 1);
                    let idx = base + (ay.base + oy) * state.width + ax.base + ox;
                    let c0 = state.slices[0][idx];
                    let c1 = state.slices[1][idx];
                    tc[0][mode][node] = wt[0][0] * c0 + wt[1][0] * c1;
                    tc[1][mode][node] = wt[0][1] * c0 + wt[1][1] * c1;
                }
            }
        }
        Self {
            desc: *desc,
            ax,
            ay,
            wt,
            tc,
            width: state.width,
            plane,
        }
    }

    /// Partial derivative `d^(dx+dy+dt) / dx^dx dy^dy dt^dt` of the field.
    #[inline]
    pub fn d(&self, dx: usize, dy: usize, dt: usize) -> f64 {
        let n = self.desc.order + 1;
        let tc = &self.tc[dt];
        let mut acc = 0.0;
        for i in 0..n {
            let wx = [self.ax.w[0][i][dx], self.ax.w[1][i][dx]];
            for j in 0..n {
                let wy = [self.ay.w[0][j][dy], self.ay.w[1][j][dy]];
                let c = &tc[i * n + j];
                acc += wy[0] * (c[0] * wx[0] + c[1] * wx[1]) + wy[1] * (c[2] * wx[0] + c[3] * wx[1]);
            }
        }
        acc
    }

    /// Adds `g * d(value)/d(coefficient)` into `grad` for the chosen slices.
    pub fn scatter(&self, grad: &mut [&mut [f64]; 2], slices: [bool; 2], dx: usize, dy: usize, dt: usize, g: f64) {
        if g == 0.0 {
            return;
        }
        let n = self.desc.order + 1;
        for s in 0..2 {
            if !slices[s] {
                continue;
            }
            let gs = g * self.wt[s][dt];
            if gs == 0.0 {
                continue;
            }
            let out = &mut *grad[s];
            for i in 0..n {
                for j in 0..n {
                    let base = (self.desc.offset + i * n + j) * self.plane;
                    for node in 0..4 {
                        let (ox, oy) = (node & 1, node >> 1);
                        let w = self.ax.w[ox][i][dx] * self.ay.w[oy][j][dy];
                        let idx = base + (self.ay.base + oy) * self.width + self.ax.base + ox;
                        out[idx] += gs * w;
                    }
                }
            }
        }
    }
}

/// Value or partial derivative of one field at `(x, y, t)`.
pub fn sample_scalar(
    state: &CoefficientState,
    field: FieldName,
    point: [f64; 3],
    deriv: (usize, usize, usize),
) -> Result<f64> {
    let desc = state.layout.field(field)?;
    let [x, y, t] = point;
    state.check_point(x, y, t)?;
    let max = desc.order + 1;
    for d in [deriv.0, deriv.1] {
        if d > max {
            return Err(Error::DerivativeOrder { requested: d, max });
        }
    }
    if deriv.2 > 1 {
        return Err(Error::DerivativeOrder {
            requested: deriv.2,
            max: 1,
        });
    }
    Ok(FieldProbe::new(state, desc, x, y, t).d(deriv.0, deriv.1, deriv.2))
}

/// Velocity and its derivatives, derived from the vector potential as
/// `v = (d a_z / dy, -d a_z / dx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub v: [f64; 2],
    pub dv_dt: [f64; 2],
    /// `grad[i][j] = d v_i / d x_j`
    pub grad: [[f64; 2]; 2],
    pub laplacian: [f64; 2],
}

impl VelocitySample {
    pub fn divergence(&self) -> f64 {
        self.grad[0][0] + self.grad[1][1]
    }
}

/// Spatial derivatives of `a_z` the flow residual reads, as `(dx, dy, dt)`.
pub(crate) mod az {
    pub const X: (usize, usize, usize) = (1, 0, 0);
    pub const Y: (usize, usize, usize) = (0, 1, 0);
    pub const XX: (usize, usize, usize) = (2, 0, 0);
    pub const XY: (usize, usize, usize) = (1, 1, 0);
    pub const YY: (usize, usize, usize) = (0, 2, 0);
    pub const XXX: (usize, usize, usize) = (3, 0, 0);
    pub const XXY: (usize, usize, usize) = (2, 1, 0);
    pub const XYY: (usize, usize, usize) = (1, 2, 0);
    pub const YYY: (usize, usize, usize) = (0, 3, 0);
    pub const TX: (usize, usize, usize) = (1, 0, 1);
    pub const TY: (usize, usize, usize) = (0, 1, 1);
}

pub(crate) fn velocity_from_probe(p: &FieldProbe) -> VelocitySample {
    let d = |c: (usize, usize, usize)| p.d(c.0, c.1, c.2);
    let (a_x, a_y) = (d(az::X), d(az::Y));
    let (a_xx, a_xy, a_yy) = (d(az::XX), d(az::XY), d(az::YY));
    VelocitySample {
        v: [a_y, -a_x],
        dv_dt: [d(az::TY), -d(az::TX)],
        grad: [[a_xy, a_yy], [-a_xx, -a_xy]],
        laplacian: [d(az::XXY) + d(az::YYY), -(d(az::XXX) + d(az::XYY))],
    }
}

/// Velocity field and derivatives at `point` (flow layouts only).
pub fn velocity_at(state: &CoefficientState, point: [f64; 3]) -> Result<VelocitySample> {
    if state.layout.kind != PdeKind::Flow {
        return Err(Error::Layout("velocity requires a flow layout".into()));
    }
    let [x, y, t] = point;
    state.check_point(x, y, t)?;
    let desc = state.layout.field(FieldName::Az)?;
    Ok(velocity_from_probe(&FieldProbe::new(state, desc, x, y, t)))
}

/// Every field quantity the residuals use at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSample {
    Flow {
        velocity: VelocitySample,
        p: f64,
        grad_p: [f64; 2],
    },
    Wave {
        z: f64,
        dz_dt: f64,
        laplacian_z: f64,
        v_z: f64,
        dvz_dt: f64,
    },
}

pub fn sample_fields(state: &CoefficientState, point: [f64; 3]) -> Result<FieldSample> {
    let [x, y, t] = point;
    state.check_point(x, y, t)?;
    match state.layout.kind {
        PdeKind::Flow => {
            let a = FieldProbe::new(state, state.layout.field(FieldName::Az)?, x, y, t);
            let p = FieldProbe::new(state, state.layout.field(FieldName::P)?, x, y, t);
            Ok(FieldSample::Flow {
                velocity: velocity_from_probe(&a),
                p: p.d(0, 0, 0),
                grad_p: [p.d(1, 0, 0), p.d(0, 1, 0)],
            })
        }
        PdeKind::Wave => {
            let z = FieldProbe::new(state, state.layout.field(FieldName::Z)?, x, y, t);
            let v = FieldProbe::new(state, state.layout.field(FieldName::Vz)?, x, y, t);
            Ok(FieldSample::Wave {
                z: z.d(0, 0, 0),
                dz_dt: z.d(0, 0, 1),
                laplacian_z: z.d(2, 0, 0) + z.d(0, 2, 0),
                v_z: v.d(0, 0, 0),
                dvz_dt: v.d(0, 0, 1),
            })
        }
    }
}

/// Quantities [`render`] can rasterize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RenderField {
    #[serde(rename = "a_z")]
    Az,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "v_mag")]
    VMag,
    #[serde(rename = "v_x")]
    Vx,
    #[serde(rename = "v_y")]
    Vy,
    #[serde(rename = "z")]
    Z,
    #[serde(rename = "v_z")]
    Vz,
}

impl std::str::FromStr for RenderField {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "a_z" => Self::Az,
            "p" => Self::P,
            "v_mag" => Self::VMag,
            "v_x" => Self::Vx,
            "v_y" => Self::Vy,
            "z" => Self::Z,
            "v_z" => Self::Vz,
            other => return Err(Error::Argument(format!("unknown field '{other}'"))),
        })
    }
}

/// Dense row-major scalar raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max_abs_diff(&self, other: &Grid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Rasterizes `field` at `upsample` samples per cell and normalized slab
/// time `tau`. Output pixel `(X, Y)` is the point `(X / f, Y / f)`.
///
/// Evaluation runs as a separable transposed convolution of the coefficient
/// planes with kernel stencils sampled at the `f` sub-cell offsets. Pixels
/// past the last node row/column see only the kernels of existing nodes.
pub fn render(state: &CoefficientState, field: RenderField, upsample: usize, tau: f64) -> Result<Grid> {
    if upsample == 0 {
        return Err(Error::Argument("upsample factor must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Argument(format!("tau must lie in [0, 1], got {tau}")));
    }
    let kind = state.layout.kind;
    let scalar = |name: FieldName, deriv: (usize, usize)| -> Result<Grid> {
        render_derivative(state, state.layout.field(name)?, deriv, upsample, tau)
    };
    let need = |k: PdeKind| {
        if kind == k {
            Ok(())
        } else {
            Err(Error::Layout(format!("{field:?} is not available in a {kind:?} layout")))
        }
    };
    match field {
        RenderField::Az => {
            need(PdeKind::Flow)?;
            scalar(FieldName::Az, (0, 0))
        }
        RenderField::P => {
            need(PdeKind::Flow)?;
            scalar(FieldName::P, (0, 0))
        }
        RenderField::Vx => {
            need(PdeKind::Flow)?;
            scalar(FieldName::Az, (0, 1))
        }
        RenderField::Vy => {
            need(PdeKind::Flow)?;
            let mut g = scalar(FieldName::Az, (1, 0))?;
            g.data.iter_mut().for_each(|v| *v = -*v);
            Ok(g)
        }
        RenderField::VMag => {
            need(PdeKind::Flow)?;
            let vx = scalar(FieldName::Az, (0, 1))?;
            let mut vy = scalar(FieldName::Az, (1, 0))?;
            for (b, a) in vy.data.iter_mut().zip(&vx.data) {
                *b = (a * a + *b * *b).sqrt();
            }
            Ok(vy)
        }
        RenderField::Z => {
            need(PdeKind::Wave)?;
            scalar(FieldName::Z, (0, 0))
        }
        RenderField::Vz => {
            need(PdeKind::Wave)?;
            scalar(FieldName::Vz, (0, 0))
        }
    }
}

fn stencil(table: &KernelTable, mode: usize, deriv: usize, f: usize) -> Vec<f64> {
    // taps for offsets u/f, u in -(f-1)..=(f-1)
    (0..2 * f - 1)
        .map(|k| {
            let u = k as f64 - (f - 1) as f64;
            table.eval_unchecked(mode, u / f as f64, deriv)
        })
        .collect()
}

fn render_derivative(
    state: &CoefficientState,
    desc: &FieldDesc,
    deriv: (usize, usize),
    f: usize,
    tau: f64,
) -> Result<Grid> {
    let table = kernel(desc.order)?;
    let max = desc.order + 1;
    if deriv.0 > max || deriv.1 > max {
        return Err(Error::DerivativeOrder {
            requested: deriv.0.max(deriv.1),
            max,
        });
    }
    let (w, h) = (state.width, state.height);
    let (ow, oh) = (w * f, h * f);
    let n = desc.order + 1;
    let kx: Vec<Vec<f64>> = (0..n).map(|i| stencil(table, i, deriv.0, f)).collect();
    let ky: Vec<Vec<f64>> = (0..n).map(|j| stencil(table, j, deriv.1, f)).collect();
    let mut out = Grid::zeros(ow, oh);
    let mut plane = vec![0.0; w * h];
    let mut rows = vec![0.0; h * ow];
    let radius = f as isize - 1;
    for i in 0..n {
        for j in 0..n {
            let ch = desc.channel(i, j);
            let c0 = state.channel(0, ch);
            let c1 = state.channel(1, ch);
            for (p, (a, b)) in plane.iter_mut().zip(c0.iter().zip(c1)) {
                *p = (1.0 - tau) * a + tau * b;
            }
            // transposed convolution along x
            rows.iter_mut().for_each(|v| *v = 0.0);
            for yy in 0..h {
                let src = &plane[yy * w..(yy + 1) * w];
                let dst = &mut rows[yy * ow..(yy + 1) * ow];
                for (xx, &c) in src.iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let centre = (xx * f) as isize;
                    for u in -radius..=radius {
                        let ox = centre + u;
                        if ox < 0 || ox >= ow as isize {
                            continue;
                        }
                        dst[ox as usize] += c * kx[i][(u + radius) as usize];
                    }
                }
            }
            // then along y
            for yy in 0..h {
                let src = &rows[yy * ow..(yy + 1) * ow];
                let centre = (yy * f) as isize;
                for v in -radius..=radius {
                    let oy = centre + v;
                    if oy < 0 || oy >= oh as isize {
                        continue;
                    }
                    let wgt = ky[j][(v + radius) as usize];
                    if wgt == 0.0 {
                        continue;
                    }
                    let dst = &mut out.data[oy as usize * ow..(oy as usize + 1) * ow];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += wgt * s;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(layout: FieldLayout, w: usize, h: usize, seed: u64) -> CoefficientState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = layout.channels() * w * h;
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        CoefficientState::from_slices(layout, w, h, 2.0, 1.0, a, b).unwrap()
    }

    #[test]
    fn layouts_reject_low_orders() {
        assert!(FieldLayout::flow(1, 1).is_err());
        assert!(FieldLayout::wave(0).is_err());
        assert_eq!(FieldLayout::default_flow().channels(), 13);
        assert_eq!(FieldLayout::wave(1).unwrap().channels(), 8);
        assert_eq!(FieldLayout::default_wave().channels(), 18);
        assert_eq!(FieldLayout::default_flow().gauge_channels(), vec![0, 9]);
    }

    #[test]
    fn zero_state_samples_zero() {
        let s = CoefficientState::zeros(FieldLayout::default_flow(), 6, 5, 0.0, 1.0);
        for d in [(0, 0, 0), (1, 0, 0), (3, 0, 0), (1, 2, 1)] {
            assert_eq!(sample_scalar(&s, FieldName::Az, [2.3, 1.7, 0.4], d).unwrap(), 0.0);
        }
        let v = velocity_at(&s, [1.0, 1.0, 0.5]).unwrap();
        assert_eq!(v.v, [0.0, 0.0]);
    }

    #[test]
    fn out_of_range_and_order_errors() {
        let s = CoefficientState::zeros(FieldLayout::default_flow(), 6, 5, 0.0, 1.0);
        assert!(matches!(
            sample_scalar(&s, FieldName::Az, [5.5, 1.0, 0.0], (0, 0, 0)),
            Err(Error::Sampling { .. })
        ));
        assert!(matches!(
            sample_scalar(&s, FieldName::Az, [1.0, 1.0, 1.5], (0, 0, 0)),
            Err(Error::Sampling { .. })
        ));
        assert!(matches!(
            sample_scalar(&s, FieldName::P, [1.0, 1.0, 0.5], (3, 0, 0)),
            Err(Error::DerivativeOrder { .. })
        ));
        assert!(sample_scalar(&s, FieldName::Z, [1.0, 1.0, 0.5], (0, 0, 0)).is_err());
        let w = CoefficientState::zeros(FieldLayout::default_wave(), 6, 5, 0.0, 1.0);
        assert!(matches!(velocity_at(&w, [1.0, 1.0, 0.5]), Err(Error::Layout(_))));
    }

    #[test]
    fn first_derivative_matches_finite_differences() {
        let s = random_state(FieldLayout::default_flow(), 7, 6, 3);
        let h = 1e-4;
        let p = [3.3, 2.6, 2.4];
        for name in [FieldName::Az, FieldName::P] {
            let d = sample_scalar(&s, name, p, (1, 0, 0)).unwrap();
            let fd = (sample_scalar(&s, name, [p[0] + h, p[1], p[2]], (0, 0, 0)).unwrap()
                - sample_scalar(&s, name, [p[0] - h, p[1], p[2]], (0, 0, 0)).unwrap())
                / (2.0 * h);
            assert!((d - fd).abs() <= 1e-5 * d.abs().max(1.0), "{d} vs {fd}");
        }
    }

    #[test]
    fn velocity_is_curl_of_potential() {
        let s = random_state(FieldLayout::default_flow(), 7, 6, 5);
        let p = [2.2, 3.9, 2.7];
        let v = velocity_at(&s, p).unwrap();
        let h = 1e-5;
        let a = |x: f64, y: f64| sample_scalar(&s, FieldName::Az, [x, y, p[2]], (0, 0, 0)).unwrap();
        let vx = (a(p[0], p[1] + h) - a(p[0], p[1] - h)) / (2.0 * h);
        let vy = -(a(p[0] + h, p[1]) - a(p[0] - h, p[1])) / (2.0 * h);
        assert!((v.v[0] - vx).abs() < 1e-5);
        assert!((v.v[1] - vy).abs() < 1e-5);
        assert!(v.divergence().abs() < 1e-9);
    }

    #[test]
    fn advance_promotes_end_slice() {
        let mut s = random_state(FieldLayout::default_wave(), 4, 4, 9);
        let end = s.slice(1).to_vec();
        let next = vec![0.5; end.len()];
        s.advance(next.clone()).unwrap();
        assert_eq!(s.slice(0), &end[..]);
        assert_eq!(s.slice(1), &next[..]);
        assert_eq!(s.t0(), 3.0);
        assert!(s.advance(vec![0.0; 3]).is_err());
    }

    #[test]
    fn render_unit_upsample_returns_value_coefficients() {
        let mut s = CoefficientState::zeros(FieldLayout::default_wave(), 5, 4, 0.0, 1.0);
        let plane = 20;
        for (k, v) in s.slice_mut(0)[..plane].iter_mut().enumerate() {
            *v = k as f64 * 0.25 - 1.0;
        }
        let g = render(&s, RenderField::Z, 1, 0.0).unwrap();
        assert_eq!(g.data, s.slice(0)[..plane].to_vec());
        let zero = CoefficientState::zeros(FieldLayout::default_flow(), 5, 4, 0.0, 1.0);
        assert!(render(&zero, RenderField::VMag, 3, 0.5).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(render(&zero, RenderField::Z, 3, 0.5).is_err());
        assert!(render(&zero, RenderField::P, 0, 0.5).is_err());
    }

    #[test]
    fn render_matches_pointwise_sampling() {
        let s = random_state(FieldLayout::default_flow(), 6, 5, 11);
        let f = 4;
        let tau = 0.3;
        let t = s.t0() + tau * s.dt();
        let vx = render(&s, RenderField::Vx, f, tau).unwrap();
        let p = render(&s, RenderField::P, f, tau).unwrap();
        for yy in 0..=(f * 4) {
            for xx in 0..=(f * 5) {
                let pt = [xx as f64 / f as f64, yy as f64 / f as f64, t];
                let v = velocity_at(&s, pt).unwrap();
                assert!((vx.get(xx, yy) - v.v[0]).abs() < 1e-9);
                let pv = sample_scalar(&s, FieldName::P, pt, (0, 0, 0)).unwrap();
                assert!((p.get(xx, yy) - pv).abs() < 1e-9);
            }
        }
    }
}
