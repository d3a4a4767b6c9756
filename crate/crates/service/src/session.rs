//! One interactive simulation: a model stepping a mutable domain.
//!
//! Messages are applied between steps only, so a frame never shows a
//! half-applied edit. The same type drives headless `simulate` runs.

use std::str::FromStr;

use hermite_pde::domain::{Boundary, DomainSpec, Physics};
use hermite_pde::field::{render, CoefficientState, PdeKind, RenderField};
use hermite_pde::model::PdeModel;

use crate::error::{Result, ServiceError};
use crate::protocol::{encode_frame, ClientMessage, PaintValue, ServerMessage};

/// Largest accepted render upsampling factor.
pub const MAX_UPSAMPLE: usize = 8;

/// What frames carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameField {
    Render(RenderField),
    /// 1 for solid cells, 0 for fluid.
    Occupancy,
}

impl FrameField {
    pub fn name(self) -> &'static str {
        match self {
            Self::Occupancy => "occupancy",
            Self::Render(f) => match f {
                RenderField::Az => "a_z",
                RenderField::P => "p",
                RenderField::VMag => "v_mag",
                RenderField::Vx => "v_x",
                RenderField::Vy => "v_y",
                RenderField::Z => "z",
                RenderField::Vz => "v_z",
            },
        }
    }

    pub fn default_for(kind: PdeKind) -> Self {
        match kind {
            PdeKind::Flow => Self::Render(RenderField::VMag),
            PdeKind::Wave => Self::Render(RenderField::Z),
        }
    }

    fn available(self, kind: PdeKind) -> bool {
        match self {
            Self::Occupancy => true,
            Self::Render(f) => {
                let flow = matches!(
                    f,
                    RenderField::Az | RenderField::P | RenderField::VMag | RenderField::Vx | RenderField::Vy
                );
                flow == (kind == PdeKind::Flow)
            }
        }
    }
}

impl FromStr for FrameField {
    type Err = ServiceError;
    fn from_str(s: &str) -> Result<Self> {
        if s == "occupancy" {
            return Ok(Self::Occupancy);
        }
        Ok(Self::Render(RenderField::from_str(s)?))
    }
}

/// Starting domain for `serve` when none is given: a channel with a
/// parabolic inflow past a disk (flow) or a closed basin with one
/// oscillator in the middle (wave).
pub fn default_domain(kind: PdeKind, width: usize, height: usize) -> DomainSpec {
    match kind {
        PdeKind::Flow => {
            let mut d = DomainSpec::closed(width, height, Physics::Flow { rho: 1.0, mu: 0.1, force: [0.0; 2] });
            let inflow = d.add_boundary(Boundary::Parabolic {
                y_lo: 0.5,
                y_hi: height as f64 - 1.5,
                u_max: 0.75,
            });
            for y in 1..height - 1 {
                d.set_solid(0, y, inflow);
                d.set_solid(width - 1, y, inflow);
            }
            let r = (height as f64 / 10.0).max(2.0);
            d.paint_disk(width as f64 / 4.0, height as f64 / 2.0, r, 0);
            d
        }
        PdeKind::Wave => {
            let mut d = DomainSpec::closed(width, height, Physics::Wave { k: 10.0, delta: 0.1 });
            let osc = d.add_boundary(Boundary::Oscillator {
                amplitude: 1.0,
                omega: 0.5,
                phase: 0.0,
            });
            d.set_solid(width / 2, height / 2, osc);
            d
        }
    }
}

pub struct Session {
    model: PdeModel<f32>,
    domain: DomainSpec,
    state: CoefficientState,
    step: u64,
    field: FrameField,
    upsample: usize,
    max_rate: Option<f64>,
    paused: bool,
}

impl Session {
    /// Starts from zero coefficients at `t = 0`.
    pub fn new(model: PdeModel<f32>, domain: DomainSpec) -> Result<Self> {
        domain.validate()?;
        let kind = model.layout().kind();
        if domain.kind() != kind {
            return Err(ServiceError::Rejected(format!(
                "domain physics is {:?} but the model is {kind:?}",
                domain.kind()
            )));
        }
        let m = model.network().architecture().size_multiple();
        if !domain.width.is_multiple_of(m) || !domain.height.is_multiple_of(m) {
            return Err(ServiceError::Rejected(format!(
                "domain {}x{} is not a multiple of {m}",
                domain.width, domain.height
            )));
        }
        let state = Self::rest_state(&model, &domain)?;
        Ok(Self {
            field: FrameField::default_for(kind),
            model,
            domain,
            state,
            step: 0,
            upsample: 1,
            max_rate: None,
            paused: false,
        })
    }

    fn rest_state(model: &PdeModel<f32>, domain: &DomainSpec) -> Result<CoefficientState> {
        let layout = model.layout().clone();
        let n = layout.channels() * domain.width * domain.height;
        Ok(CoefficientState::at_rest(
            layout,
            domain.width,
            domain.height,
            0.0,
            domain.dt,
            vec![0.0; n],
        )?)
    }

    pub fn model(&self) -> &PdeModel<f32> {
        &self.model
    }
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }
    pub fn state(&self) -> &CoefficientState {
        &self.state
    }
    pub fn steps(&self) -> u64 {
        self.step
    }
    pub fn field(&self) -> FrameField {
        self.field
    }
    pub fn upsample(&self) -> usize {
        self.upsample
    }
    pub fn is_paused(&self) -> bool {
        self.paused
    }
    /// Client-requested ceiling on steps per second.
    pub fn max_rate(&self) -> Option<f64> {
        self.max_rate
    }

    pub fn step(&mut self) -> Result<()> {
        let next = self.model.step(&self.domain, &self.state)?;
        if !next.is_finite() {
            return Err(hermite_pde::Error::Rollout {
                step: self.step as usize + 1,
            }
            .into());
        }
        self.state = next;
        self.step += 1;
        Ok(())
    }

    /// Applies one message. A rejected message leaves the session unchanged.
    pub fn apply(&mut self, msg: &ClientMessage) -> Result<()> {
        let kind = self.model.layout().kind();
        match msg {
            ClientMessage::Paint { cells, value } => {
                let cells = self.checked_cells(cells)?;
                for (x, y) in cells {
                    match value {
                        PaintValue::Solid => self.domain.set_solid(x, y, 0),
                        PaintValue::Fluid => self.domain.set_fluid(x, y),
                    }
                }
            }
            ClientMessage::Bc { cells, vx, vy, z, omega } => {
                let boundary = match kind {
                    PdeKind::Flow => {
                        if z.is_some() || omega.is_some() || (vx.is_none() && vy.is_none()) {
                            return Err(ServiceError::Rejected("flow boundaries take vx and vy".into()));
                        }
                        Boundary::Velocity {
                            vx: vx.unwrap_or(0.0),
                            vy: vy.unwrap_or(0.0),
                        }
                    }
                    PdeKind::Wave => {
                        if vx.is_some() || vy.is_some() || z.is_none() {
                            return Err(ServiceError::Rejected("wave boundaries take z and omega".into()));
                        }
                        Boundary::Oscillator {
                            amplitude: z.unwrap_or(0.0),
                            omega: omega.unwrap_or(0.0),
                            phase: 0.0,
                        }
                    }
                };
                if !finite_boundary(&boundary) {
                    return Err(ServiceError::Rejected("boundary values must be finite".into()));
                }
                let cells = self.checked_cells(cells)?;
                let id = match self.domain.boundaries.iter().position(|b| *b == boundary) {
                    Some(i) => i as u16,
                    None if self.domain.boundaries.len() < u16::MAX as usize => self.domain.add_boundary(boundary),
                    None => return Err(ServiceError::Rejected("too many distinct boundaries".into())),
                };
                for (x, y) in cells {
                    self.domain.set_solid(x, y, id);
                }
            }
            ClientMessage::Params { mu, rho, k, delta } => {
                let mut physics = self.domain.physics;
                match &mut physics {
                    Physics::Flow { rho: r, mu: m, .. } => {
                        if k.is_some() || delta.is_some() {
                            return Err(ServiceError::Rejected("flow parameters are mu and rho".into()));
                        }
                        *m = mu.unwrap_or(*m);
                        *r = rho.unwrap_or(*r);
                    }
                    Physics::Wave { k: kk, delta: d } => {
                        if mu.is_some() || rho.is_some() {
                            return Err(ServiceError::Rejected("wave parameters are k and delta".into()));
                        }
                        *kk = k.unwrap_or(*kk);
                        *d = delta.unwrap_or(*d);
                    }
                }
                let mut next = self.domain.clone();
                next.physics = physics;
                next.validate()?;
                self.domain = next;
            }
            ClientMessage::Pause => self.paused = true,
            ClientMessage::Resume => self.paused = false,
            ClientMessage::Reset => {
                self.state = Self::rest_state(&self.model, &self.domain)?;
            }
            ClientMessage::Select {
                field,
                upsample,
                max_rate,
            } => {
                let f: FrameField = field.parse()?;
                if !f.available(kind) {
                    return Err(ServiceError::Rejected(format!("field '{field}' is not available for {kind:?}")));
                }
                let up = match upsample {
                    None => self.upsample,
                    Some(u) if u.fract() == 0.0 && *u >= 1.0 && *u <= MAX_UPSAMPLE as f64 => *u as usize,
                    Some(u) => {
                        return Err(ServiceError::Rejected(format!(
                            "upsample must be an integer in 1..={MAX_UPSAMPLE}, got {u}"
                        )))
                    }
                };
                let rate = match max_rate {
                    Some(r) if !(*r > 0.0) => {
                        return Err(ServiceError::Rejected(format!("max_rate must be positive, got {r}")))
                    }
                    Some(r) => Some(*r),
                    None => self.max_rate,
                };
                self.field = f;
                self.upsample = up;
                self.max_rate = rate;
            }
        }
        Ok(())
    }

    fn checked_cells(&self, cells: &[[i64; 2]]) -> Result<Vec<(usize, usize)>> {
        let (w, h) = (self.domain.width as i64, self.domain.height as i64);
        cells
            .iter()
            .map(|&[x, y]| {
                if (0..w).contains(&x) && (0..h).contains(&y) {
                    Ok((x as usize, y as usize))
                } else {
                    Err(ServiceError::Rejected(format!("cell ({x}, {y}) is outside the {w}x{h} grid")))
                }
            })
            .collect()
    }

    /// Current frame as `(width, height, values)`.
    pub fn frame_data(&self) -> Result<(usize, usize, Vec<f32>)> {
        let f = self.upsample;
        match self.field {
            FrameField::Render(field) => {
                let g = render(&self.state, field, f, 1.0)?;
                Ok((g.width, g.height, g.data.iter().map(|&v| v as f32).collect()))
            }
            FrameField::Occupancy => {
                let frame = self.domain.frame(self.state.t1());
                let (w, h) = (self.domain.width * f, self.domain.height * f);
                let mut data = Vec::with_capacity(w * h);
                for y in 0..h {
                    for x in 0..w {
                        let cell = frame.cell_at(x as f64 / f as f64, y as f64 / f as f64);
                        data.push(if cell.is_some_and(|c| frame.solid[c]) { 1.0 } else { 0.0 });
                    }
                }
                Ok((w, h, data))
            }
        }
    }

    pub fn frame(&self) -> Result<ServerMessage> {
        let (w, h, data) = self.frame_data()?;
        Ok(ServerMessage::Frame {
            step: self.step,
            field: self.field.name().to_string(),
            w,
            h,
            data: encode_frame(&data),
        })
    }
}

fn finite_boundary(b: &Boundary) -> bool {
    match *b {
        Boundary::Velocity { vx, vy } => vx.is_finite() && vy.is_finite(),
        Boundary::Oscillator { amplitude, omega, phase } => {
            amplitude.is_finite() && omega.is_finite() && phase.is_finite()
        }
        _ => true,
    }
}
