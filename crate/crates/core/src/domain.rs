//! Simulation domains: cell occupancy, Dirichlet data and physical
//! parameters.
//!
//! Cell `(x, y)` is the unit square centred on spline node `(x, y)`. The
//! boundary `∂Ω` is the set of faces between a solid and a fluid cell; the
//! outermost ring of cells must be solid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::PdeKind;

/// Dirichlet data attached to solid cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Boundary {
    /// Static wall: zero velocity, zero height.
    Wall,
    Velocity { vx: f64, vy: f64 },
    /// Parabolic `v_x` profile across `[y_lo, y_hi]` with peak `u_max`.
    Parabolic { y_lo: f64, y_hi: f64, u_max: f64 },
    /// Rigid rotation about `(cx, cy)`; positive `omega` is counter-clockwise.
    Rotation { cx: f64, cy: f64, omega: f64 },
    /// Height `amplitude * sin(omega * t + phase)`.
    Oscillator { amplitude: f64, omega: f64, phase: f64 },
}

impl Boundary {
    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            Self::Velocity { vx, vy } => [vx, vy],
            Self::Parabolic { y_lo, y_hi, u_max } => {
                let span = y_hi - y_lo;
                let s = (y - y_lo).clamp(0.0, span);
                [4.0 * u_max * s * (span - s) / (span * span), 0.0]
            }
            Self::Rotation { cx, cy, omega } => [-omega * (y - cy), omega * (x - cx)],
            Self::Wall | Self::Oscillator { .. } => [0.0, 0.0],
        }
    }

    pub fn height(&self, t: f64) -> f64 {
        match *self {
            Self::Oscillator {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Physics {
    Flow {
        rho: f64,
        mu: f64,
        #[serde(default)]
        force: [f64; 2],
    },
    Wave {
        k: f64,
        delta: f64,
    },
}

impl Physics {
    pub fn kind(&self) -> PdeKind {
        match self {
            Self::Flow { .. } => PdeKind::Flow,
            Self::Wave { .. } => PdeKind::Wave,
        }
    }
}

/// A solid cell that translates with constant velocity (moving source).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingCell {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub boundary: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major occupancy, `true` = solid.
    pub solid: Vec<bool>,
    /// Row-major index into `boundaries` for solid cells.
    pub boundary: Vec<u16>,
    pub boundaries: Vec<Boundary>,
    #[serde(default)]
    pub movers: Vec<MovingCell>,
    pub physics: Physics,
    pub dt: f64,
}

impl DomainSpec {
    /// Empty box with a solid wall frame. `boundaries[0]` is [`Boundary::Wall`].
    pub fn closed(width: usize, height: usize, physics: Physics) -> Self {
        let mut solid = vec![false; width * height];
        for y in 0..height {
            for x in 0..width {
                if x == 0 || y == 0 || x + 1 == width || y + 1 == height {
                    solid[y * width + x] = true;
                }
            }
        }
        Self {
            width,
            height,
            solid,
            boundary: vec![0; width * height],
            boundaries: vec![Boundary::Wall],
            movers: Vec::new(),
            physics,
            dt: 1.0,
        }
    }

    pub fn kind(&self) -> PdeKind {
        self.physics.kind()
    }

    pub fn add_boundary(&mut self, b: Boundary) -> u16 {
        self.boundaries.push(b);
        (self.boundaries.len() - 1) as u16
    }

    pub fn is_frame(&self, x: usize, y: usize) -> bool {
        x == 0 || y == 0 || x + 1 == self.width || y + 1 == self.height
    }

    pub fn set_solid(&mut self, x: usize, y: usize, boundary: u16) {
        let i = y * self.width + x;
        self.solid[i] = true;
        self.boundary[i] = boundary;
    }

    /// Clears a cell to fluid. Frame cells stay solid.
    pub fn set_fluid(&mut self, x: usize, y: usize) {
        if !self.is_frame(x, y) {
            let i = y * self.width + x;
            self.solid[i] = false;
            self.boundary[i] = 0;
        }
    }

    /// Marks every cell whose centre lies within `r` of `(cx, cy)` as solid.
    pub fn paint_disk(&mut self, cx: f64, cy: f64, r: f64, boundary: u16) {
        for y in 0..self.height {
            for x in 0..self.width {
                let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                if dx * dx + dy * dy <= r * r {
                    self.set_solid(x, y, boundary);
                }
            }
        }
    }

    /// Marks the cells with `x0 <= x < x1`, `y0 <= y < y1` as solid.
    pub fn paint_box(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, boundary: u16) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.set_solid(x, y, boundary);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.width < 3 || self.height < 3 {
            return Err(Error::Domain(format!(
                "domain {}x{} is too small",
                self.width, self.height
            )));
        }
        if self.solid.len() != n || self.boundary.len() != n {
            return Err(Error::Domain("cell arrays do not match the grid".into()));
        }
        if let Some(&b) = self.boundary.iter().find(|&&b| b as usize >= self.boundaries.len()) {
            return Err(Error::Domain(format!("boundary index {b} out of range")));
        }
        if self.movers.iter().any(|m| m.boundary as usize >= self.boundaries.len()) {
            return Err(Error::Domain("moving cell references a missing boundary".into()));
        }
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_frame(x, y) && !self.solid[y * self.width + x] {
                    return Err(Error::Domain(format!("frame cell ({x}, {y}) is not solid")));
                }
            }
        }
        if !(self.dt > 0.0) {
            return Err(Error::Domain("dt must be positive".into()));
        }
        match self.physics {
            Physics::Flow { rho, mu, .. } if !(rho > 0.0 && mu > 0.0) => {
                Err(Error::Domain("rho and mu must be positive".into()))
            }
            Physics::Wave { k, delta } if !(k > 0.0 && delta >= 0.0) => {
                Err(Error::Domain("k must be positive and delta non-negative".into()))
            }
            _ => Ok(()),
        }
    }

    /// Geometry and Dirichlet data at simulation time `t`.
    pub fn frame(&self, t: f64) -> DomainFrame {
        let mut solid = self.solid.clone();
        let mut boundary = self.boundary.clone();
        for m in &self.movers {
            let x = (m.x + m.vx * t).round().clamp(1.0, (self.width - 2) as f64) as usize;
            let y = (m.y + m.vy * t).round().clamp(1.0, (self.height - 2) as f64) as usize;
            let i = y * self.width + x;
            solid[i] = true;
            boundary[i] = m.boundary;
        }
        DomainFrame::new(self, t, solid, boundary)
    }
}

/// One boundary face between a solid cell and a fluid neighbour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub solid_cell: usize,
    pub fluid_cell: usize,
    pub center: [f64; 2],
    pub tangent: [f64; 2],
    /// Unit normal pointing from the fluid into the solid.
    pub normal: [f64; 2],
}

/// A domain rasterized at one instant, with its boundary faces enumerated.
#[derive(Debug, Clone)]
pub struct DomainFrame {
    pub width: usize,
    pub height: usize,
    pub time: f64,
    pub solid: Vec<bool>,
    pub boundary: Vec<u16>,
    pub boundaries: Vec<Boundary>,
    pub physics: Physics,
    pub faces: Vec<Face>,
    pub fluid: Vec<usize>,
}

impl DomainFrame {
    fn new(spec: &DomainSpec, time: f64, solid: Vec<bool>, boundary: Vec<u16>) -> Self {
        let (w, h) = (spec.width, spec.height);
        let mut faces = Vec::new();
        let mut fluid = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if !solid[i] {
                    fluid.push(i);
                    continue;
                }
                let neighbours: [(isize, isize); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
                for (dx, dy) in neighbours {
                    let (nx, ny) = (x as isize + dx, y as isize + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if solid[j] {
                        continue;
                    }
                    let center = [x as f64 + 0.5 * dx as f64, y as f64 + 0.5 * dy as f64];
                    faces.push(Face {
                        solid_cell: i,
                        fluid_cell: j,
                        center,
                        tangent: [dy.abs() as f64, dx.abs() as f64],
                        normal: [-dx as f64, -dy as f64],
                    });
                }
            }
        }
        Self {
            width: w,
            height: h,
            time,
            solid,
            boundary,
            boundaries: spec.boundaries.clone(),
            physics: spec.physics,
            faces,
            fluid,
        }
    }

    pub fn kind(&self) -> PdeKind {
        self.physics.kind()
    }

    /// Cell containing `(x, y)`, or `None` outside the grid.
    pub fn cell_at(&self, x: f64, y: f64) -> Option<usize> {
        let (cx, cy) = (x.round(), y.round());
        if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
            return None;
        }
        Some(cy as usize * self.width + cx as usize)
    }

    pub fn is_fluid_at(&self, x: f64, y: f64) -> bool {
        self.cell_at(x, y).is_some_and(|i| !self.solid[i])
    }

    pub fn boundary_of(&self, cell: usize) -> &Boundary {
        &self.boundaries[self.boundary[cell] as usize]
    }

    /// Prescribed velocity of `face` at a point on it.
    pub fn face_velocity(&self, face: &Face, x: f64, y: f64) -> [f64; 2] {
        self.boundary_of(face.solid_cell).velocity(x, y)
    }

    /// Prescribed height of `face` at time `t`.
    pub fn face_height(&self, face: &Face, t: f64) -> f64 {
        self.boundary_of(face.solid_cell).height(t)
    }

    /// Per-cell Dirichlet rasters fed to the network: `(v_x, v_y)` for flow,
    /// `z_d` at the frame time for waves. Fluid cells hold zero.
    pub fn dirichlet_channels(&self) -> Vec<Vec<f64>> {
        let n = self.width * self.height;
        match self.physics {
            Physics::Flow { .. } => {
                let mut vx = vec![0.0; n];
                let mut vy = vec![0.0; n];
                for i in (0..n).filter(|&i| self.solid[i]) {
                    let (x, y) = ((i % self.width) as f64, (i / self.width) as f64);
                    let v = self.boundary_of(i).velocity(x, y);
                    vx[i] = v[0];
                    vy[i] = v[1];
                }
                vec![vx, vy]
            }
            Physics::Wave { .. } => {
                let mut z = vec![0.0; n];
                for i in (0..n).filter(|&i| self.solid[i]) {
                    z[i] = self.boundary_of(i).height(self.time);
                }
                vec![z]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow() -> Physics {
        Physics::Flow {
            rho: 1.0,
            mu: 0.1,
            force: [0.0; 2],
        }
    }

    #[test]
    fn closed_box_faces() {
        let d = DomainSpec::closed(5, 4, flow());
        d.validate().unwrap();
        let f = d.frame(0.0);
        // 3x2 fluid interior, perimeter 10 faces
        assert_eq!(f.fluid.len(), 6);
        assert_eq!(f.faces.len(), 10);
        for face in &f.faces {
            let (sx, sy) = ((face.solid_cell % 5) as f64, (face.solid_cell / 5) as f64);
            let (fx, fy) = ((face.fluid_cell % 5) as f64, (face.fluid_cell / 5) as f64);
            // normal points from the fluid cell towards the solid cell
            assert_eq!(face.normal, [sx - fx, sy - fy]);
            assert!((face.center[0] - 0.5 * (sx + fx)).abs() < 1e-15);
        }
    }

    #[test]
    fn open_frame_is_rejected() {
        let mut d = DomainSpec::closed(5, 5, flow());
        d.solid[0] = false;
        assert!(d.validate().is_err());
        let mut d = DomainSpec::closed(5, 5, flow());
        d.set_fluid(0, 2);
        d.validate().unwrap();
    }

    #[test]
    fn boundary_profiles() {
        let p = Boundary::Parabolic {
            y_lo: 0.0,
            y_hi: 4.0,
            u_max: 1.5,
        };
        assert_eq!(p.velocity(0.0, 2.0), [1.5, 0.0]);
        assert_eq!(p.velocity(0.0, 0.0), [0.0, 0.0]);
        let r = Boundary::Rotation {
            cx: 1.0,
            cy: 1.0,
            omega: 0.5,
        };
        assert_eq!(r.velocity(3.0, 1.0), [0.0, 1.0]);
        let o = Boundary::Oscillator {
            amplitude: 2.0,
            omega: 0.5,
            phase: 0.0,
        };
        assert!((o.height(std::f64::consts::PI) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn movers_follow_their_velocity() {
        let mut d = DomainSpec::closed(10, 6, Physics::Wave { k: 10.0, delta: 0.1 });
        let b = d.add_boundary(Boundary::Oscillator {
            amplitude: 1.0,
            omega: 0.5,
            phase: 0.0,
        });
        d.movers.push(MovingCell {
            x: 2.0,
            y: 3.0,
            vx: 0.5,
            vy: 0.0,
            boundary: b,
        });
        d.validate().unwrap();
        assert!(d.frame(0.0).solid[3 * 10 + 2]);
        let f = d.frame(4.0);
        assert!(f.solid[3 * 10 + 4]);
        assert!(!f.solid[3 * 10 + 2]);
        let z = &f.dirichlet_channels()[0];
        assert!((z[3 * 10 + 4] - (2.0f64).sin()).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let mut d = DomainSpec::closed(6, 6, flow());
        let b = d.add_boundary(Boundary::Velocity { vx: 1.0, vy: 0.0 });
        d.set_solid(0, 2, b);
        let s = serde_json::to_string(&d).unwrap();
        let back: DomainSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }
}
