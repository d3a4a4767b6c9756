//! The learned update map from (domain, coefficients at `t`) to the
//! coefficients at `t + dt`, and its checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DomainFrame, DomainSpec, Physics};
use crate::error::{Error, Result};
use crate::field::{CoefficientState, FieldLayout, PdeKind};
use crate::nn::{Architecture, Network, NetworkCache, Real};
use crate::optim::Adam;
use crate::spline::kernel;

/// Non-coefficient input planes: occupancy, Dirichlet rasters and, for
/// flow, the fluid parameters.
pub fn condition_channels(kind: PdeKind) -> usize {
    match kind {
        PdeKind::Flow => 5,
        PdeKind::Wave => 2,
    }
}

/// Subtracts the grid mean from each gauge channel of a packed slice.
pub fn normalize_gauge(layout: &FieldLayout, plane: usize, slice: &mut [f64]) {
    for ch in layout.gauge_channels() {
        let c = &mut slice[ch * plane..(ch + 1) * plane];
        let mean = c.iter().sum::<f64>() / plane as f64;
        c.iter_mut().for_each(|v| *v -= mean);
    }
}

/// Per-channel factor `s_i s_j` turning a mode coefficient into the mixed
/// derivative it encodes at its node. Coefficients enter the network
/// multiplied by it and increments leave divided by it, so every channel
/// is seen in derivative units.
pub fn channel_scales(layout: &FieldLayout) -> Vec<f64> {
    let mut out = Vec::with_capacity(layout.channels());
    for f in layout.fields() {
        let k = kernel(f.order).expect("validated layout");
        for i in 0..=f.order {
            for j in 0..=f.order {
                out.push(k.scale(i) * k.scale(j));
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct PdeModel<T = f32> {
    layout: FieldLayout,
    net: Network<T>,
    seed: u64,
}

impl<T: Real> PdeModel<T> {
    /// Fresh model with parameters drawn from `seed`.
    pub fn new(layout: FieldLayout, arch: Architecture, seed: u64) -> Result<Self> {
        layout.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cin = condition_channels(layout.kind()) + layout.channels();
        let net = Network::new(arch, cin, layout.channels(), &mut rng)?;
        Ok(Self { layout, net, seed })
    }

    pub fn from_network(layout: FieldLayout, net: Network<T>, seed: u64) -> Result<Self> {
        layout.validate()?;
        if net.input_channels() != condition_channels(layout.kind()) + layout.channels()
            || net.output_channels() != layout.channels()
        {
            return Err(Error::Shape("network channels do not match the field layout".into()));
        }
        Ok(Self { layout, net, seed })
    }

    pub fn layout(&self) -> &FieldLayout {
        &self.layout
    }
    pub fn network(&self) -> &Network<T> {
        &self.net
    }
    pub fn network_mut(&mut self) -> &mut Network<T> {
        &mut self.net
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cast<U: Real>(&self) -> PdeModel<U> {
        PdeModel {
            layout: self.layout.clone(),
            net: self.net.cast(),
            seed: self.seed,
        }
    }

    /// Packs the network input: occupancy, Dirichlet rasters, `log10 mu` and
    /// `log10 rho` planes for flow, then every coefficient channel.
    pub fn encode_input(&self, frame: &DomainFrame, coeffs: &[f64]) -> Result<Vec<T>> {
        if frame.kind() != self.layout.kind() {
            return Err(Error::Layout("domain kind does not match the model".into()));
        }
        let plane = frame.width * frame.height;
        if coeffs.len() != self.layout.channels() * plane {
            return Err(Error::Shape(format!(
                "expected {} coefficients for a {}x{} grid, got {}",
                self.layout.channels() * plane,
                frame.width,
                frame.height,
                coeffs.len()
            )));
        }
        let mut input = Vec::with_capacity(self.net.input_channels() * plane);
        input.extend(frame.solid.iter().map(|&s| if s { T::ONE } else { T::ZERO }));
        for ch in frame.dirichlet_channels() {
            input.extend(ch.into_iter().map(T::from_f64));
        }
        if let Physics::Flow { rho, mu, .. } = frame.physics {
            input.extend(std::iter::repeat_n(T::from_f64(mu.log10()), plane));
            input.extend(std::iter::repeat_n(T::from_f64(rho.log10()), plane));
        }
        for (ch, s) in channel_scales(&self.layout).into_iter().enumerate() {
            input.extend(coeffs[ch * plane..(ch + 1) * plane].iter().map(|&c| T::from_f64(c * s)));
        }
        Ok(input)
    }

    /// Coefficient increment `Δc` for one step.
    pub fn forward(&self, frame: &DomainFrame, coeffs: &[f64]) -> Result<Vec<f64>> {
        let input = self.encode_input(frame, coeffs)?;
        let out = self.net.forward(&input, frame.height, frame.width)?;
        Ok(self.unscale(&out))
    }

    fn unscale(&self, out: &[T]) -> Vec<f64> {
        let plane = out.len() / self.layout.channels();
        let scales = channel_scales(&self.layout);
        out.iter()
            .enumerate()
            .map(|(i, v)| v.to_f64() / scales[i / plane])
            .collect()
    }

    /// Next coefficient slice: `c + Δc` with gauge channels mean-normalized.
    /// `frame` describes the domain at the predicted time.
    pub fn predict(&self, frame: &DomainFrame, coeffs: &[f64]) -> Result<Vec<f64>> {
        let delta = self.forward(frame, coeffs)?;
        Ok(self.finish(frame, coeffs, &delta))
    }

    /// [`Self::predict`] keeping activations for [`Self::backward`].
    pub fn predict_cached(&self, frame: &DomainFrame, coeffs: &[f64], cache: &mut NetworkCache<T>) -> Result<Vec<f64>> {
        let input = self.encode_input(frame, coeffs)?;
        let out = self.net.forward_cached(&input, frame.height, frame.width, cache)?;
        let delta = self.unscale(&out);
        Ok(self.finish(frame, coeffs, &delta))
    }

    fn finish(&self, frame: &DomainFrame, coeffs: &[f64], delta: &[f64]) -> Vec<f64> {
        let mut next: Vec<f64> = coeffs.iter().zip(delta).map(|(c, d)| c + d).collect();
        normalize_gauge(&self.layout, frame.width * frame.height, &mut next);
        next
    }

    /// Accumulates parameter gradients given `d loss / d prediction`.
    pub fn backward(&self, cache: &mut NetworkCache<T>, d_pred: &[f64], grad: &mut [T]) -> Result<()> {
        let plane = d_pred.len() / self.layout.channels().max(1);
        let mut d = d_pred.to_vec();
        // mean removal is a symmetric projection, so it is its own adjoint
        normalize_gauge(&self.layout, plane, &mut d);
        let scales = channel_scales(&self.layout);
        let dout: Vec<T> = d
            .iter()
            .enumerate()
            .map(|(i, v)| T::from_f64(v / scales[i / plane]))
            .collect();
        self.net.backward(cache, &dout, grad)
    }

    /// Advances `state` by one slab on `domain`.
    pub fn step(&self, domain: &DomainSpec, state: &CoefficientState) -> Result<CoefficientState> {
        if domain.width != state.width() || domain.height != state.height() {
            return Err(Error::Shape("domain and state sizes differ".into()));
        }
        if *state.layout() != self.layout {
            return Err(Error::Layout("state layout does not match the model".into()));
        }
        let frame = domain.frame(state.t1() + state.dt());
        let next = self.predict(&frame, state.slice(1))?;
        let mut out = state.clone();
        out.advance(next)?;
        Ok(out)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"HPCK";

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    layout: FieldLayout,
    architecture: Architecture,
    seed: u64,
    step: usize,
    params: usize,
    optimizer: Option<AdamHeader>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdamHeader {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
}

/// Model parameters with optional optimizer moments and the training step.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: PdeModel<f32>,
    pub optimizer: Option<Adam>,
    pub step: usize,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let net = self.model.network();
        let header = CheckpointHeader {
            version: 1,
            layout: self.model.layout.clone(),
            architecture: net.architecture(),
            seed: self.model.seed,
            step: self.step,
            params: net.param_count(),
            optimizer: self.optimizer.as_ref().map(|a| AdamHeader {
                lr: a.lr,
                beta1: a.beta1,
                beta2: a.beta2,
                eps: a.eps,
                t: a.t,
            }),
        };
        let json = serde_json::to_vec(&header)?;
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&(json.len() as u32).to_le_bytes())?;
        w.write_all(&json)?;
        write_f32s(w, &net.params)?;
        if let Some(a) = &self.optimizer {
            write_f32s(w, &a.m)?;
            write_f32s(w, &a.v)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: CheckpointHeader = serde_json::from_slice(&json)?;
        if header.version != 1 {
            return Err(Error::Format(format!("unsupported checkpoint version {}", header.version)));
        }
        let cin = condition_channels(header.layout.kind()) + header.layout.channels();
        let mut net = Network::<f32>::zeroed(header.architecture, cin, header.layout.channels())?;
        if net.param_count() != header.params {
            return Err(Error::Format("parameter count does not match the architecture".into()));
        }
        net.params = read_f32s(r, header.params)?;
        let optimizer = match header.optimizer {
            Some(h) => {
                let m = read_f32s(r, header.params)?;
                let v = read_f32s(r, header.params)?;
                Some(Adam {
                    lr: h.lr,
                    beta1: h.beta1,
                    beta2: h.beta2,
                    eps: h.eps,
                    t: h.t,
                    m,
                    v,
                })
            }
            None => None,
        };
        Ok(Self {
            model: PdeModel::from_network(header.layout, net, header.seed)?,
            optimizer,
            step: header.step,
        })
    }
}

fn write_f32s<W: Write>(w: &mut W, values: &[f32]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_f32s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f32>> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated parameter block".into()))?;
    Ok(buf
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}
