use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{avg_pool2, avg_pool2_backward, leaky_relu, leaky_relu_backward, upsample2, upsample2_backward, Conv3x3};
use super::{Padding, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Architecture {
    /// `layers` 3x3 convolutions with `hidden` channels and leaky rectifiers
    /// between them.
    Plain { hidden: usize, layers: usize },
    /// Encoder-decoder with `depth` 2x2 poolings, one convolution per level,
    /// `base * 2^level` channels, bilinear upsampling and skip concatenation.
    UNet { base: usize, depth: usize },
}

impl Architecture {
    pub const WAVE_DEFAULT: Self = Self::Plain { hidden: 64, layers: 3 };
    pub const FLOW_DEFAULT: Self = Self::UNet { base: 16, depth: 4 };

    /// Grid dimensions must be multiples of this.
    pub fn size_multiple(&self) -> usize {
        match *self {
            Self::Plain { .. } => 1,
            Self::UNet { depth, .. } => 1 << depth,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Plain { hidden, layers } if hidden == 0 || layers == 0 => {
                Err(Error::Config("plain network needs at least one layer and one hidden channel".into()))
            }
            Self::UNet { base, depth } if base == 0 || depth == 0 || depth > 8 => {
                Err(Error::Config("U-shaped network needs base > 0 and depth in 1..=8".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Activations retained by [`Network::forward_cached`] for the backward pass.
#[derive(Debug, Default)]
pub struct NetworkCache<T> {
    height: usize,
    width: usize,
    cols: Vec<Vec<T>>,
    acts: Vec<Vec<T>>,
    scratch: Vec<T>,
    dcol: Vec<T>,
}

/// Convolutional network with all parameters in one flat vector.
#[derive(Debug, Clone)]
pub struct Network<T> {
    arch: Architecture,
    cin: usize,
    cout: usize,
    pad: Padding,
    convs: Vec<Conv3x3>,
    pub params: Vec<T>,
}

impl<T: Real> Network<T> {
    /// Builds the network with uniform `±1/sqrt(fan_in)` initialisation.
    pub fn new<R: Rng + ?Sized>(arch: Architecture, cin: usize, cout: usize, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeroed(arch, cin, cout)?;
        for conv in &net.convs {
            let bound = 1.0 / ((conv.cin * 9) as f64).sqrt();
            for p in &mut net.params[conv.offset..conv.offset + conv.param_count()] {
                *p = T::from_f64(rng.gen_range(-bound..bound));
            }
        }
        Ok(net)
    }

    /// Same topology with every parameter zero.
    pub fn zeroed(arch: Architecture, cin: usize, cout: usize) -> Result<Self> {
        arch.validate()?;
        if cin == 0 || cout == 0 {
            return Err(Error::Config("network needs input and output channels".into()));
        }
        let mut shapes = Vec::new();
        match arch {
            Architecture::Plain { hidden, layers } => {
                for l in 0..layers {
                    let i = if l == 0 { cin } else { hidden };
                    let o = if l + 1 == layers { cout } else { hidden };
                    shapes.push((i, o));
                }
            }
            Architecture::UNet { base, depth } => {
                let ch = |l: usize| base << l;
                shapes.push((cin, ch(0)));
                for l in 1..=depth {
                    shapes.push((ch(l - 1), ch(l)));
                }
                for l in (0..depth).rev() {
                    shapes.push((ch(l + 1) + ch(l), ch(l)));
                }
                shapes.push((ch(0), cout));
            }
        }
        let mut offset = 0;
        let convs: Vec<Conv3x3> = shapes
            .into_iter()
            .map(|(cin, cout)| {
                let c = Conv3x3 { cin, cout, offset };
                offset += c.param_count();
                c
            })
            .collect();
        Ok(Self {
            arch,
            cin,
            cout,
            pad: Padding::Zero,
            convs,
            params: vec![T::ZERO; offset],
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }
    pub fn input_channels(&self) -> usize {
        self.cin
    }
    pub fn output_channels(&self) -> usize {
        self.cout
    }
    pub fn param_count(&self) -> usize {
        self.params.len()
    }
    pub fn padding(&self) -> Padding {
        self.pad
    }
    pub fn set_padding(&mut self, pad: Padding) {
        self.pad = pad;
    }

    /// Parameter range of the last convolution.
    pub fn output_layer_range(&self) -> std::ops::Range<usize> {
        let last = self.convs.last().expect("network has layers");
        last.offset..last.offset + last.param_count()
    }

    /// Converts parameters to another precision, keeping the topology.
    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            arch: self.arch,
            cin: self.cin,
            cout: self.cout,
            pad: self.pad,
            convs: self.convs.clone(),
            params: self.params.iter().map(|p| U::from_f64(p.to_f64())).collect(),
        }
    }

    pub fn check_input(&self, input: &[T], h: usize, w: usize) -> Result<()> {
        let m = self.arch.size_multiple();
        if h == 0 || w == 0 || !h.is_multiple_of(m) || !w.is_multiple_of(m) {
            return Err(Error::Config(format!("grid {w}x{h} must be a non-empty multiple of {m} in both directions")));
        }
        if input.len() != self.cin * h * w {
            return Err(Error::Shape(format!(
                "network input has {} values, expected {}x{}x{}",
                input.len(),
                self.cin,
                h,
                w
            )));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[T], h: usize, w: usize) -> Result<Vec<T>> {
        let mut cache = NetworkCache::default();
        self.forward_cached(input, h, w, &mut cache)
    }

    /// Forward pass that keeps what the backward pass needs. Buffers in
    /// `cache` are reused across calls.
    pub fn forward_cached(&self, input: &[T], h: usize, w: usize, cache: &mut NetworkCache<T>) -> Result<Vec<T>> {
        self.check_input(input, h, w)?;
        let n = self.convs.len();
        cache.height = h;
        cache.width = w;
        cache.cols.resize_with(n, Vec::new);
        cache.acts.resize_with(n, Vec::new);
        let NetworkCache { cols, acts, scratch, .. } = cache;
        let run = |i: usize, x: &[T], hh: usize, ww: usize, col: &mut Vec<T>, y: &mut Vec<T>| {
            let conv = &self.convs[i];
            conv.im2col(x, hh, ww, self.pad, col);
            conv.forward_col(&self.params, col, hh * ww, y);
            if i + 1 < n {
                leaky_relu(y);
            }
        };
        match self.arch {
            Architecture::Plain { .. } => {
                run(0, input, h, w, &mut cols[0], &mut acts[0]);
                for l in 1..n {
                    let (done, rest) = acts.split_at_mut(l);
                    run(l, &done[l - 1], h, w, &mut cols[l], &mut rest[0]);
                }
            }
            Architecture::UNet { depth, .. } => {
                run(0, input, h, w, &mut cols[0], &mut acts[0]);
                for l in 1..=depth {
                    let (ph, pw) = (h >> (l - 1), w >> (l - 1));
                    avg_pool2(&acts[l - 1], self.convs[l - 1].cout, ph, pw, scratch);
                    run(l, scratch, h >> l, w >> l, &mut cols[l], &mut acts[l]);
                }
                for (k, l) in (0..depth).rev().enumerate() {
                    let i = depth + 1 + k;
                    let cb = self.convs[i].cin - self.convs[l].cout;
                    upsample2(&acts[i - 1], cb, h >> (l + 1), w >> (l + 1), scratch);
                    scratch.extend_from_slice(&acts[l]);
                    run(i, scratch, h >> l, w >> l, &mut cols[i], &mut acts[i]);
                }
                let (done, rest) = acts.split_at_mut(n - 1);
                run(n - 1, &done[n - 2], h, w, &mut cols[n - 1], &mut rest[0]);
            }
        }
        Ok(acts[n - 1].clone())
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, cache: &mut NetworkCache<T>, dout: &[T], grad: &mut [T]) -> Result<()> {
        let (h, w) = (cache.height, cache.width);
        if cache.acts.len() != self.convs.len() || dout.len() != self.cout * h * w {
            return Err(Error::Shape("backward called without a matching forward cache".into()));
        }
        if grad.len() != self.params.len() {
            return Err(Error::Shape("gradient buffer does not match parameter count".into()));
        }
        let pad = self.pad;
        let NetworkCache { cols, acts, scratch, dcol, .. } = cache;
        let mut dx = Vec::new();
        match self.arch {
            Architecture::Plain { .. } => {
                let mut g = dout.to_vec();
                for l in (0..self.convs.len()).rev() {
                    if l + 1 < self.convs.len() {
                        leaky_relu_backward(&acts[l], &mut g);
                    }
                    let want = (l > 0).then_some(&mut dx);
                    self.convs[l].backward(&self.params, &cols[l], &g, h, w, pad, grad, dcol, want);
                    if l > 0 {
                        std::mem::swap(&mut g, &mut dx);
                    }
                }
            }
            Architecture::UNet { depth, .. } => {
                let mut denc: Vec<Vec<T>> = (0..=depth).map(|l| vec![T::ZERO; acts[l].len()]).collect();
                let last = self.convs.len() - 1;
                self.convs[last].backward(&self.params, &cols[last], dout, h, w, pad, grad, dcol, Some(&mut dx));
                let mut g = std::mem::take(&mut dx);
                for l in 0..depth {
                    let ci = 2 * depth - l;
                    let (hh, ww) = (h >> l, w >> l);
                    leaky_relu_backward(&acts[ci], &mut g);
                    self.convs[ci].backward(&self.params, &cols[ci], &g, hh, ww, pad, grad, dcol, Some(&mut dx));
                    let cb = self.convs[ci].cin - self.convs[l].cout;
                    let (du, dskip) = dx.split_at(cb * hh * ww);
                    for (a, &b) in denc[l].iter_mut().zip(dskip) {
                        *a += b;
                    }
                    upsample2_backward(du, cb, h >> (l + 1), w >> (l + 1), &mut g);
                }
                for (a, &b) in denc[depth].iter_mut().zip(&g) {
                    *a += b;
                }
                for l in (0..=depth).rev() {
                    let mut g = std::mem::take(&mut denc[l]);
                    leaky_relu_backward(&acts[l], &mut g);
                    let (hh, ww) = (h >> l, w >> l);
                    if l == 0 {
                        self.convs[0].backward(&self.params, &cols[0], &g, hh, ww, pad, grad, dcol, None);
                    } else {
                        self.convs[l].backward(&self.params, &cols[l], &g, hh, ww, pad, grad, dcol, Some(&mut dx));
                        avg_pool2_backward(&dx, self.convs[l - 1].cout, hh * 2, ww * 2, scratch);
                        for (a, &b) in denc[l - 1].iter_mut().zip(scratch.iter()) {
                            *a += b;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
