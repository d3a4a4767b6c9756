use super::{Padding, Real, LEAKY_SLOPE};

/// Row-major `m x k` times `k x n` into `m x n`, with `a` optionally read
/// transposed from its stored layout.
#[allow(clippy::too_many_arguments)]
fn matmul<T: Real>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_t: bool,
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = (n as isize, 1);
    // SAFETY: the strides above address exactly the asserted extents.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            T::ONE,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        )
    }
}

/// 3x3 same-size convolution whose weights live at `offset` in a flat
/// parameter vector: `cout * cin * 9` weights followed by `cout` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3x3 {
    pub cin: usize,
    pub cout: usize,
    pub offset: usize,
}

impl Conv3x3 {
    pub fn param_count(&self) -> usize {
        self.cout * self.cin * 9 + self.cout
    }

    fn weights<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        &params[self.offset..self.offset + self.cout * self.cin * 9]
    }

    fn bias<'a, T>(&self, params: &'a [T]) -> &'a [T] {
        let start = self.offset + self.cout * self.cin * 9;
        &params[start..start + self.cout]
    }

    /// Unrolls `x` (`cin x h x w`) into `col` (`cin*9 x h*w`).
    pub fn im2col<T: Real>(&self, x: &[T], h: usize, w: usize, pad: Padding, col: &mut Vec<T>) {
        let hw = h * w;
        col.clear();
        col.resize(self.cin * 9 * hw, T::ZERO);
        for ci in 0..self.cin {
            let plane = &x[ci * hw..(ci + 1) * hw];
            for ky in 0..3 {
                for kx in 0..3 {
                    let row = &mut col[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                    for y in 0..h {
                        let Some(sy) = shift(y, ky, h, pad) else { continue };
                        let dst = &mut row[y * w..(y + 1) * w];
                        let src = &plane[sy * w..(sy + 1) * w];
                        copy_shifted(dst, src, kx, pad);
                    }
                }
            }
        }
    }

    /// Forward pass given an unrolled input.
    pub fn forward_col<T: Real>(&self, params: &[T], col: &[T], hw: usize, out: &mut Vec<T>) {
        out.clear();
        out.reserve(self.cout * hw);
        for &b in self.bias(params) {
            out.extend(std::iter::repeat_n(b, hw));
        }
        matmul(self.cout, self.cin * 9, hw, self.weights(params), false, col, T::ONE, out);
    }

    pub fn forward<T: Real>(&self, params: &[T], x: &[T], h: usize, w: usize, pad: Padding, out: &mut Vec<T>) {
        let mut col = Vec::new();
        self.im2col(x, h, w, pad, &mut col);
        self.forward_col(params, &col, h * w, out);
    }

    /// Accumulates parameter gradients into `dparams` and, if requested,
    /// writes the input gradient into `dx`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward<T: Real>(
        &self,
        params: &[T],
        col: &[T],
        dout: &[T],
        h: usize,
        w: usize,
        pad: Padding,
        dparams: &mut [T],
        dcol: &mut Vec<T>,
        dx: Option<&mut Vec<T>>,
    ) {
        let hw = h * w;
        let kk = self.cin * 9;
        let wlen = self.cout * kk;
        {
            let dw = &mut dparams[self.offset..self.offset + wlen];
            T::gemm_acc_abt(self.cout, hw, kk, dout, col, dw);
        }
        let db = &mut dparams[self.offset + wlen..self.offset + wlen + self.cout];
        for (co, g) in db.iter_mut().enumerate() {
            let mut s = T::ZERO;
            for &v in &dout[co * hw..(co + 1) * hw] {
                s += v;
            }
            *g += s;
        }
        if let Some(dx) = dx {
            dcol.resize(kk * hw, T::ZERO);
            matmul(kk, self.cout, hw, self.weights(params), true, dout, T::ZERO, dcol);
            dx.clear();
            dx.resize(self.cin * hw, T::ZERO);
            for ci in 0..self.cin {
                let plane = &mut dx[ci * hw..(ci + 1) * hw];
                for ky in 0..3 {
                    for kx in 0..3 {
                        let row = &dcol[((ci * 9) + ky * 3 + kx) * hw..][..hw];
                        for y in 0..h {
                            let Some(sy) = shift(y, ky, h, pad) else { continue };
                            let src = &row[y * w..(y + 1) * w];
                            let dst = &mut plane[sy * w..(sy + 1) * w];
                            add_shifted_back(dst, src, kx, pad);
                        }
                    }
                }
            }
        }
    }
}

/// Source row for output row `y` under kernel tap `k` (0, 1, 2 for -1, 0, +1).
#[inline]
fn shift(y: usize, k: usize, n: usize, pad: Padding) -> Option<usize> {
    let s = y as isize + k as isize - 1;
    if (0..n as isize).contains(&s) {
        Some(s as usize)
    } else {
        match pad {
            Padding::Zero => None,
            Padding::Periodic => Some(s.rem_euclid(n as isize) as usize),
        }
    }
}

/// `dst[x] = src[x + k - 1]` with the given padding.
#[inline]
fn copy_shifted<T: Real>(dst: &mut [T], src: &[T], k: usize, pad: Padding) {
    let w = dst.len();
    match k {
        1 => dst.copy_from_slice(src),
        0 => {
            dst[1..].copy_from_slice(&src[..w - 1]);
            dst[0] = if pad == Padding::Periodic { src[w - 1] } else { T::ZERO };
        }
        _ => {
            dst[..w - 1].copy_from_slice(&src[1..]);
            dst[w - 1] = if pad == Padding::Periodic { src[0] } else { T::ZERO };
        }
    }
}

/// Adjoint of [`copy_shifted`]: `dst[x + k - 1] += src[x]`.
#[inline]
fn add_shifted_back<T: Real>(dst: &mut [T], src: &[T], k: usize, pad: Padding) {
    let w = dst.len();
    match k {
        1 => dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s),
        0 => {
            dst[..w - 1].iter_mut().zip(&src[1..]).for_each(|(d, &s)| *d += s);
            if pad == Padding::Periodic {
                dst[w - 1] += src[0];
            }
        }
        _ => {
            dst[1..].iter_mut().zip(&src[..w - 1]).for_each(|(d, &s)| *d += s);
            if pad == Padding::Periodic {
                dst[0] += src[w - 1];
            }
        }
    }
}

pub fn leaky_relu<T: Real>(x: &mut [T]) {
    let slope = T::from_f64(LEAKY_SLOPE);
    for v in x {
        if *v < T::ZERO {
            *v *= slope;
        }
    }
}

/// Backward through [`leaky_relu`] given its output `y`.
pub fn leaky_relu_backward<T: Real>(y: &[T], dy: &mut [T]) {
    let slope = T::from_f64(LEAKY_SLOPE);
    for (g, &v) in dy.iter_mut().zip(y) {
        if v < T::ZERO {
            *g *= slope;
        }
    }
}

/// 2x2 average pooling of `c x h x w` (h and w even).
pub fn avg_pool2<T: Real>(x: &[T], c: usize, h: usize, w: usize, out: &mut Vec<T>) {
    let (oh, ow) = (h / 2, w / 2);
    let q = T::from_f64(0.25);
    out.clear();
    out.resize(c * oh * ow, T::ZERO);
    for ch in 0..c {
        let src = &x[ch * h * w..];
        let dst = &mut out[ch * oh * ow..];
        for y in 0..oh {
            for xx in 0..ow {
                let i = 2 * y * w + 2 * xx;
                dst[y * ow + xx] = q * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
            }
        }
    }
}

pub fn avg_pool2_backward<T: Real>(dy: &[T], c: usize, h: usize, w: usize, dx: &mut Vec<T>) {
    let (oh, ow) = (h / 2, w / 2);
    let q = T::from_f64(0.25);
    dx.clear();
    dx.resize(c * h * w, T::ZERO);
    for ch in 0..c {
        let src = &dy[ch * oh * ow..];
        let dst = &mut dx[ch * h * w..];
        for y in 0..oh {
            for xx in 0..ow {
                let g = q * src[y * ow + xx];
                let i = 2 * y * w + 2 * xx;
                dst[i] = g;
                dst[i + 1] = g;
                dst[i + w] = g;
                dst[i + w + 1] = g;
            }
        }
    }
}

/// Taps of half-pixel-centred bilinear doubling along one axis.
fn up_taps(n: usize) -> Vec<(usize, usize, f64)> {
    (0..2 * n)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(n - 1);
            let i1 = (i0 + 1).min(n - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Bilinear x2 upsampling of `c x h x w`, sampling at half-pixel centres
/// with edge clamping.
pub fn upsample2<T: Real>(x: &[T], c: usize, h: usize, w: usize, out: &mut Vec<T>) {
    let (ty, tx) = (up_taps(h), up_taps(w));
    let (oh, ow) = (2 * h, 2 * w);
    out.clear();
    out.resize(c * oh * ow, T::ZERO);
    for ch in 0..c {
        let src = &x[ch * h * w..(ch + 1) * h * w];
        let dst = &mut out[ch * oh * ow..(ch + 1) * oh * ow];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            let (wy0, wy1) = (T::from_f64(1.0 - fy), T::from_f64(fy));
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let (wx0, wx1) = (T::from_f64(1.0 - fx), T::from_f64(fx));
                dst[oy * ow + ox] = wy0 * (wx0 * src[y0 * w + x0] + wx1 * src[y0 * w + x1])
                    + wy1 * (wx0 * src[y1 * w + x0] + wx1 * src[y1 * w + x1]);
            }
        }
    }
}

/// Adjoint of [`upsample2`]; `h, w` are the low-resolution dimensions.
pub fn upsample2_backward<T: Real>(dy: &[T], c: usize, h: usize, w: usize, dx: &mut Vec<T>) {
    let (ty, tx) = (up_taps(h), up_taps(w));
    let (oh, ow) = (2 * h, 2 * w);
    dx.clear();
    dx.resize(c * h * w, T::ZERO);
    for ch in 0..c {
        let src = &dy[ch * oh * ow..(ch + 1) * oh * ow];
        let dst = &mut dx[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            let (wy0, wy1) = (T::from_f64(1.0 - fy), T::from_f64(fy));
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let (wx0, wx1) = (T::from_f64(1.0 - fx), T::from_f64(fx));
                let g = src[oy * ow + ox];
                dst[y0 * w + x0] += wy0 * wx0 * g;
                dst[y0 * w + x1] += wy0 * wx1 * g;
                dst[y1 * w + x0] += wy1 * wx0 * g;
                dst[y1 * w + x1] += wy1 * wx1 * g;
            }
        }
    }
}
