//! One-dimensional Hermite spline kernels and their tensor products.
//!
//! A kernel of order `n` has `n + 1` modes. Mode `i` is a piecewise polynomial
//! of degree `2n + 1` supported on `[-1, 1]` whose values and first `n`
//! derivatives vanish at `-1`, `0` and `1`, except the `i`-th derivative at
//! `0`. Every mode is rescaled so that its peak magnitude is exactly one.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Highest kernel order this crate builds.
pub const MAX_ORDER: usize = 4;

/// Piecewise polynomial Hermite basis of one order.
#[derive(Debug, Clone)]
pub struct KernelTable {
    order: usize,
    /// `pieces[mode][side][deriv]` holds ascending monomial coefficients;
    /// side 0 covers `[-1, 0)`, side 1 covers `[0, 1)`.
    pieces: Vec<[Vec<Vec<f64>>; 2]>,
    scale: Vec<f64>,
}

impl KernelTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn modes(&self) -> usize {
        self.order + 1
    }

    /// Highest derivative that is still of bounded variation.
    pub fn max_derivative(&self) -> usize {
        self.order + 1
    }

    /// Magnitude of the defining derivative of `mode` at the origin after
    /// rescaling (`1` for the value mode).
    pub fn scale(&self, mode: usize) -> f64 {
        self.scale[mode]
    }

    /// Monomial coefficients of the undifferentiated piece of `mode`.
    /// `right` selects `[0, 1]`, otherwise `[-1, 0]`.
    pub fn piece(&self, mode: usize, right: bool) -> &[f64] {
        &self.pieces[mode][usize::from(right)][0]
    }

    /// `deriv`-th derivative of `mode` at `x`, exactly zero for `|x| >= 1`.
    pub fn eval(&self, mode: usize, x: f64, deriv: usize) -> Result<f64> {
        if mode > self.order {
            return Err(Error::Config(format!(
                "mode {mode} does not exist for order {}",
                self.order
            )));
        }
        if deriv > self.max_derivative() {
            return Err(Error::DerivativeOrder {
                requested: deriv,
                max: self.max_derivative(),
            });
        }
        Ok(self.eval_unchecked(mode, x, deriv))
    }

    /// Same as [`eval`](Self::eval) without argument validation.
    #[inline]
    pub fn eval_unchecked(&self, mode: usize, x: f64, deriv: usize) -> f64 {
        if !(x > -1.0 && x < 1.0) {
            return 0.0;
        }
        let side = usize::from(x >= 0.0);
        horner(&self.pieces[mode][side][deriv], x)
    }
}

#[inline]
fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn differentiate(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Unscaled right piece of mode `i`: the degree-`2n+1` polynomial with
/// `p^(j)(0) = [i == j]` and `p^(j)(1) = 0` for `j <= n`.
fn unit_piece(n: usize, i: usize) -> Vec<f64> {
    let deg = 2 * n + 1;
    let mut coeffs = vec![0.0; deg + 1];
    // Conditions at the origin fix the low coefficients directly.
    coeffs[i] = 1.0 / factorial(i);
    // The remaining n+1 coefficients come from the conditions at x = 1.
    let unknowns = n + 1;
    let mut a = vec![vec![0.0; unknowns]; unknowns];
    let mut b = vec![0.0; unknowns];
    for j in 0..=n {
        // j-th derivative of x^k at 1 is k!/(k-j)!
        let falling = |k: usize| -> f64 {
            if k < j {
                0.0
            } else {
                ((k - j + 1)..=k).map(|v| v as f64).product()
            }
        };
        for (col, k) in (n + 1..=deg).enumerate() {
            a[j][col] = falling(k);
        }
        b[j] = -falling(i) * coeffs[i];
    }
    let high = solve_dense(a, b);
    coeffs[n + 1..].copy_from_slice(&high);
    coeffs
}

/// Peak of `|p|` on `[0, 1]`: dense scan followed by golden-section refinement.
fn peak_magnitude(p: &[f64]) -> f64 {
    const SCAN: usize = 4096;
    let f = |x: f64| horner(p, x).abs();
    let (mut best_x, mut best) = (0.0, f(0.0));
    for k in 1..=SCAN {
        let x = k as f64 / SCAN as f64;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let h = 1.0 / SCAN as f64;
    let (mut lo, mut hi) = ((best_x - h).max(0.0), (best_x + h).min(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

/// Builds the kernel table of order `n` (`n <= MAX_ORDER`).
pub fn build_kernel(n: usize) -> Result<KernelTable> {
    if n > MAX_ORDER {
        return Err(Error::Config(format!(
            "kernel order {n} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    let mut pieces = Vec::with_capacity(n + 1);
    let mut scale = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let raw = unit_piece(n, i);
        let peak = peak_magnitude(&raw);
        let right: Vec<f64> = raw.iter().map(|c| c / peak).collect();
        // h(-x) = (-1)^i h(x)
        let left: Vec<f64> = right
            .iter()
            .enumerate()
            .map(|(k, &c)| if (i + k) % 2 == 0 { c } else { -c })
            .collect();
        let chain = |base: Vec<f64>| {
            let mut out = vec![base];
            for _ in 0..=n {
                let next = differentiate(out.last().unwrap());
                out.push(next);
            }
            out
        };
        pieces.push([chain(left), chain(right)]);
        scale.push(1.0 / peak);
    }
    Ok(KernelTable {
        order: n,
        pieces,
        scale,
    })
}

/// Shared, lazily built kernel tables for every supported order.
pub fn kernel(n: usize) -> Result<&'static KernelTable> {
    static TABLES: OnceLock<Vec<KernelTable>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| {
        (0..=MAX_ORDER)
            .map(|n| build_kernel(n).expect("supported order"))
            .collect()
    });
    tables.get(n).ok_or_else(|| {
        Error::Config(format!(
            "kernel order {n} exceeds the supported maximum {MAX_ORDER}"
        ))
    })
}

/// Orders and mode of a separable `(x, y, t)` kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorKernelSpec {
    pub spatial_orders: (usize, usize),
    pub temporal_order: usize,
    pub mode: (usize, usize, usize),
}

impl TensorKernelSpec {
    pub fn modes_per_node(&self) -> usize {
        (self.spatial_orders.0 + 1) * (self.spatial_orders.1 + 1) * (self.temporal_order + 1)
    }
}

/// Tensor-product kernel `h_i^l(dx) h_j^m(dy) h_k^nt(dtau)` with per-axis
/// derivative orders.
pub fn tensor_eval(
    spec: &TensorKernelSpec,
    dx: f64,
    dy: f64,
    dtau: f64,
    deriv: (usize, usize, usize),
) -> Result<f64> {
    let (l, m) = spec.spatial_orders;
    let (i, j, k) = spec.mode;
    let hx = kernel(l)?.eval(i, dx, deriv.0)?;
    let hy = kernel(m)?.eval(j, dy, deriv.1)?;
    let ht = kernel(spec.temporal_order)?.eval(k, dtau, deriv.2)?;
    Ok(hx * hy * ht)
}
