//! Laplace eigenmodes with zero (Dirichlet) boundary values on a box.
//!
//! On `[0, S]` the modes are `f_n(x) = sqrt(2/S) sin(n pi x / S)` with
//! eigenvalue `(n pi / S)^2`; higher dimensions take tensor products and add
//! the per-axis eigenvalues. Everything here is analytic: values, gradients
//! and second derivatives are exact.

use std::f64::consts::PI;

/// One tensor-product sine mode on a box with the given side lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeIndex {
    /// Per-axis mode numbers, all >= 1.
    pub indices: Vec<usize>,
}

/// Eigenvalue of the mode `k` on sides `sides`.
pub fn eigenvalue(indices: &[usize], sides: &[f64]) -> f64 {
    indices
        .iter()
        .zip(sides)
        .map(|(&k, &s)| {
            let w = k as f64 * PI / s;
            w * w
        })
        .sum()
}

/// Mode value at a point.
pub fn eval(indices: &[usize], sides: &[f64], x: &[f64]) -> f64 {
    indices
        .iter()
        .zip(sides)
        .zip(x)
        .map(|((&k, &s), &xi)| (2.0 / s).sqrt() * (k as f64 * PI * xi / s).sin())
        .product()
}

/// Gradient of the mode at a point (length `dim`).
pub fn grad(indices: &[usize], sides: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = sides.len();
    (0..dim)
        .map(|a| {
            let mut g = 1.0;
            for b in 0..dim {
                let k = indices[b] as f64;
                let s = sides[b];
                let arg = k * PI * x[b] / s;
                let amp = (2.0 / s).sqrt();
                g *= if b == a {
                    amp * (k * PI / s) * arg.cos()
                } else {
                    amp * arg.sin()
                };
            }
            g
        })
        .collect()
}

/// Second derivatives of the mode at a point, row-major `dim x dim`.
pub fn hessian(indices: &[usize], sides: &[f64], x: &[f64]) -> Vec<f64> {
    let dim = sides.len();
    let mut out = vec![0.0; dim * dim];
    for a in 0..dim {
        for b in 0..dim {
            let mut h = 1.0;
            for c in 0..dim {
                let k = indices[c] as f64;
                let s = sides[c];
                let w = k * PI / s;
                let arg = w * x[c];
                let amp = (2.0 / s).sqrt();
                let order = (c == a) as usize + (c == b) as usize;
                h *= match order {
                    0 => amp * arg.sin(),
                    1 => amp * w * arg.cos(),
                    _ => -amp * w * w * arg.sin(),
                };
            }
            out[a * dim + b] = h;
        }
    }
    out
}

/// The `n` modes with the smallest eigenvalues, ascending; ties break
/// lexicographically on the index tuple so the ordering is deterministic.
pub fn lowest_modes(sides: &[f64], n: usize) -> Vec<ModeIndex> {
    let dim = sides.len();
    // Any mode with a component above n is dominated by n smaller 1-axis
    // modes, so searching the cube [1, n]^dim is sufficient.
    let k_max = n.max(1);
    let mut all: Vec<(f64, Vec<usize>)> = Vec::new();
    let mut idx = vec![1usize; dim];
    loop {
        all.push((eigenvalue(&idx, sides), idx.clone()));
        let mut a = 0;
        loop {
            if a == dim {
                break;
            }
            idx[a] += 1;
            if idx[a] <= k_max {
                break;
            }
            idx[a] = 1;
            a += 1;
        }
        if a == dim {
            break;
        }
    }
    all.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap()
            .then_with(|| x.1.cmp(&y.1))
    });
    all.truncate(n);
    all.into_iter()
        .map(|(_, indices)| ModeIndex { indices })
        .collect()
}
