//! Bounded box domains with tensor-product quadrature grids.
//!
//! Every volume integral in the crate is a weighted sum over the grid nodes
//! of a [`BoxDomain`], so the domain owns the nodes, the weights and the
//! per-axis finite-difference stencils used for discrete derivatives.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Quadrature rule applied per axis of the tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    Trapezoid,
    GaussLegendre,
}

impl QuadratureRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            QuadratureRule::Trapezoid => "trapezoid",
            QuadratureRule::GaussLegendre => "gauss-legendre",
        }
    }
}

impl std::str::FromStr for QuadratureRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trapezoid" => Ok(QuadratureRule::Trapezoid),
            "gauss-legendre" | "gauss" => Ok(QuadratureRule::GaussLegendre),
            other => Err(Error::invalid(format!("unknown quadrature rule '{other}'"))),
        }
    }
}

/// A single node of the tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub coords: Vec<f64>,
    pub index: usize,
    pub weight: f64,
}

/// Bounded box `[0, S_1] x ... x [0, S_d]` with a tensor quadrature grid.
///
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    dim: usize,
    side_lengths: Vec<f64>,
    nodes_per_axis: usize,
    rule: QuadratureRule,
    /// Node coordinates per axis, ascending.
    axis_nodes: Vec<Vec<f64>>,
    /// Quadrature weights per axis; each sums to the side length.
    axis_weights: Vec<Vec<f64>>,
    /// Flattened node coordinates, stride `dim`, first axis fastest.
    coords: Vec<f64>,
    /// Tensor-product weight per flat node.
    weights: Vec<f64>,
}

impl BoxDomain {
    /// Builds a domain. `dim` must be 1, 2 or 3, all sides positive and
    /// `nodes_per_axis >= 2`.
    pub fn build(
        dim: usize,
        side_lengths: &[f64],
        nodes_per_axis: usize,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if side_lengths.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: side_lengths.len(),
            });
        }
        if side_lengths.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("side lengths must be strictly positive"));
        }
        if nodes_per_axis < 2 {
            return Err(Error::invalid(format!(
                "nodes_per_axis must be >= 2, got {nodes_per_axis}"
            )));
        }

        let mut axis_nodes = Vec::with_capacity(dim);
        let mut axis_weights = Vec::with_capacity(dim);
        for &side in side_lengths {
            let (nodes, weights) = match rule {
                QuadratureRule::Trapezoid => trapezoid_rule(nodes_per_axis, side),
                QuadratureRule::GaussLegendre => gauss_legendre_rule(nodes_per_axis, side),
            };
            axis_nodes.push(nodes);
            axis_weights.push(weights);
        }

        let node_count = nodes_per_axis.pow(dim as u32);
        let mut coords = vec![0.0; node_count * dim];
        let mut weights = vec![0.0; node_count];
        for flat in 0..node_count {
            let mut rem = flat;
            let mut w = 1.0;
            for a in 0..dim {
                let i = rem % nodes_per_axis;
                rem /= nodes_per_axis;
                coords[flat * dim + a] = axis_nodes[a][i];
                w *= axis_weights[a][i];
            }
            weights[flat] = w;
        }

        Ok(BoxDomain {
            dim,
            side_lengths: side_lengths.to_vec(),
            nodes_per_axis,
            rule,
            axis_nodes,
            axis_weights,
            coords,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side_lengths(&self) -> &[f64] {
        &self.side_lengths
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn vol(&self) -> f64 {
        self.side_lengths.iter().product()
    }

    /// Single scalar length `L = vol^(1/dim)`, also used for anisotropic boxes.
    pub fn length_scale(&self) -> f64 {
        self.vol().powf(1.0 / self.dim as f64)
    }

    /// Coordinates of flat node `j`.
    pub fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn grid_point(&self, j: usize) -> GridPoint {
        GridPoint {
            coords: self.point(j).to_vec(),
            index: j,
            weight: self.weights[j],
        }
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.axis_nodes[axis]
    }

    /// Per-axis multi-index of a flat node (first axis fastest).
    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        (0..self.dim)
            .map(|_| {
                let i = rem % self.nodes_per_axis;
                rem /= self.nodes_per_axis;
                i
            })
            .collect()
    }

    /// Flat index from a per-axis multi-index.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        let mut flat = 0;
        for a in (0..self.dim).rev() {
            flat = flat * self.nodes_per_axis + multi[a];
        }
        flat
    }

    /// Flat node reached from `flat` by integer grid steps per axis, or
    /// `None` if the step leaves the grid or has the wrong arity.
    pub fn offset_index(&self, flat: usize, step: &[isize]) -> Option<usize> {
        if step.len() != self.dim {
            return None;
        }
        let mut multi = self.multi_index(flat);
        for a in 0..self.dim {
            let i = multi[a] as isize + step[a];
            if i < 0 || i >= self.nodes_per_axis as isize {
                return None;
            }
            multi[a] = i as usize;
        }
        Some(self.flat_index(&multi))
    }

    /// Quadrature of node values: `sum_j w_j v_j`.
    pub fn integrate(&self, values_at_nodes: &[f64]) -> Result<f64> {
        if values_at_nodes.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: values_at_nodes.len(),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(values_at_nodes)
            .map(|(w, v)| w * v)
            .sum())
    }

    /// Second-order finite-difference derivative of a node field along `axis`
    /// (central on the non-uniform interior stencil, one-sided at the
    /// boundary). Output has the same node layout as the input.
    pub fn differentiate_axis(&self, values: &[f64], axis: usize) -> Result<Vec<f64>> {
        if values.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.node_count(),
                got: values.len(),
            });
        }
        if axis >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: axis,
                len: self.dim,
            });
        }
        let n = self.nodes_per_axis;
        let xs = &self.axis_nodes[axis];
        let stride = n.pow(axis as u32);
        let mut out = vec![0.0; values.len()];

        // Walk every 1D line parallel to `axis`.
        let lines = self.node_count() / n;
        for line in 0..lines {
            // Base flat index of the line: distribute `line` over the other axes.
            let below = line % stride;
            let above = line / stride;
            let base = above * stride * n + below;
            if n == 2 {
                // Two nodes only admit the first-order difference.
                let slope = (values[base + stride] - values[base]) / (xs[1] - xs[0]);
                out[base] = slope;
                out[base + stride] = slope;
                continue;
            }
            for i in 0..n {
                let idx = base + i * stride;
                out[idx] = if i == 0 {
                    let (c0, c1, c2) = forward_stencil(xs[0], xs[1], xs[2]);
                    c0 * values[base]
                        + c1 * values[base + stride]
                        + c2 * values[base + 2 * stride]
                } else if i == n - 1 {
                    let (c0, c1, c2) = backward_stencil(xs[n - 3], xs[n - 2], xs[n - 1]);
                    c0 * values[base + (n - 3) * stride]
                        + c1 * values[base + (n - 2) * stride]
                        + c2 * values[base + (n - 1) * stride]
                } else {
                    let (c0, c1, c2) = central_stencil(xs[i - 1], xs[i], xs[i + 1]);
                    c0 * values[idx - stride] + c1 * values[idx] + c2 * values[idx + stride]
                };
            }
        }
        Ok(out)
    }

    /// Gradient of a node field: `node_count x dim`, flattened with stride `dim`.
    pub fn gradient(&self, values: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.node_count() * self.dim];
        for a in 0..self.dim {
            let d = self.differentiate_axis(values, a)?;
            for (j, v) in d.into_iter().enumerate() {
                out[j * self.dim + a] = v;
            }
        }
        Ok(out)
    }
}

/// Three-point stencil coefficients for f'(x1) on nodes (x0, x1, x2).
fn central_stencil(x0: f64, x1: f64, x2: f64) -> (f64, f64, f64) {
    let hm = x1 - x0;
    let hp = x2 - x1;
    (
        -hp / (hm * (hm + hp)),
        (hp - hm) / (hm * hp),
        hm / (hp * (hm + hp)),
    )
}

/// Coefficients for f'(x0) on nodes (x0, x1, x2).
fn forward_stencil(x0: f64, x1: f64, x2: f64) -> (f64, f64, f64) {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    (
        -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
        (h1 + h2) / (h1 * h2),
        -h1 / (h2 * (h1 + h2)),
    )
}

/// Coefficients for f'(x2) on nodes (x0, x1, x2).
fn backward_stencil(x0: f64, x1: f64, x2: f64) -> (f64, f64, f64) {
    let h1 = x1 - x0;
    let h2 = x2 - x1;
    (
        h2 / (h1 * (h1 + h2)),
        -(h1 + h2) / (h1 * h2),
        (h1 + 2.0 * h2) / (h2 * (h1 + h2)),
    )
}

/// Uniform trapezoid nodes and weights on `[0, side]`.
fn trapezoid_rule(n: usize, side: f64) -> (Vec<f64>, Vec<f64>) {
    let h = side / (n - 1) as f64;
    let nodes = (0..n).map(|i| i as f64 * h).collect();
    let weights = (0..n)
        .map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h })
        .collect();
    (nodes, weights)
}

/// Gauss-Legendre nodes and weights mapped from [-1, 1] to `[0, side]`.
///
/// Roots of P_n by Newton iteration from the Chebyshev initial guess; the
/// negative half is mirrored so the rule is symmetric to the last bit.
fn gauss_legendre_rule(n: usize, side: f64) -> (Vec<f64>, Vec<f64>) {
    let mut ref_nodes = vec![0.0; n];
    let mut ref_weights = vec![0.0; n];
    let half = n / 2;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = -p / d;
            x += dx;
            if dx.abs() <= 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // x from the cosine guess is the (i+1)-th largest root.
        ref_nodes[n - 1 - i] = x;
        ref_weights[n - 1 - i] = w;
        ref_nodes[i] = -x;
        ref_weights[i] = w;
    }
    if n % 2 == 1 {
        let (_, d) = legendre_with_derivative(n, 0.0);
        ref_nodes[half] = 0.0;
        ref_weights[half] = 2.0 / (d * d);
    }
    let nodes = ref_nodes.iter().map(|x| 0.5 * side * (x + 1.0)).collect();
    let weights = ref_weights.iter().map(|w| 0.5 * side * w).collect();
    (nodes, weights)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}
