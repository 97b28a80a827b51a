//! Reynolds-weighted random vector fields over a constant underlying flow.
//!
//! The turbulent field is `U_a(x) = u_a (1 + A W T(x))` where `T` is the
//! scalar field of the basis and `W = (RE - RE_*)^beta` above the critical
//! Reynolds number and zero at or below it. With a constant underlying
//! velocity the field is time independent, homogeneous whenever the kernel
//! is, and every statistic reduces to a scalar functional of `T`.

use crate::error::{Error, Result};
use crate::grf;
use crate::mcstats::{parallel_estimate, parallel_estimate_vector, Estimator, VectorEstimator};
use crate::spectral::KlBasis;
use serde::{Deserialize, Serialize};

/// Constant-flow configuration. Fields are public so diagnostic sweeps can
/// build off-contract values; `validate` enforces the supported ranges and
/// is called at every entry point that produces reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Constant underlying velocity, one component per domain axis.
    pub velocity: Vec<f64>,
    /// Viscosity, strictly positive.
    pub nu: f64,
    /// Noise amplitude.
    pub amplitude: f64,
    /// Weighting exponent, in (0, 1/2].
    pub beta: f64,
    /// Critical Reynolds number, strictly positive.
    pub re_star: f64,
    /// Length scale of the domain (vol^(1/dim)).
    pub length_scale: f64,
    /// Time horizon for the time-integrated dissipation; the constant-flow
    /// field is static so the horizon only scales totals.
    pub horizon: f64,
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.velocity.is_empty() || self.velocity.len() > 3 {
            return Err(Error::invalid("velocity must have 1 to 3 components"));
        }
        if self.velocity.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("velocity components must be finite"));
        }
        if !(self.nu > 0.0) {
            return Err(Error::invalid("nu must be positive"));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::invalid("amplitude must be finite"));
        }
        if !(self.beta > 0.0 && self.beta <= 0.5) {
            return Err(Error::invalid("beta must lie in (0, 0.5]"));
        }
        if !(self.re_star > 0.0) {
            return Err(Error::invalid("re_star must be positive"));
        }
        if !(self.length_scale > 0.0) {
            return Err(Error::invalid("length_scale must be positive"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        Ok(())
    }

    pub fn speed(&self) -> f64 {
        self.velocity.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Reynolds number for a given speed: `speed * L / nu`.
    pub fn reynolds(&self, speed: f64) -> f64 {
        speed * self.length_scale / self.nu
    }

    /// Reynolds number of the configured constant flow.
    pub fn reynolds_of_flow(&self) -> f64 {
        self.reynolds(self.speed())
    }

    /// Weighting factor `(re - re_star)^beta` above the critical value,
    /// and exactly zero at or below it (the boundary sits on the laminar
    /// branch).
    pub fn weighting(&self, re: f64) -> f64 {
        if re > self.re_star {
            (re - self.re_star).powf(self.beta)
        } else {
            0.0
        }
    }

    /// Weighting of the configured flow at its own viscosity.
    pub fn weighting_of_flow(&self) -> f64 {
        self.weighting(self.reynolds_of_flow())
    }

    fn check_basis(&self, basis: &KlBasis) -> Result<()> {
        if self.velocity.len() != basis.domain().dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.domain().dim(),
                got: self.velocity.len(),
            });
        }
        Ok(())
    }
}

/// One realization of the turbulent vector field on the grid.
#[derive(Debug, Clone)]
pub struct TurbulentSample {
    pub xi: Vec<f64>,
    /// `U_a(x_j)`, layout `node_count x dim` with stride `dim`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub draw: u64,
}

/// Draws the turbulent field. Below the critical Reynolds number the noise
/// branch is skipped entirely so the laminar field equals `u` bit for bit.
pub fn sample_turbulent(config: &FlowConfig, basis: &KlBasis, seed: u64) -> Result<TurbulentSample> {
    sample_turbulent_indexed(config, basis, seed, 0)
}

pub fn sample_turbulent_indexed(
    config: &FlowConfig,
    basis: &KlBasis,
    seed: u64,
    draw: u64,
) -> Result<TurbulentSample> {
    config.check_basis(basis)?;
    let scalar = grf::sample_indexed(basis, seed, draw);
    let m = basis.domain().node_count();
    let d = basis.domain().dim();
    let w = config.weighting_of_flow();
    let mut values = vec![0.0; m * d];
    if w == 0.0 {
        for j in 0..m {
            values[j * d..(j + 1) * d].copy_from_slice(&config.velocity);
        }
    } else {
        let aw = config.amplitude * w;
        for j in 0..m {
            let factor = 1.0 + aw * scalar.values[j];
            for a in 0..d {
                values[j * d + a] = config.velocity[a] * factor;
            }
        }
    }
    Ok(TurbulentSample {
        xi: scalar.xi,
        values,
        seed,
        draw,
    })
}

/// Analytic covariance matrix `Cov_ab(x_j, x_k) = A^2 u_a u_b W^2 K_N(x_j, x_k)`
/// with `K_N` the truncated eigen-sum of the basis. Row-major `dim x dim`.
pub fn covariance(config: &FlowConfig, basis: &KlBasis, j: usize, k: usize) -> Result<Vec<f64>> {
    config.check_basis(basis)?;
    let d = basis.domain().dim();
    let w = config.weighting_of_flow();
    let scalar = config.amplitude * config.amplitude * w * w * basis.mercer_sum(j, k);
    let mut out = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            out[a * d + b] = config.velocity[a] * config.velocity[b] * scalar;
        }
    }
    Ok(out)
}

/// Monte Carlo covariance of `(U_a(x_j), U_b(x_k))` using the exact mean `u`.
pub fn covariance_mc(
    config: &FlowConfig,
    basis: &KlBasis,
    j: usize,
    k: usize,
    a: usize,
    b: usize,
    draws: u64,
    seed: u64,
) -> Result<Estimator> {
    config.check_basis(basis)?;
    let d = basis.domain().dim();
    parallel_estimate(draws, |draw| {
        let s = sample_turbulent_indexed(config, basis, seed, draw).expect("validated inputs");
        (s.values[j * d + a] - config.velocity[a]) * (s.values[k * d + b] - config.velocity[b])
    })
}

/// Node-wise Monte Carlo mean of the vector field (flattened `m x dim`).
pub fn mean_field_mc(
    config: &FlowConfig,
    basis: &KlBasis,
    draws: u64,
    seed: u64,
) -> Result<VectorEstimator> {
    config.check_basis(basis)?;
    let m = basis.domain().node_count();
    let d = basis.domain().dim();
    parallel_estimate_vector(draws, m * d, |draw, buf| {
        let s = sample_turbulent_indexed(config, basis, seed, draw).expect("validated inputs");
        buf.copy_from_slice(&s.values);
    })
}

/// Analytic second-order structure function for a separation given as an
/// integer grid offset from `node`:
/// `S2 = A^2 |u|^2 W^2 (sigma^2(x) + sigma^2(y) - 2 K_N(x, y))`.
pub fn structure_function(
    config: &FlowConfig,
    basis: &KlBasis,
    node: usize,
    step: &[isize],
) -> Result<f64> {
    config.check_basis(basis)?;
    let other = basis
        .domain()
        .offset_index(node, step)
        .ok_or_else(|| Error::invalid("separation leaves the grid"))?;
    let w = config.weighting_of_flow();
    let u2: f64 = config.velocity.iter().map(|v| v * v).sum();
    let a2w2 = config.amplitude * config.amplitude * w * w;
    Ok(a2w2
        * u2
        * (basis.mercer_sum(node, node) + basis.mercer_sum(other, other)
            - 2.0 * basis.mercer_sum(node, other)))
}

/// Monte Carlo second-order structure function for the same separation.
pub fn structure_function_mc(
    config: &FlowConfig,
    basis: &KlBasis,
    node: usize,
    step: &[isize],
    draws: u64,
    seed: u64,
) -> Result<Estimator> {
    config.check_basis(basis)?;
    let other = basis
        .domain()
        .offset_index(node, step)
        .ok_or_else(|| Error::invalid("separation leaves the grid"))?;
    let d = basis.domain().dim();
    parallel_estimate(draws, |draw| {
        let s = sample_turbulent_indexed(config, basis, seed, draw).expect("validated inputs");
        (0..d)
            .map(|a| {
                let diff = s.values[other * d + a] - s.values[node * d + a];
                diff * diff
            })
            .sum()
    })
}

/// Monte Carlo expectation of the component-wise difference
/// `U_a(x_j) - U_a(x_k)`; zero in expectation for a constant underlying flow.
pub fn mean_difference_mc(
    config: &FlowConfig,
    basis: &KlBasis,
    j: usize,
    k: usize,
    draws: u64,
    seed: u64,
) -> Result<VectorEstimator> {
    config.check_basis(basis)?;
    let d = basis.domain().dim();
    parallel_estimate_vector(draws, d, |draw, buf| {
        let s = sample_turbulent_indexed(config, basis, seed, draw).expect("validated inputs");
        for a in 0..d {
            buf[a] = s.values[j * d + a] - s.values[k * d + a];
        }
    })
}

/// Monte Carlo moment of one component with its analytic upper bound
/// `2^(p-1) |u_a|^p (1 + |A W|^p sigma^p (p-1)!!)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentBound {
    pub estimate: f64,
    pub standard_error: f64,
    pub bound: f64,
}

pub fn moment_bound_check(
    config: &FlowConfig,
    basis: &KlBasis,
    node: usize,
    component: usize,
    p: u32,
    draws: u64,
    seed: u64,
) -> Result<MomentBound> {
    config.check_basis(basis)?;
    if p < 2 || p % 2 != 0 {
        return Err(Error::invalid(format!("p must be even and >= 2, got {p}")));
    }
    let d = basis.domain().dim();
    let est = parallel_estimate(draws, |draw| {
        let s = sample_turbulent_indexed(config, basis, seed, draw).expect("validated inputs");
        s.values[node * d + component].abs().powi(p as i32)
    })?;
    let w = config.weighting_of_flow();
    let sigma = basis.variance_at(node).sqrt();
    let aw = (config.amplitude * w).abs();
    let ua = config.velocity[component].abs();
    let bound = 2.0f64.powi(p as i32 - 1)
        * ua.powi(p as i32)
        * (1.0 + aw.powi(p as i32) * sigma.powi(p as i32) * grf::double_factorial_odd(p - 1));
    Ok(MomentBound {
        estimate: est.mean(),
        standard_error: est.standard_error().unwrap_or(f64::INFINITY),
        bound,
    })
}

/// Monte Carlo `E[|grad U_a(x)|^p]` for one component plus the exact `p = 2`
/// value `A^2 u_a^2 W^2 sum_I Z_I |grad f_I(x)|^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradientMoment {
    pub estimate: f64,
    pub standard_error: f64,
    pub analytic_p2: Option<f64>,
}

pub fn gradient_moment(
    config: &FlowConfig,
    basis: &KlBasis,
    node: usize,
    component: usize,
    p: u32,
    draws: u64,
    seed: u64,
) -> Result<GradientMoment> {
    config.check_basis(basis)?;
    if p < 2 || p % 2 != 0 {
        return Err(Error::invalid(format!("p must be even and >= 2, got {p}")));
    }
    let d = basis.domain().dim();
    let w = config.weighting_of_flow();
    let aw = config.amplitude * w;
    let ua = config.velocity[component];
    let est = parallel_estimate(draws, |draw| {
        let s = grf::sample_indexed(basis, seed, draw);
        let g = grf::field_gradient(basis, &s.xi).expect("basis shapes agree");
        let norm2: f64 = g[node * d..(node + 1) * d].iter().map(|v| v * v).sum();
        (aw * ua).abs().powi(p as i32) * norm2.powf(p as f64 / 2.0)
    })?;
    let analytic_p2 = if p == 2 {
        let modal: f64 = (0..basis.len())
            .map(|i| {
                let g = basis.eigenfunction_gradient(i).expect("index in range");
                let norm2: f64 = g[node * d..(node + 1) * d].iter().map(|v| v * v).sum();
                basis.eigenvalues()[i] * norm2
            })
            .sum();
        Some(aw * aw * ua * ua * modal)
    } else {
        None
    };
    Ok(GradientMoment {
        estimate: est.mean(),
        standard_error: est.standard_error().unwrap_or(f64::INFINITY),
        analytic_p2,
    })
}

/// Analytic expected squared Sobolev norm of the vector field. Order 1:
/// `|u|^2 vol + A^2 |u|^2 W^2 (sum Z_I + sum Z_I H_grad_I)`; order 2 adds the
/// second-derivative energies.
pub fn vector_sobolev_expectation(config: &FlowConfig, basis: &KlBasis, order: u32) -> Result<f64> {
    config.check_basis(basis)?;
    if !(order == 1 || order == 2) {
        return Err(Error::invalid(format!("order must be 1 or 2, got {order}")));
    }
    let u2: f64 = config.velocity.iter().map(|v| v * v).sum();
    let w = config.weighting_of_flow();
    let a2w2 = config.amplitude * config.amplitude * w * w;
    let scalar = grf::sobolev_norm_expectation(basis, order)?;
    Ok(u2 * basis.domain().vol() + a2w2 * u2 * scalar)
}

/// Monte Carlo estimate of the squared H^1 norm of the vector field.
pub fn vector_sobolev_h1_mc(
    config: &FlowConfig,
    basis: &KlBasis,
    draws: u64,
    seed: u64,
) -> Result<Estimator> {
    config.check_basis(basis)?;
    let domain = basis.domain();
    let d = domain.dim();
    let w = config.weighting_of_flow();
    let aw = config.amplitude * w;
    let u2: f64 = config.velocity.iter().map(|v| v * v).sum();
    parallel_estimate(draws, |draw| {
        let s = grf::sample_indexed(basis, seed, draw);
        let g = grf::field_gradient(basis, &s.xi).expect("basis shapes agree");
        domain
            .weights()
            .iter()
            .enumerate()
            .map(|(j, wq)| {
                let field2 = u2 * (1.0 + aw * s.values[j]).powi(2);
                let grad2: f64 = g[j * d..(j + 1) * d]
                    .iter()
                    .map(|v| aw * aw * u2 * v * v)
                    .sum();
                wq * (field2 + grad2)
            })
            .sum()
    })
}
