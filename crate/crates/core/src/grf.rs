//! Sampling and verification of the scalar Gaussian random field carried by
//! a truncated eigenbasis.
//!
//! A sample is `T(x_j) = sum_I sqrt(Z_I) f_I(x_j) xi_I` with i.i.d. standard
//! normal `xi_I` drawn from the counter-based generator, so a `(seed, draw)`
//! pair fully determines the field.

use crate::error::{Error, Result};
use crate::mcstats::{parallel_estimate, parallel_estimate_vector, Estimator};
use crate::rng;
use crate::spectral::KlBasis;
use serde::{Deserialize, Serialize};

/// One realization of the scalar field on the basis grid.
#[derive(Debug, Clone)]
pub struct GrfSample {
    pub xi: Vec<f64>,
    pub values: Vec<f64>,
    pub seed: u64,
    pub draw: u64,
}

/// Field values for a given coefficient vector.
pub fn synthesize(basis: &KlBasis, xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: xi.len(),
        });
    }
    let m = basis.domain().node_count();
    let mut values = vec![0.0; m];
    for (i, &c) in xi.iter().enumerate() {
        let amp = basis.eigenvalues()[i].sqrt() * c;
        let f = basis.eigenfunction(i);
        for j in 0..m {
            values[j] += amp * f[j];
        }
    }
    Ok(values)
}

/// Draws the field for `(seed, draw = 0)`.
pub fn sample(basis: &KlBasis, seed: u64) -> GrfSample {
    sample_indexed(basis, seed, 0)
}

/// Draws the field for an explicit draw index; used by Monte Carlo loops.
pub fn sample_indexed(basis: &KlBasis, seed: u64, draw: u64) -> GrfSample {
    let xi = rng::standard_normal_vector(seed, draw, basis.len());
    let values = synthesize(basis, &xi).expect("xi length matches basis by construction");
    GrfSample {
        xi,
        values,
        seed,
        draw,
    }
}

/// Gradient field `grad T(x_j) = sum_I sqrt(Z_I) grad f_I(x_j) xi_I`,
/// layout `node_count x dim` with stride `dim`.
pub fn field_gradient(basis: &KlBasis, xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            got: xi.len(),
        });
    }
    let m = basis.domain().node_count();
    let d = basis.domain().dim();
    let mut out = vec![0.0; m * d];
    for (i, &c) in xi.iter().enumerate() {
        let amp = basis.eigenvalues()[i].sqrt() * c;
        let g = basis.eigenfunction_gradient(i)?;
        for (slot, gv) in out.iter_mut().zip(g) {
            *slot += amp * gv;
        }
    }
    Ok(out)
}

/// Analytic Gaussian moment `E[|T(x_j)|^p]` for even `p`: the field at a
/// point is a centred Gaussian with variance `sigma^2(x_j)`, so the moment
/// is `(p-1)!! sigma^p`.
pub fn moment_p(basis: &KlBasis, node: usize, p: u32) -> Result<f64> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::invalid(format!("p must be even and >= 2, got {p}")));
    }
    let sigma2 = basis.variance_at(node);
    Ok(double_factorial_odd(p - 1) * sigma2.powf(p as f64 / 2.0))
}

/// Product of the odd integers down from `n` (n odd), i.e. `n!!`.
pub fn double_factorial_odd(n: u32) -> f64 {
    let mut acc = 1.0;
    let mut k = n as i64;
    while k > 1 {
        acc *= k as f64;
        k -= 2;
    }
    acc
}

/// Expected squared Sobolev norm of the field: order 1 sums the modal
/// variances and gradient energies, order 2 adds the second-derivative
/// energies (grid-differenced and hence low-accuracy on Nystrom bases).
pub fn sobolev_norm_expectation(basis: &KlBasis, order: u32) -> Result<f64> {
    if !(order == 1 || order == 2) {
        return Err(Error::invalid(format!("order must be 1 or 2, got {order}")));
    }
    let ints = basis.basis_integrals();
    let z = basis.eigenvalues();
    let mut total: f64 = z.iter().sum::<f64>()
        + z.iter()
            .zip(&ints.h_grad)
            .map(|(zi, hg)| zi * hg)
            .sum::<f64>();
    if order == 2 {
        let m = basis.domain().node_count();
        let d = basis.domain().dim();
        let w = basis.domain().weights();
        for (i, &zi) in z.iter().enumerate() {
            let hess = basis.eigenfunction_hessian(i)?;
            let mut energy = 0.0;
            for j in 0..m {
                let h = &hess[j * d * d..(j + 1) * d * d];
                energy += w[j] * h.iter().map(|v| v * v).sum::<f64>();
            }
            total += zi * energy;
        }
    }
    Ok(total)
}

/// Both routes to the integrated variance: quadrature of the pointwise
/// variance and the plain eigenvalue sum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceIntegral {
    pub quadrature: f64,
    pub eigenvalue_sum: f64,
}

/// Computes the integrated variance both ways and errors when they disagree
/// beyond 1e-6 relative, which marks the basis as inconsistent.
pub fn variance_integral(basis: &KlBasis) -> Result<VarianceIntegral> {
    let m = basis.domain().node_count();
    let var_at: Vec<f64> = (0..m).map(|j| basis.variance_at(j)).collect();
    let quadrature = basis.domain().integrate(&var_at)?;
    let eigenvalue_sum: f64 = basis.eigenvalues().iter().sum();
    let scale = eigenvalue_sum.abs().max(1e-300);
    if (quadrature - eigenvalue_sum).abs() > 1e-6 * scale {
        return Err(Error::Numerical(format!(
            "variance integral {quadrature} disagrees with eigenvalue sum {eigenvalue_sum}"
        )));
    }
    Ok(VarianceIntegral {
        quadrature,
        eigenvalue_sum,
    })
}

/// Recovers the coefficient vector from field values:
/// `xi_I = Z_I^(-1/2) sum_j w_j v_j f_I(x_j)`.
pub fn project_xi(basis: &KlBasis, field_values: &[f64]) -> Result<Vec<f64>> {
    let m = basis.domain().node_count();
    if field_values.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: field_values.len(),
        });
    }
    let w = basis.domain().weights();
    let mut xi = Vec::with_capacity(basis.len());
    for i in 0..basis.len() {
        let z = basis.eigenvalues()[i];
        if !(z > 0.0) {
            return Err(Error::Numerical(format!(
                "eigenvalue {i} below floor; cannot project"
            )));
        }
        let f = basis.eigenfunction(i);
        let mut acc = 0.0;
        for j in 0..m {
            acc += w[j] * field_values[j] * f[j];
        }
        xi.push(acc / z.sqrt());
    }
    Ok(xi)
}

/// Monte Carlo estimate of `E[|T|^2_{L2}]`.
pub fn l2_norm_expectation_mc(basis: &KlBasis, draws: u64, seed: u64) -> Result<Estimator> {
    let domain = basis.domain();
    parallel_estimate(draws, |draw| {
        let s = sample_indexed(basis, seed, draw);
        domain
            .weights()
            .iter()
            .zip(&s.values)
            .map(|(w, v)| w * v * v)
            .sum()
    })
}

/// Monte Carlo estimate of `E[|T|^2_{H^1}]` (field plus gradient energy).
pub fn sobolev_h1_mc(basis: &KlBasis, draws: u64, seed: u64) -> Result<Estimator> {
    let domain = basis.domain();
    let d = domain.dim();
    parallel_estimate(draws, |draw| {
        let s = sample_indexed(basis, seed, draw);
        let g = field_gradient(basis, &s.xi).expect("basis shapes agree");
        domain
            .weights()
            .iter()
            .enumerate()
            .map(|(j, w)| {
                let g2: f64 = g[j * d..(j + 1) * d].iter().map(|v| v * v).sum();
                w * (s.values[j] * s.values[j] + g2)
            })
            .sum()
    })
}

/// Node-wise Monte Carlo mean of the field.
pub fn mean_field_mc(basis: &KlBasis, draws: u64, seed: u64) -> Result<crate::mcstats::VectorEstimator> {
    let m = basis.domain().node_count();
    parallel_estimate_vector(draws, m, |draw, buf| {
        let s = sample_indexed(basis, seed, draw);
        buf.copy_from_slice(&s.values);
    })
}

/// Monte Carlo covariance of the field at a node pair, exploiting the known
/// zero mean: the estimator averages the product `T(x_j) T(x_k)`.
pub fn covariance_mc(
    basis: &KlBasis,
    j: usize,
    k: usize,
    draws: u64,
    seed: u64,
) -> Result<Estimator> {
    parallel_estimate(draws, |draw| {
        let s = sample_indexed(basis, seed, draw);
        s.values[j] * s.values[k]
    })
}
