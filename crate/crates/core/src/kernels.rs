//! Covariance kernels, their derivatives and the spectral-density cross-check.

use crate::dirichlet;
use crate::error::{Error, Result};
use crate::geometry::BoxDomain;
use serde::{Deserialize, Serialize};

/// Kernel family. The stationary variants depend only on the separation;
/// the analytic Dirichlet variant is the truncated eigen-sum of the sine
/// basis on a box and is not stationary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum KernelVariant {
    Gaussian {
        lambda: f64,
    },
    RationalQuadratic {
        lambda: f64,
        alpha: f64,
    },
    AnalyticDirichlet {
        truncation: usize,
        side_lengths: Vec<f64>,
    },
}

/// Covariance kernel with an overall normalization (default 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub variant: KernelVariant,
    pub norm: f64,
}

impl Kernel {
    pub fn gaussian(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        Ok(Kernel {
            variant: KernelVariant::Gaussian { lambda },
            norm: 1.0,
        })
    }

    pub fn rational_quadratic(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        Ok(Kernel {
            variant: KernelVariant::RationalQuadratic { lambda, alpha },
            norm: 1.0,
        })
    }

    pub fn analytic_dirichlet(truncation: usize, domain: &BoxDomain) -> Result<Self> {
        if truncation < 1 {
            return Err(Error::invalid("truncation must be >= 1"));
        }
        Ok(Kernel {
            variant: KernelVariant::AnalyticDirichlet {
                truncation,
                side_lengths: domain.side_lengths().to_vec(),
            },
            norm: 1.0,
        })
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self.variant, KernelVariant::AnalyticDirichlet { .. })
    }

    /// K(x, y).
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.variant {
            KernelVariant::Gaussian { lambda } => {
                let r2 = sq_dist(x, y);
                self.norm * (-r2 / (lambda * lambda)).exp()
            }
            KernelVariant::RationalQuadratic { lambda, alpha } => {
                let r2 = sq_dist(x, y);
                self.norm * (1.0 + r2 / (2.0 * alpha * lambda * lambda)).powf(-alpha)
            }
            KernelVariant::AnalyticDirichlet {
                truncation,
                side_lengths,
            } => {
                let modes = dirichlet::lowest_modes(side_lengths, *truncation);
                self.norm
                    * modes
                        .iter()
                        .map(|m| {
                            dirichlet::eigenvalue(&m.indices, side_lengths)
                                * dirichlet::eval(&m.indices, side_lengths, x)
                                * dirichlet::eval(&m.indices, side_lengths, y)
                        })
                        .sum::<f64>()
            }
        }
    }

    /// Component-wise gradient of K in its first argument. Only defined for
    /// the stationary variants; the Dirichlet eigen-sum is differentiated
    /// through its basis instead.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let k = self.eval(x, y);
        match &self.variant {
            KernelVariant::Gaussian { lambda } => Ok(x
                .iter()
                .zip(y)
                .map(|(&xa, &ya)| -2.0 * (xa - ya) / (lambda * lambda) * k)
                .collect()),
            KernelVariant::RationalQuadratic { lambda, alpha } => {
                let r2 = sq_dist(x, y);
                let u = 1.0 + r2 / (2.0 * alpha * lambda * lambda);
                let f = self.norm * u.powf(-alpha - 1.0);
                Ok(x.iter()
                    .zip(y)
                    .map(|(&xa, &ya)| -(xa - ya) / (lambda * lambda) * f)
                    .collect())
            }
            KernelVariant::AnalyticDirichlet { .. } => Err(Error::Unsupported(
                "gradient of the analytic Dirichlet kernel: use the eigenbasis directly".into(),
            )),
        }
    }

    /// Mixed second derivative `d^2 K / dx_a dy_b`, row-major `dim x dim`.
    /// At `y = x` this is positive-definite for the stationary variants.
    pub fn mixed_grad(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let dim = x.len();
        match &self.variant {
            KernelVariant::Gaussian { lambda } => {
                let l2 = lambda * lambda;
                let k = self.eval(x, y);
                let mut out = vec![0.0; dim * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        let da = x[a] - y[a];
                        let db = x[b] - y[b];
                        let delta = if a == b { 1.0 } else { 0.0 };
                        out[a * dim + b] = (2.0 * delta / l2 - 4.0 * da * db / (l2 * l2)) * k;
                    }
                }
                Ok(out)
            }
            KernelVariant::RationalQuadratic { lambda, alpha } => {
                let l2 = lambda * lambda;
                let r2 = sq_dist(x, y);
                let u = 1.0 + r2 / (2.0 * alpha * l2);
                let mut out = vec![0.0; dim * dim];
                for a in 0..dim {
                    for b in 0..dim {
                        let da = x[a] - y[a];
                        let db = x[b] - y[b];
                        let delta = if a == b { 1.0 } else { 0.0 };
                        out[a * dim + b] = self.norm
                            * (delta / l2 * u.powf(-alpha - 1.0)
                                - (alpha + 1.0) * da * db / (alpha * l2 * l2)
                                    * u.powf(-alpha - 2.0));
                    }
                }
                Ok(out)
            }
            KernelVariant::AnalyticDirichlet { .. } => Err(Error::Unsupported(
                "mixed derivative of the analytic Dirichlet kernel: use the eigenbasis directly"
                    .into(),
            )),
        }
    }
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// 1D kernel reconstructed from a spectral density by wavenumber quadrature:
/// `K(x, y) = int_0^bound S(xi) cos(xi (x - y)) dxi`.
///
/// Construction fails when the density's mass per wavenumber panel keeps
/// growing toward the truncation bound, the quadrature-level signature of a
/// divergent spectral integral.
pub fn kernel_from_spectral_density<F>(
    density: F,
    bound: f64,
    panels: usize,
) -> Result<impl Fn(f64, f64) -> f64>
where
    F: Fn(f64) -> f64,
{
    if !(bound > 0.0) {
        return Err(Error::invalid("wavenumber bound must be positive"));
    }
    if panels < 4 {
        return Err(Error::invalid("need at least 4 quadrature panels"));
    }
    // Gauss-Legendre per panel; 16 points integrate the cosine factor well
    // for panel widths below a few wavelengths.
    let gl = BoxDomain::build(1, &[1.0], 16, crate::geometry::QuadratureRule::GaussLegendre)?;
    let width = bound / panels as f64;
    let mut nodes = Vec::with_capacity(panels * 16);
    let mut weights = Vec::with_capacity(panels * 16);
    let mut panel_mass = vec![0.0; panels];
    for p in 0..panels {
        let lo = p as f64 * width;
        for j in 0..gl.node_count() {
            let xi = lo + gl.point(j)[0] * width;
            let w = gl.weight(j) * width;
            let s = density(xi);
            if !s.is_finite() {
                return Err(Error::NonFinite(format!("spectral density at xi = {xi}")));
            }
            nodes.push(xi);
            weights.push(w * s);
            panel_mass[p] += w * s.abs();
        }
    }
    // Divergence check on the |S| partial sums.
    let first_half: f64 = panel_mass[..panels / 2].iter().sum();
    let second_half: f64 = panel_mass[panels / 2..].iter().sum();
    if second_half > first_half * (1.0 + 1e-9) {
        return Err(Error::Numerical(
            "spectral density not integrable on the truncated range: partial sums diverge".into(),
        ));
    }
    Ok(move |x: f64, y: f64| {
        let r = x - y;
        nodes
            .iter()
            .zip(&weights)
            .map(|(&xi, &ws)| ws * (xi * r).cos())
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::QuadratureRule;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fd_grad(kernel: &Kernel, x: &[f64], y: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|a| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h;
                xm[a] -= h;
                (kernel.eval(&xp, y) - kernel.eval(&xm, y)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn coincidence_values() {
        let g = Kernel::gaussian(0.3).unwrap();
        assert_eq!(g.eval(&[0.2, 0.4], &[0.2, 0.4]), 1.0);
        let rq = Kernel::rational_quadratic(0.3, 1.7).unwrap();
        assert_eq!(rq.eval(&[0.5], &[0.5]), 1.0);
    }

    #[test]
    fn gaussian_at_one_correlation_length() {
        let g = Kernel::gaussian(0.25).unwrap();
        let v = g.eval(&[0.0], &[0.25]);
        assert_relative_eq!(v, (-1.0_f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn gradient_vanishes_at_coincidence() {
        for kernel in [
            Kernel::gaussian(0.4).unwrap(),
            Kernel::rational_quadratic(0.4, 2.0).unwrap(),
        ] {
            let g = kernel.grad_x(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gaussian_gradient_half_length_value() {
        // 1D, x - y = lambda/2 with lambda = 1: derivative -1 * exp(-1/4).
        let g = Kernel::gaussian(1.0).unwrap();
        let got = g.grad_x(&[0.5], &[0.0]).unwrap()[0];
        assert_relative_eq!(got, -(-0.25_f64).exp(), max_relative = 1e-12);
        let fd = fd_grad(&g, &[0.5], &[0.0], 1e-6)[0];
        assert_relative_eq!(got, fd, max_relative = 1e-8);
    }

    #[test]
    fn mixed_grad_diagonal_scaling() {
        let g1 = Kernel::gaussian(1.0).unwrap();
        assert_relative_eq!(g1.mixed_grad(&[0.3], &[0.3]).unwrap()[0], 2.0);
        let g2 = Kernel::gaussian(0.5).unwrap();
        assert_relative_eq!(g2.mixed_grad(&[0.3], &[0.3]).unwrap()[0], 8.0);
    }

    #[test]
    fn mixed_grad_trace_positive_at_coincidence() {
        let x = [0.2, 0.8, 0.5];
        for kernel in [
            Kernel::gaussian(0.7).unwrap(),
            Kernel::rational_quadratic(0.7, 1.3).unwrap(),
        ] {
            let m = kernel.mixed_grad(&x, &x).unwrap();
            let trace: f64 = (0..3).map(|a| m[a * 3 + a]).sum();
            assert!(trace > 0.0);
        }
    }

    #[test]
    fn gradients_match_finite_differences_on_random_pairs() {
        // 100+ quasi-random pairs per kernel, relative 1e-6 at step 1e-5*lambda.
        let lambda = 0.6;
        for kernel in [
            Kernel::gaussian(lambda).unwrap(),
            Kernel::rational_quadratic(lambda, 1.1).unwrap(),
        ] {
            for i in 0..120 {
                let t = i as f64 / 120.0;
                let x = [t, (3.0 * t + 0.1) % 1.0, (7.0 * t + 0.31) % 1.0];
                let y = [(t + 0.37) % 1.0, (5.0 * t + 0.23) % 1.0, (2.0 * t + 0.71) % 1.0];
                let exact = kernel.grad_x(&x, &y).unwrap();
                let fd = fd_grad(&kernel, &x, &y, 1e-5 * lambda);
                for a in 0..3 {
                    let scale = 1e-6 * (1.0 + exact[a].abs());
                    assert!(
                        (exact[a] - fd[a]).abs() <= scale.max(1e-9),
                        "kernel {:?} axis {a}: exact {} fd {}",
                        kernel.variant,
                        exact[a],
                        fd[a]
                    );
                }
            }
        }
    }

    #[test]
    fn mixed_grad_matches_nested_finite_differences() {
        let lambda = 0.8;
        for kernel in [
            Kernel::gaussian(lambda).unwrap(),
            Kernel::rational_quadratic(lambda, 2.4).unwrap(),
        ] {
            let x = [0.21, 0.65];
            let y = [0.44, 0.12];
            let h = 1e-4;
            let m = kernel.mixed_grad(&x, &y).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    let mut yp = y.to_vec();
                    let mut ym = y.to_vec();
                    yp[b] += h;
                    ym[b] -= h;
                    // d/dy_b of dK/dx_a by central differences of grad_x.
                    let gp = kernel.grad_x(&x, &yp).unwrap()[a];
                    let gm = kernel.grad_x(&x, &ym).unwrap()[a];
                    let fd = (gp - gm) / (2.0 * h);
                    let tol = 1e-4 * (1.0 + fd.abs());
                    assert!((m[a * 2 + b] - fd).abs() <= tol);
                }
            }
        }
    }

    #[test]
    fn dirichlet_variant_is_symmetric_and_unsupported_for_gradients() {
        let d = BoxDomain::build(1, &[1.0], 16, QuadratureRule::GaussLegendre).unwrap();
        let k = Kernel::analytic_dirichlet(4, &d).unwrap();
        let a = k.eval(&[0.3], &[0.8]);
        let b = k.eval(&[0.8], &[0.3]);
        assert_relative_eq!(a, b, max_relative = 1e-14);
        assert!(k.grad_x(&[0.3], &[0.8]).is_err());
        assert!(k.mixed_grad(&[0.3], &[0.8]).is_err());
    }

    #[test]
    fn spectral_density_recovers_gaussian_kernel() {
        // S(xi) ~ exp(-lambda^2 xi^2 / 4) integrates to the Gaussian kernel;
        // after normalizing at coincidence the shapes agree.
        let lambda = 0.5;
        let k_hat =
            kernel_from_spectral_density(|xi| (-0.25 * lambda * lambda * xi * xi).exp(), 60.0, 64)
                .unwrap();
        let norm = k_hat(0.0, 0.0);
        assert!(norm > 0.0);
        let g = Kernel::gaussian(lambda).unwrap();
        for (x, y) in [(0.0, 0.1), (0.2, 0.5), (0.0, 0.9)] {
            let got = k_hat(x, y) / norm;
            let want = g.eval(&[x], &[y]);
            assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
        }
    }

    #[test]
    fn flat_density_gives_truncated_delta_spike() {
        let k_hat = kernel_from_spectral_density(|_| 1.0, 200.0, 32).unwrap();
        let at_zero = k_hat(0.0, 0.0);
        let away = k_hat(0.0, 0.5).abs();
        assert!(at_zero > 50.0 * away, "spike {at_zero}, tail {away}");
        // Symmetry in the arguments.
        assert_relative_eq!(k_hat(0.1, 0.6), k_hat(0.6, 0.1), max_relative = 1e-12);
    }

    #[test]
    fn growing_density_is_rejected() {
        assert!(kernel_from_spectral_density(|xi| xi * xi, 100.0, 32).is_err());
    }

    proptest! {
        #[test]
        fn symmetry_and_stationarity(
            x0 in -1.0f64..1.0, x1 in -1.0f64..1.0,
            y0 in -1.0f64..1.0, y1 in -1.0f64..1.0,
            shift in -0.5f64..0.5,
            lambda in 0.1f64..2.0,
        ) {
            let g = Kernel::gaussian(lambda).unwrap();
            let x = [x0, x1];
            let y = [y0, y1];
            prop_assert!((g.eval(&x, &y) - g.eval(&y, &x)).abs() < 1e-14);
            let xs = [x0 + shift, x1 + shift];
            let ys = [y0 + shift, y1 + shift];
            prop_assert!((g.eval(&xs, &ys) - g.eval(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn grad_x_is_minus_grad_y(
            x0 in -1.0f64..1.0, y0 in -1.0f64..1.0, lambda in 0.2f64..1.5,
        ) {
            let g = Kernel::gaussian(lambda).unwrap();
            let gx = g.grad_x(&[x0], &[y0]).unwrap()[0];
            // For a stationary kernel dK/dy = -dK/dx; check by swapping
            // arguments and symmetry.
            let gy_via_swap = g.grad_x(&[y0], &[x0]).unwrap()[0];
            prop_assert!((gx + gy_via_swap).abs() <= 1e-12 * (1.0 + gx.abs()));
        }
    }
}
