//! Truncated eigenbases for the covariance integral operator.
//!
//! Two constructions are provided. `solve_nystrom` discretizes the kernel's
//! Fredholm eigenproblem on the quadrature grid with the symmetrized Nystrom
//! scheme: eigen-decompose `M = D^(1/2) K D^(1/2)` (D the diagonal weight
//! matrix), so eigenvalues are real and the recovered eigenfunctions are
//! orthonormal under the quadrature rule by construction. `dirichlet_basis`
//! returns the analytic sine eigenbasis of the Laplacian with zero boundary
//! values, whose eigenvalues are used directly as modal weights.

use crate::dirichlet;
use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, QuadratureRule};
use crate::kernels::{Kernel, KernelVariant};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Relative floor below which eigenvalues are treated as numerically zero.
/// Eigenvectors of eigenvalues within a few orders of machine noise carry
/// errors of order eps * Z_1 / Z_I, which breaks the reflection symmetry
/// behind the f grad f orthogonality; the floor keeps only modes whose
/// eigenvectors are trustworthy.
const EIGENVALUE_FLOOR: f64 = 1e-9;

/// How the basis was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Nystrom,
    DirichletAnalytic,
}

/// Truncated eigenpairs `{Z_I, f_I}` sampled on the grid of a box domain.
///
/// `eigenvalues` are sorted descending for the Nystrom construction and
/// ascending for the analytic Dirichlet basis. Eigenfunction values and
/// their gradients are stored at every grid node; the structure is immutable
/// and shareable across threads.
#[derive(Debug, Clone)]
pub struct KlBasis {
    domain: BoxDomain,
    kernel: Option<Kernel>,
    kind: BasisKind,
    eigenvalues: Vec<f64>,
    /// `f_I(x_j)`, layout `[I * node_count + j]`.
    functions: Vec<f64>,
    /// `grad f_I(x_j)`, layout `[(I * node_count + j) * dim + a]`.
    gradients: Vec<f64>,
    /// Dirichlet mode indices (analytic basis only).
    modes: Option<Vec<dirichlet::ModeIndex>>,
    /// True when fewer eigenvalues than requested survived the floor.
    truncated: bool,
}

/// Quadrature integrals of the eigenfunctions and their first derivatives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisIntegrals {
    /// `int f_I^2 dV`, 1 up to quadrature error.
    pub h: Vec<f64>,
    /// `int f_I  grad_a f_I dV` per axis, layout `[I][a]`; zero up to
    /// quadrature error.
    pub h_a: Vec<Vec<f64>>,
    /// `int |grad f_I|^2 dV`, strictly positive for retained modes.
    pub h_grad: Vec<f64>,
}

/// Reconstruction quality of a Nystrom basis against its kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MercerDiagnostics {
    /// `|sum Z_I - int K(x,x) dV|`.
    pub trace_error: f64,
    /// `max_{j,k} |sum_I Z_I f_I(x_j) f_I(x_k) - K(x_j, x_k)|`.
    pub max_pointwise_error: f64,
    /// `int K(x,x) dV - sum_{I<=N} Z_I`: the L2 truncation error of the
    /// partial sums; nonnegative up to the eigenvalue floor.
    pub kl_l2_tail: f64,
}

impl KlBasis {
    /// Symmetrized Nystrom discretization of the kernel eigenproblem,
    /// truncated to (at most) `n` modes.
    pub fn solve_nystrom(domain: &BoxDomain, kernel: &Kernel, n: usize) -> Result<KlBasis> {
        let m = domain.node_count();
        if n == 0 {
            return Err(Error::invalid("truncation order must be >= 1"));
        }
        if n > m {
            return Err(Error::invalid(format!(
                "truncation order {n} exceeds node count {m}"
            )));
        }

        // Kernel matrix on the grid, filled row-parallel.
        let mut kmat = vec![0.0f64; m * m];
        kmat.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
            let xj = domain.point(j);
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = kernel.eval(xj, domain.point(k));
            }
        });

        // The evaluation above is symmetric for every variant we ship, but a
        // non-symmetric matrix would silently break the eigensolver, so check.
        let mut max_asym = 0.0f64;
        let mut max_abs = 0.0f64;
        for j in 0..m {
            for k in (j + 1)..m {
                max_asym = max_asym.max((kmat[j * m + k] - kmat[k * m + j]).abs());
                max_abs = max_abs.max(kmat[j * m + k].abs());
            }
            max_abs = max_abs.max(kmat[j * m + j].abs());
        }
        if max_asym > 1e-12 * max_abs.max(1.0) {
            return Err(Error::Numerical(format!(
                "kernel matrix not numerically symmetric: asymmetry {max_asym:.3e}"
            )));
        }

        let sqrt_w: Vec<f64> = domain.weights().iter().map(|w| w.sqrt()).collect();
        let mut sym = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            for k in 0..m {
                sym[(j, k)] = sqrt_w[j] * kmat[j * m + k] * sqrt_w[k];
            }
        }
        let eig = sym.symmetric_eigen();

        // Sort descending, drop the numerically-zero tail.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let z1 = eig.eigenvalues[order[0]];
        if !(z1 > 0.0) {
            return Err(Error::Numerical(
                "leading eigenvalue is not positive; kernel matrix is not positive semidefinite"
                    .into(),
            ));
        }
        let floor = EIGENVALUE_FLOOR * z1;
        let kept: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| eig.eigenvalues[i] > floor)
            .take(n)
            .collect();
        let truncated = kept.len() < n;

        let mut eigenvalues = Vec::with_capacity(kept.len());
        let mut functions = vec![0.0; kept.len() * m];
        for (row, &i) in kept.iter().enumerate() {
            eigenvalues.push(eig.eigenvalues[i]);
            let col = eig.eigenvectors.column(i);
            let f = &mut functions[row * m..(row + 1) * m];
            for j in 0..m {
                f[j] = col[j] / sqrt_w[j];
            }
            fix_sign(f);
        }

        let gradients = grid_gradients(domain, &eigenvalues, &functions)?;
        Ok(KlBasis {
            domain: domain.clone(),
            kernel: Some(kernel.clone()),
            kind: BasisKind::Nystrom,
            eigenvalues,
            functions,
            gradients,
            modes: None,
            truncated,
        })
    }

    /// Analytic Laplace eigenbasis with zero boundary values, ascending
    /// eigenvalues.
    pub fn dirichlet_basis(domain: &BoxDomain, n: usize) -> Result<KlBasis> {
        if n == 0 {
            return Err(Error::invalid("truncation order must be >= 1"));
        }
        let sides = domain.side_lengths().to_vec();
        let modes = dirichlet::lowest_modes(&sides, n);
        let m = domain.node_count();
        let mut eigenvalues = Vec::with_capacity(n);
        let mut functions = vec![0.0; n * m];
        let mut gradients = vec![0.0; n * m * domain.dim()];
        for (row, mode) in modes.iter().enumerate() {
            eigenvalues.push(dirichlet::eigenvalue(&mode.indices, &sides));
            for j in 0..m {
                let x = domain.point(j);
                functions[row * m + j] = dirichlet::eval(&mode.indices, &sides, x);
                let g = dirichlet::grad(&mode.indices, &sides, x);
                let base = (row * m + j) * domain.dim();
                gradients[base..base + domain.dim()].copy_from_slice(&g);
            }
        }
        Ok(KlBasis {
            domain: domain.clone(),
            kernel: None,
            kind: BasisKind::DirichletAnalytic,
            eigenvalues,
            functions,
            gradients,
            modes: Some(modes),
            truncated: false,
        })
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Values of eigenfunction `i` at all grid nodes.
    pub fn eigenfunction(&self, i: usize) -> &[f64] {
        let m = self.domain.node_count();
        &self.functions[i * m..(i + 1) * m]
    }

    /// Gradient of eigenfunction `i`: `node_count x dim`, stride `dim`.
    pub fn eigenfunction_gradient(&self, i: usize) -> Result<&[f64]> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        let m = self.domain.node_count();
        let d = self.domain.dim();
        Ok(&self.gradients[i * m * d..(i + 1) * m * d])
    }

    /// Second derivatives of eigenfunction `i`: `node_count x dim x dim`.
    /// Analytic for the Dirichlet basis; repeated grid differences (lower
    /// accuracy) for Nystrom bases.
    pub fn eigenfunction_hessian(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            });
        }
        let m = self.domain.node_count();
        let d = self.domain.dim();
        let mut out = vec![0.0; m * d * d];
        match (&self.modes, self.kind) {
            (Some(modes), BasisKind::DirichletAnalytic) => {
                let sides = self.domain.side_lengths();
                for j in 0..m {
                    let h = dirichlet::hessian(&modes[i].indices, sides, self.domain.point(j));
                    out[j * d * d..(j + 1) * d * d].copy_from_slice(&h);
                }
            }
            _ => {
                for a in 0..d {
                    let da: Vec<f64> = (0..m)
                        .map(|j| self.gradients[(i * m + j) * d + a])
                        .collect();
                    for b in 0..d {
                        let dab = self.domain.differentiate_axis(&da, b)?;
                        for j in 0..m {
                            out[j * d * d + a * d + b] = dab[j];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Basis restricted to its first `n` modes (same ordering).
    pub fn truncate_to(&self, n: usize) -> Result<KlBasis> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid(format!(
                "cannot truncate basis of {} modes to {n}",
                self.len()
            )));
        }
        let m = self.domain.node_count();
        let d = self.domain.dim();
        Ok(KlBasis {
            domain: self.domain.clone(),
            kernel: self.kernel.clone(),
            kind: self.kind,
            eigenvalues: self.eigenvalues[..n].to_vec(),
            functions: self.functions[..n * m].to_vec(),
            gradients: self.gradients[..n * m * d].to_vec(),
            modes: self.modes.as_ref().map(|ms| ms[..n].to_vec()),
            truncated: self.truncated,
        })
    }

    /// Truncated eigen-sum `sum_I Z_I f_I(x_j) f_I(x_k)`.
    pub fn mercer_sum(&self, j: usize, k: usize) -> f64 {
        let m = self.domain.node_count();
        self.eigenvalues
            .iter()
            .enumerate()
            .map(|(i, &z)| z * self.functions[i * m + j] * self.functions[i * m + k])
            .sum()
    }

    /// Pointwise variance `sigma^2(x_j)` of the truncated expansion.
    pub fn variance_at(&self, j: usize) -> f64 {
        self.mercer_sum(j, j)
    }

    /// Max deviation of the quadrature Gram matrix from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let m = self.domain.node_count();
        let w = self.domain.weights();
        let n = self.len();
        let mut max_dev = 0.0f64;
        for i in 0..n {
            for l in i..n {
                let mut g = 0.0;
                for j in 0..m {
                    g += w[j] * self.functions[i * m + j] * self.functions[l * m + j];
                }
                let target = if i == l { 1.0 } else { 0.0 };
                max_dev = max_dev.max((g - target).abs());
            }
        }
        max_dev
    }

    /// Max residual of the discrete eigenproblem
    /// `max_{I,j} |sum_k w_k K(x_j, x_k) f_I(x_k) - Z_I f_I(x_j)|`.
    pub fn fredholm_residual(&self) -> Result<f64> {
        let kernel = self.kernel.as_ref().ok_or_else(|| {
            Error::Unsupported("Fredholm residual needs the kernel the basis was built from".into())
        })?;
        let m = self.domain.node_count();
        let w = self.domain.weights();
        let residuals: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let f = self.eigenfunction(i);
                let z = self.eigenvalues[i];
                let mut worst = 0.0f64;
                for j in 0..m {
                    let xj = self.domain.point(j);
                    let mut applied = 0.0;
                    for k in 0..m {
                        applied += w[k] * kernel.eval(xj, self.domain.point(k)) * f[k];
                    }
                    worst = worst.max((applied - z * f[j]).abs());
                }
                worst
            })
            .collect();
        Ok(residuals.into_iter().fold(0.0, f64::max))
    }

    /// Quadrature integrals of the basis functions and gradients.
    pub fn basis_integrals(&self) -> BasisIntegrals {
        let m = self.domain.node_count();
        let d = self.domain.dim();
        let w = self.domain.weights();
        let n = self.len();
        let mut h = vec![0.0; n];
        let mut h_a = vec![vec![0.0; d]; n];
        let mut h_grad = vec![0.0; n];
        for i in 0..n {
            for j in 0..m {
                let f = self.functions[i * m + j];
                let g = &self.gradients[(i * m + j) * d..(i * m + j + 1) * d];
                h[i] += w[j] * f * f;
                let mut g2 = 0.0;
                for a in 0..d {
                    h_a[i][a] += w[j] * f * g[a];
                    g2 += g[a] * g[a];
                }
                h_grad[i] += w[j] * g2;
            }
        }
        BasisIntegrals { h, h_a, h_grad }
    }

    /// Mercer reconstruction diagnostics; only meaningful for a basis that
    /// carries its kernel.
    pub fn mercer_diagnostics(&self) -> Result<MercerDiagnostics> {
        let kernel = self.kernel.as_ref().ok_or_else(|| {
            Error::Unsupported(
                "Mercer diagnostics need a kernel; the analytic Dirichlet basis has none".into(),
            )
        })?;
        let m = self.domain.node_count();
        let w = self.domain.weights();
        let trace_quadrature: f64 = (0..m)
            .map(|j| w[j] * kernel.eval(self.domain.point(j), self.domain.point(j)))
            .sum();
        let sum_z: f64 = self.eigenvalues.iter().sum();
        let max_pointwise_error = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut worst = 0.0f64;
                for k in j..m {
                    let err = (self.mercer_sum(j, k)
                        - kernel.eval(self.domain.point(j), self.domain.point(k)))
                    .abs();
                    worst = worst.max(err);
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        Ok(MercerDiagnostics {
            trace_error: (sum_z - trace_quadrature).abs(),
            max_pointwise_error,
            kl_l2_tail: trace_quadrature - sum_z,
        })
    }

    /// Writes the basis to a versioned little-endian binary file. The
    /// round-trip is bit-exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(b"KLB2");
        let d = &self.domain;
        buf.push(d.dim() as u8);
        buf.push(match d.rule() {
            QuadratureRule::Trapezoid => 0,
            QuadratureRule::GaussLegendre => 1,
        });
        buf.push(match self.kind {
            BasisKind::Nystrom => 0,
            BasisKind::DirichletAnalytic => 1,
        });
        buf.push(self.truncated as u8);
        write_u64(&mut buf, d.nodes_per_axis() as u64);
        for &s in d.side_lengths() {
            write_f64(&mut buf, s);
        }
        match &self.kernel {
            None => buf.push(0),
            Some(k) => {
                match &k.variant {
                    KernelVariant::Gaussian { lambda } => {
                        buf.push(1);
                        write_f64(&mut buf, *lambda);
                    }
                    KernelVariant::RationalQuadratic { lambda, alpha } => {
                        buf.push(2);
                        write_f64(&mut buf, *lambda);
                        write_f64(&mut buf, *alpha);
                    }
                    KernelVariant::AnalyticDirichlet { truncation, .. } => {
                        buf.push(3);
                        write_u64(&mut buf, *truncation as u64);
                    }
                }
                write_f64(&mut buf, k.norm);
            }
        }
        write_u64(&mut buf, self.len() as u64);
        for &z in &self.eigenvalues {
            write_f64(&mut buf, z);
        }
        for &f in &self.functions {
            write_f64(&mut buf, f);
        }
        for &g in &self.gradients {
            write_f64(&mut buf, g);
        }
        match &self.modes {
            None => buf.push(0),
            Some(modes) => {
                buf.push(1);
                for mode in modes {
                    for &k in &mode.indices {
                        write_u64(&mut buf, k as u64);
                    }
                }
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    /// Reads a basis saved by [`KlBasis::save`].
    pub fn load(path: &Path) -> Result<KlBasis> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != b"KLB2" {
            return Err(Error::Format("not a basis file (bad magic)".into()));
        }
        let dim = cur.u8()? as usize;
        let rule = match cur.u8()? {
            0 => QuadratureRule::Trapezoid,
            1 => QuadratureRule::GaussLegendre,
            other => return Err(Error::Format(format!("unknown rule tag {other}"))),
        };
        let kind = match cur.u8()? {
            0 => BasisKind::Nystrom,
            1 => BasisKind::DirichletAnalytic,
            other => return Err(Error::Format(format!("unknown basis kind {other}"))),
        };
        let truncated = cur.u8()? != 0;
        let nodes_per_axis = cur.u64()? as usize;
        let sides: Vec<f64> = (0..dim).map(|_| cur.f64()).collect::<Result<_>>()?;
        let domain = BoxDomain::build(dim, &sides, nodes_per_axis, rule)?;
        let kernel = match cur.u8()? {
            0 => None,
            1 => {
                let lambda = cur.f64()?;
                let norm = cur.f64()?;
                let mut k = Kernel::gaussian(lambda)?;
                k.norm = norm;
                Some(k)
            }
            2 => {
                let lambda = cur.f64()?;
                let alpha = cur.f64()?;
                let norm = cur.f64()?;
                let mut k = Kernel::rational_quadratic(lambda, alpha)?;
                k.norm = norm;
                Some(k)
            }
            3 => {
                let truncation = cur.u64()? as usize;
                let norm = cur.f64()?;
                let mut k = Kernel::analytic_dirichlet(truncation, &domain)?;
                k.norm = norm;
                Some(k)
            }
            other => return Err(Error::Format(format!("unknown kernel tag {other}"))),
        };
        let n = cur.u64()? as usize;
        let m = domain.node_count();
        let eigenvalues: Vec<f64> = (0..n).map(|_| cur.f64()).collect::<Result<_>>()?;
        let functions: Vec<f64> = (0..n * m).map(|_| cur.f64()).collect::<Result<_>>()?;
        let gradients: Vec<f64> = (0..n * m * dim).map(|_| cur.f64()).collect::<Result<_>>()?;
        let modes = match cur.u8()? {
            0 => None,
            1 => {
                let mut modes = Vec::with_capacity(n);
                for _ in 0..n {
                    let indices: Vec<usize> = (0..dim)
                        .map(|_| cur.u64().map(|v| v as usize))
                        .collect::<Result<_>>()?;
                    modes.push(dirichlet::ModeIndex { indices });
                }
                Some(modes)
            }
            other => return Err(Error::Format(format!("unknown mode tag {other}"))),
        };
        Ok(KlBasis {
            domain,
            kernel,
            kind,
            eigenvalues,
            functions,
            gradients,
            modes,
            truncated,
        })
    }
}

/// Deterministic eigenvector sign: component sum positive, tie broken by the
/// first component of meaningful size.
fn fix_sign(f: &mut [f64]) {
    let sum: f64 = f.iter().sum();
    let scale: f64 = f.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let flip = if sum.abs() > 1e-9 * scale {
        sum < 0.0
    } else {
        f.iter()
            .find(|v| v.abs() > 1e-12 * scale)
            .map(|&v| v < 0.0)
            .unwrap_or(false)
    };
    if flip {
        for v in f {
            *v = -*v;
        }
    }
}

/// Grid finite-difference gradients for every eigenfunction row.
fn grid_gradients(domain: &BoxDomain, eigenvalues: &[f64], functions: &[f64]) -> Result<Vec<f64>> {
    let m = domain.node_count();
    let d = domain.dim();
    let mut out = vec![0.0; eigenvalues.len() * m * d];
    for i in 0..eigenvalues.len() {
        let g = domain.gradient(&functions[i * m..(i + 1) * m])?;
        out[i * m * d..(i + 1) * m * d].copy_from_slice(&g);
    }
    Ok(out)
}

fn write_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn write_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("truncated basis file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit_interval(nodes: usize) -> BoxDomain {
        BoxDomain::build(1, &[1.0], nodes, QuadratureRule::GaussLegendre).unwrap()
    }

    fn reference_basis(n: usize) -> KlBasis {
        let domain = unit_interval(64);
        let kernel = Kernel::gaussian(0.2).unwrap();
        KlBasis::solve_nystrom(&domain, &kernel, n).unwrap()
    }

    #[test]
    fn nystrom_eigenvalues_sorted_descending_and_positive() {
        let basis = reference_basis(15);
        assert_eq!(basis.len(), 15);
        let z = basis.eigenvalues();
        assert!(z.iter().all(|&v| v > 0.0));
        for w in z.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // Trace close to vol = 1 for the regulated kernel.
        let sum: f64 = z.iter().sum();
        assert!((sum - 1.0).abs() < 0.01, "sum Z = {sum}");
    }

    #[test]
    fn nystrom_orthonormal_under_quadrature() {
        let basis = reference_basis(20);
        assert!(basis.orthonormality_deviation() < 1e-8);
    }

    #[test]
    fn nystrom_fredholm_residual_small() {
        let basis = reference_basis(20);
        let res = basis.fredholm_residual().unwrap();
        assert!(res < 1e-6 * basis.eigenvalues()[0], "residual {res}");
    }

    #[test]
    fn mercer_error_shrinks_with_truncation_order() {
        // The numerical rank of this kernel sits near 22, so a request for
        // 40 modes keeps fewer and flags the truncation.
        let full = reference_basis(40);
        assert!(full.truncated());
        let mut prev = f64::INFINITY;
        for n in [5, 10, 20, 40] {
            let b = full.truncate_to(n.min(full.len())).unwrap();
            let err = b.mercer_diagnostics().unwrap().max_pointwise_error;
            assert!(err <= prev + 1e-12, "n={n}: {err} > {prev}");
            prev = err;
        }
        assert!(prev < 1e-3, "Mercer error at n=40: {prev}");
    }

    #[test]
    fn near_constant_kernel_is_rank_one() {
        let domain = unit_interval(32);
        let kernel = Kernel::gaussian(10.0).unwrap();
        let basis = KlBasis::solve_nystrom(&domain, &kernel, 5).unwrap();
        let z = basis.eigenvalues();
        assert!((z[0] - domain.vol()).abs() < 0.01, "Z1 = {}", z[0]);
        assert!(z[1] / z[0] < 5e-3, "Z2/Z1 = {}", z[1] / z[0]);
        let diag = basis.mercer_diagnostics().unwrap();
        let one_mode = basis.truncate_to(1).unwrap().mercer_diagnostics().unwrap();
        assert!(one_mode.kl_l2_tail < 1e-2);
        assert!(diag.kl_l2_tail <= one_mode.kl_l2_tail + 1e-12);
    }

    #[test]
    fn full_truncation_reconstructs_trace() {
        let domain = unit_interval(64);
        let kernel = Kernel::gaussian(0.2).unwrap();
        let basis = KlBasis::solve_nystrom(&domain, &kernel, 64).unwrap();
        let diag = basis.mercer_diagnostics().unwrap();
        assert!(diag.trace_error < 1e-6, "trace error {}", diag.trace_error);
        assert!(diag.kl_l2_tail >= -1e-8);
    }

    #[test]
    fn requesting_too_many_modes_flags_truncation() {
        let domain = unit_interval(48);
        // Wide kernel: numerical rank far below the node count.
        let kernel = Kernel::gaussian(2.0).unwrap();
        let basis = KlBasis::solve_nystrom(&domain, &kernel, 48).unwrap();
        assert!(basis.truncated());
        assert!(basis.len() < 48);
        assert!(basis.eigenvalues().iter().all(|&z| z > 0.0));
    }

    #[test]
    fn dirichlet_modes_match_separation_of_variables() {
        let domain = unit_interval(64);
        let basis = KlBasis::dirichlet_basis(&domain, 3).unwrap();
        assert_relative_eq!(basis.eigenvalues()[0], PI * PI, max_relative = 1e-14);
        // Values match sqrt(2) sin(pi x) on the grid.
        let f1 = basis.eigenfunction(0);
        for j in 0..domain.node_count() {
            let x = domain.point(j)[0];
            assert_relative_eq!(f1[j], 2.0_f64.sqrt() * (PI * x).sin(), max_relative = 1e-12);
        }
        // Ascending order.
        let z = basis.eigenvalues();
        assert!(z.windows(2).all(|w| w[0] < w[1]));
        // Normalization under quadrature.
        assert!(basis.orthonormality_deviation() < 1e-10);
    }

    #[test]
    fn dirichlet_gradient_energy_equals_eigenvalue() {
        let domain = unit_interval(64);
        let basis = KlBasis::dirichlet_basis(&domain, 4).unwrap();
        let ints = basis.basis_integrals();
        for (i, &z) in basis.eigenvalues().iter().enumerate() {
            assert_relative_eq!(ints.h_grad[i], z, max_relative = 1e-10);
            assert_relative_eq!(ints.h[i], 1.0, max_relative = 1e-10);
        }
        // n = 2 on [0,1]: 4 pi^2.
        assert_relative_eq!(ints.h_grad[1], 4.0 * PI * PI, max_relative = 1e-10);
    }

    #[test]
    fn dirichlet_analytic_gradient_values() {
        let domain = unit_interval(32);
        let basis = KlBasis::dirichlet_basis(&domain, 2).unwrap();
        let g = basis.eigenfunction_gradient(0).unwrap();
        for j in 0..domain.node_count() {
            let x = domain.point(j)[0];
            let want = 2.0_f64.sqrt() * PI * (PI * x).cos();
            assert_relative_eq!(g[j], want, max_relative = 1e-12);
        }
        assert!(basis.eigenfunction_gradient(7).is_err());
    }

    #[test]
    fn basis_integrals_first_derivative_orthogonality() {
        let basis = reference_basis(12);
        let ints = basis.basis_integrals();
        for i in 0..basis.len() {
            assert_relative_eq!(ints.h[i], 1.0, epsilon = 1e-10);
            for a in 0..1 {
                assert!(ints.h_a[i][a].abs() < 1e-6, "H_a = {}", ints.h_a[i][a]);
            }
            assert!(ints.h_grad[i] > 0.0);
        }
    }

    #[test]
    fn nystrom_gradient_close_to_analytic_oracle() {
        // Differentiating the smooth leading eigenfunctions on the grid
        // should agree with an independent spectral interpolation. Use the
        // Dirichlet basis where the exact derivative is known.
        let domain = BoxDomain::build(1, &[1.0], 96, QuadratureRule::GaussLegendre).unwrap();
        let analytic = KlBasis::dirichlet_basis(&domain, 3).unwrap();
        for i in 0..3 {
            let exact = analytic.eigenfunction_gradient(i).unwrap().to_vec();
            let fd = domain.gradient(analytic.eigenfunction(i)).unwrap();
            let num: f64 = exact
                .iter()
                .zip(&fd)
                .map(|(e, f)| (e - f) * (e - f))
                .sum::<f64>()
                .sqrt();
            let den: f64 = exact.iter().map(|e| e * e).sum::<f64>().sqrt();
            assert!(num / den < 1e-2, "relative L2 gradient error {}", num / den);
        }
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.klb");
        for basis in [reference_basis(10), {
            let d = unit_interval(24);
            KlBasis::dirichlet_basis(&d, 5).unwrap()
        }] {
            basis.save(&path).unwrap();
            let loaded = KlBasis::load(&path).unwrap();
            assert_eq!(basis.kind(), loaded.kind());
            assert_eq!(basis.len(), loaded.len());
            for (a, b) in basis.eigenvalues().iter().zip(loaded.eigenvalues()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in basis.functions.iter().zip(&loaded.functions) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            for (a, b) in basis.gradients.iter().zip(&loaded.gradients) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn load_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.klb");
        std::fs::write(&path, b"not a basis").unwrap();
        assert!(KlBasis::load(&path).is_err());
    }
}
