//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the observed figures (visible under `--nocapture`; the test names
//! double as the pass/fail lines in the default harness output).

use klturb::dissipation;
use klturb::flow::{self, FlowConfig};
use klturb::geometry::{BoxDomain, QuadratureRule};
use klturb::grf;
use klturb::kernels::Kernel;
use klturb::mcstats::{parallel_estimate, parallel_estimate_vector};
use klturb::spectral::KlBasis;
use std::f64::consts::PI;
use std::time::Instant;

fn report(criterion: u32, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {criterion}: {detail}");
    assert!(pass, "criterion {criterion}: {detail}");
}

/// 1D Gaussian kernel, lambda = 0.2, 64 Gauss-Legendre nodes, 40 requested
/// modes (the numerical rank keeps fewer, flagged on the basis).
fn reference_basis() -> KlBasis {
    let domain = BoxDomain::build(1, &[1.0], 64, QuadratureRule::GaussLegendre).unwrap();
    let kernel = Kernel::gaussian(0.2).unwrap();
    KlBasis::solve_nystrom(&domain, &kernel, 40).unwrap()
}

fn flow_2d_fixture() -> (KlBasis, FlowConfig) {
    let domain = BoxDomain::build(2, &[1.0, 1.0], 12, QuadratureRule::GaussLegendre).unwrap();
    let basis = KlBasis::solve_nystrom(&domain, &Kernel::gaussian(0.4).unwrap(), 12).unwrap();
    let config = FlowConfig {
        velocity: vec![1.0, 0.5],
        nu: 1e-4,
        amplitude: 0.05,
        beta: 0.5,
        re_star: 2000.0,
        length_scale: domain.length_scale(),
        horizon: 1.0,
    };
    config.validate().unwrap();
    (basis, config)
}

#[test]
fn criterion_01_kl_basis_quality() {
    let start = Instant::now();
    let basis = reference_basis();
    let gram_dev = basis.orthonormality_deviation();
    let residual = basis.fredholm_residual().unwrap();
    let z1 = basis.eigenvalues()[0];
    let sum_z: f64 = basis.eigenvalues().iter().sum();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = gram_dev < 1e-8
        && residual < 1e-6 * z1
        && (sum_z - 1.0).abs() < 0.01
        && elapsed < 5.0;
    report(
        1,
        pass,
        &format!(
            "gram deviation {gram_dev:.2e} (< 1e-8), Fredholm residual {residual:.2e} \
             (< 1e-6 * Z1 = {:.2e}), sum Z = {sum_z:.6} (within 1% of 1), {elapsed:.2} s",
            1e-6 * z1
        ),
    );
}

#[test]
fn criterion_02_mercer_reconstruction() {
    let start = Instant::now();
    let basis = reference_basis();
    let mut errors = Vec::new();
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for n in [5usize, 10, 20, 40] {
        let b = basis.truncate_to(n.min(basis.len())).unwrap();
        let err = b.mercer_diagnostics().unwrap().max_pointwise_error;
        if err > prev + 1e-12 {
            monotone = false;
        }
        prev = err;
        errors.push((n, err));
    }
    let final_err = errors.last().unwrap().1;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = final_err < 1e-3 && monotone && elapsed < 5.0;
    report(
        2,
        pass,
        &format!(
            "pointwise error at N=40: {final_err:.2e} (< 1e-3), monotone over {errors:?}, \
             {elapsed:.2} s"
        ),
    );
}

#[test]
fn criterion_03_truncation_tail_identity() {
    let domain = BoxDomain::build(1, &[1.0], 64, QuadratureRule::GaussLegendre).unwrap();
    let kernel = Kernel::gaussian(0.2).unwrap();
    // Request everything; the floor keeps the numerically positive spectrum.
    let full = KlBasis::solve_nystrom(&domain, &kernel, 64).unwrap();
    let mut tails = Vec::new();
    let mut ok = true;
    for n in [5usize, 10, 15, full.len()] {
        let b = full.truncate_to(n.min(full.len())).unwrap();
        let tail = b.mercer_diagnostics().unwrap().kl_l2_tail;
        if tail < -1e-8 {
            ok = false;
        }
        if let Some(&(_, prev)) = tails.last() {
            if tail > prev + 1e-12 {
                ok = false;
            }
        }
        tails.push((n, tail));
    }
    let final_tail = tails.last().unwrap().1;
    let pass = ok && final_tail.abs() < 1e-6;
    report(
        3,
        pass,
        &format!(
            "kl_l2_tail >= -1e-8 and nonincreasing: {tails:?}; at full rank {final_tail:.2e} \
             (-> 0)"
        ),
    );
}

#[test]
fn criterion_04_eigenfunction_integral_identities() {
    let start = Instant::now();
    let basis = reference_basis();
    let ints = basis.basis_integrals();
    let max_h_a = ints
        .h_a
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max);
    let min_h_grad = ints.h_grad.iter().copied().fold(f64::INFINITY, f64::min);

    let domain = BoxDomain::build(1, &[1.0], 64, QuadratureRule::GaussLegendre).unwrap();
    let dirichlet = KlBasis::dirichlet_basis(&domain, 6).unwrap();
    let dints = dirichlet.basis_integrals();
    let max_rel = dirichlet
        .eigenvalues()
        .iter()
        .zip(&dints.h_grad)
        .map(|(z, hg)| ((hg - z) / z).abs())
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = max_h_a < 1e-6 && min_h_grad > 0.0 && max_rel < 1e-10 && elapsed < 1.0;
    report(
        4,
        pass,
        &format!(
            "max |int f grad f| = {max_h_a:.2e} (< 1e-6), min gradient energy {min_h_grad:.3e} \
             (> 0), Dirichlet |int |grad f_n|^2 - Z_n|/Z_n max {max_rel:.2e} (< 1e-10), \
             {elapsed:.2} s"
        ),
    );
}

#[test]
fn criterion_05_grf_sampling_statistics() {
    let start = Instant::now();
    let basis = reference_basis();
    let m = basis.domain().node_count();
    let n = basis.len();
    let draws = 100_000u64;
    let seed = 2026;

    // Node-wise mean within 4 SE of zero.
    let mean = grf::mean_field_mc(&basis, draws, seed).unwrap();
    let mut worst_mean = 0.0f64;
    for j in 0..m {
        worst_mean = worst_mean.max(mean.mean()[j].abs() / mean.standard_error(j).unwrap());
    }

    // Sample covariance at 20 deterministic node pairs vs the eigen-sum.
    let pairs: Vec<(usize, usize)> = (0..20)
        .map(|t| ((t * 13 + 3) % m, (t * 29 + 7) % m))
        .collect();
    let cov = parallel_estimate_vector(draws, pairs.len(), |draw, buf| {
        let s = grf::sample_indexed(&basis, seed ^ 0xC0, draw);
        for (slot, &(j, k)) in buf.iter_mut().zip(&pairs) {
            *slot = s.values[j] * s.values[k];
        }
    })
    .unwrap();
    let mut worst_cov = 0.0f64;
    for (idx, &(j, k)) in pairs.iter().enumerate() {
        let se = cov.standard_error(idx).unwrap();
        worst_cov = worst_cov.max((cov.mean()[idx] - basis.mercer_sum(j, k)).abs() / se);
    }

    // Covariance of the projected coefficients vs the identity.
    let proj = parallel_estimate_vector(draws, n * n, |draw, buf| {
        let s = grf::sample_indexed(&basis, seed ^ 0xD0, draw);
        let xi = grf::project_xi(&basis, &s.values).unwrap();
        for i in 0..n {
            for l in 0..n {
                buf[i * n + l] = xi[i] * xi[l];
            }
        }
    })
    .unwrap();
    let mut worst_proj = 0.0f64;
    for i in 0..n {
        for l in 0..n {
            let want = if i == l { 1.0 } else { 0.0 };
            let se = proj.standard_error(i * n + l).unwrap();
            worst_proj = worst_proj.max((proj.mean()[i * n + l] - want).abs() / se);
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_mean < 4.0 && worst_cov < 4.0 && worst_proj < 4.0 && elapsed < 60.0;
    report(
        5,
        pass,
        &format!(
            "over {draws} draws: max |mean|/SE = {worst_mean:.2} (< 4), covariance deviation \
             {worst_cov:.2} SE (< 4) at 20 pairs, projected-xi identity deviation \
             {worst_proj:.2} SE (< 4), {elapsed:.1} s"
        ),
    );
}

#[test]
fn criterion_06_gaussian_moment_arbitration() {
    let basis = reference_basis();
    let m = basis.domain().node_count();
    // Node whose truncated variance is closest to one.
    let node = (0..m)
        .min_by(|&a, &b| {
            (basis.variance_at(a) - 1.0)
                .abs()
                .partial_cmp(&(basis.variance_at(b) - 1.0).abs())
                .unwrap()
        })
        .unwrap();
    let sigma = basis.variance_at(node).sqrt();
    let amps: Vec<f64> = (0..basis.len())
        .map(|i| basis.eigenvalues()[i].sqrt() * basis.eigenfunction(i)[node])
        .collect();
    let est = parallel_estimate(1_000_000, |draw| {
        let mut t = 0.0;
        for (i, &a) in amps.iter().enumerate() {
            t += a * klturb::rng::standard_normal(7, draw, i as u64);
        }
        let z = t / sigma;
        z * z * z * z
    })
    .unwrap();
    let m4 = est.mean();
    let implemented = grf::double_factorial_odd(3);
    let alternative = grf::double_factorial_odd(1);
    let pass = (2.9..=3.1).contains(&m4);
    report(
        6,
        pass,
        &format!(
            "1e6-draw fourth moment of a unit-variance node: {m4:.4} in [2.9, 3.1]; \
             (p-1)!! convention gives {implemented}, the competing (p/2-1)!! convention \
             gives {alternative} and is rejected by the sample"
        ),
    );
}

#[test]
fn criterion_07_sobolev_norm_identities() {
    let start = Instant::now();
    let draws = 10_000u64;

    // Scalar field, both basis kinds.
    let nystrom = reference_basis();
    let domain = BoxDomain::build(1, &[1.0], 64, QuadratureRule::GaussLegendre).unwrap();
    let dirichlet = KlBasis::dirichlet_basis(&domain, 5).unwrap();

    let mut worst_scalar = 0.0f64;
    for (tag, basis) in [("nystrom", &nystrom), ("dirichlet", &dirichlet)] {
        let analytic = grf::sobolev_norm_expectation(basis, 1).unwrap();
        let mc = grf::sobolev_h1_mc(basis, draws, 11).unwrap();
        let dev = (mc.mean() - analytic).abs() / mc.standard_error().unwrap();
        assert!(dev < 3.0, "{tag} scalar H1 deviates {dev:.2} SE");
        worst_scalar = worst_scalar.max(dev);
    }

    // Vector field, both basis kinds.
    let config_1d = FlowConfig {
        velocity: vec![1.0],
        nu: 1e-4,
        amplitude: 0.02,
        beta: 0.5,
        re_star: 2000.0,
        length_scale: 1.0,
        horizon: 1.0,
    };
    let mut worst_vector = 0.0f64;
    for (tag, basis) in [("nystrom", &nystrom), ("dirichlet", &dirichlet)] {
        let analytic = flow::vector_sobolev_expectation(&config_1d, basis, 1).unwrap();
        let mc = flow::vector_sobolev_h1_mc(&config_1d, basis, draws, 13).unwrap();
        let dev = (mc.mean() - analytic).abs() / mc.standard_error().unwrap();
        assert!(dev < 3.0, "{tag} vector H1 deviates {dev:.2} SE");
        worst_vector = worst_vector.max(dev);
    }

    // Formula path on the analytic basis against the closed form.
    let formula = grf::sobolev_norm_expectation(&dirichlet, 1).unwrap();
    let closed: f64 = (1..=5)
        .map(|nn| {
            let z = (nn * nn) as f64 * PI * PI;
            z * (1.0 + z)
        })
        .sum();
    let rel = ((formula - closed) / closed).abs();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_scalar < 3.0 && worst_vector < 3.0 && rel < 1e-8 && elapsed < 60.0;
    report(
        7,
        pass,
        &format!(
            "H1 Monte Carlo within 3 SE on both basis kinds (scalar worst {worst_scalar:.2}, \
             vector worst {worst_vector:.2}); Dirichlet formula vs sum Z(1+Z): relative \
             {rel:.2e} (< 1e-8), {elapsed:.1} s"
        ),
    );
}

#[test]
fn criterion_08_weighted_flow_statistics() {
    let (basis, config) = flow_2d_fixture();
    let d = basis.domain().dim();
    let m = basis.domain().node_count();
    let draws = 100_000u64;
    let seed = 31;

    // Laminar gate over 100 seeds, bit-exact.
    let mut laminar = config.clone();
    laminar.nu = 1.0;
    let mut gate_exact = true;
    for s in 0..100 {
        let smp = flow::sample_turbulent(&laminar, &basis, s).unwrap();
        for j in 0..m {
            for a in 0..d {
                if smp.values[j * d + a].to_bits() != laminar.velocity[a].to_bits() {
                    gate_exact = false;
                }
            }
        }
    }

    // Mean field within 4 SE of u.
    let mean = flow::mean_field_mc(&config, &basis, draws, seed).unwrap();
    let mut worst_mean = 0.0f64;
    for j in 0..m {
        for a in 0..d {
            let se = mean.standard_error(j * d + a).unwrap();
            worst_mean = worst_mean.max((mean.mean()[j * d + a] - config.velocity[a]).abs() / se);
        }
    }

    // Covariance factorization across component pairs and against Monte
    // Carlo, at one interior node pair.
    let (j, k) = (
        basis.domain().flat_index(&[3, 4]),
        basis.domain().flat_index(&[7, 6]),
    );
    let cov = flow::covariance(&config, &basis, j, k).unwrap();
    let w = config.weighting_of_flow();
    let a2w2 = config.amplitude * config.amplitude * w * w;
    let mercer = basis.mercer_sum(j, k);
    let mut worst_factor = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            let ratio = cov[a * d + b] / (a2w2 * config.velocity[a] * config.velocity[b]);
            worst_factor = worst_factor.max(((ratio - mercer) / mercer).abs());
        }
    }
    let mut worst_cov = 0.0f64;
    for a in 0..d {
        for b in 0..d {
            let est = flow::covariance_mc(&config, &basis, j, k, a, b, draws, seed ^ 0x5).unwrap();
            let se = est.standard_error().unwrap();
            worst_cov = worst_cov.max((est.mean() - cov[a * d + b]).abs() / se);
        }
    }

    // Exact zero of the structure function at zero separation.
    let s0 = flow::structure_function(&config, &basis, j, &[0, 0]).unwrap();

    // Moment bounds at p in {2, 4} never violated.
    let mut bounds_ok = true;
    for &node in &[j, k] {
        for p in [2u32, 4] {
            let mb =
                flow::moment_bound_check(&config, &basis, node, 0, p, draws, seed ^ 0x9).unwrap();
            if mb.estimate > mb.bound {
                bounds_ok = false;
            }
        }
    }

    let pass = gate_exact && worst_mean < 4.0 && worst_factor < 1e-10 && worst_cov < 3.0
        && s0 == 0.0
        && bounds_ok;
    report(
        8,
        pass,
        &format!(
            "laminar gate bit-exact over 100 seeds: {gate_exact}; mean deviation {worst_mean:.2} \
             SE (< 4); factorization spread {worst_factor:.2e} (< 1e-10); covariance MC \
             deviation {worst_cov:.2} SE (< 3); S2(0) = {s0}; moment bounds held: {bounds_ok}"
        ),
    );
}

#[test]
fn criterion_09_inviscid_scaling_trichotomy() {
    let start = Instant::now();
    let basis = reference_basis();
    let draws = 10_000u64;
    let seed = 404;
    let points = 11usize;
    let (nu_max, nu_min) = (1e-1f64, 1e-6f64);
    let nu_grid: Vec<f64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            (nu_max.ln() + t * (nu_min.ln() - nu_max.ln())).exp()
        })
        .collect();

    let base = FlowConfig {
        velocity: vec![1.0],
        nu: 1e-4,
        amplitude: 1.0,
        beta: 0.5,
        re_star: 2000.0,
        length_scale: 1.0,
        horizon: 1.0,
    };

    let mut all_mc_ok = true;
    let mut summaries = Vec::new();
    for (beta, want_slope, slope_tol) in [(0.5, 0.0, 0.05), (0.25, 0.5, 0.05), (0.4, 0.2, 0.05)] {
        let mut config = base.clone();
        config.beta = beta;
        let rep = dissipation::sweep(&config, &basis, &nu_grid, draws, seed).unwrap();
        for i in 0..rep.nu_grid.len() {
            if (rep.d_mc[i] - rep.d_analytic[i]).abs() > 3.0 * rep.d_se[i] {
                all_mc_ok = false;
            }
        }
        let slope_ok = (rep.slope - want_slope).abs() < slope_tol;
        let verdict_ok = if beta == 0.5 {
            rep.verdict == dissipation::Verdict::Anomalous
                && (rep.d_analytic.last().unwrap() - rep.limit_analytic).abs()
                    <= 0.05 * rep.limit_analytic
        } else {
            rep.verdict == dissipation::Verdict::Vanishing
        };
        assert!(slope_ok, "beta={beta}: slope {} vs {want_slope}", rep.slope);
        assert!(verdict_ok, "beta={beta}: verdict {:?}", rep.verdict);
        summaries.push(format!("beta={beta}: slope {:.3}, verdict {:?}", rep.slope, rep.verdict));
    }

    // Closed form on the two-mode sine basis.
    let domain = BoxDomain::build(1, &[1.0], 64, QuadratureRule::GaussLegendre).unwrap();
    let dirichlet = KlBasis::dirichlet_basis(&domain, 2).unwrap();
    let limit = dissipation::dissipation_limit_analytic(&base, &dirichlet);
    let want = 17.0 * PI.powi(4);
    let rel = ((limit - want) / want).abs();

    let elapsed = start.elapsed().as_secs_f64();
    let pass = all_mc_ok && rel < 1e-6 && elapsed < 300.0;
    report(
        9,
        pass,
        &format!(
            "{}; MC within 3 SE at every grid point: {all_mc_ok}; two-mode closed form \
             {limit:.4} vs 17 pi^4 = {want:.4} (relative {rel:.2e} < 1e-6), {elapsed:.1} s",
            summaries.join("; ")
        ),
    );
}

#[test]
fn criterion_10_cross_term_vanishing() {
    let basis = reference_basis();
    let config = FlowConfig {
        velocity: vec![1.0],
        nu: 1e-6,
        amplitude: 1.0,
        beta: 0.5,
        re_star: 2000.0,
        length_scale: 1.0,
        horizon: 1.0,
    };
    let terms = dissipation::proof_term_breakdown(&config, &basis, 1e-6).unwrap();
    let survivor = terms.iter().find(|t| t.survives).unwrap().value;
    let worst = terms
        .iter()
        .filter(|t| !t.survives)
        .map(|t| t.value.abs())
        .fold(0.0f64, f64::max);
    let ratio = worst / survivor;
    let pass = survivor > 0.0 && ratio < 1e-6;
    report(
        10,
        pass,
        &format!(
            "largest accumulated cross term {worst:.3e} vs surviving term {survivor:.6}: \
             ratio {ratio:.2e} (< 1e-6); only the gradient-energy term remains"
        ),
    );
}

#[test]
fn criterion_11_averaged_ns_residual() {
    // Gaussian-kernel basis: interior residual under the variance scale.
    let basis = reference_basis();
    let config = FlowConfig {
        velocity: vec![1.0],
        nu: 1e-4,
        amplitude: 0.05,
        beta: 0.5,
        re_star: 2000.0,
        length_scale: 1.0,
        horizon: 1.0,
    };
    let res = dissipation::ns_residual(&config, &basis).unwrap();
    let gaussian_ok = res.max_interior < 0.05 * res.interior_scale;

    // A = 0 gives exactly zero.
    let mut dead = config.clone();
    dead.amplitude = 0.0;
    let zero = dissipation::ns_residual(&dead, &basis).unwrap();
    let zero_ok = zero.field.iter().all(|&v| v == 0.0);

    // Dirichlet basis against a small-step finite difference of the
    // analytically evaluated variance.
    let domain = BoxDomain::build(1, &[1.0], 64, QuadratureRule::GaussLegendre).unwrap();
    let dirichlet = KlBasis::dirichlet_basis(&domain, 2).unwrap();
    let dres = dissipation::ns_residual(&config, &dirichlet).unwrap();
    let w = config.weighting_of_flow();
    let a2w2 = config.amplitude * config.amplitude * w * w;
    let h = 1e-5;
    let sigma2 = |x: f64| -> f64 {
        (1..=2)
            .map(|nn| {
                let z = (nn * nn) as f64 * PI * PI;
                let f = 2.0_f64.sqrt() * (nn as f64 * PI * x).sin();
                z * f * f
            })
            .sum()
    };
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..domain.node_count() {
        let x = domain.point(j)[0];
        if !(h..=1.0 - h).contains(&x) {
            continue;
        }
        let oracle = a2w2 * 0.5 * (sigma2(x + h) - sigma2(x - h)) / (2.0 * h);
        worst = worst.max((dres.field[j] - oracle).abs());
        scale = scale.max(oracle.abs());
    }
    let dirichlet_rel = worst / scale;
    let dirichlet_ok = dirichlet_rel < 1e-3;

    let pass = gaussian_ok && zero_ok && dirichlet_ok;
    report(
        11,
        pass,
        &format!(
            "Gaussian interior residual {:.3e} < 5% of scale {:.3e}; A=0 residual exactly \
             zero: {zero_ok}; Dirichlet residual vs finite-difference-of-variance oracle: \
             relative {dirichlet_rel:.2e} (< 1e-3)",
            res.max_interior, res.interior_scale
        ),
    );
}

#[test]
fn criterion_12_binomial_series_consistency() {
    let config = FlowConfig {
        velocity: vec![1.0],
        nu: 1e-4,
        amplitude: 1.0,
        beta: 0.5,
        re_star: 10.0,
        length_scale: 1.0,
        horizon: 1.0,
    };
    // RE = 100 * RE_*.
    let nu = config.speed() * config.length_scale / (100.0 * config.re_star);
    let check = dissipation::binomial_consistency(&config, nu, 10).unwrap();
    let rel = ((check.series - check.direct) / check.direct).abs();
    let re = config.speed() * config.length_scale / nu;
    let ratio_bound = config.re_star / re;
    let ratios_ok = check
        .term_ratios
        .iter()
        .all(|&r| r <= ratio_bound + 1e-12 && r < 1.0);
    let pass = rel < 1e-10 && ratios_ok;
    report(
        12,
        pass,
        &format!(
            "10-term series {:.12e} vs direct {:.12e}: relative {rel:.2e} (< 1e-10); \
             successive-term ratios bounded by RE_*/RE = {ratio_bound} (< 1): {ratios_ok}",
            check.series, check.direct
        ),
    );
}

#[test]
fn criterion_13_reproducibility_across_workers() {
    let basis = reference_basis();
    let config = FlowConfig {
        velocity: vec![1.0],
        nu: 1e-4,
        amplitude: 1.0,
        beta: 0.5,
        re_star: 2000.0,
        length_scale: 1.0,
        horizon: 1.0,
    };
    let nu_grid: Vec<f64> = (0..6)
        .map(|i| {
            let t = i as f64 / 5.0;
            ((1e-2f64).ln() + t * ((1e-6f64).ln() - (1e-2f64).ln())).exp()
        })
        .collect();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let rep = dissipation::sweep(&config, &basis, &nu_grid, 3000, 99).unwrap();
                serde_json::to_string(&rep).unwrap()
            })
    };
    let one = run(1);
    let four = run(4);
    let three = run(3);
    let pass = one == four && one == three;
    report(
        13,
        pass,
        &format!(
            "serialized sweep reports byte-identical across 1, 3 and 4 workers: {pass} \
             ({} bytes)",
            one.len()
        ),
    );
}
