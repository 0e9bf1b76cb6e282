use proptest::prelude::*;

use scvi::metrics::{
    fit_rate, gap_estimate, lyapunov, one_step_recursion, rate_constants, GapMethod, RateInputs,
};
use scvi::problem::{
    make_monotone_affine, make_strictly_pseudo_monotone, make_strongly_monotone_affine, MonotoneAffineParams,
    Scaling, SetKind, StronglyMonotoneParams,
};
use scvi::solvers::bsmp_step;
use scvi::{NoiseStream, ScviProblem};

fn small_monotone(set: SetKind, seed: u64) -> ScviProblem {
    make_monotone_affine(&MonotoneAffineParams {
        blocks: 2,
        block_size: 2,
        skew_norm: 1.0,
        psd_norm: 0.5,
        psd_zeros: 1,
        noise: 0.1,
        set,
        seed,
    })
    .unwrap()
}

#[test]
fn gap_methods_agree() {
    for (set, seed) in [
        (SetKind::Box { half_width: 1.0 }, 1),
        (SetKind::Ball { radius: 1.0 }, 2),
        (SetKind::Simplex, 3),
    ] {
        let p = small_monotone(set, seed);
        let mut s = NoiseStream::new(seed, 7);
        for _ in 0..5 {
            let x = p.sample_point(&mut s);
            let exact = gap_estimate(&p, &x, GapMethod::AffineExact).unwrap();
            let ub = exact.upper_bound.unwrap();
            assert!(ub - exact.value <= 1e-9 * exact.value.abs().max(1.0));
            let ascent = gap_estimate(&p, &x, GapMethod::MultiStartAscent { starts: 8, tol: 1e-10 }).unwrap();
            assert!((ascent.value - exact.value).abs() < 1e-6, "{} vs {}", ascent.value, exact.value);
            let h = 0.05;
            let grid = gap_estimate(&p, &x, GapMethod::GridBruteForce { resolution: h }).unwrap();
            // grid points are feasible, so the grid value is a lower bound
            assert!(grid.value <= ub + 1e-12);
            assert!(exact.value - grid.value < 0.1, "grid {} vs {}", grid.value, exact.value);
        }
    }
}

#[test]
fn gap_vanishes_at_solution() {
    let p = small_monotone(SetKind::Box { half_width: 1.0 }, 4);
    let x_star = p.known_solution().unwrap();
    let g = gap_estimate(&p, x_star, GapMethod::AffineExact).unwrap();
    assert!(g.value.abs() < 1e-10 && g.upper_bound.unwrap() < 1e-10);
}

#[test]
fn fit_recovers_exponent_under_noise() {
    let mut s = NoiseStream::new(42, 0);
    for a in [0.5, 1.0, 2.0] {
        let pts: Vec<(f64, f64)> = (0..30)
            .map(|j| {
                let k = 10f64.powf(1.0 + j as f64 / 8.0);
                (k, 3.0 * k.powf(-a) * (0.05 * s.standard_normal()).exp())
            })
            .collect();
        let fit = fit_rate(&pts, 1.0).unwrap();
        assert!((fit.slope + a).abs() < 0.02, "slope {} for exponent {a}", fit.slope);
        let scaled: Vec<(f64, f64)> = pts.iter().map(|(k, v)| (*k, 1e5 * v)).collect();
        let fs = fit_rate(&scaled, 1.0).unwrap();
        assert!((fs.slope - fit.slope).abs() < 1e-12);
        assert!((fs.intercept - fit.intercept - 1e5f64.ln()).abs() < 1e-9);
    }
}

/// Rate constants written out from their definitions.
fn independent_constants(p: &ScviProblem, r: f64, gamma: f64, gamma0: f64) -> (f64, f64, f64, f64) {
    let c = p.constants();
    let g = p.geometries();
    let mut theta = 0.0;
    let mut spread = 0.0;
    let mut cg = 0.0;
    for i in 0..g.len() {
        let (ci, li, bi, nu, nt) = (c.map_bounds[i], c.lipschitz[i], c.bounds[i], c.nu[i], c.nu_tilde[i]);
        theta += (ci * ci + nu * nu) / g[i].mu_omega + 2.0 * li * bi * (ci + nt);
        spread += g[i].l_omega * bi * bi;
        cg += 2.0 / g[i].mu_omega * (2.0 * ci * ci + nt * nt + 1.25 * nu * nu);
    }
    let lw = g.iter().map(|x| x.l_omega).fold(f64::MIN, f64::max);
    let mw = g.iter().map(|x| x.mu_omega).fold(f64::MAX, f64::min);
    let mu = c.mu.unwrap();
    let a = 4.0 * theta * lw * lw / (mu * mu * mw);
    let pre = (2.0 - r) * 2f64.powf(1.0 - r / 2.0);
    let b = pre * (2.0 * spread / gamma + gamma * theta / (1.0 - r));
    let m = pre * (4.0 * spread / gamma0 + gamma0 * cg / (1.0 - r));
    (theta, a, b, m)
}

#[test]
fn rate_constants_match_definitions() {
    for set in [SetKind::Box { half_width: 2.0 }, SetKind::Ball { radius: 1.5 }, SetKind::Simplex] {
        let p = make_strongly_monotone_affine(&StronglyMonotoneParams {
            blocks: 3,
            block_size: 3,
            mu: 0.4,
            l_bound: 3.0,
            noise: 0.7,
            set,
            seed: 9,
        })
        .unwrap();
        for (r, gamma, gamma0) in [(0.0, 1.0, 1.0), (-1.0, 0.5, 2.0), (0.5, 3.0, 0.25)] {
            let rc = rate_constants(p.constants(), p.geometries(), RateInputs { r, gamma, gamma0 }).unwrap();
            let (theta, a, b, m) = independent_constants(&p, r, gamma, gamma0);
            for (got, want) in [(rc.theta, theta), (rc.mse_constant.unwrap(), a), (rc.objective_constant, b), (rc.gap_constant, m)] {
                assert!((got - want).abs() <= 1e-12 * want.abs(), "{got} vs {want}");
            }
        }
    }
    let p = small_monotone(SetKind::Box { half_width: 1.0 }, 1);
    let rc = rate_constants(p.constants(), p.geometries(), RateInputs { r: 0.0, gamma: 1.0, gamma0: 1.0 }).unwrap();
    assert!(rc.mse_constant.is_none());
    assert!(rate_constants(p.constants(), p.geometries(), RateInputs { r: 1.0, gamma: 1.0, gamma0: 1.0 }).is_err());
}

#[test]
fn one_step_recursion_on_random_draws() {
    let base = make_strongly_monotone_affine(&StronglyMonotoneParams {
        blocks: 3,
        block_size: 2,
        mu: 0.5,
        l_bound: 2.0,
        noise: 0.2,
        set: SetKind::Box { half_width: 1.0 },
        seed: 5,
    })
    .unwrap();
    let scaled = make_strictly_pseudo_monotone(&base, Scaling::default_for(base.dim())).unwrap();
    let simplex = small_monotone(SetKind::Simplex, 6);
    let problems = [base, scaled, simplex];
    let mut s = NoiseStream::new(100, 0);
    for t in 0..100 {
        let p = &problems[t % 3];
        let d = p.num_blocks();
        let x_k = p.sample_point(&mut s);
        let x = p.sample_point(&mut s);
        let gamma = 10f64.powf(-2.0 + 2.0 * s.uniform());
        let mut probs: Vec<f64> = (0..d).map(|_| 0.2 + s.uniform()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|q| *q /= total);
        let rep = one_step_recursion(p, &x_k, &x, gamma, &probs).unwrap();
        assert!(rep.holds, "draw {t}: {} > {}", rep.expected_next, rep.rhs);

        // recompute the averaged post-step value without the helper
        let clean = p.without_noise();
        let mut e1 = NoiseStream::new(1, 0);
        let mut e2 = NoiseStream::new(1, 1);
        let mut expected = 0.0;
        for (i, q) in probs.iter().enumerate() {
            let next = bsmp_step(&clean, &x_k, gamma, i, &mut e1, &mut e2).unwrap();
            expected += q * lyapunov(&probs, p.geometries(), &next, &x).unwrap();
        }
        assert!((expected - rep.expected_next).abs() <= 1e-12 * expected.max(1.0));
        let f = clean.expected_map(&x_k).unwrap();
        let inner: f64 = f.as_slice().iter().zip(x.as_slice().iter().zip(x_k.as_slice())).map(|(a, (b, c))| a * (b - c)).sum();
        assert!((inner - rep.inner).abs() <= 1e-12 * inner.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gap_is_nonnegative_and_certified(seed in 0u64..1000, si in 0usize..3) {
        let set = [SetKind::Box { half_width: 1.0 }, SetKind::Ball { radius: 1.0 }, SetKind::Simplex][si];
        let p = small_monotone(set, seed % 5);
        let mut s = NoiseStream::new(seed, 3);
        let x = p.sample_point(&mut s);
        let g = gap_estimate(&p, &x, GapMethod::AffineExact).unwrap();
        prop_assert!(g.value >= -1e-12);
        prop_assert!(g.upper_bound.unwrap() >= g.value);
    }
}
