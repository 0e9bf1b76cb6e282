use proptest::prelude::*;

use scvi::{BlockGeometry, ComponentSet, Dgf, NoiseStream, ENTROPY_EPS};

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn geometries() -> Vec<(BlockGeometry, f64)> {
    vec![
        (
            BlockGeometry::euclidean(ComponentSet::new_box(vec![-1.0, 0.0, -2.0], vec![1.0, 0.5, 3.0]).unwrap()),
            1e-10,
        ),
        (BlockGeometry::euclidean(ComponentSet::ball(vec![0.5, -0.3, 0.2], 1.5).unwrap()), 1e-10),
        (BlockGeometry::euclidean(ComponentSet::simplex(4).unwrap()), 1e-10),
        (BlockGeometry::new(ComponentSet::simplex(4).unwrap(), Dgf::NegativeEntropy).unwrap(), 1e-8),
    ]
}

/// Independent prox oracle: Euclidean steps by direct projection formulas, entropy steps
/// by the multiplicative update.
fn oracle_prox(g: &BlockGeometry, x: &[f64], y: &[f64]) -> Vec<f64> {
    let v = diff(x, y);
    match (&g.set, g.dgf) {
        (ComponentSet::Box { lower, upper }, _) => {
            v.iter().zip(lower.iter().zip(upper)).map(|(t, (l, u))| t.clamp(*l, *u)).collect()
        }
        (ComponentSet::Ball { center, radius }, _) => {
            let d = diff(&v, center);
            let n = dot(&d, &d).sqrt();
            if n <= *radius {
                v
            } else {
                center.iter().zip(&d).map(|(c, e)| c + e * radius / n).collect()
            }
        }
        (ComponentSet::Simplex { .. }, Dgf::Euclidean) => {
            // bisection on the threshold of sum max(v - tau, 0) = 1
            let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let s: f64 = v.iter().map(|t| (t - mid).max(0.0)).sum();
                if s > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = 0.5 * (lo + hi);
            v.iter().map(|t| (t - tau).max(0.0)).collect()
        }
        (ComponentSet::Simplex { .. }, Dgf::NegativeEntropy) => {
            let m = y.iter().cloned().fold(f64::INFINITY, f64::min);
            let w: Vec<f64> = x.iter().zip(y).map(|(a, b)| a.max(ENTROPY_EPS) * (m - b).exp()).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|t| t / s).collect()
        }
    }
}

fn case() -> impl Strategy<Value = (usize, u64, f64)> {
    (0usize..4, any::<u64>(), -2.0f64..1.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prox_matches_oracle((gi, seed, logmag) in case()) {
        let (g, tol) = &geometries()[gi];
        let mut s = NoiseStream::new(seed, 0);
        let x = g.sample_point(s.rng());
        let mag = 10f64.powf(logmag);
        let y: Vec<f64> = (0..g.dim()).map(|_| mag * s.standard_normal()).collect();
        let p = g.prox_map(&x, &y).unwrap();
        let q = oracle_prox(g, &x, &y);
        let err = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e3 * tol.max(1e-12), "prox differs from oracle by {err}");
        prop_assert!(g.contains(&p, 1e-12));
    }

    #[test]
    fn bregman_sandwich((gi, seed, _m) in case()) {
        let (g, tol) = &geometries()[gi];
        let mut s = NoiseStream::new(seed, 1);
        let x = g.sample_point(s.rng());
        let z = g.sample_point(s.rng());
        let d = g.bregman_distance(&x, &z).unwrap();
        let n = g.norm(&diff(&x, &z));
        prop_assert!(0.5 * g.mu_omega * n * n <= d + tol * d.max(1.0));
        prop_assert!(d <= 0.5 * g.l_omega * n * n + tol * d.max(1.0));
        prop_assert!(g.bregman_distance(&x, &x).unwrap().abs() <= *tol);
    }

    #[test]
    fn three_point_inequalities((gi, seed, logmag) in case()) {
        let (g, tol) = &geometries()[gi];
        let mut s = NoiseStream::new(seed, 2);
        let x = g.sample_point(s.rng());
        let z = g.sample_point(s.rng());
        let mag = 10f64.powf(logmag);
        let y: Vec<f64> = (0..g.dim()).map(|_| mag * s.standard_normal()).collect();
        let p = g.prox_map(&x, &y).unwrap();
        let d_xz = g.bregman_distance(&x, &z).unwrap();
        let d_pz = g.bregman_distance(&p, &z).unwrap();
        let d_xp = g.bregman_distance(&x, &p).unwrap();
        let yzp = dot(&y, &diff(&z, &p));
        let scale = (d_xz + yzp.abs() + d_xp).max(1.0);
        prop_assert!(d_pz <= d_xz + yzp - d_xp + tol * scale);
        let yzx = dot(&y, &diff(&z, &x));
        let dn = g.dual_norm(&y).unwrap();
        let quad = dn * dn / (2.0 * g.mu_omega);
        prop_assert!(d_pz <= d_xz + yzx + quad + tol * (d_xz + yzx.abs() + quad).max(1.0));
    }

    #[test]
    fn zero_step_and_nonexpansive((gi, seed, logmag) in case()) {
        let (g, tol) = &geometries()[gi];
        let mut s = NoiseStream::new(seed, 3);
        let x = g.sample_point(s.rng());
        let p0 = g.prox_map(&x, &vec![0.0; g.dim()]).unwrap();
        prop_assert!(p0.iter().zip(&x).all(|(a, b)| (a - b).abs() <= *tol));
        let mag = 10f64.powf(logmag);
        let y1: Vec<f64> = (0..g.dim()).map(|_| mag * s.standard_normal()).collect();
        let y2: Vec<f64> = (0..g.dim()).map(|_| mag * s.standard_normal()).collect();
        let p1 = g.prox_map(&x, &y1).unwrap();
        let p2 = g.prox_map(&x, &y2).unwrap();
        let rhs = g.dual_norm(&diff(&y1, &y2)).unwrap() / g.mu_omega;
        prop_assert!(g.norm(&diff(&p1, &p2)) <= rhs + tol * rhs.max(1.0));
    }

    #[test]
    fn three_point_identity((gi, seed, _m) in case()) {
        let (g, tol) = &geometries()[gi];
        let mut s = NoiseStream::new(seed, 4);
        let x = g.sample_point(s.rng());
        let w = g.sample_point(s.rng());
        let z = g.sample_point(s.rng());
        let d_xz = g.bregman_distance(&x, &z).unwrap();
        let d_xw = g.bregman_distance(&x, &w).unwrap();
        let d_wz = g.bregman_distance(&w, &z).unwrap();
        let cross = dot(&diff(&g.grad_omega(&w).unwrap(), &g.grad_omega(&x).unwrap()), &diff(&z, &w));
        let scale = (d_xz.abs() + d_xw + d_wz + cross.abs()).max(1.0);
        prop_assert!((d_xz - d_xw - d_wz - cross).abs() <= tol * scale);
    }
}
