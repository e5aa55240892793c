mod common;

use common::*;
use fracobstacle::geometry::{Domain, Grid};
use fracobstacle::kernel::{
    assemble_kernel, assemble_kernel_with, gagliardo_energy, gagliardo_gradient, local_energy, LocalDirichlet,
    Quadrature, Seminorm,
};
use fracobstacle::par::Execution;
use proptest::prelude::*;

fn unit_interval(n: usize) -> Grid {
    Grid::new(Domain::interval(0.0, 1.0).unwrap(), &[n]).unwrap()
}

/// `∬_{(0,1)²} |u(x) − u(y)|^p / |x − y|^{1+sp}` by nested adaptive Simpson.
///
/// `slope(x, y)` is the divided difference `(u(x) − u(y)) / (x − y)`. With
/// `t = |x − y|` the integrand is `t^q |slope|^p`, `q = p − 1 − sp > −1`; the
/// substitution `t = τ^{1/(q+1)}` removes the weight `t^q`.
fn double_integral(slope: impl Fn(f64, f64) -> f64, s: f64, p: f64) -> f64 {
    let q = p - 1.0 - s * p;
    let e = 1.0 / (q + 1.0);
    let inner = |x: f64| {
        let side = |len: f64, dir: f64| {
            let f = |tau: f64| {
                let t = tau.powf(e);
                slope(x, x + dir * t).abs().powf(p)
            };
            e * adaptive_simpson(&f, 0.0, len.powf(q + 1.0), 1e-10)
        };
        side(x, -1.0) + side(1.0 - x, 1.0)
    };
    adaptive_simpson(&inner, 0.0, 1.0, 1e-8)
}

#[test]
fn linear_profile_energy_matches_double_integral() {
    let grid = unit_interval(64);
    let u: Vec<f64> = grid.centers().iter().map(|c| c[0]).collect();
    let exact = double_integral(|_, _| 1.0, 0.5, 2.0);
    assert!((exact - 1.0).abs() < 1e-8, "oracle {exact}");
    let k = assemble_kernel(&grid, 0.5, 2.0).unwrap();
    let e = gagliardo_energy(&u, &k).unwrap();
    assert!((e - exact).abs() / exact < 0.05, "{e} vs {exact}");
}

/// The corrected rule converges under refinement, beats the midpoint rule
/// and stays within 5% at N = 64 even where the kernel is nearly non-integrable.
#[test]
fn corrected_energy_tracks_double_integral() {
    let cases: [(&str, fn(f64) -> f64, fn(f64, f64) -> f64); 2] =
        [("x", |x| x, |_, _| 1.0), ("x^2", |x| x * x, |x, y| x + y)];
    for (s, p) in [(0.3, 2.0), (0.5, 3.0), (0.9, 2.0), (0.7, 2.5)] {
        for (name, f, slope) in cases {
            let exact = double_integral(slope, s, p);
            let mut last = f64::INFINITY;
            for n in [32, 64, 128] {
                let grid = unit_interval(n);
                let u: Vec<f64> = grid.centers().iter().map(|c| f(c[0])).collect();
                let rel = |quad| {
                    let k = assemble_kernel_with(&grid, s, p, quad, Execution::Sequential).unwrap();
                    ((gagliardo_energy(&u, &k).unwrap() - exact) / exact).abs()
                };
                let corrected = rel(Quadrature::Corrected);
                let midpoint = rel(Quadrature::Midpoint);
                assert!(corrected < last, "u={name} s={s} p={p} N={n}: error {corrected} did not shrink");
                assert!(corrected < midpoint, "u={name} s={s} p={p} N={n}");
                if n == 64 {
                    assert!(corrected < 0.05, "u={name} s={s} p={p}: {corrected}");
                }
                last = corrected;
            }
        }
    }
}

#[test]
fn energy_matches_duplicate_loop() {
    let mut r = rng(11);
    for (dim, per_axis) in [(1, 16), (2, 4)] {
        let domain = if dim == 1 {
            Domain::interval(0.0, 1.0).unwrap()
        } else {
            Domain::rectangle((0.0, 1.0), (0.0, 1.0)).unwrap()
        };
        let grid = Grid::new(domain, &vec![per_axis; dim]).unwrap();
        let c = centres(0.0, 1.0, per_axis, dim);
        for (s, p) in [(0.5, 2.0), (0.3, 2.5), (0.8, 3.5)] {
            let w = reference_weights(&c, 1.0 / per_axis as f64, s, p);
            let k = assemble_kernel(&grid, s, p).unwrap();
            for _ in 0..5 {
                let u = random_vec(&mut r, grid.len(), -1.0, 1.0);
                let e = gagliardo_energy(&u, &k).unwrap();
                let e_ref = reference_energy(&w, &u, p);
                assert!((e - e_ref).abs() <= 1e-12 * e_ref, "dim={dim} s={s} p={p}: {e} vs {e_ref}");
            }
        }
    }
}

fn central_difference(f: impl Fn(&[f64]) -> f64, u: &[f64], i: usize, step: f64) -> f64 {
    let mut a = u.to_vec();
    let mut b = u.to_vec();
    a[i] += step;
    b[i] -= step;
    (f(&a) - f(&b)) / (2.0 * step)
}

#[test]
fn gradient_matches_finite_differences() {
    let grid = unit_interval(12);
    let mut r = rng(5);
    for p in [2.0, 2.5, 3.5] {
        for quad in [Quadrature::Midpoint, Quadrature::Corrected] {
            let k = assemble_kernel_with(&grid, 0.4, p, quad, Execution::Sequential).unwrap();
            for _ in 0..20 {
                let u = random_vec(&mut r, 12, -1.0, 1.0);
                let g = gagliardo_gradient(&u, &k).unwrap();
                let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for i in 0..12 {
                    let fd = central_difference(|v| gagliardo_energy(v, &k).unwrap(), &u, i, 1e-6);
                    assert!((g[i] - fd).abs() <= 1e-5 * scale, "p={p} i={i}: {} vs {fd}", g[i]);
                }
            }
        }
    }
}

#[test]
fn local_gradient_matches_finite_differences() {
    let grid = Grid::new(Domain::rectangle((0.0, 1.0), (0.0, 0.5)).unwrap(), &[6, 3]).unwrap();
    let mut r = rng(8);
    for p in [2.0, 3.5] {
        let l = LocalDirichlet::new(&grid, p).unwrap();
        let u = random_vec(&mut r, grid.len(), -1.0, 1.0);
        let mut g = vec![0.0; grid.len()];
        l.gradient_into(&u, &mut g);
        let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..grid.len() {
            let fd = central_difference(|v| l.energy(v), &u, i, 1e-6);
            assert!((g[i] - fd).abs() <= 1e-5 * scale, "p={p} i={i}");
        }
    }
}

#[test]
fn local_energy_of_cosine() {
    let grid = unit_interval(256);
    let u: Vec<f64> = grid.centers().iter().map(|c| (std::f64::consts::PI * c[0]).cos()).collect();
    let e = local_energy(&u, &grid, 2.0).unwrap();
    let exact = std::f64::consts::PI.powi(2) / 2.0;
    assert!((e - exact).abs() / exact < 0.01, "{e} vs {exact}");
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_bits() {
    let grid = unit_interval(300);
    let u: Vec<f64> = random_vec(&mut rng(2), 300, -1.0, 1.0);
    let k1 = assemble_kernel_with(&grid, 0.6, 2.5, Quadrature::Corrected, Execution::Sequential).unwrap();
    let reference = k1.energy_with(&u, Execution::Sequential).unwrap();
    for threads in [1, 2, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let (e, g) = pool.install(|| {
            let k = assemble_kernel_with(&grid, 0.6, 2.5, Quadrature::Corrected, Execution::Parallel).unwrap();
            (
                k.energy_with(&u, Execution::Parallel).unwrap(),
                k.gradient_with(&u, Execution::Parallel).unwrap(),
            )
        });
        assert_eq!(e.to_bits(), reference.to_bits(), "threads={threads}");
        let g_ref = k1.gradient_with(&u, Execution::Sequential).unwrap();
        assert!(g.iter().zip(&g_ref).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_invariance(u in vec_strategy(10), c in -5.0f64..5.0, s in 0.1f64..0.9, p in 1.5f64..4.0) {
        let k = assemble_kernel(&unit_interval(10), s, p).unwrap();
        let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
        let a = gagliardo_energy(&u, &k).unwrap();
        let b = gagliardo_energy(&shifted, &k).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-300) + 1e-12);
    }

    #[test]
    fn homogeneity(u in vec_strategy(10), t in 0.1f64..5.0, s in 0.1f64..0.9, p in 1.5f64..4.0) {
        let k = assemble_kernel(&unit_interval(10), s, p).unwrap();
        let scaled: Vec<f64> = u.iter().map(|x| t * x).collect();
        let a = gagliardo_energy(&u, &k).unwrap();
        let b = gagliardo_energy(&scaled, &k).unwrap();
        prop_assert!((b - t.powf(p) * a).abs() <= 1e-10 * b.max(1e-300));
    }

    #[test]
    fn absolute_value_never_increases_energy(u in vec_strategy(10), s in 0.1f64..0.9, p in 1.5f64..4.0) {
        let k = assemble_kernel(&unit_interval(10), s, p).unwrap();
        let abs: Vec<f64> = u.iter().map(|x| x.abs()).collect();
        let a = gagliardo_energy(&u, &k).unwrap();
        let b = gagliardo_energy(&abs, &k).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-12));
        if u.iter().all(|&x| x >= 0.0) || u.iter().all(|&x| x <= 0.0) {
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }

    #[test]
    fn energy_is_nonnegative_and_symmetric(u in vec_strategy(9), s in 0.1f64..0.9) {
        let grid = unit_interval(9);
        let k = assemble_kernel_with(&grid, s, 2.0, Quadrature::Corrected, Execution::Sequential).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                prop_assert_eq!(k.weight(i, j), k.weight(j, i));
            }
        }
        prop_assert!(gagliardo_energy(&u, &k).unwrap() >= 0.0);
    }
}

