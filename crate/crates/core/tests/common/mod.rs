#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Cell centres of a uniform grid on `[lo, hi]^d`, first axis fastest.
pub fn centres(lo: f64, hi: f64, per_axis: usize, dim: usize) -> Vec<Vec<f64>> {
    let h = (hi - lo) / per_axis as f64;
    let total = per_axis.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    lo + (k as f64 + 0.5) * h
                })
                .collect()
        })
        .collect()
}

/// Midpoint weights written out directly.
pub fn reference_weights(c: &[Vec<f64>], h: f64, s: f64, p: f64) -> Vec<Vec<f64>> {
    let n = c[0].len() as f64;
    let m = c.len();
    let mut w = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                let r = c[i].iter().zip(&c[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                w[i][j] = h.powf(2.0 * n) / r.powf(n + s * p);
            }
        }
    }
    w
}

pub fn reference_energy(w: &[Vec<f64>], u: &[f64], p: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..u.len() {
        for j in 0..u.len() {
            if i != j {
                e += w[i][j] * (u[i] - u[j]).abs().powf(p);
            }
        }
    }
    e
}

/// `Q = D − W`, so that `½ Σ_{i≠j} W_ij (u_i − u_j)² = uᵀ Q u`.
pub fn laplacian(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = w.len();
    let mut q = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j {
                q[i][j] = -w[i][j];
                q[i][i] += w[i][j];
            }
        }
    }
    q
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(1e-300);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random potential in `[0, 1]^n` with `Σ φ = target` (target < n).
pub fn random_potential(rng: &mut ChaCha8Rng, n: usize, target: f64) -> Vec<f64> {
    let mut phi = vec![0.0; n];
    let mut left = target;
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    for (pos, &i) in order.iter().enumerate() {
        let remaining_cells = (n - pos - 1) as f64;
        let min_here = (left - remaining_cells).max(0.0);
        let max_here = left.min(1.0);
        let v = if pos + 1 == n { left } else { rng.random_range(min_here..=max_here) };
        phi[i] = v;
        left -= v;
    }
    phi
}

/// Adaptive Simpson on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 24)
}
