#![allow(clippy::needless_range_loop)]
//! Shared helpers for the integration suites: independent numeric oracles
//! that deliberately avoid the library's own solver paths.

use nalgebra::Matrix3;

/// Derivative-free Nelder–Mead minimizer over R³ with shrinking restarts.
/// Used as the independent check on the closed-form line-bundle solver.
pub fn nelder_mead<F: Fn(&[f64; 3]) -> f64>(f: F, start: [f64; 3], scale: f64) -> ([f64; 3], f64) {
    let mut best = start;
    let mut best_val = f(&start);
    let mut step = scale;
    for _ in 0..5 {
        let (x, v) = nelder_mead_once(&f, best, step, 600);
        if v < best_val {
            best = x;
            best_val = v;
        }
        step *= 0.05;
    }
    (best, best_val)
}

fn nelder_mead_once<F: Fn(&[f64; 3]) -> f64>(
    f: &F,
    start: [f64; 3],
    scale: f64,
    max_iters: usize,
) -> ([f64; 3], f64) {
    const ALPHA: f64 = 1.0; // reflection
    const GAMMA: f64 = 2.0; // expansion
    const RHO: f64 = 0.5; // contraction
    const SIGMA: f64 = 0.5; // shrink

    let mut simplex: Vec<([f64; 3], f64)> = vec![(start, f(&start))];
    for axis in 0..3 {
        let mut p = start;
        p[axis] += scale;
        simplex.push((p, f(&p)));
    }

    for _ in 0..max_iters {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = (0..3)
            .map(|i| (simplex[3].0[i] - simplex[0].0[i]).abs())
            .fold(0.0, f64::max);
        if spread < 1e-13 {
            break;
        }

        let mut centroid = [0.0; 3];
        for vertex in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += vertex.0[i] / 3.0;
            }
        }
        let worst = simplex[3];

        let point_at = |t: f64| {
            let mut p = [0.0; 3];
            for i in 0..3 {
                p[i] = centroid[i] + t * (centroid[i] - worst.0[i]);
            }
            p
        };

        let reflected = point_at(ALPHA);
        let reflected_val = f(&reflected);
        if reflected_val < simplex[0].1 {
            let expanded = point_at(GAMMA);
            let expanded_val = f(&expanded);
            simplex[3] = if expanded_val < reflected_val {
                (expanded, expanded_val)
            } else {
                (reflected, reflected_val)
            };
        } else if reflected_val < simplex[2].1 {
            simplex[3] = (reflected, reflected_val);
        } else {
            let contracted = point_at(-RHO);
            let contracted_val = f(&contracted);
            if contracted_val < worst.1 {
                simplex[3] = (contracted, contracted_val);
            } else {
                let best = simplex[0].0;
                for vertex in &mut simplex[1..] {
                    for i in 0..3 {
                        vertex.0[i] = best[i] + SIGMA * (vertex.0[i] - best[i]);
                    }
                    vertex.1 = f(&vertex.0);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Closed-form eigenvalues of a symmetric 3×3 matrix (trigonometric method),
/// sorted ascending. Independent of nalgebra's iterative decompositions.
pub fn symmetric_eigenvalues(a: &Matrix3<f64>) -> [f64; 3] {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    if p1 == 0.0 {
        let mut eigs = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        eigs.sort_by(f64::total_cmp);
        return eigs;
    }
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let eig_max = q + 2.0 * p * phi.cos();
    let eig_min = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let eig_mid = 3.0 * q - eig_max - eig_min;
    [eig_min, eig_mid, eig_max]
}

#[allow(dead_code)]
pub fn frobenius(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).norm()
}
