//! Slow, direct reference computations for checking the geometry and the
//! inference engine. Nothing here shares code with `rfv-core`.

use nalgebra::{DMatrix, DVector};

/// Barycentric weights of `q` in the simplex with the given vertex
/// coordinates, from the full `(d+1) x (d+1)` affine system.
pub fn barycentric_direct(simplex: &[Vec<f64>], q: &[f64]) -> Vec<f64> {
    let d = q.len();
    let a = DMatrix::from_fn(
        d + 1,
        d + 1,
        |row, col| {
            if row < d {
                simplex[col][row]
            } else {
                1.0
            }
        },
    );
    let b = DVector::from_fn(d + 1, |row, _| if row < d { q[row] } else { 1.0 });
    let x = a.lu().solve(&b).expect("degenerate simplex");
    x.iter().copied().collect()
}

/// Unsigned volume of a simplex.
pub fn simplex_volume(simplex: &[Vec<f64>]) -> f64 {
    let d = simplex.len() - 1;
    let m = DMatrix::from_fn(d, d, |row, col| simplex[col + 1][row] - simplex[0][row]);
    let fact: f64 = (1..=d).map(|k| k as f64).product();
    m.determinant().abs() / fact
}

/// Lifted in-sphere determinant test. Returns `true` only when `p` lies
/// strictly inside the circumsphere, beyond a relative tolerance `rel_tol`
/// measured against the Hadamard bound of the lifted matrix.
pub fn strictly_inside_circumsphere(simplex: &[Vec<f64>], p: &[f64], rel_tol: f64) -> bool {
    let d = p.len();
    let lifted = |pt: &[f64]| {
        let m = DMatrix::from_fn(d + 1, d + 1, |row, col| {
            let diff: Vec<f64> = simplex[row].iter().zip(pt).map(|(a, b)| a - b).collect();
            if col < d {
                diff[col]
            } else {
                diff.iter().map(|x| x * x).sum()
            }
        });
        let bound: f64 = m.row_iter().map(|r| r.norm()).product();
        (m.determinant(), bound)
    };
    // The centroid is always inside, which fixes the sign convention.
    let centroid: Vec<f64> = (0..d)
        .map(|j| simplex.iter().map(|v| v[j]).sum::<f64>() / (d + 1) as f64)
        .collect();
    let (reference, _) = lifted(&centroid);
    let (det, bound) = lifted(p);
    det.signum() == reference.signum() && det.abs() > rel_tol * bound
}

/// Lowest index of a simplex whose barycentric weights of `q` are all at
/// least `-tol`.
pub fn brute_force_locate(simplices: &[Vec<Vec<f64>>], q: &[f64], tol: f64) -> Option<usize> {
    simplices
        .iter()
        .position(|s| barycentric_direct(s, q).iter().all(|w| *w >= -tol))
}

/// Per-site memberships of `q`: locate the containing simplex by exhaustive
/// scan (lowest index wins), solve its barycentric system directly and hand
/// each site vertex its weight, clamped to `[0, 1]`. Vertex ids below
/// `first_site` are auxiliary and receive nothing.
pub fn memberships_direct(
    simplices: &[Vec<usize>],
    coords: &[Vec<f64>],
    first_site: usize,
    q: &[f64],
    tol: f64,
) -> Vec<f64> {
    let mut mu = vec![0.0; coords.len() - first_site];
    let geometric: Vec<Vec<Vec<f64>>> = simplices
        .iter()
        .map(|s| s.iter().map(|&v| coords[v].clone()).collect())
        .collect();
    let found = brute_force_locate(&geometric, q, tol).expect("query outside every simplex");
    let w = barycentric_direct(&geometric[found], q);
    for (&v, wv) in simplices[found].iter().zip(w) {
        if v >= first_site {
            mu[v - first_site] = wv.clamp(0.0, 1.0);
        }
    }
    mu
}

/// Weighted sum of affine consequents: `O_i = sum_k (a0 + sum_j a_j I_j) mu_k`,
/// with `rows[k][i]` the coefficient row of rule `k`, output `i`.
pub fn ts_outputs(rows: &[Vec<Vec<f64>>], mu: &[f64], input: &[f64]) -> Vec<f64> {
    let outputs = rows.first().map_or(0, Vec::len);
    (0..outputs)
        .map(|i| {
            rows.iter()
                .zip(mu)
                .map(|(rule, m)| {
                    let row = &rule[i];
                    let affine =
                        row[0] + row[1..].iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
                    affine * m
                })
                .sum()
        })
        .collect()
}

/// Kolmogorov-Smirnov distance between the empirical distribution of
/// `samples` and the uniform distribution on `[lo, hi]`.
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Binomial coefficient as a float.
pub fn choose(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that the unique best of `n` individuals wins a tournament of
/// `k` distinct entrants: one minus the chance that all entrants come from
/// the other `n - 1`.
pub fn tournament_win_probability(n: u64, k: u64) -> f64 {
    1.0 - choose(n - 1, k) / choose(n, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_triangle() {
        let s = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = barycentric_direct(&s, &[0.25, 0.25]);
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((simplex_volume(&s) - 0.5).abs() < 1e-15);
        assert!(strictly_inside_circumsphere(&s, &[0.9, 0.9], 1e-12));
        assert!(!strictly_inside_circumsphere(&s, &[1.1, 1.1], 1e-12));
        // (1,1) is cocircular
        assert!(!strictly_inside_circumsphere(&s, &[1.0, 1.0], 1e-12));
    }

    #[test]
    fn ks_distance() {
        let grid: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform(&grid, 0.0, 1.0) <= 0.0005 + 1e-12);
        let skewed: Vec<f64> = grid.iter().map(|x| x * x).collect();
        assert!((ks_uniform(&skewed, 0.0, 1.0) - 0.25).abs() < 1e-2);
    }

    #[test]
    fn tournament_probability() {
        assert!((tournament_win_probability(10, 2) - 0.2).abs() < 1e-15);
        assert!((tournament_win_probability(10, 10) - 1.0).abs() < 1e-15);
        assert!((tournament_win_probability(10, 1) - 0.1).abs() < 1e-15);
    }
}
