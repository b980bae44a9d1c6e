//! Symmetric tridiagonal eigensolver specialized to "lowest k eigenpairs":
//! Sturm-count bisection for eigenvalues, inverse iteration with partial
//! pivoting for eigenvectors, Gram-Schmidt cleanup inside eigenvalue clusters.
//!
//! An unreduced symmetric tridiagonal matrix has simple eigenvalues, so
//! bisection isolates each one; clusters here means "numerically close", which
//! happens for near-degenerate wells.

use crate::error::{Error, Result};

pub struct LowestPairs {
    /// Ascending eigenvalues, length k.
    pub values: Vec<f64>,
    /// l2-normalized eigenvectors, one per eigenvalue.
    pub vectors: Vec<Vec<f64>>,
}

/// y = (T - shift) v for T = tridiag(off, diag, off).
pub fn matvec(diag: &[f64], off: &[f64], shift: f64, v: &[f64], out: &mut [f64]) {
    let n = diag.len();
    for i in 0..n {
        let mut s = (diag[i] - shift) * v[i];
        if i > 0 {
            s += off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            s += off[i] * v[i + 1];
        }
        out[i] = s;
    }
}

fn infinity_norm(diag: &[f64], off: &[f64]) -> f64 {
    let n = diag.len();
    let mut t = 0.0f64;
    for i in 0..n {
        let mut r = diag[i].abs();
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        t = t.max(r);
    }
    t
}

/// Number of eigenvalues strictly below x, by counting negative pivots of the
/// LDLt factorization of T - xI.
fn count_below(diag: &[f64], off: &[f64], x: f64, pivmin: f64) -> usize {
    let mut count = 0;
    let mut p = diag[0] - x;
    if p.abs() < pivmin {
        p = -pivmin;
    }
    if p < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        p = diag[i] - x - off[i - 1] * off[i - 1] / p;
        if p.abs() < pivmin {
            p = -pivmin;
        }
        if p < 0.0 {
            count += 1;
        }
    }
    count
}

fn bisect_eigenvalue(
    diag: &[f64],
    off: &[f64],
    m: usize,
    mut lo: f64,
    mut hi: f64,
    pivmin: f64,
) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(diag, off, mid, pivmin) <= m {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) + 2.0 * f64::MIN_POSITIVE {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// LU factors of T - shift with partial pivoting. Row swaps introduce a second
/// superdiagonal; tiny pivots are floored so solves never overflow (inverse
/// iteration wants near-singular systems).
struct TriLu {
    low: Vec<f64>,
    dia: Vec<f64>,
    up1: Vec<f64>,
    up2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TriLu {
    fn factor(diag: &[f64], off: &[f64], shift: f64, pivfloor: f64) -> TriLu {
        let n = diag.len();
        let floored = |v: f64| {
            if v.abs() >= pivfloor {
                v
            } else if v < 0.0 {
                -pivfloor
            } else {
                pivfloor
            }
        };
        let mut dia: Vec<f64> = diag.iter().map(|&v| v - shift).collect();
        let mut low: Vec<f64> = off.to_vec();
        let mut up1: Vec<f64> = off.to_vec();
        let mut up2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if dia[i].abs() >= low[i].abs() {
                dia[i] = floored(dia[i]);
                let m = low[i] / dia[i];
                low[i] = m;
                dia[i + 1] -= m * up1[i];
            } else {
                let m = dia[i] / low[i];
                dia[i] = low[i];
                low[i] = m;
                let t = up1[i];
                up1[i] = dia[i + 1];
                dia[i + 1] = t - m * dia[i + 1];
                if i + 2 < n {
                    up2[i] = up1[i + 1];
                    up1[i + 1] = -m * up1[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 {
            dia[n - 1] = floored(dia[n - 1]);
        }
        TriLu {
            low,
            dia,
            up1,
            up2,
            swapped,
        }
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dia.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
                b[i + 1] -= self.low[i] * b[i];
            } else {
                b[i + 1] -= self.low[i] * b[i];
            }
        }
        b[n - 1] /= self.dia[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.up1[n - 2] * b[n - 1]) / self.dia[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.up1[i] * b[i + 1] - self.up2[i] * b[i + 2]) / self.dia[i];
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Deterministic start vector for inverse iteration; the mixed-congruential
/// stream just has to avoid being orthogonal to the target mode.
fn seed_vector(n: usize, key: u64) -> Vec<f64> {
    let mut state = key
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(0x2545_F491_4F6C_DD1D);
    (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6_364_136_223_846_793_005)
                .wrapping_add(1_442_695_040_888_963_407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

/// Lowest k eigenpairs of the unreduced symmetric tridiagonal matrix.
pub fn lowest_eigenpairs(diag: &[f64], off: &[f64], k: usize) -> Result<LowestPairs> {
    let n = diag.len();
    assert!(n >= 2, "matrix too small");
    assert_eq!(off.len(), n - 1);
    assert!(k >= 1 && k <= n, "eigenpair count out of range");

    let tnorm = infinity_norm(diag, off);
    let off_sq_max = off.iter().map(|e| e * e).fold(f64::MIN_POSITIVE, f64::max);
    let pivmin = f64::MIN_POSITIVE.max(f64::EPSILON * f64::EPSILON * off_sq_max);
    let pivfloor = (f64::EPSILON * tnorm).max(f64::MIN_POSITIVE);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }

    let values: Vec<f64> = (0..k)
        .map(|m| bisect_eigenvalue(diag, off, m, lo, hi, pivmin))
        .collect();

    let accept = |lambda: f64| (256.0 * f64::EPSILON * tnorm).max(1e-13 * lambda.abs().max(1.0));

    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (m, &lambda) in values.iter().enumerate() {
        let mut found = None;
        'attempts: for attempt in 0..3u64 {
            let shift = lambda + attempt as f64 * 16.0 * f64::EPSILON * tnorm;
            let lu = TriLu::factor(diag, off, shift, pivfloor);
            let mut w = seed_vector(n, (m as u64 + 1) * 7 + attempt * 1013);
            let nw = l2(&w);
            w.iter_mut().for_each(|x| *x /= nw);
            let mut resid = vec![0.0; n];
            for _iter in 0..8 {
                lu.solve_in_place(&mut w);
                // Orthogonalize against every earlier vector. For separated
                // eigenvalues the projections are ~ eps |T| / gap, so this is
                // cheap insurance; for clusters it is what keeps the basis
                // orthogonal at all.
                for vp in vectors.iter() {
                    let proj: f64 = vp.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                    w.iter_mut().zip(vp.iter()).for_each(|(x, a)| *x -= proj * a);
                }
                let nw = l2(&w);
                if nw == 0.0 || !nw.is_finite() {
                    continue 'attempts;
                }
                w.iter_mut().for_each(|x| *x /= nw);
                matvec(diag, off, lambda, &w, &mut resid);
                if l2(&resid) <= accept(lambda) {
                    found = Some(w);
                    break 'attempts;
                }
            }
        }
        match found {
            Some(w) => vectors.push(w),
            None => {
                return Err(Error::numerical(format!(
                    "inverse iteration stalled on eigenpair {m} (lambda = {lambda:.6e}) \
                     after 3 attempts x 8 iterations"
                )))
            }
        }
    }

    Ok(LowestPairs { values, vectors })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dirichlet Laplacian block (scaled): the discrete eigensystem is known in
    /// closed form, which makes it an exact oracle for the solver.
    fn dirichlet_block(n: usize, c: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0 * c; n], vec![-c; n - 1])
    }

    #[test]
    fn dirichlet_block_matches_closed_form() {
        let n = 64;
        let c = 7.5;
        let (diag, off) = dirichlet_block(n, c);
        let k = 20;
        let pairs = lowest_eigenpairs(&diag, &off, k).unwrap();
        let h = std::f64::consts::PI / (n as f64 + 1.0);
        for m in 0..k {
            let exact = 2.0 * c * (1.0 - ((m as f64 + 1.0) * h).cos());
            assert!(
                (pairs.values[m] - exact).abs() <= 1e-12 * (1.0 + exact),
                "eigenvalue {m}: {} vs {}",
                pairs.values[m],
                exact
            );
            // Eigenvector is the sine mode, up to sign and normalization.
            let v = &pairs.vectors[m];
            let mut s: Vec<f64> = (0..n)
                .map(|i| ((m as f64 + 1.0) * (i as f64 + 1.0) * h).sin())
                .collect();
            let ns = l2(&s);
            s.iter_mut().for_each(|x| *x /= ns);
            let dot: f64 = v.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
            assert!(
                dot.abs() > 1.0 - 1e-10,
                "eigenvector {m} misaligned: |dot| = {}",
                dot.abs()
            );
        }
    }

    #[test]
    fn residuals_and_orthogonality() {
        // Discrete oscillator-like matrix with a slowly varying diagonal.
        let n = 400;
        let c = 100.0;
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 - n as f64 / 2.0) / 20.0;
                2.0 * c + x * x
            })
            .collect();
        let off = vec![-c; n - 1];
        let k = 40;
        let pairs = lowest_eigenpairs(&diag, &off, k).unwrap();
        let mut resid = vec![0.0; n];
        for m in 0..k {
            matvec(&diag, &off, pairs.values[m], &pairs.vectors[m], &mut resid);
            assert!(l2(&resid) <= 1e-9 * (1.0 + pairs.values[m].abs()));
            for p in 0..m {
                let dot: f64 = pairs.vectors[m]
                    .iter()
                    .zip(pairs.vectors[p].iter())
                    .map(|(a, b)| a * b)
                    .sum();
                assert!(dot.abs() < 1e-11, "modes {p},{m} not orthogonal: {dot:e}");
            }
        }
        // Values ascend.
        for m in 1..k {
            assert!(pairs.values[m] >= pairs.values[m - 1]);
        }
    }

    #[test]
    fn near_degenerate_pair_stays_orthogonal() {
        // Two deep wells separated by a tall barrier: the lowest pair is
        // exponentially split, which is the stress case for inverse iteration.
        let n = 300;
        let c = 200.0;
        let diag: Vec<f64> = (0..n)
            .map(|i| {
                let x = (i as f64 / (n as f64 - 1.0)) * 8.0 - 4.0;
                let well = |x0: f64| -60.0 * (-(x - x0) * (x - x0) / 0.18).exp();
                2.0 * c + 80.0 + well(-2.0) + well(2.0)
            })
            .collect();
        let off = vec![-c; n - 1];
        let pairs = lowest_eigenpairs(&diag, &off, 4).unwrap();
        let gap = pairs.values[1] - pairs.values[0];
        assert!(gap >= 0.0);
        let dot: f64 = pairs.vectors[0]
            .iter()
            .zip(pairs.vectors[1].iter())
            .map(|(a, b)| a * b)
            .sum();
        assert!(
            dot.abs() < 1e-10,
            "split-pair orthogonality failed: gap {gap:e}, dot {dot:e}"
        );
    }
}
