//! Discrete eigenbasis of the confined direction.
//!
//! The operator is M = -1/2 d2/dx2 + V(x) + C0 on a Dirichlet grid, with C0
//! chosen so M is positive. Fields are expanded in the lowest `n_modes`
//! eigenfunctions; expansion coefficients use the dx-weighted inner product,
//! so Parseval holds exactly for in-span data.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::XGrid;
use crate::potential::{lower_bound_constant, Potential};
use crate::tridiag;

const CACHE_MAGIC: [u8; 4] = *b"EBK1";

/// Orthonormality defect ceiling enforced at build and load time.
pub const ORTHO_TOL: f64 = 1e-10;
/// Eigen-residual ceiling, relative to max(1, lambda).
pub const RESIDUAL_TOL: f64 = 1e-8;

pub struct EigenBasis {
    xgrid: XGrid,
    potential_values: Vec<f64>,
    c0: f64,
    values: Vec<f64>,
    /// n_x rows, n_modes columns; columns orthonormal in the dx inner product.
    modes: Array2<f64>,
    /// dx * modes^T, so analyze is a single matrix product.
    analysis: Array2<f64>,
}

impl EigenBasis {
    /// Solve for the lowest `n_modes` eigenpairs of M on `xgrid`.
    pub fn build(xgrid: &XGrid, potential: &Potential, n_modes: usize) -> Result<EigenBasis> {
        let n_x = xgrid.n_x();
        if n_modes < 1 || n_modes > n_x {
            return Err(Error::invalid(
                "n_modes",
                format!("must be in 1..={n_x} (got {n_modes})"),
            ));
        }
        let potential_values = potential.values_on(xgrid)?;
        let c0 = lower_bound_constant(&potential_values);
        let dx = xgrid.dx();
        let kin = 1.0 / (dx * dx);
        let diag: Vec<f64> = potential_values
            .iter()
            .map(|&v| kin + v + c0)
            .collect();
        let off = vec![-0.5 * kin; n_x - 1];
        let pairs = tridiag::lowest_eigenpairs(&diag, &off, n_modes)?;

        let inv_sqrt_dx = 1.0 / dx.sqrt();
        let mut modes = Array2::<f64>::zeros((n_x, n_modes));
        for (n, w) in pairs.vectors.iter().enumerate() {
            let peak = w.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let lead = w.iter().find(|x| x.abs() > 1e-8 * peak);
            let sign = if lead.copied().unwrap_or(1.0) < 0.0 {
                -1.0
            } else {
                1.0
            };
            for i in 0..n_x {
                modes[[i, n]] = sign * w[i] * inv_sqrt_dx;
            }
        }
        let analysis = modes.t().to_owned() * dx;

        let basis = EigenBasis {
            xgrid: xgrid.clone(),
            potential_values,
            c0,
            values: pairs.values,
            modes,
            analysis,
        };
        basis.verify()?;
        Ok(basis)
    }

    /// Orthonormality and eigen-residual checks shared by build and cache load.
    fn verify(&self) -> Result<()> {
        let gram = self.analysis.dot(&self.modes);
        let mut defect = 0.0f64;
        for ((i, j), &g) in gram.indexed_iter() {
            let target = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((g - target).abs());
        }
        if defect > ORTHO_TOL {
            return Err(Error::numerical(format!(
                "eigenbasis orthonormality defect {defect:.3e} exceeds {ORTHO_TOL:.1e}"
            )));
        }

        let n_x = self.xgrid.n_x();
        let dx = self.xgrid.dx();
        let kin = 1.0 / (dx * dx);
        let diag: Vec<f64> = self
            .potential_values
            .iter()
            .map(|&v| kin + v + self.c0)
            .collect();
        let off = vec![-0.5 * kin; n_x - 1];
        let mut w = vec![0.0; n_x];
        let mut r = vec![0.0; n_x];
        for (n, &lambda) in self.values.iter().enumerate() {
            if !(lambda > 0.0) {
                return Err(Error::numerical(format!(
                    "eigenvalue {n} is not positive: {lambda:.6e}"
                )));
            }
            for i in 0..n_x {
                w[i] = self.modes[[i, n]];
            }
            tridiag::matvec(&diag, &off, lambda, &w, &mut r);
            let res = dx.sqrt() * r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if res > RESIDUAL_TOL * lambda.max(1.0) {
                return Err(Error::numerical(format!(
                    "eigenpair {n} residual {res:.3e} exceeds {RESIDUAL_TOL:.1e} * max(1, lambda)"
                )));
            }
        }
        Ok(())
    }

    pub fn xgrid(&self) -> &XGrid {
        &self.xgrid
    }

    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvalue(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// Shift making M positive: max(0, -min V).
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn potential_values(&self) -> &[f64] {
        &self.potential_values
    }

    /// Eigenfunction n sampled on the grid (dx-normalized).
    pub fn mode(&self, n: usize) -> ArrayView1<'_, f64> {
        self.modes.column(n)
    }

    pub fn modes(&self) -> ArrayView2<'_, f64> {
        self.modes.view()
    }

    /// Expansion coefficients c[n, col] = dx * sum_i phi_n(x_i) u[i, col].
    pub fn analyze_x(&self, phys: &ArrayView2<Complex64>) -> Array2<Complex64> {
        real_gemm_complex(&self.analysis, phys)
    }

    /// Grid samples u[i, col] = sum_n phi_n(x_i) c[n, col].
    pub fn synthesize_x(&self, spec: &ArrayView2<Complex64>) -> Array2<Complex64> {
        real_gemm_complex(&self.modes, spec)
    }

    /// Row n of the coefficient matrix scaled by sqrt(lambda_n).
    pub fn apply_sqrt_m(&self, spec: &mut Array2<Complex64>) {
        for (n, mut row) in spec.outer_iter_mut().enumerate() {
            let s = self.values[n].sqrt();
            row.iter_mut().for_each(|c| *c *= s);
        }
    }

    /// Flow of the confined part: row n multiplied by exp(-i tau (lambda_n - C0)),
    /// the propagator of -1/2 d2/dx2 + V over time tau.
    pub fn linear_phase_x(&self, spec: &mut Array2<Complex64>, tau: f64) {
        for (n, mut row) in spec.outer_iter_mut().enumerate() {
            let phase = Complex64::from_polar(1.0, -tau * (self.values[n] - self.c0));
            row.iter_mut().for_each(|c| *c *= phase);
        }
    }

    /// Fraction of squared mass outside the retained span: 1 - |c|^2 / |u|^2.
    /// Zero input reports zero leak.
    pub fn leak_fraction(&self, phys: &ArrayView2<Complex64>) -> f64 {
        let total: f64 = phys.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.xgrid.dx();
        if total == 0.0 {
            return 0.0;
        }
        let spec = self.analyze_x(phys);
        let captured: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        (1.0 - captured / total).max(0.0)
    }

    /// Binary cache: 16-byte header (magic, n_x, n_modes as u32 LE, dx as f32 LE),
    /// then per mode the eigenvalue followed by n_x samples, all f64 LE.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let n_x = self.xgrid.n_x();
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&CACHE_MAGIC)?;
        w.write_all(&(n_x as u32).to_le_bytes())?;
        w.write_all(&(self.n_modes() as u32).to_le_bytes())?;
        w.write_all(&(self.xgrid.dx() as f32).to_le_bytes())?;
        for n in 0..self.n_modes() {
            w.write_all(&self.values[n].to_le_bytes())?;
            for i in 0..n_x {
                w.write_all(&self.modes[[i, n]].to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Load a cache written by `save_cache` and re-verify it against the given
    /// grid and potential. A cache built for different inputs fails the
    /// residual check rather than being trusted.
    pub fn load_cache(path: &Path, xgrid: &XGrid, potential: &Potential) -> Result<EigenBasis> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let fail = |m: &str| Error::invalid("eigen_cache", format!("{}: {m}", path.display()));
        if bytes.len() < 16 || bytes[..4] != CACHE_MAGIC {
            return Err(fail("not an eigenbasis cache"));
        }
        let n_x = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let n_modes = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let dx = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        if n_x != xgrid.n_x() {
            return Err(fail(&format!(
                "cache has n_x = {n_x}, grid has {}",
                xgrid.n_x()
            )));
        }
        if (dx as f64 - xgrid.dx()).abs() > 1e-6 * xgrid.dx() {
            return Err(fail("cache dx does not match grid"));
        }
        let record = 8 * (1 + n_x);
        if n_modes == 0 || n_modes > n_x || bytes.len() != 16 + n_modes * record {
            return Err(fail("truncated or inconsistent payload"));
        }

        let potential_values = potential.values_on(xgrid)?;
        let c0 = lower_bound_constant(&potential_values);
        let mut values = Vec::with_capacity(n_modes);
        let mut modes = Array2::<f64>::zeros((n_x, n_modes));
        for n in 0..n_modes {
            let base = 16 + n * record;
            values.push(f64::from_le_bytes(
                bytes[base..base + 8].try_into().unwrap(),
            ));
            for i in 0..n_x {
                let at = base + 8 + 8 * i;
                modes[[i, n]] = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            }
        }
        for n in 1..n_modes {
            if values[n] < values[n - 1] {
                return Err(fail("eigenvalues out of order"));
            }
        }
        let analysis = modes.t().to_owned() * xgrid.dx();
        let basis = EigenBasis {
            xgrid: xgrid.clone(),
            potential_values,
            c0,
            values,
            modes,
            analysis,
        };
        basis.verify()?;
        Ok(basis)
    }
}

/// C = A * U with real A and complex U, as two real GEMMs on the split parts.
fn real_gemm_complex(a: &Array2<f64>, u: &ArrayView2<Complex64>) -> Array2<Complex64> {
    let parts = u.split_complex();
    let out_re = a.dot(&parts.re);
    let out_im = a.dot(&parts.im);
    let mut out = Array2::<Complex64>::zeros((a.nrows(), u.ncols()));
    let mut view = out.view_mut().split_complex();
    view.re.assign(&out_re);
    view.im.assign(&out_im);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn box_basis(n_x: usize, n_modes: usize) -> (XGrid, EigenBasis) {
        let g = XGrid::new(10.0, n_x).unwrap();
        let b = EigenBasis::build(&g, &Potential::Zero, n_modes).unwrap();
        (g, b)
    }

    #[test]
    fn free_box_spectrum_is_exact() {
        // With V = 0 the discrete operator is the Dirichlet Laplacian, whose
        // spectrum is known in closed form; this pins the solver end to end.
        let (g, b) = box_basis(255, 24);
        let dx = g.dx();
        let h = std::f64::consts::PI / (g.n_x() as f64 + 1.0);
        for n in 0..b.n_modes() {
            let exact = (1.0 - ((n as f64 + 1.0) * h).cos()) / (dx * dx);
            assert_abs_diff_eq!(b.eigenvalue(n), exact, epsilon = 1e-10 * (1.0 + exact));
        }
        assert_eq!(b.c0(), 0.0);
    }

    #[test]
    fn harmonic_levels_near_half_integers() {
        let g = XGrid::new(10.0, 512).unwrap();
        let b = EigenBasis::build(&g, &Potential::Harmonic { omega: 1.0 }, 12).unwrap();
        for n in 0..=10usize {
            let target = n as f64 + 0.5;
            assert!(
                (b.eigenvalue(n) - target).abs() < 2e-2,
                "level {n}: {} vs {target}",
                b.eigenvalue(n)
            );
        }
    }

    #[test]
    fn analyze_synthesize_roundtrip_in_span() {
        let (g, b) = box_basis(128, 16);
        let n_x = g.n_x();
        // Data assembled inside the span, two columns.
        let mut spec = Array2::<Complex64>::zeros((16, 2));
        for n in 0..16 {
            spec[[n, 0]] = Complex64::new(1.0 / (1.0 + n as f64), 0.3 * n as f64);
            spec[[n, 1]] = Complex64::new((-0.5f64).powi(n as i32), -0.1);
        }
        let phys = b.synthesize_x(&spec.view());
        assert_eq!(phys.nrows(), n_x);
        let back = b.analyze_x(&phys.view());
        for (a, e) in back.iter().zip(spec.iter()) {
            assert!((a - e).norm() < 1e-12);
        }
        // Parseval: dx-weighted mass equals coefficient mass in span.
        let mass_phys: f64 = phys.iter().map(|c| c.norm_sqr()).sum::<f64>() * g.dx();
        let mass_spec: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        assert_abs_diff_eq!(mass_phys, mass_spec, epsilon = 1e-12 * mass_spec);
        assert!(b.leak_fraction(&phys.view()) < 1e-12);
    }

    #[test]
    fn leak_detects_out_of_span_content() {
        let (g, b) = box_basis(128, 4);
        let n_x = g.n_x();
        // A sharp odd-even alternation is orthogonal to the four smooth modes.
        let mut phys = Array2::<Complex64>::zeros((n_x, 1));
        for i in 0..n_x {
            phys[[i, 0]] = Complex64::new(if i % 2 == 0 { 1.0 } else { -1.0 }, 0.0);
        }
        assert!(b.leak_fraction(&phys.view()) > 0.9);
    }

    #[test]
    fn sqrt_m_and_phase_act_diagonally() {
        let (_g, b) = box_basis(64, 6);
        let mut spec = Array2::<Complex64>::zeros((6, 1));
        spec[[3, 0]] = Complex64::new(2.0, 0.0);
        let mut scaled = spec.clone();
        b.apply_sqrt_m(&mut scaled);
        assert_abs_diff_eq!(
            scaled[[3, 0]].re,
            2.0 * b.eigenvalue(3).sqrt(),
            epsilon = 1e-14
        );
        let tau = 0.7;
        b.linear_phase_x(&mut spec, tau);
        let expect = Complex64::from_polar(2.0, -tau * (b.eigenvalue(3) - b.c0()));
        assert!((spec[[3, 0]] - expect).norm() < 1e-14);
        // Modulus preserved.
        assert_abs_diff_eq!(spec[[3, 0]].norm(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn cache_roundtrip_and_mismatch_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("basis.ebk");
        let g = XGrid::new(8.0, 200).unwrap();
        let pot = Potential::Harmonic { omega: 1.5 };
        let b = EigenBasis::build(&g, &pot, 10).unwrap();
        b.save_cache(&path).unwrap();

        let loaded = EigenBasis::load_cache(&path, &g, &pot).unwrap();
        assert_eq!(loaded.eigenvalues(), b.eigenvalues());
        for n in 0..10 {
            for i in 0..g.n_x() {
                assert_eq!(loaded.modes()[[i, n]], b.modes()[[i, n]]);
            }
        }

        // Same grid, different potential: residual check must reject.
        let wrong = Potential::Harmonic { omega: 2.5 };
        assert!(EigenBasis::load_cache(&path, &g, &wrong).is_err());
        // Different grid: header check must reject.
        let g2 = XGrid::new(8.0, 128).unwrap();
        assert!(EigenBasis::load_cache(&path, &g2, &pot).is_err());
    }

    #[test]
    fn rejects_bad_mode_counts() {
        let g = XGrid::new(10.0, 64).unwrap();
        assert!(EigenBasis::build(&g, &Potential::Zero, 0).is_err());
        assert!(EigenBasis::build(&g, &Potential::Zero, 65).is_err());
    }
}
