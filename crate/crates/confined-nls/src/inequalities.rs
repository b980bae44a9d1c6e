//! Empirical checks of the functional embeddings behind the well-posedness
//! theory, over reproducible random field ensembles.
//!
//! One bound is structural and asserted hard: the graph norm of the shifted
//! confinement operator controls the flat H^1_x norm with constant sqrt(2),
//! because the potential-plus-shift term is pointwise nonnegative. The rest
//! (anisotropic Sobolev embeddings and the Gagliardo-Nirenberg
//! interpolation) carry unspecified constants, so the checks report maxima
//! over ensembles and the caller asserts scale invariance and stability
//! under grid refinement instead of a number.
//!
//! The x direction uses discrete sine frequencies of the Dirichlet box, not
//! the eigenbasis of the potential: the embeddings are statements about flat
//! Sobolev spaces, whatever V does.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{Domain, Field, Representation};
use crate::grid::XGrid;

/// Unitary sine transform on the Dirichlet grid: mode j has frequency
/// (j+1) pi / (2 l_x) and the coefficients satisfy sum |b_j|^2 = dx sum
/// |u_i|^2. Implemented by FFT of the odd extension of length 2(n+1).
pub struct SineTransform {
    n: usize,
    dx: f64,
    freqs: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    pub fn new(xg: &XGrid) -> SineTransform {
        let n = xg.n_x();
        let m = 2 * (n + 1);
        let mut planner = FftPlanner::new();
        SineTransform {
            n,
            dx: xg.dx(),
            freqs: (0..n)
                .map(|j| (j + 1) as f64 * PI / (2.0 * xg.l_x()))
                .collect(),
            fft: planner.plan_fft_forward(m),
        }
    }

    /// Frequency of each output bin.
    pub fn frequencies(&self) -> &[f64] {
        &self.freqs
    }

    /// Transform one x line (length n_x) to sine coefficients.
    pub fn forward_line(&self, line: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(line.len(), self.n, "line length does not match the grid");
        let m = 2 * (self.n + 1);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (i, u) in line.iter().enumerate() {
            buf[i + 1] = *u;
            buf[m - 1 - i] = -u;
        }
        self.fft.process(&mut buf);
        // S_j = i W_{j+1} / 2, then the unitary weight.
        let scale = (self.dx * 2.0 / (self.n as f64 + 1.0)).sqrt() * 0.5;
        (0..self.n)
            .map(|j| Complex64::new(0.0, scale) * buf[j + 1])
            .collect()
    }

    /// Sine-transform every column of an (n_x, n_cols) array.
    pub fn forward_columns(&self, data: &Array2<Complex64>) -> Array2<Complex64> {
        let (n_x, n_cols) = data.dim();
        assert_eq!(n_x, self.n, "row count does not match the grid");
        let mut out = Array2::zeros((n_x, n_cols));
        let mut line = vec![Complex64::new(0.0, 0.0); n_x];
        for col in 0..n_cols {
            for i in 0..n_x {
                line[i] = data[[i, col]];
            }
            for (j, b) in self.forward_line(&line).into_iter().enumerate() {
                out[[j, col]] = b;
            }
        }
        out
    }
}

/// Exponent bundle for the anisotropic interpolation: the chain
/// s > 1/2 and 1/2 > 1/k > 1/2 - gamma/(d-1) > 0 pins delta in (0, 1).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InequalityParams {
    pub k: f64,
    pub s: f64,
    pub gamma: f64,
    /// Interpolation weight (d-1)(1/2 - 1/k) / gamma.
    pub delta: f64,
    /// Margin of s above 1/2.
    pub epsilon: f64,
}

impl InequalityParams {
    pub fn new(d: usize, k: f64, s: f64, gamma: f64) -> Result<InequalityParams> {
        let dm1 = (d - 1) as f64;
        if !(s > 0.5) {
            return Err(Error::invalid("s", format!("need s > 1/2; got {s}")));
        }
        if !(gamma > 0.0) || !(gamma < dm1 / 2.0) {
            return Err(Error::invalid(
                "gamma",
                format!("need 0 < gamma < (d-1)/2 = {}; got {gamma}", dm1 / 2.0),
            ));
        }
        let lower = 0.5 - gamma / dm1;
        if !(1.0 / k < 0.5) || !(1.0 / k > lower) {
            return Err(Error::invalid(
                "k",
                format!("need 1/2 > 1/k > 1/2 - gamma/(d-1) = {lower}; got k = {k}"),
            ));
        }
        let delta = dm1 * (0.5 - 1.0 / k) / gamma;
        debug_assert!(delta > 0.0 && delta < 1.0);
        Ok(InequalityParams {
            k,
            s,
            gamma,
            delta,
            epsilon: s - 0.5,
        })
    }
}

/// Seeded, reproducible field family for ensemble checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    pub generator: EnsembleGenerator,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleGenerator {
    /// Random spectral coefficients under a smoothness envelope
    /// exp(-(corr_x^2 lambda_n + corr_y^2 |eta|^2) / 2).
    GaussianRandomField { corr_x: f64, corr_y: f64 },
    /// Uniform random coefficients on the band n <= max_mode,
    /// |wavenumber index| <= max_wavenumber per axis, zero outside.
    EigenmodeMixture { max_mode: usize, max_wavenumber: usize },
    /// Analytic Gaussian bumps with random transverse centers in
    /// [-spread, spread] and velocities in [-2, 2]; grid-independent, so
    /// the same seed yields the same continuum family on refined grids.
    Translates { width: f64, spread: f64 },
}

/// Generate `spec.count` fields on `domain`, deterministically from the seed.
pub fn generate_ensemble(domain: &Arc<Domain>, spec: &EnsembleSpec) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n_modes = domain.n_modes();
    let yg = domain.ygrid();
    let n_cols = yg.n_cols();
    let mut out = Vec::with_capacity(spec.count);
    for _ in 0..spec.count {
        let f = match spec.generator {
            EnsembleGenerator::GaussianRandomField { corr_x, corr_y } => {
                let basis = domain.basis();
                let eta_sq = domain.ytrans().eta_sq();
                let mut data = Array2::zeros((n_modes, n_cols));
                for n in 0..n_modes {
                    for col in 0..n_cols {
                        let env = (-0.5
                            * (corr_x * corr_x * basis.eigenvalue(n)
                                + corr_y * corr_y * eta_sq[col]))
                            .exp();
                        let re: f64 = rng.gen_range(-1.0..1.0);
                        let im: f64 = rng.gen_range(-1.0..1.0);
                        data[[n, col]] = Complex64::new(re * env, im * env);
                    }
                }
                Field::from_data(domain, Representation::Spectral, data, 0.0).unwrap()
            }
            EnsembleGenerator::EigenmodeMixture {
                max_mode,
                max_wavenumber,
            } => {
                let ytrans = domain.ytrans();
                let l_y = yg.l_y();
                let mut data = Array2::zeros((n_modes, n_cols));
                for n in 0..n_modes.min(max_mode + 1) {
                    for col in 0..n_cols {
                        let in_band = (0..yg.axes()).all(|a| {
                            let idx = (ytrans.eta_axis(col, a) * l_y / PI).round() as i64;
                            idx.unsigned_abs() as usize <= max_wavenumber
                        });
                        if in_band {
                            let re: f64 = rng.gen_range(-1.0..1.0);
                            let im: f64 = rng.gen_range(-1.0..1.0);
                            data[[n, col]] = Complex64::new(re, im);
                        }
                    }
                }
                Field::from_data(domain, Representation::Spectral, data, 0.0).unwrap()
            }
            EnsembleGenerator::Translates { width, spread } => {
                let axes = yg.axes();
                let mut centers = vec![0.0; axes];
                let mut velocities = vec![0.0; axes];
                for a in 0..axes {
                    centers[a] = rng.gen_range(-spread..spread);
                    velocities[a] = rng.gen_range(-2.0..2.0);
                }
                Field::gaussian(domain, 1.0, width, &centers, &velocities)
            }
        };
        out.push(f);
    }
    out
}

/// Per-member ratios plus the extremizer, for one embedding check.
#[derive(Debug, Clone)]
pub struct EnsembleReport {
    /// One entry per ensemble member; skipped members carry NaN.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Index of the maximizing member.
    pub argmax: usize,
    pub skipped: usize,
}

fn collect_report(ratios: Vec<f64>) -> Result<EnsembleReport> {
    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax = usize::MAX;
    let mut skipped = 0;
    for (i, r) in ratios.iter().enumerate() {
        if r.is_nan() {
            skipped += 1;
        } else if *r > max_ratio {
            max_ratio = *r;
            argmax = i;
        }
    }
    if argmax == usize::MAX {
        return Err(Error::invalid(
            "ensemble",
            "every member was skipped (zero or degenerate fields only)",
        ));
    }
    Ok(EnsembleReport {
        ratios,
        max_ratio,
        argmax,
        skipped,
    })
}

/// Difference-form quadratics of one field: (mass, |d_x u|^2 with Dirichlet
/// boundary jumps included, potential term integral((V + C0)|u|^2)).
fn dirichlet_forms(f: &Field) -> (f64, f64, f64) {
    let phys = f.in_rep(Representation::Physical);
    let dom = f.domain();
    let dx = dom.xgrid().dx();
    let vol = dom.ygrid().cell_volume();
    let vals = dom.basis().potential_values();
    let c0 = dom.basis().c0();
    let data = phys.data();
    let (n_x, n_cols) = data.dim();
    let mut mass = 0.0;
    let mut kin = 0.0;
    let mut pot = 0.0;
    for col in 0..n_cols {
        let mut prev = Complex64::new(0.0, 0.0);
        for i in 0..n_x {
            let u = data[[i, col]];
            mass += u.norm_sqr();
            kin += (u - prev).norm_sqr();
            pot += (vals[i] + c0) * u.norm_sqr();
            prev = u;
        }
        kin += prev.norm_sqr(); // jump to the right Dirichlet endpoint
    }
    (mass * dx * vol, kin / dx * vol, pot * dx * vol)
}

/// Flat H^1_x L^2_y norm against the graph norm of the shifted confinement
/// operator. The ratio is bounded by sqrt(2) identically: the graph norm's
/// quadratic form is mass + kin/2 + pot with pot >= 0, so
/// (mass + kin) <= 2 (mass + kin/2 + pot). A violation beyond round-off is
/// a bug, and reported as a numerical error rather than a finding.
pub fn check_b_embedding(fields: &[Field]) -> Result<EnsembleReport> {
    let ceiling = 2.0_f64.sqrt() * (1.0 + 1e-8);
    let mut ratios = Vec::with_capacity(fields.len());
    for (i, f) in fields.iter().enumerate() {
        let (mass, kin, pot) = dirichlet_forms(f);
        if mass == 0.0 {
            ratios.push(f64::NAN);
            continue;
        }
        let ratio = ((mass + kin) / (mass + 0.5 * kin + pot)).sqrt();
        if ratio > ceiling {
            return Err(Error::numerical(format!(
                "graph-norm embedding ratio {ratio:.12} exceeds sqrt(2) on member {i}; \
                 the potential term must have gone negative"
            )));
        }
        ratios.push(ratio);
    }
    collect_report(ratios)
}

/// Coefficients in (sine frequency in x) x (Fourier frequency in y), from a
/// physical-representation field.
fn flat_coefficients(f: &Field, dst: &SineTransform) -> Array2<Complex64> {
    let phys = f.in_rep(Representation::Physical);
    let mut ydata = phys.data().clone();
    f.domain().ytrans().forward(&mut ydata);
    dst.forward_columns(&ydata)
}

/// Anisotropic Sobolev norm against the flow's Z norm, with weights
/// <xi>^(2s) <eta>^(2gamma), s = 1/2 + epsilon, gamma = 1/2 - epsilon.
/// The constant is not pinned by theory, so nothing is asserted here;
/// callers compare maxima across grids.
pub fn check_h_gamma_s_embedding(fields: &[Field], epsilon: f64) -> Result<EnsembleReport> {
    if !(epsilon > 0.0) || !(epsilon < 0.5) {
        return Err(Error::invalid(
            "epsilon",
            format!("need 0 < epsilon < 1/2; got {epsilon}"),
        ));
    }
    let s = 0.5 + epsilon;
    let gamma = 0.5 - epsilon;
    let mut ratios = Vec::with_capacity(fields.len());
    let mut dst: Option<SineTransform> = None;
    for f in fields {
        if f.mass() == 0.0 {
            ratios.push(f64::NAN);
            continue;
        }
        let dom = f.domain();
        let dst = dst.get_or_insert_with(|| SineTransform::new(dom.xgrid()));
        let coeffs = flat_coefficients(f, dst);
        let eta_sq = dom.ytrans().eta_sq();
        let mut acc = 0.0;
        for (j, row) in coeffs.outer_iter().enumerate() {
            let xi_w = (1.0 + dst.frequencies()[j].powi(2)).powf(s);
            for (col, c) in row.iter().enumerate() {
                acc += xi_w * (1.0 + eta_sq[col]).powf(gamma) * c.norm_sqr();
            }
        }
        let z = f.norms(0.0, false).z_norm;
        ratios.push(acc.sqrt() / z);
    }
    collect_report(ratios)
}

/// Interpolation ratio |u|_{L^k_y L^inf_x} over
/// |u|_{L^2_y H^s_x}^(1-delta) |u|_{hom H^gamma_y H^s_x}^delta.
/// Members with no transverse oscillation (homogeneous factor zero) are
/// skipped and counted; both sides are homogeneous of degree one, so the
/// ratio ignores amplitude.
pub fn check_anisotropic_gn(fields: &[Field], params: &InequalityParams) -> Result<EnsembleReport> {
    let mut ratios = Vec::with_capacity(fields.len());
    let mut dst: Option<SineTransform> = None;
    for f in fields {
        if f.mass() == 0.0 {
            ratios.push(f64::NAN);
            continue;
        }
        let dom = f.domain();
        let dst = dst.get_or_insert_with(|| SineTransform::new(dom.xgrid()));
        let coeffs = flat_coefficients(f, dst);
        let eta_sq = dom.ytrans().eta_sq();
        let mut low = 0.0;
        let mut hom = 0.0;
        for (j, row) in coeffs.outer_iter().enumerate() {
            let xi_w = (1.0 + dst.frequencies()[j].powi(2)).powf(params.s);
            for (col, c) in row.iter().enumerate() {
                let base = xi_w * c.norm_sqr();
                low += base;
                hom += eta_sq[col].powf(params.gamma) * base;
            }
        }
        if hom <= 0.0 {
            ratios.push(f64::NAN);
            continue;
        }
        let lhs = f.mixed_norm_sup_x(params.k);
        let rhs = low.sqrt().powf(1.0 - params.delta) * hom.sqrt().powf(params.delta);
        ratios.push(lhs / rhs);
    }
    collect_report(ratios)
}

/// Mixed norm |u|_{L^k_y L^inf_x} against the Z norm, for k inside the open
/// range (2, 2(d-1)/(d-2)) where the embedding holds.
pub fn check_z_embedding(fields: &[Field], k: f64) -> Result<EnsembleReport> {
    if fields.is_empty() {
        return Err(Error::invalid("ensemble", "no members"));
    }
    let d = fields[0].domain().d();
    let k_max = match d {
        3 => 4.0,
        _ => f64::INFINITY,
    };
    if !(k > 2.0) || !(k < k_max) {
        return Err(Error::invalid(
            "k",
            format!("transverse exponent must lie in (2, {k_max}); got {k}"),
        ));
    }
    let mut ratios = Vec::with_capacity(fields.len());
    for f in fields {
        if f.mass() == 0.0 {
            ratios.push(f64::NAN);
            continue;
        }
        let z = f.norms(0.0, false).z_norm;
        ratios.push(f.mixed_norm_sup_x(k) / z);
    }
    collect_report(ratios)
}
