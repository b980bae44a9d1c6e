//! State representation on the tensor grid and the norms attached to it.
//!
//! A field lives either on grid points (Physical) or as coefficients in the
//! mixed basis: eigenfunctions of M in x, Fourier modes in y (Spectral). The
//! y transform is unitary with respect to the dy-weighted inner product, and
//! the x expansion is dx-orthonormal, so Parseval identities are exact on the
//! resolved subspace and norms can be read off coefficients directly.
//!
//! Layout: rows index x (grid points or modes), columns index the flattened
//! transverse grid; for two transverse axes, column = j1 * n_y + j2.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::eigenbasis::EigenBasis;
use crate::error::{Error, Result};
use crate::grid::{XGrid, YGrid};

/// Unitary Fourier transform on the periodic transverse grid.
///
/// Conventions, per axis with n points and spacing dy:
/// forward  c_k = sqrt(dy/n) * (-1)^k * FFT(f)_k,
/// inverse  f_j = 1/sqrt(n*dy) * IFFT((-1)^k c_k)_j,
/// so sum |c|^2 = dy * sum |f|^2 exactly and c_k approximates the continuum
/// transform at the signed frequency eta_k (the twist accounts for the grid
/// starting at -L_y rather than 0).
pub struct YTransform {
    grid: YGrid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_factor: Vec<f64>,
    inv_factor: Vec<f64>,
    eta_sq: Vec<f64>,
}

impl YTransform {
    pub fn new(grid: &YGrid) -> YTransform {
        let n = grid.n_y();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);

        let alpha = (grid.dy() / n as f64).sqrt();
        let beta = 1.0 / (n as f64 * grid.dy()).sqrt();
        let n_cols = grid.n_cols();
        let mut fwd_factor = Vec::with_capacity(n_cols);
        let mut inv_factor = Vec::with_capacity(n_cols);
        let mut eta_sq = Vec::with_capacity(n_cols);
        for col in 0..n_cols {
            let ks = grid.col_indices(col);
            let parity = ks.iter().sum::<usize>() % 2;
            let sign = if parity == 0 { 1.0 } else { -1.0 };
            let axes = ks.len() as i32;
            fwd_factor.push(sign * alpha.powi(axes));
            inv_factor.push(sign * beta.powi(axes));
            eta_sq.push(ks.iter().map(|&k| grid.eta(k).powi(2)).sum());
        }

        YTransform {
            grid: grid.clone(),
            fwd,
            inv,
            fwd_factor,
            inv_factor,
            eta_sq,
        }
    }

    pub fn grid(&self) -> &YGrid {
        &self.grid
    }

    /// |eta|^2 for each flattened column.
    pub fn eta_sq(&self) -> &[f64] {
        &self.eta_sq
    }

    /// Signed frequency along one transverse axis for a flattened column.
    pub fn eta_axis(&self, col: usize, axis: usize) -> f64 {
        self.grid.eta(self.grid.col_indices(col)[axis])
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, data: &mut Array2<Complex64>) {
        let n = self.grid.n_y();
        let slice = data.as_slice_mut().expect("field data is contiguous");
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // Fast axis: back-to-back transforms over every chunk.
        fft.process_with_scratch(slice, &mut scratch);
        if self.grid.axes() == 2 {
            // Slow axis: transpose each n x n plane, transform, transpose back.
            let mut plane = vec![Complex64::default(); n * n];
            for row in slice.chunks_exact_mut(n * n) {
                for i in 0..n {
                    for j in 0..n {
                        plane[j * n + i] = row[i * n + j];
                    }
                }
                fft.process_with_scratch(&mut plane, &mut scratch);
                for i in 0..n {
                    for j in 0..n {
                        row[i * n + j] = plane[j * n + i];
                    }
                }
            }
        }
    }

    fn apply_factor(data: &mut Array2<Complex64>, factor: &[f64]) {
        for mut row in data.outer_iter_mut() {
            for (c, &f) in row.iter_mut().zip(factor) {
                *c *= f;
            }
        }
    }

    /// Grid samples to frequency coefficients, every row independently.
    pub fn forward(&self, data: &mut Array2<Complex64>) {
        self.run(&self.fwd, data);
        Self::apply_factor(data, &self.fwd_factor);
    }

    /// Frequency coefficients back to grid samples.
    pub fn inverse(&self, data: &mut Array2<Complex64>) {
        Self::apply_factor(data, &self.inv_factor);
        self.run(&self.inv, data);
    }

    /// Spectral derivative along one transverse axis of physical-space rows.
    pub fn derivative(&self, data: &Array2<Complex64>, axis: usize) -> Array2<Complex64> {
        assert!(axis < self.grid.axes(), "no such transverse axis");
        let mut out = data.clone();
        self.forward(&mut out);
        for mut row in out.outer_iter_mut() {
            for (col, c) in row.iter_mut().enumerate() {
                *c *= Complex64::new(0.0, self.eta_axis(col, axis));
            }
        }
        self.inverse(&mut out);
        out
    }
}

/// Shared discretization: eigenbasis in x, Fourier machinery in y.
pub struct Domain {
    basis: EigenBasis,
    ytrans: YTransform,
}

impl Domain {
    pub fn new(basis: EigenBasis, ygrid: YGrid) -> Arc<Domain> {
        let ytrans = YTransform::new(&ygrid);
        Arc::new(Domain { basis, ytrans })
    }

    pub fn basis(&self) -> &EigenBasis {
        &self.basis
    }

    pub fn xgrid(&self) -> &XGrid {
        self.basis.xgrid()
    }

    pub fn ygrid(&self) -> &YGrid {
        self.ytrans.grid()
    }

    pub fn ytrans(&self) -> &YTransform {
        &self.ytrans
    }

    pub fn d(&self) -> usize {
        self.ygrid().d()
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes()
    }

    /// Quadrature weight of one grid cell, dx * dy^(d-1).
    pub fn cell_weight(&self) -> f64 {
        self.xgrid().dx() * self.ygrid().cell_volume()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Representation {
    Physical,
    Spectral,
}

/// Norms and conserved quantities of a state at one instant.
///
/// `mass` is the squared L2 norm; the other entries are norms (not squares).
/// Identities: z_norm^2 = mass + sqrt_m_norm^2 + grad_y_norm^2 and
/// z_tilde_norm^2 = z_norm^2 + y_moment^2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormReport {
    pub t: f64,
    pub mass: f64,
    pub sqrt_m_norm: f64,
    pub grad_y_norm: f64,
    pub y_moment: f64,
    pub z_norm: f64,
    pub z_tilde_norm: f64,
    /// L^(2 sigma + 2) norm entering the nonlinear energy term.
    pub l2sigma2_norm: f64,
    pub energy: f64,
}

pub struct Field {
    domain: Arc<Domain>,
    rep: Representation,
    t: f64,
    data: Array2<Complex64>,
}

impl Clone for Field {
    fn clone(&self) -> Self {
        Field {
            domain: Arc::clone(&self.domain),
            rep: self.rep,
            t: self.t,
            data: self.data.clone(),
        }
    }
}

impl Field {
    fn rows_for(domain: &Domain, rep: Representation) -> usize {
        match rep {
            Representation::Physical => domain.xgrid().n_x(),
            Representation::Spectral => domain.n_modes(),
        }
    }

    pub fn zeros(domain: &Arc<Domain>, rep: Representation) -> Field {
        let rows = Self::rows_for(domain, rep);
        Field {
            domain: Arc::clone(domain),
            rep,
            t: 0.0,
            data: Array2::zeros((rows, domain.ygrid().n_cols())),
        }
    }

    /// Build from raw data; shape must match the representation.
    pub fn from_data(
        domain: &Arc<Domain>,
        rep: Representation,
        data: Array2<Complex64>,
        t: f64,
    ) -> Result<Field> {
        let want = (Self::rows_for(domain, rep), domain.ygrid().n_cols());
        if data.dim() != want {
            return Err(Error::invalid(
                "field_data",
                format!("shape {:?} does not match domain {:?}", data.dim(), want),
            ));
        }
        Ok(Field {
            domain: Arc::clone(domain),
            rep,
            t,
            data,
        })
    }

    /// Sample a function of (x, y) on the physical grid.
    pub fn from_fn(domain: &Arc<Domain>, f: impl Fn(f64, &[f64]) -> Complex64) -> Field {
        let mut field = Field::zeros(domain, Representation::Physical);
        let xg = domain.xgrid();
        let yg = domain.ygrid();
        for col in 0..yg.n_cols() {
            let ys = yg.col_coords(col);
            for i in 0..xg.n_x() {
                field.data[[i, col]] = f(xg.x(i), &ys);
            }
        }
        field
    }

    /// amplitude * exp(-(x^2 + |y - center|^2) / (2 width^2)) * exp(i velocity . y).
    pub fn gaussian(
        domain: &Arc<Domain>,
        amplitude: f64,
        width: f64,
        center_y: &[f64],
        velocity_y: &[f64],
    ) -> Field {
        let axes = domain.ygrid().axes();
        assert_eq!(center_y.len(), axes, "center_y length");
        assert_eq!(velocity_y.len(), axes, "velocity_y length");
        let inv2w2 = 1.0 / (2.0 * width * width);
        Field::from_fn(domain, |x, ys| {
            let mut r2 = x * x;
            let mut phase = 0.0;
            for (&y, (&c, &v)) in ys.iter().zip(center_y.iter().zip(velocity_y.iter())) {
                r2 += (y - c) * (y - c);
                phase += v * y;
            }
            Complex64::from_polar(amplitude * (-r2 * inv2w2).exp(), phase)
        })
    }

    /// amplitude * phi_n(x) * exp(i eta_k . y) for lattice wavenumber indices k.
    pub fn eigenmode(
        domain: &Arc<Domain>,
        n: usize,
        wavenumber_index: &[usize],
        amplitude: f64,
    ) -> Field {
        let yg = domain.ygrid();
        assert!(n < domain.n_modes(), "mode index out of range");
        assert_eq!(wavenumber_index.len(), yg.axes(), "wavenumber index length");
        let etas: Vec<f64> = wavenumber_index.iter().map(|&k| yg.eta(k)).collect();
        let mode = domain.basis().mode(n).to_owned();
        let mut field = Field::zeros(domain, Representation::Physical);
        for col in 0..yg.n_cols() {
            let ys = yg.col_coords(col);
            let phase: f64 = etas.iter().zip(ys.iter()).map(|(e, y)| e * y).sum();
            let c = Complex64::from_polar(amplitude, phase);
            for i in 0..mode.len() {
                field.data[[i, col]] = mode[i] * c;
            }
        }
        field
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn rep(&self) -> Representation {
        self.rep
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn set_t(&mut self, t: f64) {
        self.t = t;
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Switch to coefficient space: eigenbasis analysis in x, then the y
    /// transform. Content outside the retained eigenspan is projected away.
    pub fn to_spectral(&mut self) {
        if self.rep == Representation::Spectral {
            return;
        }
        let mut spec = self.domain.basis().analyze_x(&self.data.view());
        self.domain.ytrans().forward(&mut spec);
        self.data = spec;
        self.rep = Representation::Spectral;
    }

    /// Switch to grid samples: inverse y transform, then synthesis in x.
    /// The y transform runs first, while there are only n_modes rows.
    pub fn to_physical(&mut self) {
        if self.rep == Representation::Physical {
            return;
        }
        let mut spec = std::mem::replace(&mut self.data, Array2::zeros((0, 0)));
        self.domain.ytrans().inverse(&mut spec);
        self.data = self.domain.basis().synthesize_x(&spec.view());
        self.rep = Representation::Physical;
    }

    /// A copy in the requested representation, converting if needed.
    pub fn in_rep(&self, rep: Representation) -> Field {
        let mut f = self.clone();
        match rep {
            Representation::Physical => f.to_physical(),
            Representation::Spectral => f.to_spectral(),
        }
        f
    }

    /// Squared L2 norm in whichever representation the field is in.
    pub fn mass(&self) -> f64 {
        let s: f64 = self.data.iter().map(|c| c.norm_sqr()).sum();
        match self.rep {
            Representation::Physical => s * self.domain.cell_weight(),
            Representation::Spectral => s,
        }
    }

    /// All norms and the energy. The nonlinear energy term uses `sigma`;
    /// with `include_nonlinear` false the report carries the linear energy
    /// (the quantity the exact linear flow conserves).
    pub fn norms(&self, sigma: f64, include_nonlinear: bool) -> NormReport {
        let spec_holder;
        let spec: &Field = match self.rep {
            Representation::Spectral => self,
            Representation::Physical => {
                spec_holder = self.in_rep(Representation::Spectral);
                &spec_holder
            }
        };
        let phys_holder;
        let phys: &Field = match self.rep {
            Representation::Physical => self,
            Representation::Spectral => {
                phys_holder = self.in_rep(Representation::Physical);
                &phys_holder
            }
        };

        let basis = self.domain.basis();
        let eta_sq = self.domain.ytrans().eta_sq();
        let mut mass = 0.0;
        let mut sqrt_m_sq = 0.0;
        let mut grad_y_sq = 0.0;
        for (n, row) in spec.data.outer_iter().enumerate() {
            let lambda = basis.eigenvalue(n);
            for (col, c) in row.iter().enumerate() {
                let p = c.norm_sqr();
                mass += p;
                sqrt_m_sq += lambda * p;
                grad_y_sq += eta_sq[col] * p;
            }
        }

        let w = self.domain.cell_weight();
        let yg = self.domain.ygrid();
        let p_exp = 2.0 * sigma + 2.0;
        let mut y_moment_sq = 0.0;
        let mut nl_int = 0.0;
        for col in 0..yg.n_cols() {
            let y2: f64 = yg.col_coords(col).iter().map(|y| y * y).sum();
            for i in 0..phys.data.nrows() {
                let p = phys.data[[i, col]].norm_sqr();
                y_moment_sq += y2 * p;
                nl_int += p.powf(p_exp / 2.0);
            }
        }
        y_moment_sq *= w;
        nl_int *= w;

        let z_sq = mass + sqrt_m_sq + grad_y_sq;
        let energy_linear = (sqrt_m_sq - basis.c0() * mass) + 0.5 * grad_y_sq;
        let energy = if include_nonlinear {
            energy_linear + nl_int / (sigma + 1.0)
        } else {
            energy_linear
        };
        NormReport {
            t: self.t,
            mass,
            sqrt_m_norm: sqrt_m_sq.sqrt(),
            grad_y_norm: grad_y_sq.sqrt(),
            y_moment: y_moment_sq.sqrt(),
            z_norm: z_sq.sqrt(),
            z_tilde_norm: (z_sq + y_moment_sq).sqrt(),
            l2sigma2_norm: nl_int.powf(1.0 / p_exp),
            energy,
        }
    }

    /// Discrete L^r norm over the whole grid; r = infinity gives the grid max.
    pub fn lebesgue_norm(&self, r: f64) -> f64 {
        assert!(r >= 1.0, "Lebesgue exponent below 1");
        let phys_holder;
        let phys = match self.rep {
            Representation::Physical => self,
            Representation::Spectral => {
                phys_holder = self.in_rep(Representation::Physical);
                &phys_holder
            }
        };
        if r.is_infinite() {
            return phys.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        }
        let s: f64 = phys.data.iter().map(|c| c.norm().powf(r)).sum();
        (s * self.domain.cell_weight()).powf(1.0 / r)
    }

    /// sup over x on each transverse line, then the L^k norm over y.
    pub fn mixed_norm_sup_x(&self, k: f64) -> f64 {
        assert!(k >= 1.0, "Lebesgue exponent below 1");
        let phys_holder;
        let phys = match self.rep {
            Representation::Physical => self,
            Representation::Spectral => {
                phys_holder = self.in_rep(Representation::Physical);
                &phys_holder
            }
        };
        let yg = self.domain.ygrid();
        let mut acc = 0.0f64;
        for col in 0..yg.n_cols() {
            let line_max = (0..phys.data.nrows())
                .map(|i| phys.data[[i, col]].norm())
                .fold(0.0, f64::max);
            if k.is_infinite() {
                acc = acc.max(line_max);
            } else {
                acc += line_max.powf(k);
            }
        }
        if k.is_infinite() {
            acc
        } else {
            (acc * yg.cell_volume()).powf(1.0 / k)
        }
    }

    /// Pointwise difference; representations and domains must match.
    pub fn sub(&self, other: &Field) -> Field {
        assert!(
            Arc::ptr_eq(&self.domain, &other.domain),
            "fields on different domains"
        );
        assert_eq!(self.rep, other.rep, "fields in different representations");
        let mut out = self.clone();
        out.data.zip_mut_with(&other.data, |a, b| *a -= b);
        out
    }

    pub fn scale(&mut self, c: Complex64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// self += c * other.
    pub fn add_scaled(&mut self, c: Complex64, other: &Field) {
        assert!(
            Arc::ptr_eq(&self.domain, &other.domain),
            "fields on different domains"
        );
        assert_eq!(self.rep, other.rep, "fields in different representations");
        self.data.zip_mut_with(&other.data, |a, b| *a += c * b);
    }
}

/// Z-norm distance between two states, measured in coefficient space with the
/// weight 1 + lambda_n + |eta|^2.
pub fn z_distance(a: &Field, b: &Field) -> f64 {
    assert!(
        Arc::ptr_eq(a.domain(), b.domain()),
        "fields on different domains"
    );
    let sa = a.in_rep(Representation::Spectral);
    let sb = b.in_rep(Representation::Spectral);
    let basis = a.domain().basis();
    let eta_sq = a.domain().ytrans().eta_sq();
    let mut acc = 0.0;
    for (n, (ra, rb)) in sa
        .data()
        .outer_iter()
        .zip(sb.data().outer_iter())
        .enumerate()
    {
        let wl = 1.0 + basis.eigenvalue(n);
        for (col, (ca, cb)) in ra.iter().zip(rb.iter()).enumerate() {
            acc += (wl + eta_sq[col]) * (ca - cb).norm_sqr();
        }
    }
    acc.sqrt()
}
