//! Monotone functionals and decay measures along a trajectory.
//!
//! Everything here is post-processing: given snapshots of the state, compute
//! the transverse marginal of the mass density, windowed (cube) masses, the
//! Morawetz action for two convex weights, mixed space-time norms, and
//! fitted decay rates. The Morawetz action is the quantity whose
//! monotonicity certifies that mass disperses in y; its running companions
//! (a fractional smoothing norm of the marginal and a sup-cube-mass power)
//! are the integrands the monotonicity controls.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result, Warning};
use crate::field::{Field, Representation, YTransform};
use crate::grid::YGrid;

/// Transverse profile of the mass density: values[col] = x-integral of
/// |u|^2 along the confined direction, one entry per y gridpoint.
pub struct MarginalDensity {
    pub t: f64,
    pub values: Vec<f64>,
}

fn marginal_values(phys: &Field) -> Vec<f64> {
    let dx = phys.domain().xgrid().dx();
    let data = phys.data();
    let n_cols = data.ncols();
    let mut out = vec![0.0; n_cols];
    for row in data.outer_iter() {
        for (col, c) in row.iter().enumerate() {
            out[col] += c.norm_sqr();
        }
    }
    for v in &mut out {
        *v *= dx;
    }
    out
}

/// x-quadrature of |u|^2 per transverse gridpoint.
pub fn marginal_density(f: &Field) -> MarginalDensity {
    let phys = f.in_rep(Representation::Physical);
    MarginalDensity {
        t: f.t(),
        values: marginal_values(&phys),
    }
}

/// L^2_y norm of |eta|^order applied to the marginal. Order 0 reproduces
/// the plain L^2_y norm exactly (the multiplier is identically one).
pub fn fractional_y_norm(ytrans: &YTransform, marginal: &MarginalDensity, order: f64) -> f64 {
    assert!(order >= 0.0, "fractional order must be nonnegative");
    let n_cols = ytrans.grid().n_cols();
    assert_eq!(marginal.values.len(), n_cols, "marginal/grid mismatch");
    let mut data = ndarray::Array2::from_shape_fn((1, n_cols), |(_, col)| {
        Complex64::new(marginal.values[col], 0.0)
    });
    ytrans.forward(&mut data);
    let acc: f64 = data
        .iter()
        .zip(ytrans.eta_sq().iter())
        .map(|(c, &e2)| e2.powf(order) * c.norm_sqr())
        .sum();
    acc.sqrt()
}

/// Circular moving-window sums of width 2h+1 over a periodic axis.
fn circular_window_sums(vals: &[f64], h: usize) -> Vec<f64> {
    let n = vals.len();
    if 2 * h + 1 >= n {
        let total: f64 = vals.iter().sum();
        return vec![total; n];
    }
    let mut prefix = vec![0.0; n + 1];
    for (i, v) in vals.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let total = prefix[n];
    (0..n)
        .map(|j| {
            let a = j as isize - h as isize;
            let b = j + h;
            if a >= 0 && b < n {
                prefix[b + 1] - prefix[a as usize]
            } else if a < 0 {
                // window = [a+n, n) plus [0, b]
                (total - prefix[(a + n as isize) as usize]) + prefix[b + 1]
            } else {
                // window = [a, n) plus [0, b-n]
                (total - prefix[a as usize]) + prefix[b + 1 - n]
            }
        })
        .collect()
}

/// Largest mass in any cube of half-width mu centered on a gridpoint:
/// max over centers of the sum of |u|^2 over {|x-x_c| <= mu} x {|y-y_c| <= mu}
/// times the cell weight. Clipped at the x boundary, periodic in y.
pub fn cube_mass_sup(f: &Field, mu: f64) -> Result<f64> {
    let xg = f.domain().xgrid();
    let yg = f.domain().ygrid();
    let (dx, dy) = (xg.dx(), yg.dy());
    if 2.0 * mu < dx.max(dy) {
        return Err(Error::invalid(
            "mu",
            format!(
                "cube half-width {mu} spans less than one cell (dx = {dx:.3e}, dy = {dy:.3e})"
            ),
        ));
    }
    let hx = (mu / dx).floor() as usize;
    let hy = (mu / dy).floor() as usize;

    let phys = f.in_rep(Representation::Physical);
    let data = phys.data();
    let (n_x, n_cols) = data.dim();
    let n_y = yg.n_y();

    // x first: clipped window sums via a prefix along each column.
    let mut windowed = vec![0.0; n_x * n_cols];
    let mut prefix = vec![0.0; n_x + 1];
    for col in 0..n_cols {
        for i in 0..n_x {
            prefix[i + 1] = prefix[i] + data[[i, col]].norm_sqr();
        }
        for i in 0..n_x {
            let lo = i.saturating_sub(hx);
            let hi = (i + hx + 1).min(n_x);
            windowed[i * n_cols + col] = prefix[hi] - prefix[lo];
        }
    }

    // Then each periodic transverse axis in turn.
    let mut best = 0.0f64;
    match yg.axes() {
        1 => {
            for i in 0..n_x {
                let row = &windowed[i * n_cols..(i + 1) * n_cols];
                for v in circular_window_sums(row, hy) {
                    best = best.max(v);
                }
            }
        }
        2 => {
            let mut tmp = vec![0.0; n_cols];
            for i in 0..n_x {
                let row = &windowed[i * n_cols..(i + 1) * n_cols];
                // fast axis: contiguous stretches of length n_y
                for j1 in 0..n_y {
                    let sums = circular_window_sums(&row[j1 * n_y..(j1 + 1) * n_y], hy);
                    tmp[j1 * n_y..(j1 + 1) * n_y].copy_from_slice(&sums);
                }
                // slow axis: strided gather per fast index
                let mut lane = vec![0.0; n_y];
                for j2 in 0..n_y {
                    for j1 in 0..n_y {
                        lane[j1] = tmp[j1 * n_y + j2];
                    }
                    for v in circular_window_sums(&lane, hy) {
                        best = best.max(v);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(best * dx * yg.cell_volume())
}

/// Convex weight whose gradient steers the Morawetz action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorawetzWeight {
    /// a(y) = |y|; gradient is the unit vector away from the origin, zero
    /// at the origin itself.
    Abs,
    /// a(y) = sqrt(1 + |y|^2); gradient y / <y> is smooth and strictly
    /// below one in modulus.
    Japanese,
}

impl MorawetzWeight {
    pub fn label(&self) -> &'static str {
        match self {
            MorawetzWeight::Abs => "abs",
            MorawetzWeight::Japanese => "japanese",
        }
    }

    /// One component of grad a at displacement `delta` (all axes).
    fn gradient_component(&self, delta: &[f64], axis: usize) -> f64 {
        let norm_sq: f64 = delta.iter().map(|d| d * d).sum();
        match self {
            MorawetzWeight::Abs => {
                if norm_sq == 0.0 {
                    0.0
                } else {
                    delta[axis] / norm_sq.sqrt()
                }
            }
            MorawetzWeight::Japanese => delta[axis] / (1.0 + norm_sq).sqrt(),
        }
    }
}

/// Index difference to principal displacement in [-l_y, l_y).
fn wrapped_delta(q: usize, n: usize, dy: f64) -> f64 {
    if q < n / 2 {
        q as f64 * dy
    } else {
        (q as f64 - n as f64) * dy
    }
}

/// Transverse momentum density per axis: j[axis][col] = x-integral of
/// Im(conj(u) d_axis u).
fn momentum_marginals(phys: &Field) -> Vec<Vec<f64>> {
    let dom = phys.domain();
    let dx = dom.xgrid().dx();
    let ytrans = dom.ytrans();
    let data = phys.data();
    let n_cols = data.ncols();
    (0..dom.ygrid().axes())
        .map(|axis| {
            let deriv = ytrans.derivative(data, axis);
            let mut out = vec![0.0; n_cols];
            for (u_row, d_row) in data.outer_iter().zip(deriv.outer_iter()) {
                for (col, (u, d)) in u_row.iter().zip(d_row.iter()).enumerate() {
                    out[col] += (u.conj() * d).im;
                }
            }
            for v in &mut out {
                *v *= dx;
            }
            out
        })
        .collect()
}

/// Direct double sum over one periodic axis; quadratic in n_y but cache
/// friendly, used for d = 2.
fn action_direct_1d(yg: &YGrid, r: &[f64], j: &[f64], weight: MorawetzWeight) -> f64 {
    let n = yg.n_y();
    let dy = yg.dy();
    let gdiff: Vec<f64> = (0..n)
        .map(|q| weight.gradient_component(&[wrapped_delta(q, n, dy)], 0))
        .collect();
    let mut acc = 0.0;
    for m in 0..n {
        let mut inner = 0.0;
        for (jj, rv) in r.iter().enumerate() {
            inner += gdiff[(m + n - jj) % n] * rv;
        }
        acc += inner * j[m];
    }
    acc * dy * dy
}

/// Circular convolution of two column vectors over the transverse grid,
/// one or two axes.
fn circular_convolve(yg: &YGrid, kernel: &[f64], data: &[f64]) -> Vec<f64> {
    let n = yg.n_y();
    let n_cols = yg.n_cols();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let to_c = |v: &[f64]| -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    };
    let mut ka = to_c(kernel);
    let mut da = to_c(data);
    let fft_all = |buf: &mut Vec<Complex64>, plan: &std::sync::Arc<dyn rustfft::Fft<f64>>| {
        match yg.axes() {
            1 => plan.process(buf),
            2 => {
                // rows (fast axis), then columns via transpose
                plan.process(buf);
                let mut t = vec![Complex64::new(0.0, 0.0); n_cols];
                for a in 0..n {
                    for b in 0..n {
                        t[b * n + a] = buf[a * n + b];
                    }
                }
                plan.process(&mut t);
                for a in 0..n {
                    for b in 0..n {
                        buf[b * n + a] = t[a * n + b];
                    }
                }
            }
            _ => unreachable!(),
        }
    };
    fft_all(&mut ka, &fwd);
    fft_all(&mut da, &fwd);
    for (k, d) in ka.iter_mut().zip(da.iter()) {
        *k *= d;
    }
    fft_all(&mut ka, &inv);
    let scale = 1.0 / n_cols as f64;
    ka.iter().map(|c| c.re * scale).collect()
}

fn action_fft(yg: &YGrid, r: &[f64], j_axes: &[Vec<f64>], weight: MorawetzWeight) -> f64 {
    let n = yg.n_y();
    let dy = yg.dy();
    let axes = yg.axes();
    let mut acc = 0.0;
    for (axis, j) in j_axes.iter().enumerate() {
        let kernel: Vec<f64> = (0..yg.n_cols())
            .map(|col| {
                let mut delta = [0.0; 2];
                match axes {
                    1 => delta[0] = wrapped_delta(col, n, dy),
                    2 => {
                        delta[0] = wrapped_delta(col / n, n, dy);
                        delta[1] = wrapped_delta(col % n, n, dy);
                    }
                    _ => unreachable!(),
                }
                weight.gradient_component(&delta[..axes], axis)
            })
            .collect();
        let conv = circular_convolve(yg, &kernel, r);
        acc += conv.iter().zip(j.iter()).map(|(c, jj)| c * jj).sum::<f64>();
    }
    acc * yg.cell_volume() * yg.cell_volume()
}

/// Morawetz action M(t): the weighted pairing of the mass marginal with the
/// transverse momentum marginal,
///
/// ```text
///   M = sum_{y,y'} R(y') grad a(y - y') . J(y) dy^(d-1) dy'^(d-1)
/// ```
///
/// with displacements wrapped to the principal torus interval. Nondecreasing
/// in t along defocusing trajectories for both weights, and bounded by
/// mass^(3/2) |grad_y u| pointwise in t.
pub fn morawetz_action(f: &Field, weight: MorawetzWeight) -> f64 {
    let phys = f.in_rep(Representation::Physical);
    let r = marginal_values(&phys);
    let j = momentum_marginals(&phys);
    let yg = f.domain().ygrid();
    match yg.axes() {
        1 => action_direct_1d(yg, &r, &j[0], weight),
        _ => action_fft(yg, &r, &j, weight),
    }
}

/// Time series of the action for one weight, with running integrals of the
/// two quantities its growth controls: the squared fractional smoothing
/// norm of the marginal and a power of the sup-cube mass.
pub struct MorawetzSeries {
    weight: MorawetzWeight,
    mu: f64,
    sigma: f64,
    times: Vec<f64>,
    m_values: Vec<f64>,
    frac_norm_accum: Vec<f64>,
    cube_accum: Vec<f64>,
    mass: f64,
    max_grad_y: f64,
    prev_frac_sq: f64,
    prev_cube_pow: f64,
}

impl MorawetzSeries {
    /// `mu` is the cube half-width; `sigma` sets the cube-mass exponent
    /// sigma + 2 (match the run's nonlinearity).
    pub fn new(weight: MorawetzWeight, mu: f64, sigma: f64) -> MorawetzSeries {
        MorawetzSeries {
            weight,
            mu,
            sigma,
            times: Vec::new(),
            m_values: Vec::new(),
            frac_norm_accum: Vec::new(),
            cube_accum: Vec::new(),
            mass: 0.0,
            max_grad_y: 0.0,
            prev_frac_sq: 0.0,
            prev_cube_pow: 0.0,
        }
    }

    /// Record one snapshot; samples must arrive in increasing time order.
    /// The running integrals use trapezoid quadrature between samples.
    pub fn push(&mut self, f: &Field) -> Result<()> {
        let t = f.t();
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::invalid(
                    "t",
                    format!("samples must advance in time ({t} after {last})"),
                ));
            }
        }
        let phys = f.in_rep(Representation::Physical);
        let dom = f.domain();
        let yg = dom.ygrid();

        let r = marginal_values(&phys);
        let j = momentum_marginals(&phys);
        let m = match yg.axes() {
            1 => action_direct_1d(yg, &r, &j[0], self.weight),
            _ => action_fft(yg, &r, &j, self.weight),
        };

        // |grad_y u| from the derivative marginals' source arrays would need
        // the complex derivatives; recompute cheaply from the spectral side.
        let report = phys.norms(0.0, false);
        let order = (4.0 - dom.d() as f64) / 2.0;
        let marg = MarginalDensity { t, values: r };
        let frac_sq = fractional_y_norm(dom.ytrans(), &marg, order).powi(2);
        let cube_pow = cube_mass_sup(&phys, self.mu)?.powf(self.sigma + 2.0);

        if self.times.is_empty() {
            self.mass = report.mass;
            self.frac_norm_accum.push(0.0);
            self.cube_accum.push(0.0);
        } else {
            let dt = t - self.times.last().unwrap();
            let f_next =
                self.frac_norm_accum.last().unwrap() + 0.5 * dt * (self.prev_frac_sq + frac_sq);
            let c_next =
                self.cube_accum.last().unwrap() + 0.5 * dt * (self.prev_cube_pow + cube_pow);
            self.frac_norm_accum.push(f_next);
            self.cube_accum.push(c_next);
        }
        self.max_grad_y = self.max_grad_y.max(report.grad_y_norm);
        self.prev_frac_sq = frac_sq;
        self.prev_cube_pow = cube_pow;
        self.times.push(t);
        self.m_values.push(m);
        Ok(())
    }

    pub fn weight(&self) -> MorawetzWeight {
        self.weight
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn m_values(&self) -> &[f64] {
        &self.m_values
    }

    /// Running integral of the squared fractional norm of the marginal,
    /// one value per sample, starting at zero.
    pub fn frac_norm_accum(&self) -> &[f64] {
        &self.frac_norm_accum
    }

    /// Running integral of (sup-cube mass)^(sigma+2), one value per sample.
    pub fn cube_accum(&self) -> &[f64] {
        &self.cube_accum
    }

    /// mass^(3/2) times the largest transverse gradient norm seen: the
    /// a-priori bound on |M(t)|, used to normalize monotonicity defects.
    pub fn scale(&self) -> f64 {
        self.mass.powf(1.5) * self.max_grad_y
    }

    /// True when the action never retreats by more than tol * scale between
    /// consecutive samples.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let slack = tol * self.scale();
        self.m_values.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

/// See [`MorawetzSeries::is_monotone`].
pub fn morawetz_monotonicity(series: &MorawetzSeries, tol: f64) -> bool {
    series.is_monotone(tol)
}

/// Mixed space-time norm of a snapshot sequence, with the admissibility
/// flag for the transverse dispersive estimate.
pub struct SpacetimeNorm {
    pub value: f64,
    pub q: f64,
    pub r: f64,
    /// Whether 2/q + (d-1)/r = (d-1)/2 holds.
    pub admissible: bool,
}

/// Discrete L^q in t of L^r in y of L^2 in x. Pass f64::INFINITY for sup
/// norms in either slot; finite q uses trapezoid quadrature over the
/// snapshots' own time labels.
pub fn spacetime_norm(fields: &[Field], q: f64, r: f64) -> Result<SpacetimeNorm> {
    if !(q >= 1.0) || !(r >= 1.0) {
        return Err(Error::invalid("q", "exponents must be at least 1"));
    }
    if fields.is_empty() || (q.is_finite() && fields.len() < 2) {
        return Err(Error::invalid(
            "fields",
            "need at least two snapshots for a time integral (one for sup in t)",
        ));
    }
    for w in fields.windows(2) {
        if w[1].t() <= w[0].t() {
            return Err(Error::invalid("fields", "snapshots must advance in time"));
        }
    }

    let d = fields[0].domain().d() as f64;
    let q_inv = if q.is_finite() { 1.0 / q } else { 0.0 };
    let r_inv = if r.is_finite() { 1.0 / r } else { 0.0 };
    let admissible = (2.0 * q_inv + (d - 1.0) * r_inv - 0.5 * (d - 1.0)).abs() < 1e-12;

    let dx = fields[0].domain().xgrid().dx();
    let per_time: Vec<f64> = fields
        .iter()
        .map(|f| {
            let phys = f.in_rep(Representation::Physical);
            let yg = f.domain().ygrid();
            let data = phys.data();
            let mut acc = 0.0f64;
            for col in 0..data.ncols() {
                let l2x_sq: f64 = (0..data.nrows()).map(|i| data[[i, col]].norm_sqr()).sum();
                let l2x = (l2x_sq * dx).sqrt();
                if r.is_finite() {
                    acc += l2x.powf(r);
                } else {
                    acc = acc.max(l2x);
                }
            }
            if r.is_finite() {
                (acc * yg.cell_volume()).powf(1.0 / r)
            } else {
                acc
            }
        })
        .collect();

    let value = if q.is_finite() {
        let mut integral = 0.0;
        for (w, v) in fields.windows(2).zip(per_time.windows(2)) {
            let dt = w[1].t() - w[0].t();
            integral += 0.5 * dt * (v[0].powf(q) + v[1].powf(q));
        }
        integral.powf(1.0 / q)
    } else {
        per_time.iter().copied().fold(0.0, f64::max)
    };

    Ok(SpacetimeNorm {
        value,
        q,
        r,
        admissible,
    })
}

/// Least-squares line through (ln t, ln v) for raw samples (t, v).
/// Returns (slope, intercept).
pub fn fit_log_slope(samples: &[(f64, f64)]) -> (f64, f64) {
    assert!(samples.len() >= 2, "need at least two samples to fit");
    let n = samples.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in samples {
        let (x, y) = (t.ln(), v.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}

/// Fitted decay of the L^r space norm over a snapshot window.
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub warnings: Vec<Warning>,
}

/// Fit log |u(t)|_{L^r} against log t. Requires the open range
/// 2 < r < 2d/(d-2) (every such norm decays along dispersing solutions;
/// r = 2 is conserved) and strictly positive sample times.
pub fn decay_tracker(fields: &[Field], r: f64) -> Result<DecayFit> {
    if fields.len() < 2 {
        return Err(Error::invalid("fields", "need at least two snapshots"));
    }
    let d = fields[0].domain().d();
    let r_max = match d {
        3 => 6.0,
        _ => f64::INFINITY,
    };
    if !(r > 2.0) || !(r < r_max) {
        return Err(Error::invalid(
            "r",
            format!("decay exponent must lie in (2, {r_max}); got {r}"),
        ));
    }
    let mut warnings = Vec::new();
    let horizon = fields[0].domain().ygrid().wraparound_horizon();
    let mut samples = Vec::with_capacity(fields.len());
    let mut prev = 0.0;
    for f in fields {
        let t = f.t();
        if t <= 0.0 {
            return Err(Error::invalid(
                "fields",
                "log-log fit needs strictly positive times",
            ));
        }
        if t <= prev {
            return Err(Error::invalid("fields", "snapshots must advance in time"));
        }
        prev = t;
        let norm = f.lebesgue_norm(r);
        if norm <= 0.0 {
            return Err(Error::numerical(
                "vanishing norm in the decay window; nothing to fit",
            ));
        }
        samples.push((t, norm));
    }
    if prev > horizon {
        warnings.push(Warning::new(
            "horizon",
            format!(
                "fit window ends at t = {prev}, past the wraparound horizon {horizon:.3}; \
                 late samples may feel periodic images"
            ),
        ));
    }
    let (slope, intercept) = fit_log_slope(&samples);
    Ok(DecayFit {
        slope,
        intercept,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::EigenBasis;
    use crate::field::Domain;
    use crate::grid::{XGrid, YGrid};
    use crate::potential::Potential;
    use crate::propagator::{evolve, linear_step, SimConfig};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn domain() -> Arc<Domain> {
        let xg = XGrid::new(8.0, 96).unwrap();
        let basis = EigenBasis::build(&xg, &Potential::Harmonic { omega: 1.0 }, 32).unwrap();
        let yg = YGrid::new(2, 16.0, 128).unwrap();
        Domain::new(basis, yg)
    }

    fn domain_3d(n_x: usize, n_y: usize) -> Arc<Domain> {
        let xg = XGrid::new(6.0, n_x).unwrap();
        let basis = EigenBasis::build(&xg, &Potential::Harmonic { omega: 1.0 }, 8).unwrap();
        let yg = YGrid::new(3, 4.0, n_y).unwrap();
        Domain::new(basis, yg)
    }

    #[test]
    fn marginal_is_separable_and_sums_to_mass() {
        let dom = domain();
        let f = Field::gaussian(&dom, 0.7, 1.3, &[0.5], &[0.0]);
        let marg = marginal_density(&f);

        let yg = dom.ygrid();
        let total: f64 = marg.values.iter().sum::<f64>() * yg.cell_volume();
        let mass = f.mass();
        assert_abs_diff_eq!(total, mass, epsilon = 1e-12 * mass);

        // Separable datum: R is proportional to the y profile.
        let xsum: f64 = {
            let phys = f.in_rep(Representation::Physical);
            let data = phys.data();
            (0..data.nrows())
                .map(|i| data[[i, 0]].norm_sqr())
                .sum::<f64>()
                * dom.xgrid().dx()
        };
        let profile0 = (-(yg.y(0) - 0.5_f64).powi(2) / 1.3_f64.powi(2)).exp();
        let expected = xsum / profile0;
        for (col, v) in marg.values.iter().enumerate() {
            let prof = (-(yg.y(col) - 0.5_f64).powi(2) / 1.3_f64.powi(2)).exp();
            assert_abs_diff_eq!(*v, expected * prof, epsilon = 1e-12);
        }

        let zero = Field::zeros(&dom, Representation::Physical);
        assert!(marginal_density(&zero).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn fractional_norm_identity_and_single_mode() {
        let dom = domain();
        let yg = dom.ygrid();
        let ytrans = dom.ytrans();

        let f = Field::gaussian(&dom, 0.7, 1.0, &[0.0], &[0.3]);
        let marg = marginal_density(&f);
        let l2: f64 = (marg.values.iter().map(|v| v * v).sum::<f64>() * yg.cell_volume()).sqrt();
        let frac0 = fractional_y_norm(ytrans, &marg, 0.0);
        assert_abs_diff_eq!(frac0, l2, epsilon = 1e-12 * l2);

        // Single cosine mode: sqrt(l_y) |eta0|^order.
        let k0 = 3;
        let eta0 = k0 as f64 * PI / yg.l_y();
        let cosine = MarginalDensity {
            t: 0.0,
            values: (0..yg.n_cols()).map(|j| (eta0 * yg.y(j)).cos()).collect(),
        };
        for order in [0.5, 1.0] {
            let got = fractional_y_norm(ytrans, &cosine, order);
            let want = yg.l_y().sqrt() * eta0.powf(order);
            assert_abs_diff_eq!(got, want, epsilon = 1e-10 * want);
        }

        let zero = MarginalDensity {
            t: 0.0,
            values: vec![0.0; yg.n_cols()],
        };
        assert_eq!(fractional_y_norm(ytrans, &zero, 1.0), 0.0);
    }

    #[test]
    fn cube_mass_point_full_box_and_monotone() {
        let dom = domain();
        let yg = dom.ygrid();
        let (dx, dy) = (dom.xgrid().dx(), yg.dy());

        let mut spike = Field::zeros(&dom, Representation::Physical);
        spike.data_mut()[[40, 17]] = Complex64::new(0.0, 2.0);
        let got = cube_mass_sup(&spike, 0.6 * dx.max(dy)).unwrap();
        assert_abs_diff_eq!(got, 4.0 * dx * dy, epsilon = 1e-14);

        let f = Field::gaussian(&dom, 0.7, 1.0, &[0.4], &[0.0]);
        let full = cube_mass_sup(&f, 100.0).unwrap();
        let mass = f.mass();
        assert_abs_diff_eq!(full, mass, epsilon = 1e-12 * mass);

        let mut last = 0.0;
        for mu in [0.5, 1.0, 2.0, 4.0, 8.0, 20.0] {
            let v = cube_mass_sup(&f, mu).unwrap();
            assert!(v >= last - 1e-15, "not monotone at mu = {mu}");
            last = v;
        }

        assert!(cube_mass_sup(&f, 1e-3).is_err());
    }

    #[test]
    fn cube_mass_matches_brute_force() {
        let dom = domain();
        let yg = dom.ygrid();
        let f = Field::from_fn(&dom, |x, ys| {
            Complex64::new(
                (0.7 * x + 1.1 * ys[0]).sin(),
                (0.3 * x * ys[0]).cos() * 0.4,
            )
        });
        let phys = f.in_rep(Representation::Physical);
        let data = phys.data();
        let (n_x, n_cols) = data.dim();
        let (dx, dy) = (dom.xgrid().dx(), yg.dy());

        for mu in [0.4, 1.0, 3.7] {
            let hx = (mu / dx).floor() as isize;
            let hy = (mu / dy).floor() as isize;
            let mut best = 0.0f64;
            for ci in 0..n_x as isize {
                for cj in 0..n_cols as isize {
                    let mut acc = 0.0;
                    for i in (ci - hx).max(0)..=(ci + hx).min(n_x as isize - 1) {
                        for q in -hy..=hy {
                            let j = (cj + q).rem_euclid(n_cols as isize);
                            acc += data[[i as usize, j as usize]].norm_sqr();
                        }
                    }
                    best = best.max(acc);
                }
            }
            let want = best * dx * dy;
            let got = cube_mass_sup(&f, mu).unwrap();
            assert_abs_diff_eq!(got, want, epsilon = 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn action_vanishes_for_real_and_zero_fields() {
        let dom = domain();
        let f = Field::gaussian(&dom, 0.8, 1.0, &[1.0], &[0.0]);
        let scale = f.mass().powf(1.5) * f.norms(0.0, false).grad_y_norm;
        for w in [MorawetzWeight::Abs, MorawetzWeight::Japanese] {
            let m = morawetz_action(&f, w);
            assert!(m.abs() < 1e-12 * scale, "real field gave M = {m:.3e}");
        }
        let zero = Field::zeros(&dom, Representation::Physical);
        assert_eq!(morawetz_action(&zero, MorawetzWeight::Abs), 0.0);
    }

    #[test]
    fn action_respects_mass_gradient_bound() {
        let dom = domain();
        // Outward-moving asymmetric bump: nonzero momentum marginal.
        let f = Field::gaussian(&dom, 0.8, 1.2, &[0.7], &[0.9]);
        let report = f.norms(0.0, false);
        let bound = report.mass.powf(1.5) * report.grad_y_norm;
        for w in [MorawetzWeight::Abs, MorawetzWeight::Japanese] {
            let m = morawetz_action(&f, w);
            assert!(
                m.abs() <= bound * (1.0 + 1e-12),
                "{}: |M| = {:.6e} exceeds {:.6e}",
                w.label(),
                m.abs(),
                bound
            );
            assert!(m != 0.0);
        }
    }

    #[test]
    fn direct_sum_agrees_with_fft_convolution() {
        let dom = domain();
        let yg = dom.ygrid();
        let n = yg.n_cols();
        // Deterministic pseudo-random marginals.
        let r: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 101) as f64 / 101.0).collect();
        let j: Vec<f64> = (0..n)
            .map(|i| ((i * 53 + 29) % 97) as f64 / 97.0 - 0.5)
            .collect();
        for w in [MorawetzWeight::Abs, MorawetzWeight::Japanese] {
            let direct = action_direct_1d(yg, &r, &j, w);
            let fft = action_fft(yg, &r, &[j.clone()], w);
            assert_abs_diff_eq!(direct, fft, epsilon = 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn two_axis_action_matches_brute_force() {
        let dom = domain_3d(32, 8);
        let yg = dom.ygrid();
        let n = yg.n_y();
        let n_cols = yg.n_cols();
        let dy = yg.dy();
        let r: Vec<f64> = (0..n_cols).map(|i| ((i * 7 + 3) % 23) as f64 / 23.0).collect();
        let j: Vec<Vec<f64>> = (0..2)
            .map(|a| {
                (0..n_cols)
                    .map(|i| ((i * (13 + a) + 5) % 19) as f64 / 19.0 - 0.5)
                    .collect()
            })
            .collect();
        for w in [MorawetzWeight::Abs, MorawetzWeight::Japanese] {
            let mut brute = 0.0;
            for m in 0..n_cols {
                for jj in 0..n_cols {
                    let q1 = (m / n + n - jj / n) % n;
                    let q2 = (m % n + n - jj % n) % n;
                    let delta = [wrapped_delta(q1, n, dy), wrapped_delta(q2, n, dy)];
                    for axis in 0..2 {
                        brute +=
                            r[jj] * w.gradient_component(&delta, axis) * j[axis][m];
                    }
                }
            }
            brute *= yg.cell_volume() * yg.cell_volume();
            let fft = action_fft(yg, &r, &j, w);
            assert_abs_diff_eq!(fft, brute, epsilon = 1e-10 * brute.abs().max(1.0));
        }
    }

    #[test]
    fn series_is_monotone_on_a_defocusing_run() {
        let dom = domain();
        let u0 = Field::gaussian(&dom, 0.4, 1.0, &[0.0], &[0.0]);
        let cfg = SimConfig {
            sigma: 3.0,
            dt: 0.02,
            t_end: 1.5,
            linear_only: false,
            output_every: 15,
        };
        let mut abs = MorawetzSeries::new(MorawetzWeight::Abs, 1.0, cfg.sigma);
        let mut jap = MorawetzSeries::new(MorawetzWeight::Japanese, 1.0, cfg.sigma);
        evolve(u0, &cfg, |f, _| {
            abs.push(f)?;
            jap.push(f)
        })
        .unwrap();

        for series in [&abs, &jap] {
            assert!(series.times().len() >= 5);
            assert!(series.is_monotone(1e-6), "m = {:?}", series.m_values());
            let bound = series.scale() * (1.0 + 1e-12);
            for m in series.m_values() {
                assert!(m.abs() <= bound);
            }
            for acc in [series.frac_norm_accum(), series.cube_accum()] {
                assert!(acc.windows(2).all(|w| w[1] >= w[0]));
                assert!(*acc.last().unwrap() > 0.0);
            }
        }
        // The action genuinely moves on this run.
        assert!(abs.m_values().last().unwrap() > &1e-4);
    }

    #[test]
    fn spacetime_norm_sup_cases_and_admissibility() {
        let dom = domain();
        let u0 = Field::gaussian(&dom, 0.6, 1.0, &[0.0], &[0.0]);
        let mass = u0.mass();

        let mut snaps = Vec::new();
        for k in 0..4 {
            let mut f = u0.clone();
            linear_step(&mut f, 0.3 * k as f64);
            f.set_t(0.3 * k as f64 + 0.1);
            snaps.push(f);
        }
        let sup = spacetime_norm(&snaps, f64::INFINITY, 2.0).unwrap();
        assert_abs_diff_eq!(sup.value, mass.sqrt(), epsilon = 1e-12);
        // (inf, 2) is the trivial admissible endpoint in d = 2.
        assert!(sup.admissible);

        let adm = spacetime_norm(&snaps, 6.0, 6.0).unwrap();
        assert!(adm.admissible);
        assert!(adm.value > 0.0);
        let not_adm = spacetime_norm(&snaps, 4.0, 4.0).unwrap();
        assert!(!not_adm.admissible);

        let zeros = vec![
            Field::zeros(&dom, Representation::Physical),
            {
                let mut z = Field::zeros(&dom, Representation::Physical);
                z.set_t(1.0);
                z
            },
        ];
        assert_eq!(spacetime_norm(&zeros, 6.0, 6.0).unwrap().value, 0.0);

        assert!(spacetime_norm(&snaps[..1], 6.0, 6.0).is_err());
    }

    #[test]
    fn admissible_norm_saturates_along_free_flow() {
        let dom = domain();
        let u0 = Field::gaussian(&dom, 0.6, 1.0, &[0.0], &[0.0]);
        let mut snaps = Vec::new();
        for k in 0..=40 {
            let t = 0.5 * k as f64;
            let mut f = u0.clone();
            linear_step(&mut f, t);
            f.set_t(t + 1e-9);
            snaps.push(f);
        }
        let early = spacetime_norm(&snaps[..21], 6.0, 6.0).unwrap().value;
        let late = spacetime_norm(&snaps, 6.0, 6.0).unwrap().value;
        // Doubling the window barely moves the norm: the tail is integrable.
        assert!(late / early < 1.02, "early {early:.6}, late {late:.6}");
    }

    #[test]
    fn free_gaussian_decay_rate_is_one_quarter() {
        let xg = XGrid::new(8.0, 96).unwrap();
        let basis = EigenBasis::build(&xg, &Potential::Harmonic { omega: 1.0 }, 32).unwrap();
        let yg = YGrid::new(2, 32.0, 256).unwrap();
        let dom = Domain::new(basis, yg);
        let u0 = Field::gaussian(&dom, 0.6, 1.0, &[0.0], &[0.0]);

        let mut snaps = Vec::new();
        for k in 0..=12 {
            let t = 5.0 + k as f64;
            let mut f = u0.clone();
            linear_step(&mut f, t);
            f.set_t(t);
            snaps.push(f);
        }
        let fit = decay_tracker(&snaps, 4.0).unwrap();
        assert!(
            (fit.slope + 0.25).abs() < 0.05,
            "slope {:.4} (expected about -0.25)",
            fit.slope
        );
        assert!(fit.warnings.iter().any(|w| w.code == "horizon"));

        assert!(decay_tracker(&snaps, 2.0).is_err());
        let mut bad = snaps.clone();
        bad[0].set_t(0.0);
        assert!(decay_tracker(&bad, 4.0).is_err());
    }
}
