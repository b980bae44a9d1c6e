//! The commuting vector fields of the linear flow and their quantitative
//! properties: identity, sqrt(M) in x, the transverse gradient, and the
//! Galilean operator y + i t grad_y. All four commute with the linear
//! propagator; the first two exactly in this discretization, the Galilean one
//! up to boundary leakage on the periodic box, which the checks report
//! instead of hiding.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, Representation, YTransform};
use crate::propagator::linear_step;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VectorFieldId {
    /// A0: identity.
    Identity,
    /// A1: spectral multiplier sqrt(lambda_n).
    SqrtM,
    /// A2: i eta per transverse component.
    GradY,
    /// A3(t): y + i t grad_y per transverse component.
    Galilean { t: f64 },
}

impl VectorFieldId {
    pub fn label(&self) -> &'static str {
        match self {
            VectorFieldId::Identity => "identity",
            VectorFieldId::SqrtM => "sqrt_m",
            VectorFieldId::GradY => "grad_y",
            VectorFieldId::Galilean { .. } => "galilean",
        }
    }

    /// Same operator with the Galilean clock moved to `t`; no-op for the
    /// time-independent fields.
    fn at_time(&self, t: f64) -> VectorFieldId {
        match self {
            VectorFieldId::Galilean { .. } => VectorFieldId::Galilean { t },
            other => *other,
        }
    }
}

/// Result of applying a vector field: one component for the scalar operators,
/// one per transverse axis for the vector-valued ones.
pub struct VectorField {
    components: Vec<Field>,
}

impl VectorField {
    pub fn components(&self) -> &[Field] {
        &self.components
    }

    /// Root-sum-square of component L2 norms.
    pub fn l2_norm(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.mass())
            .sum::<f64>()
            .sqrt()
    }
}

/// Apply A_j to the resolved part of f.
pub fn apply_vector_field(id: &VectorFieldId, f: &Field) -> VectorField {
    match id {
        VectorFieldId::Identity => VectorField {
            components: vec![f.clone()],
        },
        VectorFieldId::SqrtM => {
            let mut g = f.in_rep(Representation::Spectral);
            let dom = g.domain().clone();
            dom.basis().apply_sqrt_m(g.data_mut());
            VectorField {
                components: vec![g],
            }
        }
        VectorFieldId::GradY => {
            let g = f.in_rep(Representation::Spectral);
            let dom = g.domain().clone();
            let axes = dom.ygrid().axes();
            let mut components = Vec::with_capacity(axes);
            for axis in 0..axes {
                let mut c = g.clone();
                for mut row in c.data_mut().outer_iter_mut() {
                    for (col, v) in row.iter_mut().enumerate() {
                        *v *= Complex64::new(0.0, dom.ytrans().eta_axis(col, axis));
                    }
                }
                components.push(c);
            }
            VectorField { components }
        }
        VectorFieldId::Galilean { t } => {
            let g = f.in_rep(Representation::Physical);
            let dom = g.domain().clone();
            let yg = dom.ygrid();
            let axes = yg.axes();
            let mut components = Vec::with_capacity(axes);
            for axis in 0..axes {
                let mut c = g.clone();
                // y u computed with the sawtooth coordinate in [-L_y, L_y).
                for col in 0..yg.n_cols() {
                    let y = yg.col_coords(col)[axis];
                    for i in 0..c.data().nrows() {
                        c.data_mut()[[i, col]] *= y;
                    }
                }
                let der = dom.ytrans().derivative(g.data(), axis);
                c.data_mut()
                    .zip_mut_with(&der, |a, b| *a += Complex64::new(0.0, *t) * b);
                components.push(c);
            }
            VectorField { components }
        }
    }
}

/// Commutation defect of A_j with the linear flow over time tau:
/// || A_j(t + tau) e^(-i tau H) f - e^(-i tau H) A_j(t) f || / || A_j(t) f ||,
/// measured in L2 (root-sum-square over components). The Galilean clock t is
/// the one carried by `id`; the defect is absolute when the denominator
/// vanishes.
pub fn check_commutation(id: &VectorFieldId, f: &Field, tau: f64) -> f64 {
    let t = match id {
        VectorFieldId::Galilean { t } => *t,
        _ => 0.0,
    };

    let mut flowed = f.clone();
    linear_step(&mut flowed, tau);
    let lhs = apply_vector_field(&id.at_time(t + tau), &flowed);

    let before = apply_vector_field(id, f);
    let denom = before.l2_norm();
    let mut defect_sq = 0.0;
    for (a, b) in lhs.components.iter().zip(before.components.iter()) {
        let mut bf = b.clone();
        linear_step(&mut bf, tau);
        let diff = a.in_rep(Representation::Spectral).sub(&bf);
        defect_sq += diff.mass();
    }
    let defect = defect_sq.sqrt();
    if denom == 0.0 {
        defect
    } else {
        defect / denom
    }
}

/// Both sides of the nonlinearity bound
/// || A_j (|u|^2s u) ||_(L2_x) <= (2s+1) ||u||_(Linf_x)^2s || A_j u ||_(L2_x),
/// evaluated per transverse line and maximized. For the identity and sqrt(M)
/// the bound is a discrete theorem (mean-value estimate on the difference
/// form), so violation is reported as a numerical error.
pub fn nonlinear_action_bound(
    id: &VectorFieldId,
    f: &Field,
    sigma: f64,
) -> Result<(f64, f64)> {
    // Work with the resolved representative so both sides see the same field.
    let u = f.in_rep(Representation::Spectral).in_rep(Representation::Physical);
    let mut nl = u.clone();
    for c in nl.data_mut().iter_mut() {
        let p = c.norm_sqr();
        *c *= p.powf(sigma);
    }

    let lines_lhs = per_line_l2(&apply_vector_field(id, &nl));
    let lines_aj = per_line_l2(&apply_vector_field(id, &u));
    let n_cols = u.domain().ygrid().n_cols();
    let mut lhs = 0.0f64;
    let mut rhs = 0.0f64;
    let factor = 2.0 * sigma + 1.0;
    for col in 0..n_cols {
        let linf = (0..u.data().nrows())
            .map(|i| u.data()[[i, col]].norm())
            .fold(0.0, f64::max);
        lhs = lhs.max(lines_lhs[col]);
        rhs = rhs.max(factor * linf.powf(2.0 * sigma) * lines_aj[col]);
    }

    if matches!(id, VectorFieldId::Identity | VectorFieldId::SqrtM) && lhs > rhs * (1.0 + 1e-6) {
        return Err(Error::numerical(format!(
            "nonlinearity action bound violated for {}: lhs {lhs:.6e} > rhs {rhs:.6e}",
            id.label()
        )));
    }
    Ok((lhs, rhs))
}

/// L2_x norm on every transverse line, root-sum-squared over components.
fn per_line_l2(vf: &VectorField) -> Vec<f64> {
    let first = vf.components.first().expect("at least one component");
    let dx = first.domain().xgrid().dx();
    let n_cols = first.domain().ygrid().n_cols();
    let mut acc = vec![0.0f64; n_cols];
    for comp in &vf.components {
        let phys = comp.in_rep(Representation::Physical);
        for row in phys.data().outer_iter() {
            for (col, c) in row.iter().enumerate() {
                acc[col] += c.norm_sqr();
            }
        }
    }
    acc.iter_mut().for_each(|v| *v = (*v * dx).sqrt());
    acc
}

/// Norm-equivalence data: the Z and Z-tilde norms against the corresponding
/// vector-field sums, plus the linear-flow isometry defect at time t.
#[derive(Debug, Clone, Serialize)]
pub struct NormEquivalence {
    pub t: f64,
    pub z_norm: f64,
    /// Sum over j = 0..2 of ||A_j f||.
    pub a_sum_z: f64,
    pub z_tilde_norm: f64,
    /// Sum over j = 0..3 of ||A_j(0) f||.
    pub a_sum_tilde_zero: f64,
    /// Sum over j = 0..3 of ||A_j(t) f||.
    pub a_sum_tilde_t: f64,
    /// | ||e^(-itH) f||_Z - ||f||_Z | / ||f||_Z.
    pub isometry_defect: f64,
    /// a_sum_tilde_t / a_sum_tilde_zero.
    pub tilde_ratio: f64,
}

/// Evaluate the equivalence report at Galilean time t. Two facts are checked
/// hard because they are exact in this discretization: the linear flow is a
/// Z-isometry, and the time-t sum stays within the triangle-inequality window
/// [1/(sqrt(2)(1+|t|)), sqrt(2)(1+|t|)] of the time-zero sum.
pub fn norm_equivalence_report(f: &Field, t: f64) -> Result<NormEquivalence> {
    let report = f.norms(1.0, false);
    let z_norm = report.z_norm;
    let z_tilde_norm = report.z_tilde_norm;

    let sum_norm = |ids: &[VectorFieldId]| -> f64 {
        ids.iter()
            .map(|id| apply_vector_field(id, f).l2_norm())
            .sum()
    };
    let a_sum_z = sum_norm(&[
        VectorFieldId::Identity,
        VectorFieldId::SqrtM,
        VectorFieldId::GradY,
    ]);
    let a_sum_tilde_zero = a_sum_z
        + apply_vector_field(&VectorFieldId::Galilean { t: 0.0 }, f).l2_norm();
    let a_sum_tilde_t =
        a_sum_z + apply_vector_field(&VectorFieldId::Galilean { t }, f).l2_norm();

    let mut flowed = f.clone();
    linear_step(&mut flowed, t);
    let z_after = flowed.norms(1.0, false).z_norm;
    let isometry_defect = if z_norm == 0.0 {
        (z_after - z_norm).abs()
    } else {
        ((z_after - z_norm) / z_norm).abs()
    };
    if isometry_defect > 1e-10 {
        return Err(Error::numerical(format!(
            "linear flow is not a Z-isometry: defect {isometry_defect:.3e} at t = {t}"
        )));
    }

    let tilde_ratio = if a_sum_tilde_zero == 0.0 {
        1.0
    } else {
        a_sum_tilde_t / a_sum_tilde_zero
    };
    let window = std::f64::consts::SQRT_2 * (1.0 + t.abs());
    if tilde_ratio > window || tilde_ratio < 1.0 / window {
        return Err(Error::numerical(format!(
            "Z-tilde sum ratio {tilde_ratio:.6} outside [{:.6}, {:.6}] at t = {t}",
            1.0 / window,
            window
        )));
    }

    Ok(NormEquivalence {
        t,
        z_norm,
        a_sum_z,
        z_tilde_norm,
        a_sum_tilde_zero,
        a_sum_tilde_t,
        isometry_defect,
        tilde_ratio,
    })
}

/// Fraction of mass in the outer 10% band of the transverse box, on any axis.
/// Galilean checks are only meaningful when this is tiny.
pub fn boundary_mass_fraction(f: &Field) -> f64 {
    let phys = f.in_rep(Representation::Physical);
    let yg = phys.domain().ygrid();
    let cut = 0.9 * yg.l_y();
    let mut outer = 0.0;
    let mut total = 0.0;
    for col in 0..yg.n_cols() {
        let near_edge = yg.col_coords(col).iter().any(|y| y.abs() >= cut);
        for i in 0..phys.data().nrows() {
            let p = phys.data()[[i, col]].norm_sqr();
            total += p;
            if near_edge {
                outer += p;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outer / total
    }
}

// Transverse-only machinery for the dispersive Gagliardo-Nirenberg check.
// A y-only function rides in a 1 x n_cols array so the shared transform
// applies unchanged.

/// Free transverse flow exp(i t laplacian_y / 2) on a y-only function.
pub fn free_y_evolve(ytrans: &YTransform, g: &mut Array2<Complex64>, t: f64) {
    ytrans.forward(g);
    for mut row in g.outer_iter_mut() {
        for (col, c) in row.iter_mut().enumerate() {
            *c *= Complex64::from_polar(1.0, -0.5 * t * ytrans.eta_sq()[col]);
        }
    }
    ytrans.inverse(g);
}

/// L^p norm of a y-only function.
pub fn y_lp_norm(ytrans: &YTransform, g: &Array2<Complex64>, p: f64) -> f64 {
    assert!(p >= 1.0);
    let vol = ytrans.grid().cell_volume();
    if p.is_infinite() {
        return g.iter().map(|c| c.norm()).fold(0.0, f64::max);
    }
    (g.iter().map(|c| c.norm().powf(p)).sum::<f64>() * vol).powf(1.0 / p)
}

/// || (y + i t grad_y) g ||, root-sum-squared over axes.
pub fn y_galilean_norm(ytrans: &YTransform, g: &Array2<Complex64>, t: f64) -> f64 {
    let yg = ytrans.grid();
    let vol = yg.cell_volume();
    let mut acc = 0.0;
    for axis in 0..yg.axes() {
        let der = ytrans.derivative(g, axis);
        for col in 0..yg.n_cols() {
            let y = yg.col_coords(col)[axis];
            let v = y * g[[0, col]] + Complex64::new(0.0, t) * der[[0, col]];
            acc += v.norm_sqr();
        }
    }
    (acc * vol).sqrt()
}

/// Dispersive Gagliardo-Nirenberg data for a y-only function:
/// lhs = ||g||_(L^p_y), scale = |t|^(-delta) ||g||^(1-delta) ||A3(t) g||^delta
/// with delta = (d-1)(1/2 - 1/p), and ratio = lhs / scale (the constant the
/// inequality would need). Zero input returns zeros.
pub fn gn_ratio(
    ytrans: &YTransform,
    g: &Array2<Complex64>,
    t: f64,
    p: f64,
) -> Result<(f64, f64, f64)> {
    if t == 0.0 {
        return Err(Error::invalid("t", "the dispersive bound needs t != 0"));
    }
    if p < 2.0 {
        return Err(Error::invalid("p", "exponent must be at least 2"));
    }
    let mass_norm = y_lp_norm(ytrans, g, 2.0);
    if mass_norm == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let d = ytrans.grid().d() as f64;
    let delta = (d - 1.0) * (0.5 - 1.0 / p);
    let lhs = y_lp_norm(ytrans, g, p);
    let galilean = y_galilean_norm(ytrans, g, t);
    let scale = t.abs().powf(-delta) * mass_norm.powf(1.0 - delta) * galilean.powf(delta);
    let ratio = if scale == 0.0 { f64::INFINITY } else { lhs / scale };
    Ok((lhs, scale, ratio))
}

/// Calibrate the inequality constant as the maximal ratio over a fixed family
/// of Gaussians (widths, offsets, velocities) at a few reference times.
pub fn calibrate_gn_constant(ytrans: &YTransform, p: f64) -> Result<f64> {
    let yg = ytrans.grid();
    let mut worst = 0.0f64;
    for &width in &[0.5, 1.0, 2.0] {
        for &center in &[0.0, 0.25 * yg.l_y()] {
            for &vel in &[0.0, 1.0] {
                let mut g = Array2::<Complex64>::zeros((1, yg.n_cols()));
                for col in 0..yg.n_cols() {
                    let ys = yg.col_coords(col);
                    let r2: f64 = ys.iter().map(|y| (y - center) * (y - center)).sum();
                    let phase: f64 = ys.iter().map(|y| vel * y).sum();
                    g[[0, col]] =
                        Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase);
                }
                for &t in &[0.5, 1.0, 2.0, 4.0] {
                    let (_, _, ratio) = gn_ratio(ytrans, &g, t, p)?;
                    worst = worst.max(ratio);
                }
            }
        }
    }
    Ok(worst)
}
