//! Asymptotic states and wave operators for the interaction picture.
//!
//! Two complementary questions about the same flow. Forward: does a given
//! datum settle into free motion? Answered by sampling v(t) = e^{itH} u(t)
//! at a checkpoint ladder and watching the increments contract. Backward:
//! which trajectory matches a prescribed free state in the far past?
//! Answered by Picard iteration of the backward Duhamel integral
//!
//! ```text
//!   u(t) = e^{-itH} u_- - i * int_{-T}^{t} e^{-i(t-s)H} |u|^(2 sigma) u(s) ds
//! ```
//!
//! on a uniform time slab, iterated on the whole slab at once (Jacobi style:
//! every integrand sample of a sweep comes from the previous iterate).

use num_complex::Complex64;

use crate::error::{Error, Result, Warning};
use crate::field::{z_distance, Field, Representation};
use crate::propagator::{apply_table, evolve, linear_step, phase_table, SimConfig};

/// Norm in which ladder increments are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMetric {
    /// Coefficient weight 1 + lambda_n + |eta|^2.
    Z,
    /// Z plus the transverse moment |y u|.
    ZTilde,
}

/// Knobs for `detect_asymptotic_state` beyond the ladder itself.
#[derive(Debug, Clone)]
pub struct ScatterOptions {
    pub metric: ConvergenceMetric,
    /// Refuse outright (instead of warning) when the ladder runs past the
    /// wraparound horizon of the periodic y-box.
    pub strict_horizon: bool,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        ScatterOptions {
            metric: ConvergenceMetric::Z,
            strict_horizon: false,
        }
    }
}

/// Interaction-picture ladder: v(t_k) sampled at the checkpoints, with
/// successive distances and a geometric tail estimate.
pub struct ScatterReport {
    pub times: Vec<f64>,
    /// increments[k] = distance from v(times[k]) to v(times[k+1]); one entry
    /// shorter than `times`.
    pub increments: Vec<f64>,
    /// Remaining-sum estimate from the last two increments, treating the
    /// tail as geometric. Infinite when the ladder is not contracting.
    pub tail_estimate: f64,
    /// v at the last checkpoint: the candidate free datum. Its time label
    /// records where it was extracted.
    pub u_plus: Field,
    pub converged: bool,
    pub warnings: Vec<Warning>,
}

/// Undo the free flow: v = e^{itH} u(t), using the field's own time label.
/// The trajectory of v is constant exactly when u solves the linear
/// equation, and the map preserves every coefficient modulus, hence the
/// Z-norm.
pub fn interaction_picture(f: &Field) -> Field {
    let mut v = f.clone();
    linear_step(&mut v, -f.t());
    v
}

fn metric_distance(a: &Field, b: &Field, metric: ConvergenceMetric) -> f64 {
    match metric {
        ConvergenceMetric::Z => z_distance(a, b),
        ConvergenceMetric::ZTilde => {
            let diff = a
                .in_rep(Representation::Spectral)
                .sub(&b.in_rep(Representation::Spectral));
            diff.norms(0.0, false).z_tilde_norm
        }
    }
}

/// Evolve `u0` under `cfg` (which supplies sigma, dt and the linear flag;
/// segment ends come from the checkpoint list) and measure how fast the
/// interaction picture freezes. Converged means the last increment and the
/// geometric tail both sit below `tol`.
pub fn detect_asymptotic_state(
    cfg: &SimConfig,
    u0: &Field,
    checkpoints: &[f64],
    tol: f64,
) -> Result<ScatterReport> {
    detect_asymptotic_state_with(cfg, u0, checkpoints, tol, &ScatterOptions::default())
}

pub fn detect_asymptotic_state_with(
    cfg: &SimConfig,
    u0: &Field,
    checkpoints: &[f64],
    tol: f64,
    opts: &ScatterOptions,
) -> Result<ScatterReport> {
    if checkpoints.len() < 2 {
        return Err(Error::invalid(
            "checkpoints",
            "need at least two checkpoints to form an increment",
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "tolerance must be positive"));
    }
    let t0 = u0.t();
    let mut prev = t0;
    for (i, &tk) in checkpoints.iter().enumerate() {
        if !(tk > prev) {
            return Err(Error::invalid(
                "checkpoints",
                format!(
                    "checkpoints must be strictly increasing and later than the \
                     datum time {t0}; entry {i} is {tk}"
                ),
            ));
        }
        let steps = (tk - t0) / cfg.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::invalid(
                "checkpoints",
                format!("checkpoint {tk} is not a whole number of dt = {} steps", cfg.dt),
            ));
        }
        prev = tk;
    }

    let mut warnings = Vec::new();
    let horizon = u0.domain().ygrid().wraparound_horizon();
    let t_last = *checkpoints.last().unwrap();
    if t_last - t0 > horizon {
        if opts.strict_horizon {
            return Err(Error::invalid(
                "checkpoints",
                format!(
                    "ladder runs to t = {t_last}, past the wraparound horizon \
                     {horizon:.3} of the y-box; enlarge l_y or refuse less strictly"
                ),
            ));
        }
        warnings.push(Warning::new(
            "horizon",
            format!(
                "ladder runs to t = {t_last}, past the wraparound horizon {horizon:.3}; \
                 late increments may feel periodic images"
            ),
        ));
    }
    let d = u0.domain().d() as f64;
    if !cfg.linear_only && cfg.sigma <= 2.0 / (d - 1.0) {
        warnings.push(Warning::new(
            "sigma-regime",
            format!(
                "sigma = {} is at or below 2/(d-1) = {}; free asymptotics are not \
                 expected (long-range regime)",
                cfg.sigma,
                2.0 / (d - 1.0)
            ),
        ));
    }

    let mut state = u0.clone();
    let mut pictures: Vec<Field> = Vec::with_capacity(checkpoints.len());
    for &tk in checkpoints {
        let seg = SimConfig {
            sigma: cfg.sigma,
            dt: cfg.dt,
            t_end: tk,
            linear_only: cfg.linear_only,
            output_every: usize::MAX,
        };
        let rec = evolve(state, &seg, |_, _| Ok(()))?;
        state = rec.final_field;
        pictures.push(interaction_picture(&state));
    }

    let increments: Vec<f64> = pictures
        .windows(2)
        .map(|w| metric_distance(&w[0], &w[1], opts.metric))
        .collect();

    let u_plus = pictures.pop().unwrap();
    let scale = match opts.metric {
        ConvergenceMetric::Z => u_plus.norms(0.0, false).z_norm,
        ConvergenceMetric::ZTilde => u_plus.norms(0.0, false).z_tilde_norm,
    };
    let last = *increments.last().unwrap();
    let tail_estimate = if last == 0.0 {
        0.0
    } else if increments.len() < 2 {
        // No ratio to extrapolate with; the one increment is all we know.
        last
    } else {
        let prev = increments[increments.len() - 2];
        let r = last / prev;
        if r < 1.0 {
            last * r / (1.0 - r)
        } else if last < 1e-12 * scale {
            // Round-off plateau: the increments are noise, not a trend, and
            // extrapolating them geometrically would predict motion that is
            // not there.
            last
        } else {
            f64::INFINITY
        }
    };
    let converged = last < tol && tail_estimate < tol;

    Ok(ScatterReport {
        times: checkpoints.to_vec(),
        increments,
        tail_estimate,
        u_plus,
        converged,
        warnings,
    })
}

/// Parameters for the far-past slab construction. The slab covers
/// [-t_far, -t_near] with `dt` both the node spacing and the Duhamel
/// quadrature step (and the step of the direct oracle run).
#[derive(Debug, Clone)]
pub struct WaveOpParams {
    pub sigma: f64,
    pub t_far: f64,
    pub t_near: f64,
    pub dt: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Drop the nonlinear term; the iteration then fixes at the free flow.
    pub linear_only: bool,
    pub strict_horizon: bool,
}

impl WaveOpParams {
    pub fn new(sigma: f64, t_far: f64, t_near: f64, dt: f64) -> WaveOpParams {
        WaveOpParams {
            sigma,
            t_far,
            t_near,
            dt,
            max_iter: 25,
            tol: 1e-10,
            linear_only: false,
            strict_horizon: false,
        }
    }
}

/// Outcome of the slab iteration.
pub struct WaveOpResult {
    /// Picard solution at the right end of the slab, t = -t_near.
    pub u_near: Field,
    /// Sup-over-slab L2 distance between consecutive sweeps, one per sweep.
    pub picard_residuals: Vec<f64>,
    pub iterations: usize,
    /// L2 distance at -t_near from a direct split-step run seeded with the
    /// same state at -t_far.
    pub oracle_discrepancy: f64,
    pub warnings: Vec<Warning>,
}

fn history_string(residuals: &[f64]) -> String {
    residuals
        .iter()
        .map(|r| format!("{r:.3e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// |u|^(2 sigma) u as spectral coefficients.
fn nonlinear_coeffs(f: &Field, sigma: f64) -> Field {
    let mut g = f.in_rep(Representation::Physical);
    let int_sigma = if sigma.fract() == 0.0 && sigma >= 1.0 && sigma <= 16.0 {
        Some(sigma as i32)
    } else {
        None
    };
    for c in g.data_mut().iter_mut() {
        let p = c.norm_sqr();
        *c *= match int_sigma {
            Some(k) => p.powi(k),
            None => p.powf(sigma),
        };
    }
    g.to_spectral();
    g
}

/// Construct the trajectory that emanates from the free state `u_minus` in
/// the far past, by fixed-point iteration of the backward Duhamel formula on
/// the slab [-t_far, -t_near].
///
/// Each sweep rebuilds every node from the previous sweep's nonlinear
/// samples: trapezoid quadrature in s, exact linear propagation of every
/// sample, accumulated left to right, so a full sweep costs one nonlinear
/// evaluation and one phase multiply per node.
pub fn wave_operator(u_minus: &Field, params: &WaveOpParams) -> Result<WaveOpResult> {
    let WaveOpParams {
        sigma,
        t_far,
        t_near,
        dt,
        max_iter,
        tol,
        linear_only,
        strict_horizon,
    } = *params;

    if !(t_near > 0.0) || !(t_far > t_near) {
        return Err(Error::invalid(
            "t_far",
            format!("need t_far > t_near > 0; got t_far = {t_far}, t_near = {t_near}"),
        ));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", "slab spacing must be positive"));
    }
    let span = t_far - t_near;
    let j_max = (span / dt).round() as usize;
    if j_max == 0 || (j_max as f64 * dt - span).abs() > 1e-9 * span {
        return Err(Error::invalid(
            "dt",
            format!("slab [{}, {}] is not a whole number of dt = {dt} nodes", -t_far, -t_near),
        ));
    }
    if max_iter == 0 {
        return Err(Error::invalid("max_iter", "need at least one sweep"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "tolerance must be positive"));
    }
    if !linear_only && !(sigma > 0.0) {
        return Err(Error::invalid("sigma", "nonlinearity power must be positive"));
    }

    let mut warnings = Vec::new();
    let horizon = u_minus.domain().ygrid().wraparound_horizon();
    if t_far > horizon {
        if strict_horizon {
            return Err(Error::invalid(
                "t_far",
                format!(
                    "slab reaches t = {}, past the wraparound horizon {horizon:.3} \
                     of the y-box",
                    -t_far
                ),
            ));
        }
        warnings.push(Warning::new(
            "horizon",
            format!(
                "slab reaches t = {}, past the wraparound horizon {horizon:.3}; \
                 the constructed trajectory feels periodic images",
                -t_far
            ),
        ));
    }
    let d = u_minus.domain().d() as f64;
    if !linear_only {
        if sigma < 2.0 / d {
            warnings.push(Warning::new(
                "sigma-regime",
                format!(
                    "sigma = {sigma} is below 2/d = {}; no known wave-operator \
                     regime applies",
                    2.0 / d
                ),
            ));
        } else if sigma < 2.0 / (d - 1.0) {
            warnings.push(Warning::new(
                "sigma-regime",
                format!(
                    "sigma = {sigma} is below 2/(d-1) = {}; convergence holds in the \
                     moment-weighted topology only",
                    2.0 / (d - 1.0)
                ),
            ));
        }
    }

    // Free-flow slab: node j holds e^{-i t_j H} u_minus, t_j = -t_far + j dt.
    let step_table = phase_table(u_minus, dt);
    let mut slab: Vec<Field> = Vec::with_capacity(j_max + 1);
    {
        let mut cur = u_minus.in_rep(Representation::Spectral);
        linear_step(&mut cur, -t_far);
        for j in 0..=j_max {
            if j > 0 {
                apply_table(&mut cur, &step_table);
            }
            cur.set_t(-t_far + j as f64 * dt);
            slab.push(cur.clone());
        }
    }
    let seed = slab[0].clone();

    let half_dt = Complex64::new(0.5 * dt, 0.0);
    let minus_i = Complex64::new(0.0, -1.0);
    let mut residuals: Vec<f64> = Vec::new();
    let mut converged = false;

    for sweep in 0..max_iter {
        let mut worst = 0.0f64;
        if linear_only {
            // The integrand vanishes, so the free slab is already the fixed
            // point; one zero-residual sweep records that.
            residuals.push(0.0);
            converged = true;
            break;
        }
        // Running objects along the slab: the free solution, the trapezoid
        // prefix S_j (spectral), and the previous node's nonlinear sample.
        let mut lin = seed.clone();
        let mut s = Field::zeros(u_minus.domain(), Representation::Spectral);
        let mut prev_f = nonlinear_coeffs(&slab[0], sigma);
        for j in 1..=j_max {
            apply_table(&mut lin, &step_table);
            let f_j = nonlinear_coeffs(&slab[j], sigma);
            // S_j = e^{-i dt H} (S_{j-1} + dt/2 F_{j-1}) + dt/2 F_j, which
            // reproduces the trapezoid rule with exact propagation of every
            // sample at one phase multiply per node.
            s.add_scaled(half_dt, &prev_f);
            apply_table(&mut s, &step_table);
            s.add_scaled(half_dt, &f_j);
            prev_f = f_j;

            let mut new = lin.clone();
            new.add_scaled(minus_i, &s);
            new.set_t(-t_far + j as f64 * dt);
            let dev: f64 = new
                .data()
                .iter()
                .zip(slab[j].data().iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            worst = worst.max(dev.sqrt());
            slab[j] = new;
        }
        if !worst.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite residual in Picard sweep {}",
                sweep + 1
            )));
        }
        residuals.push(worst);
        if worst <= tol {
            converged = true;
            break;
        }
        // Two consecutive doublings mean the fixed-point map is expanding;
        // further sweeps only overflow.
        let m = residuals.len();
        if m >= 3 && residuals[m - 1] > 2.0 * residuals[m - 2] && residuals[m - 2] > 2.0 * residuals[m - 3] {
            return Err(Error::numerical(format!(
                "Picard iteration diverging; the datum is too large for the far-past \
                 contraction on this slab; history: [{}]",
                history_string(&residuals)
            )));
        }
    }

    if !converged {
        let last = *residuals.last().unwrap();
        let ratio = if residuals.len() >= 2 {
            let prev = residuals[residuals.len() - 2];
            if prev > 0.0 {
                last / prev
            } else {
                f64::INFINITY
            }
        } else {
            f64::NAN
        };
        let history = history_string(&residuals);
        return Err(Error::numerical(if ratio > 0.9 && ratio <= 1.05 {
            format!(
                "Picard residual stalled at {last:.3e} (tolerance {tol:.1e} sits below \
                 the floor attainable at dt = {dt}; refine the slab or relax tol); \
                 history: [{history}]"
            )
        } else {
            format!(
                "Picard iteration still at residual {last:.3e} after {max_iter} sweeps \
                 (tolerance {tol:.1e}); history: [{history}]"
            )
        }));
    }

    // Direct oracle: march the same far-past state forward with the
    // split-step propagator and compare at -t_near.
    let oracle_cfg = SimConfig {
        sigma,
        dt,
        t_end: -t_near,
        linear_only,
        output_every: usize::MAX,
    };
    let direct = evolve(seed, &oracle_cfg, |_, _| Ok(()))?;
    let u_near = slab.pop().unwrap();
    let oracle_discrepancy = {
        let diff = u_near.sub(&direct.final_field.in_rep(Representation::Spectral));
        diff.mass().sqrt()
    };

    Ok(WaveOpResult {
        u_near,
        iterations: residuals.len(),
        picard_residuals: residuals,
        oracle_discrepancy,
        warnings,
    })
}
