//! End-to-end acceptance gate: the quantitative guarantees this crate makes,
//! one numbered check per test, each printing a single PASS/FAIL line.
//!
//! Reference setup throughout, unless a check says otherwise: d = 2, harmonic
//! well omega = 1 on (-10, 10) with 512 interior points, transverse box
//! half-width 64 with 1024 points, sigma = 3, dt = 0.01, and the datum
//! 0.3 * (mass-normalized width-1 Gaussian), i.e. mass 0.09. The mode count
//! is not part of the contract; 32 modes carry the datum to machine accuracy
//! and keep the long runs affordable.

use std::sync::Arc;

use num_complex::Complex64;

use confined_nls::cli::{self, Command};
use confined_nls::diagnostics::{
    cube_mass_sup, fractional_y_norm, marginal_density, morawetz_monotonicity, decay_tracker,
    MorawetzSeries, MorawetzWeight,
};
use confined_nls::eigenbasis::EigenBasis;
use confined_nls::field::{Domain, Field, Representation};
use confined_nls::grid::{XGrid, YGrid};
use confined_nls::inequalities::{
    check_anisotropic_gn, check_b_embedding, generate_ensemble, EnsembleGenerator, EnsembleSpec,
    InequalityParams,
};
use confined_nls::potential::Potential;
use confined_nls::propagator::{evolve, linear_step, SimConfig};
use confined_nls::scattering::{detect_asymptotic_state, wave_operator, WaveOpParams};
use confined_nls::vectorfields::{check_commutation, nonlinear_action_bound, VectorFieldId};

const SIGMA: f64 = 3.0;
const DT: f64 = 0.01;

fn verdict(index: usize, name: &str, ok: bool, detail: &str) {
    let word = if ok { "PASS" } else { "FAIL" };
    let line = format!("check {index:02} {name}: {word} ({detail})");
    println!("{line}");
    assert!(ok, "{line}");
}

fn reference_domain() -> Arc<Domain> {
    let xg = XGrid::new(10.0, 512).unwrap();
    let basis = EigenBasis::build(&xg, &Potential::Harmonic { omega: 1.0 }, 32).unwrap();
    let yg = YGrid::new(2, 64.0, 1024).unwrap();
    Domain::new(basis, yg)
}

/// 0.3 times the mass-normalized width-1 Gaussian: mass exactly 0.09.
fn reference_datum(domain: &Arc<Domain>) -> Field {
    let mut f = Field::gaussian(domain, 1.0, 1.0, &[0.0], &[0.0]);
    let scale = 0.3 / f.mass().sqrt();
    f.scale(Complex64::new(scale, 0.0));
    f
}

fn sim_config(dt: f64, t_end: f64, output_every: usize) -> SimConfig {
    SimConfig {
        sigma: SIGMA,
        dt,
        t_end,
        linear_only: false,
        output_every,
    }
}

#[test]
fn check_01_mass_conservation_over_ten_thousand_steps() {
    let domain = reference_domain();
    let datum = reference_datum(&domain);
    let cfg = sim_config(DT, 100.0, 100);
    let rec = evolve(datum, &cfg, |_, _| Ok(())).unwrap();
    let m0 = rec.reports[0].mass;
    let drift = rec
        .reports
        .iter()
        .map(|r| (r.mass - m0).abs() / m0)
        .fold(0.0, f64::max);
    verdict(
        1,
        "mass conservation",
        rec.steps == 10_000 && drift <= 1e-10,
        &format!("relative drift {drift:.3e} over {} steps, bound 1e-10", rec.steps),
    );
}

#[test]
fn check_02_energy_drift_shrinks_fourfold_under_half_step() {
    let domain = reference_domain();
    let drift_at = |dt: f64| {
        let datum = reference_datum(&domain);
        let rec = evolve(datum, &sim_config(dt, 2.0, 1), |_, _| Ok(())).unwrap();
        let e0 = rec.reports[0].energy;
        rec.reports
            .iter()
            .map(|r| (r.energy - e0).abs() / e0.abs())
            .fold(0.0, f64::max)
    };
    let coarse = drift_at(DT);
    let fine = drift_at(DT / 2.0);
    let ratio = coarse / fine;
    verdict(
        2,
        "energy drift order",
        (3.4..=4.6).contains(&ratio),
        &format!("drift {coarse:.3e} vs {fine:.3e}, ratio {ratio:.3} in [3.4, 4.6]"),
    );
}

#[test]
fn check_03_linear_flow_is_a_z_isometry() {
    let domain = reference_domain();
    let datum = reference_datum(&domain);
    let z0 = datum.norms(SIGMA, false).z_norm;
    let mut worst = 0.0f64;
    for t in [1.0, 10.0, 50.0] {
        let mut f = datum.clone();
        linear_step(&mut f, t);
        let z = f.norms(SIGMA, false).z_norm;
        worst = worst.max((z - z0).abs());
    }
    verdict(
        3,
        "Z-isometry of the linear flow",
        worst <= 1e-10 * z0,
        &format!("worst |Z(t) - Z(0)| = {worst:.3e}, bound {:.3e}", 1e-10 * z0),
    );
}

/// The eigenvalue bound needs the grid to resolve mode 10: the solver is
/// second order in dx, and on the 512-point reference grid its error at
/// n = 10 is 1.1e-2, an order above the bound for any correct second-order
/// scheme. 2048 points bring it under 1e-3; the dx -> dx/2 clause is then
/// measured against 4096.
#[test]
fn check_04_harmonic_spectrum_accuracy_and_orthonormality() {
    let pot = Potential::Harmonic { omega: 1.0 };
    let spectrum_err = |n_x: usize| {
        let xg = XGrid::new(10.0, n_x).unwrap();
        let basis = EigenBasis::build(&xg, &pot, 12).unwrap();
        (0..=10)
            .map(|n| (basis.eigenvalue(n) - (n as f64 + 0.5)).abs())
            .fold(0.0, f64::max)
    };
    let err_coarse = spectrum_err(2048);
    let err_fine = spectrum_err(4096);
    let ratio = err_coarse / err_fine;

    let xg = XGrid::new(10.0, 2048).unwrap();
    let basis = EigenBasis::build(&xg, &pot, 12).unwrap();
    let modes = basis.modes();
    let gram = modes.t().dot(&modes) * xg.dx();
    let mut ortho = 0.0f64;
    for i in 0..basis.n_modes() {
        for j in 0..basis.n_modes() {
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((gram[[i, j]] - target).abs());
        }
    }

    verdict(
        4,
        "harmonic spectrum",
        err_coarse <= 1e-3 && (3.4..=4.6).contains(&ratio) && ortho <= 1e-10,
        &format!(
            "max |lambda_n - (n + 1/2)| = {err_coarse:.3e} at 2048 pts, \
             refinement ratio {ratio:.2}, orthonormality defect {ortho:.3e}"
        ),
    );
}

#[test]
fn check_05_vectorfields_commute_with_the_linear_flow() {
    let domain = reference_domain();
    let datum = reference_datum(&domain);
    let ids = [
        VectorFieldId::Identity,
        VectorFieldId::SqrtM,
        VectorFieldId::GradY,
        VectorFieldId::Galilean { t: 0.0 },
    ];
    let mut worst_exact = 0.0f64;
    let mut worst_galilean = 0.0f64;
    for tau in [0.25, 1.0] {
        for (j, id) in ids.iter().enumerate() {
            let defect = check_commutation(id, &datum, tau);
            if j < 3 {
                worst_exact = worst_exact.max(defect);
            } else {
                worst_galilean = worst_galilean.max(defect);
            }
        }
    }
    verdict(
        5,
        "vectorfield commutation",
        worst_exact <= 1e-10 && worst_galilean <= 1e-6,
        &format!(
            "defects: j <= 2 worst {worst_exact:.3e} (bound 1e-10), \
             Galilean worst {worst_galilean:.3e} (bound 1e-6)"
        ),
    );
}

#[test]
fn check_06_nonlinearity_action_bound_on_a_random_ensemble() {
    let domain = reference_domain();
    let spec = EnsembleSpec {
        count: 100,
        seed: 7,
        generator: EnsembleGenerator::GaussianRandomField {
            corr_x: 1.0,
            corr_y: 1.0,
        },
    };
    let fields = generate_ensemble(&domain, &spec);
    let mut worst = 0.0f64;
    for f in &fields {
        for id in [VectorFieldId::Identity, VectorFieldId::SqrtM] {
            let (lhs, rhs) = nonlinear_action_bound(&id, f, SIGMA).unwrap();
            worst = worst.max(lhs / rhs);
        }
    }
    verdict(
        6,
        "nonlinearity action bound",
        worst <= 1.0 + 1e-6,
        &format!("max lhs/rhs = {worst:.9} over 100 members, bound 1 + 1e-6"),
    );
}

#[test]
fn check_07_interaction_picture_settles_to_an_asymptotic_state() {
    let domain = reference_domain();
    let datum = reference_datum(&domain);
    let cfg = sim_config(DT, 32.0, 100);
    let report =
        detect_asymptotic_state(&cfg, &datum, &[2.0, 4.0, 8.0, 16.0, 32.0], 1e-3).unwrap();
    let decreasing = report.increments.windows(2).all(|w| w[1] < w[0]);
    let last = *report.increments.last().unwrap();
    let mass_gap = (report.u_plus.mass() - datum.mass()).abs() / datum.mass();
    let incs: Vec<String> = report.increments.iter().map(|v| format!("{v:.2e}")).collect();
    verdict(
        7,
        "asymptotic state ladder",
        decreasing && last < 1e-3 && mass_gap <= 1e-8,
        &format!(
            "increments [{}] strictly decreasing, final < 1e-3, \
             free-datum mass gap {mass_gap:.2e} (bound 1e-8)",
            incs.join(", ")
        ),
    );
}

#[test]
fn check_08_wave_operator_picard_iteration_contracts() {
    let domain = reference_domain();
    let u_minus = reference_datum(&domain);
    let mut params = WaveOpParams::new(SIGMA, 40.0, 5.0, 0.25);
    params.tol = 1e-9;
    params.max_iter = 10;
    let result = wave_operator(&u_minus, &params).unwrap();
    let worst_ratio = result
        .picard_residuals
        .windows(2)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);
    let res: Vec<String> = result
        .picard_residuals
        .iter()
        .map(|v| format!("{v:.2e}"))
        .collect();
    verdict(
        8,
        "wave operator contraction",
        worst_ratio < 0.8 && result.oracle_discrepancy <= 1e-4,
        &format!(
            "residuals [{}], worst ratio {worst_ratio:.2e} (bound 0.8), \
             direct-seeding discrepancy {:.3e} (bound 1e-4)",
            res.join(", "),
            result.oracle_discrepancy
        ),
    );
}

#[test]
fn check_09_morawetz_action_is_monotone_and_a_priori_bounded() {
    let domain = reference_domain();
    let datum = reference_datum(&domain);
    let mut series = [
        MorawetzSeries::new(MorawetzWeight::Abs, 1.0, SIGMA),
        MorawetzSeries::new(MorawetzWeight::Japanese, 1.0, SIGMA),
    ];
    let mut grads: Vec<f64> = Vec::new();
    let cfg = sim_config(DT, 2.0, 10);
    let rec = evolve(datum, &cfg, |f, report| {
        for s in series.iter_mut() {
            s.push(f)?;
        }
        grads.push(report.grad_y_norm);
        Ok(())
    })
    .unwrap();
    let mass = rec.reports[0].mass;

    let mut ok = true;
    let mut detail = String::new();
    for s in &series {
        let monotone = morawetz_monotonicity(s, 1e-4);
        let bound_ok = s
            .m_values()
            .iter()
            .zip(grads.iter())
            .all(|(m, g)| m.abs() <= mass.powf(1.5) * g * (1.0 + 1e-9));
        ok = ok && monotone && bound_ok;
        detail.push_str(&format!(
            "{}: monotone {monotone}, |M| <= m^1.5 |grad_y u| {bound_ok}; ",
            match s.weight() {
                MorawetzWeight::Abs => "abs",
                MorawetzWeight::Japanese => "japanese",
            }
        ));
    }
    detail.push_str(&format!("{} checkpoints to t = 2", series[0].times().len()));
    verdict(9, "Morawetz monotonicity", ok, &detail);
}

#[test]
fn check_10_marginal_fractional_and_cube_diagnostics() {
    // d = 3 so the cube oracle exercises both transverse axes on a 32 x 32
    // transverse grid.
    let xg = XGrid::new(10.0, 32).unwrap();
    let basis = EigenBasis::build(&xg, &Potential::Harmonic { omega: 1.0 }, 8).unwrap();
    let yg = YGrid::new(3, 8.0, 32).unwrap();
    let domain = Domain::new(basis, yg);
    let mut f = Field::gaussian(&domain, 1.0, 1.0, &[0.4, -0.7], &[0.7, -0.3]);
    let scale = 0.3 / f.mass().sqrt();
    f.scale(Complex64::new(scale, 0.0));

    let mass = f.mass();
    let marg = marginal_density(&f);
    let vol = domain.ygrid().cell_volume();
    let integral: f64 = marg.values.iter().sum::<f64>() * vol;
    let mass_gap = (integral - mass).abs() / mass;

    let l2_direct = (marg.values.iter().map(|v| v * v).sum::<f64>() * vol).sqrt();
    let order0 = fractional_y_norm(domain.ytrans(), &marg, 0.0);
    let frac_gap = (order0 - l2_direct).abs() / l2_direct;

    // Brute-force window oracle: direct loops over every center and every
    // cell of the cube, x-clipped, periodic per transverse axis.
    let mu = 1.3;
    let fast = cube_mass_sup(&f, mu).unwrap();
    let phys = f.in_rep(Representation::Physical);
    let data = phys.data();
    let (n_x, n_y) = (xg.n_x(), domain.ygrid().n_y());
    let hx = (mu / xg.dx()).floor() as isize;
    let hy = (mu / domain.ygrid().dy()).floor() as isize;
    let mut brute = 0.0f64;
    for ci in 0..n_x as isize {
        for ca in 0..n_y as isize {
            for cb in 0..n_y as isize {
                let mut acc = 0.0;
                for i in (ci - hx).max(0)..=(ci + hx).min(n_x as isize - 1) {
                    for da in -hy..=hy {
                        let a = (ca + da).rem_euclid(n_y as isize) as usize;
                        for db in -hy..=hy {
                            let b = (cb + db).rem_euclid(n_y as isize) as usize;
                            acc += data[[i as usize, a * n_y + b]].norm_sqr();
                        }
                    }
                }
                brute = brute.max(acc);
            }
        }
    }
    brute *= xg.dx() * vol;
    let cube_gap = (fast - brute).abs() / brute;

    verdict(
        10,
        "marginal, fractional and cube diagnostics",
        mass_gap <= 1e-12 && frac_gap <= 1e-12 && cube_gap <= 1e-12,
        &format!(
            "int R dy vs mass {mass_gap:.2e}, order-0 fractional vs L2 {frac_gap:.2e}, \
             cube sup vs brute force {cube_gap:.2e}, all bounded by 1e-12"
        ),
    );
}

#[test]
fn check_11_transverse_l4_decay_rates() {
    let domain = reference_domain();
    let datum = reference_datum(&domain);

    // Linear free flow, sampled by exact jumps; slope of a d = 2 Gaussian
    // in L^4 is -1/4 up to the finite fit window and the periodic box.
    let mut linear_snaps = Vec::new();
    for k in 0..=12 {
        let t = 10.0 + 2.5 * k as f64;
        let mut s = datum.clone();
        linear_step(&mut s, t);
        s.set_t(t);
        linear_snaps.push(s);
    }
    let linear_fit = decay_tracker(&linear_snaps, 4.0).unwrap();

    // Full dynamics with the same datum: small data still disperse, so the
    // fitted slope must at least be negative.
    let mut nonlinear_snaps = Vec::new();
    let cfg = sim_config(DT, 40.0, 1000);
    evolve(datum, &cfg, |f, report| {
        if report.t >= 9.9 {
            nonlinear_snaps.push(f.clone());
        }
        Ok(())
    })
    .unwrap();
    let nonlinear_fit = decay_tracker(&nonlinear_snaps, 4.0).unwrap();

    verdict(
        11,
        "transverse L4 decay",
        (-0.30..=-0.20).contains(&linear_fit.slope) && nonlinear_fit.slope < 0.0,
        &format!(
            "free slope {:.4} in [-0.30, -0.20] over t in [10, 40], \
             nonlinear slope {:.4} < 0",
            linear_fit.slope, nonlinear_fit.slope
        ),
    );
}

#[test]
fn check_12_embedding_ratios_capped_scale_invariant_and_grid_stable() {
    let domain = reference_domain();
    let b_spec = EnsembleSpec {
        count: 200,
        seed: 2026,
        generator: EnsembleGenerator::GaussianRandomField {
            corr_x: 1.0,
            corr_y: 1.0,
        },
    };
    let fields = generate_ensemble(&domain, &b_spec);
    let b_report = check_b_embedding(&fields).unwrap();
    let cap = std::f64::consts::SQRT_2 * (1.0 + 1e-8);
    let b_ok = b_report.max_ratio <= cap;
    drop(fields);

    // Scale invariance: multiplying every member by 3i must leave the
    // Gagliardo-Nirenberg ratios fixed to near machine accuracy.
    let params = InequalityParams::new(2, 4.0, 0.75, 0.4).unwrap();
    let gn_spec = EnsembleSpec {
        count: 40,
        seed: 2026,
        generator: EnsembleGenerator::GaussianRandomField {
            corr_x: 1.0,
            corr_y: 1.0,
        },
    };
    let base = generate_ensemble(&domain, &gn_spec);
    let r1 = check_anisotropic_gn(&base, &params).unwrap();
    let mut scaled = base;
    for f in scaled.iter_mut() {
        f.scale(Complex64::new(0.0, 3.0));
    }
    let r2 = check_anisotropic_gn(&scaled, &params).unwrap();
    drop(scaled);
    let mut scale_dev = 0.0f64;
    for (a, b) in r1.ratios.iter().zip(r2.ratios.iter()) {
        assert_eq!(a.is_nan(), b.is_nan(), "skip sets differ under scaling");
        if !a.is_nan() {
            scale_dev = scale_dev.max((a - b).abs() / a.abs().max(1.0));
        }
    }

    // Grid stability: analytic Gaussian bumps are grid-independent, so the
    // same seed on a refined grid must reproduce each ratio within 10%.
    let translate_spec = EnsembleSpec {
        count: 24,
        seed: 5,
        generator: EnsembleGenerator::Translates {
            width: 1.0,
            spread: 4.0,
        },
    };
    let coarse_domain = {
        let xg = XGrid::new(10.0, 256).unwrap();
        let basis = EigenBasis::build(&xg, &Potential::Harmonic { omega: 1.0 }, 8).unwrap();
        Domain::new(basis, YGrid::new(2, 64.0, 512).unwrap())
    };
    let rc = check_anisotropic_gn(&generate_ensemble(&coarse_domain, &translate_spec), &params)
        .unwrap();
    let rf = check_anisotropic_gn(&generate_ensemble(&domain, &translate_spec), &params).unwrap();
    let mut refine_dev = 0.0f64;
    for (c, f) in rc.ratios.iter().zip(rf.ratios.iter()) {
        assert!(!c.is_nan() && !f.is_nan(), "translate member skipped");
        refine_dev = refine_dev.max((c - f).abs() / f.abs());
    }

    verdict(
        12,
        "embedding ratios",
        b_ok && scale_dev <= 1e-12 && refine_dev <= 0.10,
        &format!(
            "max H1/B ratio {:.6} <= sqrt(2)(1 + 1e-8) over 200 members; \
             GN scale deviation {scale_dev:.2e} (bound 1e-12); \
             refinement deviation {:.1}% (bound 10%)",
            b_report.max_ratio,
            100.0 * refine_dev
        ),
    );
}

#[test]
fn check_13_reference_run_is_bitwise_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
        d = 2
        sigma = 3.0
        dt = 0.01
        t_end = 0.5
        n_modes = 32
        output_every = 10

        [xgrid]
        l_x = 10.0
        n_x = 512

        [ygrid]
        l_y = 64.0
        n_y = 1024

        [potential]
        kind = "harmonic"
        omega = 1.0

        [initial]
        kind = "gaussian"
        amplitude = 0.3
        width = 1.0
        normalize = true
    "#;
    let path = dir.path().join("reference.toml");
    std::fs::write(&path, config).unwrap();

    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    assert_eq!(cli::run(&Command::Simulate, &path, &out1), 0);
    assert_eq!(cli::run(&Command::Simulate, &path, &out2), 0);
    let bytes1 = std::fs::read(out1.join("timeseries.csv")).unwrap();
    let bytes2 = std::fs::read(out2.join("timeseries.csv")).unwrap();
    let rows = bytes1.iter().filter(|&&b| b == b'\n').count();
    verdict(
        13,
        "bitwise determinism",
        bytes1 == bytes2 && rows == 7,
        &format!(
            "two simulate runs agree on all {} bytes of timeseries.csv ({rows} lines)",
            bytes1.len()
        ),
    );
}
