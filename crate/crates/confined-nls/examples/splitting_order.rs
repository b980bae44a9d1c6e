//! Strang splitting is second order: halving dt divides the energy drift
//! by four. The drift ratio between a dt run and a dt/2 run lands near 4.

use std::sync::Arc;

use confined_nls::eigenbasis::EigenBasis;
use confined_nls::field::{Domain, Field};
use confined_nls::grid::{XGrid, YGrid};
use confined_nls::potential::Potential;
use confined_nls::propagator::{evolve, SimConfig};

fn energy_drift(domain: &Arc<Domain>, dt: f64) -> confined_nls::Result<f64> {
    let mut datum = Field::gaussian(domain, 1.0, 1.0, &[0.5], &[0.8]);
    let scale = 0.3 / datum.mass().sqrt();
    datum.scale(num_complex::Complex64::new(scale, 0.0));
    let cfg = SimConfig {
        sigma: 3.0,
        dt,
        t_end: 2.0,
        linear_only: false,
        output_every: usize::MAX,
    };
    let record = evolve(datum, &cfg, |_, _| Ok(()))?;
    let e0 = record.reports[0].energy;
    let e1 = record.reports.last().unwrap().energy;
    Ok((e1 - e0).abs() / e0.abs())
}

fn main() -> confined_nls::Result<()> {
    let xg = XGrid::new(8.0, 128)?;
    let basis = EigenBasis::build(&xg, &Potential::Harmonic { omega: 1.0 }, 48)?;
    let domain = Domain::new(basis, YGrid::new(2, 16.0, 128)?);

    println!("energy drift over t in [0, 2], sigma = 3\n");
    println!("{:>10} {:>14} {:>8}", "dt", "drift", "ratio");
    let mut prev: Option<f64> = None;
    for dt in [0.04, 0.02, 0.01, 0.005] {
        let drift = energy_drift(&domain, dt)?;
        match prev {
            Some(p) => println!("{dt:>10} {drift:>14.4e} {:>8.3}", p / drift),
            None => println!("{dt:>10} {drift:>14.4e} {:>8}", "-"),
        }
        prev = Some(drift);
    }
    println!("\nsecond order: each halving should shrink the drift about 4x");
    Ok(())
}
