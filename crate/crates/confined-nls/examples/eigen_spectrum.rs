//! Eigenvalues of the confined direction for three potentials, with the
//! harmonic ladder n + 1/2 as the exactness yardstick and a refinement pass
//! showing the second-order convergence of the finite-difference operator.

use confined_nls::eigenbasis::EigenBasis;
use confined_nls::grid::XGrid;
use confined_nls::potential::Potential;

fn main() -> confined_nls::Result<()> {
    let xg = XGrid::new(10.0, 512)?;
    let harmonic = Potential::Harmonic { omega: 1.0 };
    let basis = EigenBasis::build(&xg, &harmonic, 12)?;

    println!("harmonic oscillator, l_x = 10, n_x = 512");
    println!("{:>3} {:>14} {:>14} {:>10}", "n", "lambda", "exact", "error");
    for n in 0..12 {
        let exact = n as f64 + 0.5;
        let lambda = basis.eigenvalue(n);
        println!(
            "{n:>3} {lambda:>14.8} {exact:>14.8} {:>10.2e}",
            (lambda - exact).abs()
        );
    }

    let fine = EigenBasis::build(&XGrid::new(10.0, 1024)?, &harmonic, 12)?;
    let coarse_err = (basis.eigenvalue(10) - 10.5).abs();
    let fine_err = (fine.eigenvalue(10) - 10.5).abs();
    println!(
        "\nmode 10 error: {coarse_err:.3e} at n_x = 512, {fine_err:.3e} at n_x = 1024 \
         (ratio {:.2}, second order gives 4)",
        coarse_err / fine_err
    );

    for (label, pot) in [
        ("steep well  V = x^4", Potential::PowerLaw { exponent: 4, scale: 1.0 }),
        ("exponential V = e^|x|", Potential::Exponential { rate: 1.0 }),
    ] {
        let b = EigenBasis::build(&xg, &pot, 6)?;
        let evs: Vec<String> = (0..6).map(|n| format!("{:.4}", b.eigenvalue(n))).collect();
        println!("\n{label}: lambda_0..5 = {}", evs.join(", "));
    }
    Ok(())
}
