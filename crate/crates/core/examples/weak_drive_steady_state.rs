//! Steady-state single-photon population of the perfectly tuned blockade
//! against the closed form.

use kerr_blockade::dynamics::{steady_p1_analytic, LindbladGenerator};
use kerr_blockade::fock::Truncation;
use kerr_blockade::model::{build_h_target, BlockadeSpec};
use kerr_blockade::spectral::steady_state_with_residual;
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    let t = Truncation::new(30)?;
    println!("{:>8} {:>10} {:>10} {:>10}", "L3/k", "P1", "formula", "residual");
    for l3 in [0.125, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let s = BlockadeSpec::new(c64::new(l3, 0.0), 1.0, 0.075, 1.0);
        let gen = LindbladGenerator::single_mode(&build_h_target(&s, t), s.kappa)?;
        let ss = steady_state_with_residual(&gen)?;
        let p1 = ss.state.populations()[1];
        println!("{l3:>8} {p1:>10.6} {:>10.6} {:>10.1e}", steady_p1_analytic(s.lambda3_tilde, s.kappa)?, ss.residual);
    }
    Ok(())
}
