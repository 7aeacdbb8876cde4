//! Liouvillian gap for the perfectly tuned model compared with the
//! perturbative tunnelling rate out of the high-amplitude state.

use kerr_blockade::dynamics::LindbladGenerator;
use kerr_blockade::fock::Truncation;
use kerr_blockade::model::{build_h_target, BlockadeSpec};
use kerr_blockade::semiclassical::alpha_ha_perturbative;
use kerr_blockade::spectral::{gamma_slow_perturbative, slow_mode, GapMethod};
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    println!("{:>6} {:>8} {:>12} {:>12} {:>8}", "U/L3", "|a_ha|^2", "gap", "formula", "center");
    for (u, dim) in [(0.6, 30), (0.5, 36), (0.45, 40), (0.4, 46)] {
        let s = BlockadeSpec::new(c64::new(1.0, 0.0), 1.0, u, 0.1);
        let gen = LindbladGenerator::single_mode(&build_h_target(&s, Truncation::new(dim)?), s.kappa)?;
        let mode = slow_mode(&gen, GapMethod::Auto)?;
        println!(
            "{u:>6} {:>8.2} {:>12.3e} {:>12.3e} {:>8.2}",
            alpha_ha_perturbative(&s).norm_sqr(),
            mode.gap,
            gamma_slow_perturbative(&s),
            mode.weight_center
        );
    }
    Ok(())
}
