//! Rabi oscillations inside the blockade and the slow escape that a drive
//! mismatch opens up.

use kerr_blockade::dynamics::{evolve_with, EvolveOptions, LindbladGenerator, Method, TimeGrid};
use kerr_blockade::fock::{DensityMatrix, Truncation};
use kerr_blockade::model::{build_h_target, BlockadeSpec};
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    let t = Truncation::new(130)?;
    let opts = EvolveOptions { method: Method::Pade { max_step: 0.02 }, ..EvolveOptions::default() };
    let grid = TimeGrid::new(0.0, 4.0, 0.5)?;
    for dl in [0.0, 0.05] {
        let s = BlockadeSpec::new(c64::new(2.0, 0.0), 1.0, 0.4, 1.0).with_mismatch(dl);
        let gen = LindbladGenerator::single_mode(&build_h_target(&s, t), s.kappa)?;
        let ev = evolve_with(&gen, &DensityMatrix::vacuum(t), &grid, &opts, |_, _| {})?;
        println!("delta_lambda1 = {dl}");
        println!("{:>6} {:>10} {:>10} {:>10}", "t", "<n>", "g2", "P(n>=2)");
        let sr = &ev.series;
        for i in 0..sr.len() {
            let multi = (1.0 - sr.p0[i] - sr.p1[i]).max(0.0);
            println!("{:>6.2} {:>10.4} {:>10.2e} {:>10.2e}", sr.times[i], sr.n_mean[i], sr.g2[i], multi);
        }
    }
    Ok(())
}
