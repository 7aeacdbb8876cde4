//! Escape rate out of the blockade from the late-time relaxation of <n>.

use kerr_blockade::dynamics::{evolve_with, fit_escape_rate, EvolveOptions, FitWindow, LindbladGenerator, Method, TimeGrid};
use kerr_blockade::fock::{DensityMatrix, Truncation};
use kerr_blockade::model::{build_h_target, BlockadeSpec};
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    let t = Truncation::new(120)?;
    let s = BlockadeSpec::new(c64::new(2.0, 0.0), 1.0, 0.4, 1.0).with_mismatch(0.1);
    let gen = LindbladGenerator::single_mode(&build_h_target(&s, t), s.kappa)?;
    let opts = EvolveOptions { method: Method::Pade { max_step: 0.1 }, ..EvolveOptions::default() };
    let ev = evolve_with(&gen, &DensityMatrix::vacuum(t), &TimeGrid::new(0.0, 60.0, 1.0)?, &opts, |_, _| {})?;
    let window = FitWindow { start: Some(10.0), ..FitWindow::default() };
    let fit = fit_escape_rate(&ev.series, &window, s.delta_lambda1_abs(), s.kappa)?;
    println!(
        "Gamma = {:.4e}, c = {:.3}, plateau <n> = {:.2}, R^2 = {:.5}, window {:?}",
        fit.gamma, fit.c, fit.n_plateau, fit.r_squared, fit.window
    );
    Ok(())
}
