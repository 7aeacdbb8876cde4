//! Steady-state photon number as r is detuned from 1: a narrow dip where the
//! blockade holds, surrounded by the high-amplitude plateau.

use kerr_blockade::fock::Truncation;
use kerr_blockade::spectral::{antiresonance_grid, antiresonance_scan};
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    let l3 = c64::new(1.0, 0.0);
    for u in [0.6, 0.5, 0.4] {
        let grid = antiresonance_grid(1.0, 1e-8, 0.5, 40)?;
        let scan = antiresonance_scan(l3, u, 0.1, &grid, Truncation::new(60)?)?;
        let w = &scan.width;
        println!(
            "U/L3 = {u}: FWHM = {:.3e}, floor = {:.4}, plateau = {:.2}",
            w.fwhm, w.floor, w.plateau
        );
    }
    Ok(())
}
