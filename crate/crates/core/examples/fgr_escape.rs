//! Golden-rule escape constant `c = Γ κ / |δΛ̃₁|²` in the strong-drive regime.

use kerr_blockade::fock::Truncation;
use kerr_blockade::model::BlockadeSpec;
use kerr_blockade::spectral::fgr_escape_rate_with;
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    for (l3, ratio, dim) in [(2.0, 0.2, 120), (100.0, 0.3, 160), (100.0, 0.2, 160)] {
        let s = BlockadeSpec::new(c64::new(l3, 0.0), 1.0, ratio * l3, 1.0).with_mismatch(0.01);
        let f = fgr_escape_rate_with(&s, Truncation::new(dim)?)?;
        println!("L3 = {l3}, U/L3 = {ratio}: c = {:.4}, Gamma = {:.3e}", f.c, f.gamma_esc);
        for ch in &f.channels {
            println!("    blockade level E = {:+.3}: c = {:.4}", ch.energy, ch.c);
        }
    }
    Ok(())
}
