//! Lab-frame drive settings for a target blockade model, and the
//! displaced-frame parameters they produce.

use kerr_blockade::model::{displace_params, tune_drives};
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    let kappa = 1.0;
    let l3 = c64::new(2.0, 0.0);
    for u in [0.4, 0.1, 0.025] {
        let d = tune_drives(l3, u, kappa, 1.0)?;
        let p = displace_params(&d.rwa_params(u, kappa), d.alpha_b);
        println!(
            "U = {u:<6} alpha_b = {:.3}  Lambda1_b = {:.3}  Lambda2_b = {:.3}  Delta_b = {:.2}",
            d.alpha_b, d.lambda1_b, d.lambda2_b, d.delta_b
        );
        println!(
            "            displaced: Delta~ = {:.1e}  Lambda2~ = {:.1e}  Lambda1~ = {:.3}  Lambda3~ = {:.3}",
            p.delta_tilde, p.lambda2_tilde.norm(), p.lambda1_tilde, p.lambda3_tilde
        );
    }
    Ok(())
}
