//! Displace, drive inside the blockade, displace back: single-photon state
//! preparation with imperfect displacements.

use kerr_blockade::fock::Truncation;
use kerr_blockade::model::BlockadeSpec;
use kerr_blockade::protocol::{run_protocol, BlockDuration, NoiseModel, ProtocolConfig};
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    let noises = [
        NoiseModel::None,
        NoiseModel::Additive { sigma: 0.005f64.sqrt() },
        NoiseModel::Multiplicative { sigma: 0.005 },
        NoiseModel::Phase { sigma: 0.005 },
    ];
    println!("{:>16} {:>6} {:>8} {:>10} {:>10} {:>8}", "noise", "U", "tau", "g2_bare", "g2_bound", "P1");
    for noise in noises {
        for u in [0.4, 0.2, 0.1] {
            let cfg = ProtocolConfig {
                spec: BlockadeSpec::new(c64::new(2.0, 0.0), 1.0, u, 1.0),
                duration: BlockDuration::TargetP1(0.5),
                noise,
                truncation: Truncation::new(50)?,
            };
            let r = run_protocol(&cfg)?;
            let name = format!("{noise:?}").split_whitespace().next().unwrap_or("").to_string();
            println!("{name:>16} {u:>6} {:>8.4} {:>10.2e} {:>10.4} {:>8.4}", r.tau_block, r.g2_bare, r.g2_bound, r.p1);
        }
    }

    // A small drive mismatch.
    let cfg = ProtocolConfig {
        spec: BlockadeSpec::new(c64::new(2.0, 0.0), 1.0, 0.4, 1.0).with_mismatch(0.05),
        duration: BlockDuration::TargetP1(0.5),
        noise: NoiseModel::None,
        truncation: Truncation::new(50)?,
    };
    let r = run_protocol(&cfg)?;
    println!("delta_lambda1 = 0.05: g2 = {:.3e}, P(n>=2) = {:.2e}", r.g2_bare, r.p_multi);
    Ok(())
}
