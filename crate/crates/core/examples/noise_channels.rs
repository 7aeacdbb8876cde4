//! Random displacement errors averaged by sampling, compared with the
//! thermal and squeezed-thermal channels they should produce.

use kerr_blockade::fock::{thermal_state, Truncation};
use kerr_blockade::model::BlockadeSpec;
use kerr_blockade::protocol::{initial_state, monte_carlo_channel, BlockDuration, NoiseModel, ProtocolConfig};
use num_complex::Complex64 as c64;

fn main() -> kerr_blockade::Result<()> {
    let t = Truncation::new(16)?;
    // Lambda3 = 2, U = 0.4 puts the displacement at alpha_b = 2.5
    let spec = BlockadeSpec::new(c64::new(2.0, 0.0), 1.0, 0.4, 1.0);
    let alpha_b = c64::new(2.5, 0.0);
    for sigma in [0.05, 0.1, 0.2] {
        let noise = NoiseModel::Additive { sigma };
        let mc = monte_carlo_channel(noise, alpha_b, 100_000, 7, t)?;
        let exact = thermal_state(noise.nbar_th(alpha_b), t)?;
        println!("additive sigma = {sigma}: nbar = {:.4}, trace distance to thermal = {:.2e}", noise.nbar_th(alpha_b), mc.trace_distance(&exact)?);
    }
    for sigma in [0.02, 0.08] {
        let noise = NoiseModel::Phase { sigma };
        let cfg = ProtocolConfig { spec, duration: BlockDuration::Fixed(1.0), noise, truncation: t };
        let exact = initial_state(&cfg)?;
        let mc = monte_carlo_channel(noise, alpha_b, 100_000, 7, t)?;
        println!(
            "phase sigma = {sigma}: D = {:.4}, nbar = {:.4}, xi = {:.4}, <n> sampled {:.4} / squeezed thermal {:.4}, trace distance {:.2e}",
            noise.diffusion(alpha_b),
            noise.nbar_th(alpha_b),
            noise.xi(alpha_b).unwrap_or(0.0),
            mc.n_mean(),
            exact.n_mean(),
            mc.trace_distance(&exact)?
        );
    }
    Ok(())
}
