//! Mean-field fixed points of the displaced-frame model and their stability.

use kerr_blockade::model::BlockadeSpec;
use kerr_blockade::semiclassical::{alpha_ha_perturbative, find_fixed_points, stability_eigenvalues_analytic};
use num_complex::Complex64 as c64;

fn main() {
    let s = BlockadeSpec::new(c64::new(2.0, 0.0), 1.0, 0.4, 1.0);
    let search = find_fixed_points(&s);
    for fp in &search.fixed_points {
        println!(
            "alpha = {:.5}  |alpha|^2 = {:.2}  eigs = [{:.4}, {:.4}]  stable = {}",
            fp.alpha,
            fp.alpha.norm_sqr(),
            fp.jacobian_eigs[0],
            fp.jacobian_eigs[1],
            fp.stable
        );
    }
    let (plus, minus) = stability_eigenvalues_analytic(&s);
    println!("first-order high-amplitude branch: {:.4}", alpha_ha_perturbative(&s));
    println!("first-order stability eigenvalues: {plus:.4}, {minus:.4}");
}
