//! Single two-point estimates and a batch mean against the exact smoothed
//! gradient, for a deterministic and a noisy objective.

use gradfree::problems::{make_additive_noise, make_halfspace_distance, Noise};
use gradfree::{
    derive_stream, smoothed_gradient, smoothed_gradient_stochastic, two_point_estimate, SmoothingParams,
};

fn main() -> gradfree::Result<()> {
    let p = make_halfspace_distance(3, 1.0, &[1.0, 2.0, 2.0])?;
    let params = SmoothingParams::with_delta(0.5)?;
    let x = [0.1, 0.1, 0.1];
    let mut rng = derive_stream(2, "estimator", 0);

    for _ in 0..3 {
        let g = two_point_estimate(&p, &x, &params, &mut rng)?;
        println!("single estimate {:?}", g.estimate.as_slice());
    }
    let batch = smoothed_gradient(&p, &x, &params, 200_000, &mut rng)?;
    println!("batch mean      {:?}", batch.mean.as_slice());
    println!("exact           {:?}", p.reference_smoothed_gradient(&x, 0.5).unwrap());

    let noisy = make_additive_noise(&p, Noise::Gaussian { sigma: 0.5 })?;
    let nb = smoothed_gradient_stochastic(&noisy, &x, &params, 200_000, &mut rng)?;
    println!("noisy batch     {:?} (same mean, se {:.1e})", nb.mean.as_slice(), nb.norm_std_error());
    Ok(())
}
