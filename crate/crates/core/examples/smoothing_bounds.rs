//! Monte-Carlo `f_delta` against `f` on a few library problems, compared with
//! the bound `delta L`.

use gradfree::problems::{make_halfspace_distance, make_norm, make_tight_mixture};
use gradfree::{derive_stream, smoothed_value, SmoothingParams};

fn main() -> gradfree::Result<()> {
    let delta = 0.2;
    let params = SmoothingParams::with_delta(delta)?;
    let dim = 4;
    let w = vec![1.0; dim];
    let problems = [
        make_norm(dim, 1.0)?,
        make_halfspace_distance(dim, 1.0, &w)?,
        make_tight_mixture(dim, 1.0, &w)?,
    ];
    let mut rng = derive_stream(1, "smoothing-example", 0);
    for p in &problems {
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let x: Vec<f64> = (0..dim).map(|i| ((k * 7 + i * 3) % 11) as f64 / 11.0 - 0.5).collect();
            let est = smoothed_value(p, &x, &params, 20_000, &mut rng)?;
            worst = worst.max((est.mean - p.value(&x)).abs());
        }
        println!("{:<14} max |f_delta - f| = {:.4}  (delta L = {:.4})", p.name, worst, delta * p.meta.lipschitz);
    }
    Ok(())
}
