//! Goldstein subdifferentials of 1-D piecewise-linear functions, and the
//! smoothed gradient landing inside them.

use gradfree::problems::pwl;
use gradfree::derive_stream;

fn main() {
    let delta = 0.3;
    for (name, f) in pwl::reference_instances(&mut derive_stream(5, "pwl", 0)) {
        println!("{name}: kinks at {:?}", f.breakpoints());
        for x in [-1.0, -0.1, 0.0, 0.25, 1.0] {
            let iv = f.goldstein_interval(x, delta);
            let g = f.smoothed_gradient(x, delta);
            println!(
                "  x = {x:>5}: [{:>6.3}, {:>6.3}]  f'_delta = {g:>7.4}  inside = {}  min-norm = {:.3}",
                iv.lo,
                iv.hi,
                iv.contains(g, 1e-12),
                iv.min_norm_element()
            );
        }
    }
}
