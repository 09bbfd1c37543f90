//! The compatibility projection on a periodic grid: a random tensor field is
//! mapped onto its compatible part, which is idempotent, mean-free and curl-free.
//!
//! ```text
//! cargo run --release --example projection -- [grid]
//! ```

use homogen::micro::{FieldT2, RveGrid, Spectral};
use homogen::tensor::Tensor2;
use homogen::validate::{fourier_curl, run_suite, Suite, ValidateOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> homogen::Result<()> {
    let n = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(31);
    let grid = RveGrid::square(n)?;
    let spectral = Spectral::new(&grid);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = (0..grid.voxel_count())
        .map(|_| Tensor2::from_rows([[rng.random(), rng.random()], [rng.random(), rng.random()]]))
        .collect();
    let w = FieldT2::from_vec(&grid, data)?;

    let gw = spectral.project(&w);
    let ggw = spectral.project(&gw);
    let drift: f64 = ggw
        .iter()
        .zip(gw.iter())
        .map(|(a, b)| (*a - *b).norm().powi(2))
        .sum::<f64>()
        .sqrt();
    println!("grid {n}x{n}");
    println!("  |W| = {:.4e}, |GW| = {:.4e}", w.norm(), gw.norm());
    println!("  |G(GW) - GW| / |GW| = {:.3e}", drift / gw.norm());
    println!("  max |<GW>|          = {:.3e}", gw.mean().max_abs());
    println!(
        "  curl(W)             = {:.3e}",
        fourier_curl(&spectral, &w)
    );
    println!(
        "  curl(GW)            = {:.3e}",
        fourier_curl(&spectral, &gw)
    );

    let report = run_suite(
        Suite::Projection,
        &ValidateOptions {
            grid: n,
            ..ValidateOptions::default()
        },
    )?;
    println!("\n{report}");
    Ok(())
}
