//! Analytical gradient and Hessian of an HDMR network against central
//! differences, with the error ratio under step halving.
//!
//! ```text
//! cargo run --release --example derivatives -- [models]
//! ```

use homogen::surrogate::HdmrModel;
use homogen::validate::check_derivatives;

fn main() -> homogen::Result<()> {
    let n = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(100);

    let model = HdmrModel::random(4, 3, 4, 6, 42)?;
    let x = [1.05, 0.1, -0.05, 0.95];
    let (v, g, h) = model.derivatives(&x, true);
    println!("energy {v:.6}");
    println!(
        "gradient {:?}",
        g.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>()
    );
    println!(
        "hessian row 1 {:?}",
        h[..4].iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>()
    );

    let c = check_derivatives(n, 2024)?;
    println!("over {n} random models:");
    println!(
        "  gradient error {:.2e}, ratio under halving {:.2}..{:.2}",
        c.gradient_error, c.gradient_ratio.0, c.gradient_ratio.1
    );
    println!(
        "  hessian  error {:.2e}, ratio under halving {:.2}..{:.2}",
        c.hessian_error, c.hessian_ratio.0, c.hessian_ratio.1
    );
    Ok(())
}
