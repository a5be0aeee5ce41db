//! Finite-difference gradient check of every model variant, addressing
//! scheme and hop count on a small random instance.
//!
//! ```text
//! cargo run --release --example autodiff_gradcheck
//! ```

use memnet::autodiff::GradCheckConfig;
use memnet::memory::AddressingKind;
use memnet::models::{model_grad_check, CheckDims, Variant};

fn main() -> memnet::Result<()> {
    let dims = CheckDims::default();
    let start = std::time::Instant::now();
    let mut worst = 0.0f64;
    for variant in [Variant::EndToEnd, Variant::KeyValue, Variant::Averaged, Variant::Condensed] {
        for addressing in [AddressingKind::Softmax, AddressingKind::Sigmoid, AddressingKind::Gated] {
            for hops in 3..=5 {
                let report = model_grad_check(variant, hops, addressing, &dims, &GradCheckConfig::default())?;
                worst = worst.max(report.max_rel_error);
                println!(
                    "{variant:<10} {addressing:<8} hops {hops}  entries {:>5}  max rel err {:.2e}  {}",
                    report.checked(),
                    report.max_rel_error,
                    if report.passed { "ok" } else { "FAILED" }
                );
            }
        }
    }
    println!("worst {worst:.2e} in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
