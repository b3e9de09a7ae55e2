//! A model that responds to each W x W block of a uniform input with C
//! objects. Tiling the input m x m times multiplies the sum-pooled count by
//! m² while the average-pooled count stays at C.
//!
//! cargo run --example idealized_scaling

use gsp_count::model::{idealized_scaling_check, Head, IdealizedBlockModel};

fn main() -> gsp_count::Result<()> {
    let model = IdealizedBlockModel::new(8, 5.0, Head::Gsp)?;
    println!("block 8x8, {} objects per block (density {})", model.block_count(), model.density());
    println!("{:>3} {:>8} {:>10} {:>10}", "m", "input", "sum head", "mean head");
    for m in 1..=6 {
        let (gsp, gap) = idealized_scaling_check(&model, m)?;
        let side = m * model.block_size();
        println!("{m:>3} {:>8} {gsp:>10.3} {gap:>10.3}", format!("{side}x{side}"));
    }
    Ok(())
}
