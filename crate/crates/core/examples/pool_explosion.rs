//! Runs the committed pool-explosion configuration: an aggressive uncapped
//! fusion, the capped setting, and the capped setting with synonym linking.
//!
//! ```text
//! cargo run --release --example pool_explosion
//! ```

use std::path::Path;

use calfuse::harness::{run_eval, RunConfig};

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/pool_explosion.json");
    let cfg = RunConfig::load(&path)?;
    let data = cfg.data.load()?;
    let out = run_eval(&cfg, &data, true)?;
    for split in &out.report.splits {
        println!("[{}] {} queries", split.split, split.queries);
        for c in &split.cells {
            let r = c.result(cfg.metric, cfg.k).expect("summary metric");
            println!(
                "  {:<36} {}@{} {:.3}  W {:>3} L {:>3}  p = {:.2e}",
                c.label, cfg.metric, cfg.k, r.rate, r.paired.wins, r.paired.losses, r.p_value
            );
        }
    }
    Ok(())
}
