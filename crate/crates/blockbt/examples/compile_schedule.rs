//! Compile block and mixed training schedules and inspect the result.
//!
//! ```bash
//! cargo run -p blockbt --example compile_schedule
//! ```

use blockbt::schedule::{
    compile_block_schedule, compile_mixed_schedule, manifest_to_string, tags_to_string,
};

fn main() -> blockbt::Result<()> {
    // 20k-update blocks cycling auth → bt → auth → ft, checkpoints every 5k
    let manifest = compile_block_schedule(20_000, 80_000, 5_000)?;
    println!("block manifest:\n{}", manifest_to_string(&manifest));

    let tags = manifest.checkpoint_tags();
    println!("first checkpoints:");
    for tag in tags.iter().take(5) {
        println!(
            "  {} at update {} in {} block {}",
            tag.checkpoint_id, tag.update, tag.block_type, tag.block_index
        );
    }
    println!("  … {} checkpoints total\n", tags.len());

    // a checkpoint on a block boundary belongs to the later block
    println!(
        "update 20000 falls in the {} block",
        manifest.block_type_at(20_000).unwrap()
    );

    // the mixed regime is a single entry over the shuffled concatenation
    let mixed = compile_mixed_schedule(80_000, 5_000)?;
    println!("\nmixed manifest:\n{}", manifest_to_string(&mixed));
    println!(
        "tag file format:\n{}",
        tags_to_string(&mixed.checkpoint_tags()[..2])
    );

    // short blocks may not contain a checkpoint; that is a warning, not an error
    let narrow = compile_block_schedule(3_000, 24_000, 5_000)?;
    for warning in narrow.warnings() {
        println!("warning: {warning}");
    }
    Ok(())
}
