//! Exponential parameter smoothing and consecutive-checkpoint averaging.
//!
//! ```bash
//! cargo run -p blockbt --example smoothing_and_averaging
//! ```

use blockbt::params::{
    average_consecutive, load_snapshot, replay_smoothing, save_snapshot, ParamSnapshot,
    SmoothingState,
};

fn main() -> blockbt::Result<()> {
    // online smoothing: smoothed' = α·θ + (1−α)·smoothed
    let mut state = SmoothingState::with_initial(0.5, &ParamSnapshot::new(vec![0.0], 0, None)?)?;
    for u in 1..=4 {
        state.step(&ParamSnapshot::new(vec![1.0], u, None)?)?;
        println!(
            "after update {u}: smoothed = {:?}",
            state.smoothed().unwrap()
        );
    }

    // replaying a recorded parameter stream gives the checkpoints the
    // training process would have saved with online smoothing
    let stream: Vec<ParamSnapshot> = (1..=20)
        .map(|u| ParamSnapshot::new(vec![(u as f32).sin()], u, None).unwrap())
        .collect();
    let emitted = replay_smoothing(stream, 0.1, 5)?;
    println!("\nreplay emitted {} smoothed checkpoints:", emitted.len());
    for snap in &emitted {
        println!("  update {:2}: {:?}", snap.update, snap.values());
    }

    // averaging the last k checkpoints
    let snapshots: Vec<ParamSnapshot> = (0..8)
        .map(|i| ParamSnapshot::new(vec![i as f32], i, None).unwrap())
        .collect();
    let averaged = average_consecutive(&snapshots, 8)?;
    println!("\nmean of scalars 0..8 = {:?}", averaged.values());

    // snapshots round-trip through the PSNAP1 file format
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("avg.psnap");
    save_snapshot(&averaged, &path)?;
    let reloaded = load_snapshot(&path)?;
    assert_eq!(reloaded.values(), averaged.values());
    println!("snapshot round-tripped through {}", path.display());
    Ok(())
}
