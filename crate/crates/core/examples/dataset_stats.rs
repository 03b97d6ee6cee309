//! Load an edge list with labels from disk and print its statistics row.

use std::fs;

use netlinkbench::bench::{format_stats, Dataset};

fn main() -> netlinkbench::Result<()> {
    let dir = std::env::temp_dir().join("netlinkbench-stats-example");
    fs::create_dir_all(&dir).expect("temp dir");
    // two triangles joined by one bridge
    fs::write(dir.join("edges.txt"), "a b\nb c\nc a\nd e\ne f\nf d\nc d\n").expect("write");
    fs::write(dir.join("labels.txt"), "a x\nb x\nc x\nd y\ne y\nf y\n").expect("write");

    let labelled = Dataset::from_files(
        Some("triangles"),
        &dir.join("edges.txt"),
        false,
        Some(&dir.join("labels.txt")),
        None,
        None,
    )?;
    let bare = Dataset::from_files(Some("unlabelled"), &dir.join("edges.txt"), false, None, None, None)?;
    print!("{}", format_stats(&[labelled.stats(), bare.stats()]));
    Ok(())
}
