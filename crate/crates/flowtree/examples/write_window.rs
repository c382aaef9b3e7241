//! Writes a golden-ratio window as a tree-description file for the command-line tool.

use flowtree::tree::{chain_fibonacci, parse_window, ratio_ball_window, window_to_json, RatioProfile, DEFAULT_VERTEX_CAP};

fn main() -> flowtree::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "golden.json".into());
    let (tree, _) = ratio_ball_window(&RatioProfile::golden(), chain_fibonacci, 4, 290, DEFAULT_VERTEX_CAP)?;
    let text = window_to_json(&tree)?;
    let back = parse_window(&text)?;
    assert_eq!(back.window.len(), tree.window.len());
    std::fs::write(&path, text)?;
    println!("wrote {} vertices to {path}", tree.window.len());
    Ok(())
}
