//! Shortest routes and distances on a grid road network.
//!
//! cargo run --example shortest_path

use rescue_core::roadnet::{build_grid, shortest_path, DistanceTable};

fn main() -> rescue_core::Result<()> {
    let grid = build_grid(8, 8, 2)?;
    let table = DistanceTable::new(&grid);
    println!(
        "{} nodes, {} edges, diameter {} cells, strongly connected: {}",
        grid.node_count(),
        grid.edge_count(),
        table.diameter(),
        table.is_strongly_connected()
    );
    for (src, dst) in [(0, 63), (9, 45), (7, 56)] {
        let route = shortest_path(&grid, src, dst)?;
        println!("{src:>2} -> {dst:>2}: {} cells via {:?}", route.length, route.nodes);
    }
    Ok(())
}
