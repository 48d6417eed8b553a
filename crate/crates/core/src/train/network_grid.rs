use crate::encoding::SdfNetwork;
use crate::extract::{FlexiGrid, GridLayout};

use super::TrainError;

/// Samples the network on every vertex of `layout` and its cube head on
/// every sign-changing cube. The offset bound follows the layout's cell.
pub fn network_grid(net: &SdfNetwork, layout: GridLayout) -> Result<FlexiGrid, TrainError> {
    let mut net_at = net.clone();
    net_at.set_resolution(layout.resolution);
    let out = net_at.sdf_batch(&layout.vertex_positions())?;
    let mut grid = FlexiGrid::new(layout, out.sdf);
    grid.offsets = out.offsets;
    fill_cube_weights(&net_at, &mut grid)?;
    Ok(grid)
}

/// Replaces the grid's weights with cube-head outputs on crossing cubes.
pub fn fill_cube_weights(net: &SdfNetwork, grid: &mut FlexiGrid) -> Result<(), TrainError> {
    let cubes = grid.crossing_cubes();
    let centers: Vec<_> = cubes.iter().map(|&c| grid.layout.cube_center(c)).collect();
    let weights = net.cube_weights_batch(&centers)?;
    grid.weights = cubes.into_iter().zip(weights).collect();
    Ok(())
}
