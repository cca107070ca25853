//! Shared inputs for the benchmarks.

use tentlab::fixtures::band_limited;
use tentlab::hardy::heat_tent_field;
use tentlab::{EllipticOperator, Grid, TentField, TimeGrid, C64};

pub struct Workload {
    pub op: EllipticOperator,
    pub time: TimeGrid,
    pub field: Vec<C64>,
    pub tent: TentField,
}

/// 1-D periodic A = I with a band-limited field and its heat tent field.
pub fn workload(n: usize, levels: usize) -> Workload {
    let grid = Grid::unit(1, n).expect("valid grid");
    let op = EllipticOperator::identity(grid).expect("identity assembles");
    let time = TimeGrid::standard(&grid, levels).expect("standard time grid");
    let field = band_limited(&grid, 6, 1);
    let tent = heat_tent_field(&op, &field, &time).expect("tent field");
    Workload { op, time, field, tent }
}
