//! Regular square tessellation of the study area and opportunity counting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Rect};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum TessellationError {
    #[error("study area bounds are empty or not finite")]
    DegenerateBounds,
    #[error("tile length must be positive, got {0} km")]
    NonPositiveTileLength(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TileId(pub usize);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Tile<T = f64> {
    pub id: TileId,
    pub col: usize,
    pub row: usize,
    pub centroid: Point<T>,
    pub opportunities: u64,
}

/// Grid geometry. Tiles are numbered row-major from the lower-left corner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Grid<T = f64> {
    pub origin: Point<T>,
    pub tile_len_m: T,
    pub cols: usize,
    pub rows: usize,
}

impl<T: Scalar> Grid<T> {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tile_id(&self, col: usize, row: usize) -> TileId {
        TileId(row * self.cols + col)
    }

    pub fn centroid(&self, col: usize, row: usize) -> Point<T> {
        let half = T::lit(0.5);
        Point::new(
            self.origin.x + (T::from_int(col as i64) + half) * self.tile_len_m,
            self.origin.y + (T::from_int(row as i64) + half) * self.tile_len_m,
        )
    }

    /// Tile containing `p`. Cells are closed on their upper edges, so a point
    /// on a shared edge belongs to the lower-index tile; the grid's own lower
    /// edges are closed as well.
    pub fn locate(&self, p: &Point<T>) -> Option<TileId> {
        let col = axis_index(p.x - self.origin.x, self.tile_len_m, self.cols)?;
        let row = axis_index(p.y - self.origin.y, self.tile_len_m, self.rows)?;
        Some(self.tile_id(col, row))
    }
}

fn axis_index<T: Scalar>(offset: T, len: T, count: usize) -> Option<usize> {
    if offset.is_nan() || offset < T::zero() {
        return None;
    }
    let cell = (offset / len).ceil();
    let idx = if cell <= T::zero() { 0 } else { cell.to_usize()? - 1 };
    (idx < count).then_some(idx)
}

/// Cover `bounds` with square tiles of side `tile_len_km`, anchored at the
/// lower-left corner. Partial edge tiles keep the full tile geometry.
pub fn tessellate<T: Scalar>(bounds: &Rect<T>, tile_len_km: T) -> Result<(Grid<T>, Vec<Tile<T>>), TessellationError> {
    if !tile_len_km.is_finite() || tile_len_km <= T::zero() {
        return Err(TessellationError::NonPositiveTileLength(tile_len_km.to_real()));
    }
    if bounds.is_degenerate() {
        return Err(TessellationError::DegenerateBounds);
    }
    let tile_len_m = tile_len_km * T::lit(1000.0);
    let cols = cover_count(bounds.width(), tile_len_m);
    let rows = cover_count(bounds.height(), tile_len_m);
    let grid = Grid { origin: Point::new(bounds.min_x, bounds.min_y), tile_len_m, cols, rows };

    let mut tiles = Vec::with_capacity(grid.len());
    for row in 0..rows {
        for col in 0..cols {
            tiles.push(Tile {
                id: grid.tile_id(col, row),
                col,
                row,
                centroid: grid.centroid(col, row),
                opportunities: 0,
            });
        }
    }
    Ok((grid, tiles))
}

fn cover_count<T: Scalar>(extent: T, len: T) -> usize {
    // relative slack so that 3000 m / 1000 m stays 3 tiles
    let ratio = extent / len;
    let snapped = ratio.round();
    if (ratio - snapped).abs() <= T::lit(1e-9) * snapped.max(T::one()) {
        snapped.to_usize().unwrap_or(0).max(1)
    } else {
        ratio.ceil().to_usize().unwrap_or(0).max(1)
    }
}

/// Outcome of [`count_opportunities`].
#[derive(Clone, Debug, PartialEq)]
pub struct OpportunityCount {
    pub counted: u64,
    pub dropped: u64,
}

/// Fill `O_c` for every tile with the number of amenity points it contains.
/// Points outside the grid are dropped and reported.
pub fn count_opportunities<T: Scalar>(grid: &Grid<T>, tiles: &mut [Tile<T>], points: &[Point<T>]) -> OpportunityCount {
    for tile in tiles.iter_mut() {
        tile.opportunities = 0;
    }
    let mut dropped = 0;
    let mut counted = 0;
    for p in points {
        match grid.locate(p) {
            Some(TileId(i)) => {
                tiles[i].opportunities += 1;
                counted += 1;
            }
            None => dropped += 1,
        }
    }
    OpportunityCount { counted, dropped }
}
