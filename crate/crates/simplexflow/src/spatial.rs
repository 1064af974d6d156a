//! Uniform-cell spatial index over particles and boundary vertices.
//!
//! Cell size is twice the minimum target edge length, so a speed-capped
//! particle can never cross two cells in one step and a neighbor query over
//! the 3x3(x3) block around a point is a superset of everything within one
//! cell size of it.

use crate::geom::Vec3;
use crate::{Error, Result};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct UniformGrid {
    cell_size: f64,
    origin: Vec3,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl UniformGrid {
    pub fn new(cell_size: f64) -> UniformGrid {
        assert!(cell_size > 0.0, "cell size must be positive");
        UniformGrid {
            cell_size,
            origin: Vec3::ZERO,
            cells: HashMap::new(),
        }
    }

    pub fn build(items: impl IntoIterator<Item = (usize, Vec3)>, cell_size: f64) -> UniformGrid {
        let mut grid = UniformGrid::new(cell_size);
        for (id, p) in items {
            grid.insert(id, p);
        }
        grid
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn cell_of(&self, p: Vec3) -> (i64, i64, i64) {
        let d = (p - self.origin) / self.cell_size;
        (
            d.x.floor() as i64,
            d.y.floor() as i64,
            d.z.floor() as i64,
        )
    }

    pub fn insert(&mut self, id: usize, p: Vec3) {
        self.cells.entry(self.cell_of(p)).or_default().push(id);
    }

    pub fn remove(&mut self, id: usize, p: Vec3) -> Result<()> {
        let key = self.cell_of(p);
        let bucket = self.cells.get_mut(&key).ok_or_else(|| {
            Error::GridConsistency(format!("item {id} not indexed at cell {key:?}"))
        })?;
        let at = bucket.iter().position(|&x| x == id).ok_or_else(|| {
            Error::GridConsistency(format!("item {id} not indexed at cell {key:?}"))
        })?;
        bucket.swap_remove(at);
        if bucket.is_empty() {
            self.cells.remove(&key);
        }
        Ok(())
    }

    /// Move `id` from its cell at `old` to the cell containing `new`.
    pub fn relocate(&mut self, id: usize, old: Vec3, new: Vec3) -> Result<()> {
        let from = self.cell_of(old);
        let to = self.cell_of(new);
        if from == to {
            // Membership check still applies.
            let present = self
                .cells
                .get(&from)
                .map(|b| b.contains(&id))
                .unwrap_or(false);
            if !present {
                return Err(Error::GridConsistency(format!(
                    "item {id} not indexed at cell {from:?}"
                )));
            }
            return Ok(());
        }
        self.remove(id, old)?;
        self.insert(id, new);
        Ok(())
    }

    /// All items in the 3x3x3 block of cells centered on `x`'s cell.
    pub fn neighbors(&self, x: Vec3) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_neighbor(x, |id| out.push(id));
        out
    }

    /// Visitor form of [`neighbors`](Self::neighbors); avoids the allocation
    /// in the per-step force loop.
    pub fn for_each_neighbor(&self, x: Vec3, mut f: impl FnMut(usize)) {
        let (cx, cy, cz) = self.cell_of(x);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &id in bucket {
                            f(id);
                        }
                    }
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter_items(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.values().flat_map(|b| b.iter().copied())
    }
}
