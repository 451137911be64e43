//! Symmetries of the search problem.
//!
//! The isotropic hit model depends only on the distance to the source, so on
//! a square grid the eight symmetries of the square map search problems onto
//! themselves. The windy model keeps only the mirror across the wind axis.
//! Transforming a belief, the searcher position, and actions consistently
//! yields an equivalent problem; the deep value learner exploits this to
//! augment collected beliefs.

use crate::belief::Belief;
use crate::cases::CaseSpec;
use crate::env::{Action, Cell, GridSpec, ModelVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    /// Mirror across the wind (x) axis: `(x, y) -> (x, -y)`.
    MirrorY,
    /// Mirror across the y axis: `(x, y) -> (-x, y)`.
    MirrorX,
    /// Mirror across the main diagonal: `(x, y) -> (y, x)`.
    MirrorDiag,
    /// Mirror across the anti-diagonal: `(x, y) -> (-y, -x)`.
    MirrorAnti,
}

pub const DIHEDRAL_SQUARE: [Symmetry; 8] = [
    Symmetry::Identity,
    Symmetry::Rot90,
    Symmetry::Rot180,
    Symmetry::Rot270,
    Symmetry::MirrorY,
    Symmetry::MirrorX,
    Symmetry::MirrorDiag,
    Symmetry::MirrorAnti,
];

pub const DIHEDRAL_RECT: [Symmetry; 4] = [
    Symmetry::Identity,
    Symmetry::Rot180,
    Symmetry::MirrorY,
    Symmetry::MirrorX,
];

pub const WIND_MIRROR: [Symmetry; 2] = [Symmetry::Identity, Symmetry::MirrorY];

/// The symmetries under which `case`'s observation model is invariant.
pub fn group_for(case: &CaseSpec) -> &'static [Symmetry] {
    match case.params.variant {
        ModelVariant::Isotropic { .. } => {
            if case.grid.n_x == case.grid.n_y {
                &DIHEDRAL_SQUARE
            } else {
                &DIHEDRAL_RECT
            }
        }
        ModelVariant::Windy { .. } => &WIND_MIRROR,
    }
}

impl Symmetry {
    /// Whether this element needs a square grid.
    pub fn needs_square(self) -> bool {
        matches!(
            self,
            Symmetry::Rot90 | Symmetry::Rot270 | Symmetry::MirrorDiag | Symmetry::MirrorAnti
        )
    }

    /// Linear action on relative offsets.
    pub fn apply_offset(self, ux: isize, uy: isize) -> (isize, isize) {
        match self {
            Symmetry::Identity => (ux, uy),
            Symmetry::Rot90 => (-uy, ux),
            Symmetry::Rot180 => (-ux, -uy),
            Symmetry::Rot270 => (uy, -ux),
            Symmetry::MirrorY => (ux, -uy),
            Symmetry::MirrorX => (-ux, uy),
            Symmetry::MirrorDiag => (uy, ux),
            Symmetry::MirrorAnti => (-uy, -ux),
        }
    }

    /// Action on absolute grid cells (affine: linear part about the center).
    pub fn apply_cell(self, cell: Cell, grid: &GridSpec) -> Cell {
        debug_assert!(!self.needs_square() || grid.n_x == grid.n_y);
        let (nx, ny) = (grid.n_x, grid.n_y);
        let (x, y) = (cell.x, cell.y);
        let (px, py) = match self {
            Symmetry::Identity => (x, y),
            Symmetry::Rot90 => (nx - 1 - y, x),
            Symmetry::Rot180 => (nx - 1 - x, ny - 1 - y),
            Symmetry::Rot270 => (y, ny - 1 - x),
            Symmetry::MirrorY => (x, ny - 1 - y),
            Symmetry::MirrorX => (nx - 1 - x, y),
            Symmetry::MirrorDiag => (y, x),
            Symmetry::MirrorAnti => (nx - 1 - y, ny - 1 - x),
        };
        Cell::new(px, py)
    }

    /// Action on moves (same linear map as offsets).
    pub fn apply_action(self, a: Action) -> Action {
        let (dx, dy) = a.delta();
        match self.apply_offset(dx, dy) {
            (0, 1) => Action::North,
            (0, -1) => Action::South,
            (1, 0) => Action::East,
            (-1, 0) => Action::West,
            _ => unreachable!("symmetries permute unit moves"),
        }
    }

    /// Transforms a belief: permutes the probability array and moves the
    /// searcher position accordingly.
    pub fn apply_belief(self, b: &Belief) -> Belief {
        let grid = *b.grid();
        let w = b.width();
        let (hx, hy) = (grid.n_x as isize - 1, grid.n_y as isize - 1);
        let mut probs = vec![0.0; b.len()];
        for (i, &p) in b.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let ux = i as isize % w as isize - hx;
            let uy = i as isize / w as isize - hy;
            let (tx, ty) = self.apply_offset(ux, uy);
            probs[(ty + hy) as usize * w + (tx + hx) as usize] = p;
        }
        let agent = self.apply_cell(b.agent_pos(), &grid);
        Belief::from_parts(grid, agent, probs).expect("symmetry preserves belief invariants")
    }
}
