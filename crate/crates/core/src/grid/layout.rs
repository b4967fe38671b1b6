//! Text-map gridworld layouts.
//!
//! A layout document is a newline-separated list of rows where `#` marks a
//! wall and `.` a free cell. All rows must have the same length and the free
//! cells must form one 4-connected region.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

/// Errors raised while parsing a layout document.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("layout is empty")]
    Empty,
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("unknown character {ch:?} at row {row}, column {col}")]
    UnknownChar { ch: char, row: usize, col: usize },
    #[error("layout has no free cells")]
    NoFreeCells,
    #[error("free cells are disconnected: cell ({row}, {col}) is unreachable from ({from_row}, {from_col})")]
    Disconnected {
        row: usize,
        col: usize,
        from_row: usize,
        from_col: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Free,
}

/// A validated rectangular gridworld map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    name: String,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
}

/// Layouts shipped with the crate, addressable as `builtin:<name>`.
pub const BUILTIN_LAYOUTS: &[(&str, &str)] = &[
    ("open10", include_str!("../../layouts/open_room_10x10.txt")),
    ("open5", include_str!("../../layouts/open_room_5x5.txt")),
    ("fourrooms", include_str!("../../layouts/four_rooms_21x21.txt")),
];

impl GridLayout {
    /// Parses and validates a layout document.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, LayoutError> {
        let rows: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(LayoutError::Empty);
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut cells = Vec::with_capacity(width * height);
        for (row, line) in rows.iter().enumerate() {
            let found = line.chars().count();
            if found != width {
                return Err(LayoutError::Ragged {
                    row,
                    expected: width,
                    found,
                });
            }
            for (col, ch) in line.chars().enumerate() {
                cells.push(match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Free,
                    _ => return Err(LayoutError::UnknownChar { ch, row, col }),
                });
            }
        }
        let layout = GridLayout {
            name: name.into(),
            width,
            height,
            cells,
        };
        layout.check_connected()?;
        Ok(layout)
    }

    /// Looks up one of the [`BUILTIN_LAYOUTS`].
    pub fn builtin(name: &str) -> Option<Self> {
        BUILTIN_LAYOUTS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(n, text)| Self::parse(*n, text).expect("builtin layouts are valid"))
    }

    /// An all-free `width` x `height` room without walls.
    pub fn open(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0);
        GridLayout {
            name: format!("open{width}x{height}"),
            width,
            height,
            cells: vec![Cell::Free; width * height],
        }
    }

    fn check_connected(&self) -> Result<(), LayoutError> {
        let start = self
            .cells
            .iter()
            .position(|c| *c == Cell::Free)
            .ok_or(LayoutError::NoFreeCells)?;
        let mut seen = vec![false; self.cells.len()];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(idx) = queue.pop_front() {
            let (r, c) = (idx / self.width, idx % self.width);
            for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
                if let Some(n) = self.offset(r, c, dr, dc) {
                    if self.cells[n] == Cell::Free && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        match (0..self.cells.len()).find(|&i| self.cells[i] == Cell::Free && !seen[i]) {
            None => Ok(()),
            Some(i) => Err(LayoutError::Disconnected {
                row: i / self.width,
                col: i % self.width,
                from_row: start / self.width,
                from_col: start % self.width,
            }),
        }
    }

    /// Flat index of the neighbour at `(r + dr, c + dc)` if it lies on the map.
    pub(crate) fn offset(&self, r: usize, c: usize, dr: i64, dc: i64) -> Option<usize> {
        let nr = r as i64 + dr;
        let nc = c as i64 + dc;
        if nr < 0 || nc < 0 || nr >= self.height as i64 || nc >= self.width as i64 {
            return None;
        }
        Some(nr as usize * self.width + nc as usize)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn is_free(&self, row: usize, col: usize) -> bool {
        self.cell(row, col) == Cell::Free
    }

    pub fn free_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Free).count()
    }

    pub fn wall_count(&self) -> usize {
        self.cells.len() - self.free_count()
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }
}

impl fmt::Display for GridLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.cells.chunks(self.width) {
            for cell in row {
                f.write_str(match cell {
                    Cell::Wall => "#",
                    Cell::Free => ".",
                })?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}
