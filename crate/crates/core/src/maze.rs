//! Perfect-maze generation, the caterpillar's DFS tour, and its kinematics.
//!
//! The caterpillar never steers: it follows a fixed depth-first tour of the
//! maze and loops back to the start, so engagement only changes its speed.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAZE_SIZE: usize = 12;
pub const DEFAULT_SEGMENTS: u32 = 5;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MazeError {
    #[error("maze must be at least 2x2, got {width}x{height}")]
    Degenerate { width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }
}

/// Rectangular maze. `walls[cell]` holds `[n, e, s, w]`, `true` meaning the
/// edge is closed. Cells are indexed row-major from the top-left.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazeGrid {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub walls: Vec<[bool; 4]>,
}

impl MazeGrid {
    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn neighbor(&self, cell: usize, dir: Direction) -> Option<usize> {
        let (x, y) = self.coords(cell);
        match dir {
            Direction::North if y > 0 => Some(cell - self.width),
            Direction::South if y + 1 < self.height => Some(cell + self.width),
            Direction::West if x > 0 => Some(cell - 1),
            Direction::East if x + 1 < self.width => Some(cell + 1),
            _ => None,
        }
    }

    pub fn is_open(&self, cell: usize, dir: Direction) -> bool {
        !self.walls[cell][dir as usize]
    }

    /// True iff `a` and `b` are adjacent and the edge between them is open.
    pub fn connects(&self, a: usize, b: usize) -> bool {
        Direction::ALL
            .iter()
            .any(|&d| self.neighbor(a, d) == Some(b) && self.is_open(a, d))
    }

    /// Number of open internal edges, each counted once.
    pub fn open_edge_count(&self) -> usize {
        (0..self.cell_count())
            .map(|c| {
                [Direction::East, Direction::South]
                    .iter()
                    .filter(|&&d| self.neighbor(c, d).is_some() && self.is_open(c, d))
                    .count()
            })
            .sum()
    }

    fn carve(&mut self, cell: usize, dir: Direction) {
        let next = self.neighbor(cell, dir).expect("carving off the grid");
        self.walls[cell][dir as usize] = false;
        self.walls[next][dir.opposite() as usize] = false;
    }
}

/// Recursive-backtracker (randomised DFS) perfect maze, deterministic in
/// `seed`.
pub fn generate_maze(width: usize, height: usize, seed: u64) -> Result<MazeGrid, MazeError> {
    if width < 2 || height < 2 {
        return Err(MazeError::Degenerate { width, height });
    }
    let mut maze = MazeGrid {
        width,
        height,
        seed,
        walls: vec![[true; 4]; width * height],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut visited = vec![false; maze.cell_count()];
    let mut stack = vec![0usize];
    visited[0] = true;
    let mut options: Vec<Direction> = Vec::with_capacity(4);
    while let Some(&cell) = stack.last() {
        options.clear();
        options.extend(
            Direction::ALL
                .iter()
                .copied()
                .filter(|&d| maze.neighbor(cell, d).is_some_and(|n| !visited[n])),
        );
        if options.is_empty() {
            stack.pop();
            continue;
        }
        let dir = options[rng.random_range(0..options.len())];
        let next = maze.neighbor(cell, dir).unwrap();
        maze.carve(cell, dir);
        visited[next] = true;
        stack.push(next);
    }
    Ok(maze)
}

/// Depth-first tour from cell 0 that visits every cell and backtracks to the
/// start, trying neighbours in N, E, S, W order. A perfect maze with `n`
/// cells yields `2·(n − 1) + 1` entries.
pub fn plan_route(maze: &MazeGrid) -> Vec<usize> {
    let n = maze.cell_count();
    let mut visited = vec![false; n];
    let mut route = Vec::with_capacity(2 * n);
    let mut stack = vec![0usize];
    visited[0] = true;
    route.push(0);
    while let Some(&cell) = stack.last() {
        let next = Direction::ALL.iter().find_map(|&d| {
            maze.neighbor(cell, d)
                .filter(|&nb| maze.is_open(cell, d) && !visited[nb])
        });
        match next {
            Some(nb) => {
                visited[nb] = true;
                stack.push(nb);
                route.push(nb);
            }
            None => {
                stack.pop();
                if let Some(&back) = stack.last() {
                    route.push(back);
                }
            }
        }
    }
    route
}

/// Position of the caterpillar along its tour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaterpillarState {
    /// Continuous index into the route, in cell units; always `< steps`.
    pub path_position: f64,
    /// Total distance covered, in cells, ignoring wrap-around.
    pub distance: f64,
    pub segments: u32,
    pub drop_count: u64,
}

impl Default for CaterpillarState {
    fn default() -> Self {
        CaterpillarState {
            path_position: 0.0,
            distance: 0.0,
            segments: DEFAULT_SEGMENTS,
            drop_count: 0,
        }
    }
}

impl CaterpillarState {
    pub fn head_index(&self) -> usize {
        libm::floor(self.path_position) as usize
    }

    pub fn head_cell(&self, route: &[usize]) -> usize {
        route[self.head_index().min(route.len() - 1)]
    }

    /// Route cells occupied by the body, head first, wrapping around the tour.
    pub fn body_cells(&self, route: &[usize]) -> Vec<usize> {
        let steps = route.len().saturating_sub(1).max(1);
        let head = self.head_index();
        (0..self.segments as usize)
            .map(|i| route[(head + steps * (i / steps + 1) - i) % steps])
            .collect()
    }
}

/// Moves the caterpillar `speed · dt` cells along the route, wrapping to the
/// start when it passes the end. `route` is the full tour from [`plan_route`].
pub fn advance(state: CaterpillarState, speed: f64, dt_ms: u64, route: &[usize]) -> CaterpillarState {
    let steps = route.len().saturating_sub(1) as f64;
    let delta = speed.max(0.0) * dt_ms as f64 / 1000.0;
    let mut path_position = state.path_position + delta;
    if steps > 0.0 {
        path_position %= steps;
    } else {
        path_position = 0.0;
    }
    CaterpillarState {
        path_position,
        distance: state.distance + delta,
        ..state
    }
}

/// Serialisable maze snapshot for rendering clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MazeView {
    pub width: usize,
    pub height: usize,
    pub walls: Vec<[bool; 4]>,
    pub route: Vec<usize>,
}

impl MazeView {
    pub fn new(maze: &MazeGrid, route: &[usize]) -> Self {
        MazeView {
            width: maze.width,
            height: maze.height,
            walls: maze.walls.clone(),
            route: route.to_vec(),
        }
    }
}
