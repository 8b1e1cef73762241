//! Static maze layout and tile geometry.

use std::collections::VecDeque;

use super::Command;

const LEVEL_ONE: &str = include_str!("../../assets/level1.txt");

/// Points for a regular pellet.
pub const PELLET_POINTS: u32 = 10;
/// Points for a power pellet.
pub const POWER_PELLET_POINTS: u32 = 50;
/// Ghost capture points within a single power window.
pub const GHOST_CHAIN_POINTS: [u32; 4] = [200, 400, 800, 1600];
/// Points for a bonus fruit.
pub const FRUIT_POINTS: u32 = 100;
/// Pellets eaten (power pellets included) at which a bonus fruit appears.
pub const FRUIT_THRESHOLDS: [u32; 2] = [70, 170];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Wall,
    Pellet,
    PowerPellet,
    Empty,
    GhostHouse,
    Tunnel,
}

impl Cell {
    /// Whether Pac-Man and roaming ghosts may stand on this cell.
    pub fn is_walkable(self) -> bool {
        !matches!(self, Cell::Wall | Cell::GhostHouse)
    }

    pub fn is_consumable(self) -> bool {
        matches!(self, Cell::Pellet | Cell::PowerPellet)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tile {
    pub x: i32,
    pub y: i32,
}

impl Tile {
    pub const fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Tile) -> i32 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn dist2(self, other: Tile) -> i64 {
        let dx = i64::from(self.x - other.x);
        let dy = i64::from(self.y - other.y);
        dx * dx + dy * dy
    }

    /// The tile `n` steps away in `dir`, without wrapping.
    pub fn offset(self, dir: Command, n: i32) -> Tile {
        let (dx, dy) = dir.delta();
        Tile::new(self.x + dx * n, self.y + dy * n)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MazeError {
    #[error("maze has no rows")]
    Empty,
    #[error("row {row} has width {got}, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("unknown maze glyph {glyph:?} at ({x}, {y})")]
    Glyph { glyph: char, x: usize, y: usize },
    #[error("maze is missing a {0} marker")]
    MissingMarker(&'static str),
    #[error("consumable at ({0}, {1}) is unreachable from the Pac-Man spawn")]
    Unreachable(i32, i32),
}

/// Immutable maze description. Pellet consumption lives in `GameState`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Maze {
    width: i32,
    height: i32,
    cells: Vec<Cell>,
    pub pacman_spawn: Tile,
    /// Blinky, Pinky, Inky, Clyde.
    pub ghost_spawns: [Tile; 4],
    /// Tile a released ghost appears on, just outside the ghost house door.
    pub house_exit: Tile,
    pub fruit_tile: Tile,
    pellet_count: u32,
    power_count: u32,
}

/// The built-in first level: the classic 28 x 31 layout.
pub fn load_canonical_level() -> Maze {
    Maze::parse(LEVEL_ONE).expect("embedded level is valid")
}

impl Maze {
    /// Parses the text layout.
    ///
    /// Glyphs: `#`/`X` wall, `.` pellet, `o` power pellet, ` ` empty,
    /// `T` tunnel, `G`/`-` ghost house, `S` Pac-Man spawn, `F` fruit tile,
    /// `B` Blinky spawn (also the house exit), `P`/`I`/`C` Pinky/Inky/Clyde
    /// spawns inside the house.
    pub fn parse(text: &str) -> Result<Maze, MazeError> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
        let width = rows.first().ok_or(MazeError::Empty)?.chars().count();
        let mut cells = Vec::with_capacity(width * rows.len());
        let mut spawn = None;
        let mut fruit = None;
        let mut ghosts: [Option<Tile>; 4] = [None; 4];
        for (y, row) in rows.iter().enumerate() {
            let got = row.chars().count();
            if got != width {
                return Err(MazeError::Ragged {
                    row: y,
                    got,
                    expected: width,
                });
            }
            for (x, glyph) in row.chars().enumerate() {
                let tile = Tile::new(x as i32, y as i32);
                let cell = match glyph {
                    '#' | 'X' => Cell::Wall,
                    '.' => Cell::Pellet,
                    'o' => Cell::PowerPellet,
                    ' ' => Cell::Empty,
                    'T' => Cell::Tunnel,
                    'G' | '-' => Cell::GhostHouse,
                    'S' => {
                        spawn = Some(tile);
                        Cell::Empty
                    }
                    'F' => {
                        fruit = Some(tile);
                        Cell::Empty
                    }
                    'B' => {
                        ghosts[0] = Some(tile);
                        Cell::Empty
                    }
                    'P' => {
                        ghosts[1] = Some(tile);
                        Cell::GhostHouse
                    }
                    'I' => {
                        ghosts[2] = Some(tile);
                        Cell::GhostHouse
                    }
                    'C' => {
                        ghosts[3] = Some(tile);
                        Cell::GhostHouse
                    }
                    _ => return Err(MazeError::Glyph { glyph, x, y }),
                };
                cells.push(cell);
            }
        }
        let names = ["Blinky", "Pinky", "Inky", "Clyde"];
        let mut ghost_spawns = [Tile::new(0, 0); 4];
        for (i, g) in ghosts.iter().enumerate() {
            ghost_spawns[i] = g.ok_or(MazeError::MissingMarker(names[i]))?;
        }
        let pellet_count = cells.iter().filter(|c| **c == Cell::Pellet).count() as u32;
        let power_count = cells.iter().filter(|c| **c == Cell::PowerPellet).count() as u32;
        let maze = Maze {
            width: width as i32,
            height: rows.len() as i32,
            cells,
            pacman_spawn: spawn.ok_or(MazeError::MissingMarker("Pac-Man spawn"))?,
            ghost_spawns,
            house_exit: ghost_spawns[0],
            fruit_tile: fruit.ok_or(MazeError::MissingMarker("fruit"))?,
            pellet_count,
            power_count,
        };
        maze.check_reachable()?;
        Ok(maze)
    }

    fn check_reachable(&self) -> Result<(), MazeError> {
        let dist = self.distances_from(self.pacman_spawn);
        for y in 0..self.height {
            for x in 0..self.width {
                let t = Tile::new(x, y);
                if self.cell(t).is_consumable() && dist[self.index(t)].is_none() {
                    return Err(MazeError::Unreachable(x, y));
                }
            }
        }
        Ok(())
    }

    pub fn width(&self) -> i32 {
        self.width
    }

    pub fn height(&self) -> i32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index(&self, t: Tile) -> usize {
        (t.y * self.width + t.x) as usize
    }

    pub fn tile_at(&self, index: usize) -> Tile {
        Tile::new(index as i32 % self.width, index as i32 / self.width)
    }

    pub fn in_bounds(&self, t: Tile) -> bool {
        t.x >= 0 && t.y >= 0 && t.x < self.width && t.y < self.height
    }

    /// Cell at `t`; out-of-bounds tiles read as walls.
    pub fn cell(&self, t: Tile) -> Cell {
        if self.in_bounds(t) {
            self.cells[self.index(t)]
        } else {
            Cell::Wall
        }
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn pellet_count(&self) -> u32 {
        self.pellet_count
    }

    pub fn power_count(&self) -> u32 {
        self.power_count
    }

    /// Regular plus power pellets: everything that must be eaten to clear the level.
    pub fn consumable_count(&self) -> u32 {
        self.pellet_count + self.power_count
    }

    /// Neighbour of `t` in `dir`, wrapping horizontally through tunnel rows.
    pub fn neighbor(&self, t: Tile, dir: Command) -> Tile {
        let mut n = t.offset(dir, 1);
        if n.y == t.y && self.cell(t) == Cell::Tunnel {
            n.x = n.x.rem_euclid(self.width);
        }
        n
    }

    /// Whether a walker on `t` can step towards `dir`.
    pub fn can_move(&self, t: Tile, dir: Command) -> bool {
        self.cell(self.neighbor(t, dir)).is_walkable()
    }

    pub fn exits(&self, t: Tile) -> impl Iterator<Item = Command> + '_ {
        Command::PRIORITY.into_iter().filter(move |d| self.can_move(t, *d))
    }

    /// Breadth-first walking distances from `start` over walkable tiles.
    pub fn distances_from(&self, start: Tile) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.cells.len()];
        if !self.cell(start).is_walkable() {
            return dist;
        }
        let mut queue = VecDeque::new();
        dist[self.index(start)] = Some(0);
        queue.push_back(start);
        while let Some(t) = queue.pop_front() {
            let d = dist[self.index(t)].unwrap_or(0);
            for dir in self.exits(t).collect::<Vec<_>>() {
                let n = self.neighbor(t, dir);
                let slot = &mut dist[self.index(n)];
                if slot.is_none() {
                    *slot = Some(d + 1);
                    queue.push_back(n);
                }
            }
        }
        dist
    }

    /// Upper bound on the score obtainable on this maze under the scoring table.
    pub fn max_score(&self) -> u32 {
        let ghost_chain: u32 = GHOST_CHAIN_POINTS.iter().sum();
        self.pellet_count * PELLET_POINTS
            + self.power_count * (POWER_PELLET_POINTS + ghost_chain)
            + FRUIT_THRESHOLDS.len() as u32 * FRUIT_POINTS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_level_counts() {
        let maze = load_canonical_level();
        assert_eq!((maze.width(), maze.height()), (28, 31));
        assert_eq!(maze.pellet_count(), 240);
        assert_eq!(maze.power_count(), 4);
        assert_eq!(maze.max_score(), 14_800);
    }

    #[test]
    fn power_pellets_sit_near_the_corners() {
        let maze = load_canonical_level();
        let powers: Vec<Tile> = (0..maze.len())
            .map(|i| maze.tile_at(i))
            .filter(|t| maze.cell(*t) == Cell::PowerPellet)
            .collect();
        for p in powers {
            let left = p.x < maze.width() / 2;
            let top = p.y < maze.height() / 2;
            let cx = if left { p.x } else { maze.width() - 1 - p.x };
            let cy = if top { p.y } else { maze.height() - 1 - p.y };
            assert!(cx <= 1 && cy <= 8, "{p:?} is not in a corner");
        }
    }

    #[test]
    fn every_walkable_tile_has_two_exits() {
        let maze = load_canonical_level();
        let dist = maze.distances_from(maze.pacman_spawn);
        for (i, d) in dist.iter().enumerate() {
            if d.is_some() {
                let t = maze.tile_at(i);
                assert!(maze.exits(t).count() >= 2, "dead end at {t:?}");
            }
        }
    }

    #[test]
    fn tunnel_wraps() {
        let maze = load_canonical_level();
        let left = Tile::new(0, 14);
        assert_eq!(maze.neighbor(left, Command::Left), Tile::new(27, 14));
        assert_eq!(maze.neighbor(Tile::new(27, 14), Command::Right), left);
        assert!(maze.can_move(left, Command::Left));
    }

    #[test]
    fn rejects_ragged_and_unreachable() {
        assert!(matches!(Maze::parse("###\n##\n"), Err(MazeError::Ragged { .. })));
        let island = "#######\n#S B F#\n#######\n#.#PIC#\n#######\n";
        assert_eq!(Maze::parse(island), Err(MazeError::Unreachable(1, 3)));
    }
}
