use std::collections::HashMap;
use std::fmt;

use rand::Rng;

use super::{EnvError, Environment, StepOutcome};

/// The bundled four-room layout; see [`MazeLayout::parse`] for the format.
pub const FOUR_ROOMS: &str = include_str!("../../assets/four_rooms.txt");

pub const REGION_LABELS: [char; 8] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MazeAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
}

impl MazeAction {
    pub const ALL: [MazeAction; 4] = [MazeAction::Up, MazeAction::Down, MazeAction::Left, MazeAction::Right];

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            MazeAction::Up => (-1, 0),
            MazeAction::Down => (1, 0),
            MazeAction::Left => (0, -1),
            MazeAction::Right => (0, 1),
        }
    }
}

/// The three probe cells at which generated return samples are reported;
/// `start` doubles as the episode start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeStates {
    pub start: Cell,
    pub first: Cell,
    pub second: Cell,
}

impl ProbeStates {
    pub fn all(&self) -> [Cell; 3] {
        [self.start, self.first, self.second]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MazeLayout {
    rows: usize,
    cols: usize,
    walls: Vec<bool>,
    /// Region index per cell, `None` in the neutral aisle.
    regions: Vec<Option<usize>>,
    probes: ProbeStates,
}

impl MazeLayout {
    /// Parses a whitespace-separated grid: `#` wall, `.` free, `A`..`H`
    /// reward regions, `S0`/`S1`/`S2` free probe cells (`S0` is the start).
    /// Cells outside the grid behave as walls.
    pub fn parse(text: &str) -> Result<Self, EnvError> {
        let mut rows = 0;
        let mut cols = 0;
        let mut walls = Vec::new();
        let mut regions = Vec::new();
        let mut probes: [Option<Cell>; 3] = [None; 3];
        for (line_no, line) in text.lines().enumerate() {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            let err = |msg: String| EnvError::Layout { line: line_no + 1, msg };
            if rows == 0 {
                cols = tokens.len();
            } else if tokens.len() != cols {
                return Err(err(format!("expected {cols} cells, found {}", tokens.len())));
            }
            for (col, tok) in tokens.iter().enumerate() {
                let cell = Cell { row: rows, col };
                let (wall, region) = match *tok {
                    "#" => (true, None),
                    "." => (false, None),
                    "S0" | "S1" | "S2" => {
                        let k = (tok.as_bytes()[1] - b'0') as usize;
                        if probes[k].replace(cell).is_some() {
                            return Err(err(format!("duplicate probe {tok}")));
                        }
                        (false, None)
                    }
                    t => match REGION_LABELS.iter().position(|c| t.len() == 1 && t.starts_with(*c)) {
                        Some(r) => (false, Some(r)),
                        None => return Err(err(format!("unknown token {t:?}"))),
                    },
                };
                walls.push(wall);
                regions.push(region);
            }
            rows += 1;
        }
        let missing = |k: usize| EnvError::Layout {
            line: 0,
            msg: format!("probe S{k} missing"),
        };
        let probes = ProbeStates {
            start: probes[0].ok_or_else(|| missing(0))?,
            first: probes[1].ok_or_else(|| missing(1))?,
            second: probes[2].ok_or_else(|| missing(2))?,
        };
        Ok(MazeLayout {
            rows,
            cols,
            walls,
            regions,
            probes,
        })
    }

    pub fn four_rooms() -> Self {
        Self::parse(FOUR_ROOMS).expect("bundled layout is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn probes(&self) -> ProbeStates {
        self.probes
    }

    pub fn is_wall(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 || row as usize >= self.rows || col as usize >= self.cols {
            return true;
        }
        self.walls[row as usize * self.cols + col as usize]
    }

    pub fn region(&self, cell: Cell) -> Option<usize> {
        self.regions[cell.row * self.cols + cell.col]
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.rows)
            .flat_map(|row| (0..self.cols).map(move |col| Cell { row, col }))
            .filter(|c| !self.walls[c.row * self.cols + c.col])
            .collect()
    }
}

/// The multi-reward maze: one reward component per region, paid on entry
/// at `1 / (1 - gamma)` so each component's return is a visit frequency
/// scaled to the same range for every discount.
#[derive(Clone, Debug)]
pub struct Maze {
    layout: MazeLayout,
    gamma: f64,
    cells: Vec<Cell>,
    index: HashMap<Cell, usize>,
}

impl Maze {
    pub fn new(layout: MazeLayout, gamma: f64) -> Result<Self, EnvError> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(EnvError::InvalidParams(format!("gamma {gamma} outside [0, 1)")));
        }
        let cells = layout.free_cells();
        let index = cells.iter().enumerate().map(|(i, c)| (*c, i)).collect();
        Ok(Maze {
            layout,
            gamma,
            cells,
            index,
        })
    }

    pub fn four_rooms(gamma: f64) -> Result<Self, EnvError> {
        Self::new(MazeLayout::four_rooms(), gamma)
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn reward_scale(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    /// The deterministic successor of `state` under `action`.
    pub fn next_cell(&self, state: Cell, action: MazeAction) -> Cell {
        let (dr, dc) = action.delta();
        let (r, c) = (state.row as isize + dr, state.col as isize + dc);
        if self.layout.is_wall(r, c) {
            state
        } else {
            Cell {
                row: r as usize,
                col: c as usize,
            }
        }
    }

    pub fn reward_at(&self, cell: Cell) -> Vec<f64> {
        let mut r = vec![0.0; REGION_LABELS.len()];
        if let Some(k) = self.layout.region(cell) {
            r[k] = self.reward_scale();
        }
        r
    }
}

impl Environment for Maze {
    type State = Cell;

    fn n_actions(&self) -> usize {
        4
    }

    fn reward_dim(&self) -> usize {
        REGION_LABELS.len()
    }

    fn n_states(&self) -> usize {
        self.cells.len()
    }

    fn reset(&self) -> Cell {
        self.layout.probes.start
    }

    fn step<R: Rng + ?Sized>(&self, state: &Cell, action: usize, _rng: &mut R) -> Result<StepOutcome<Cell>, EnvError> {
        let action = MazeAction::from_index(action).ok_or(EnvError::InvalidAction { action, n_actions: 4 })?;
        if !self.index.contains_key(state) {
            return Err(EnvError::InvalidState(format!("{state} is not a free cell")));
        }
        let next = self.next_cell(*state, action);
        Ok(StepOutcome {
            reward: self.reward_at(next),
            next_state: next,
            terminal: false,
        })
    }

    fn state_index(&self, state: &Cell) -> usize {
        self.index[state]
    }

    fn state_from_index(&self, index: usize) -> Cell {
        self.cells[index]
    }

    fn state_features(&self, state: &Cell) -> Vec<f64> {
        let scale = |n: usize| if n > 1 { (n - 1) as f64 } else { 1.0 };
        vec![
            state.row as f64 / scale(self.layout.rows),
            state.col as f64 / scale(self.layout.cols),
        ]
    }
}
