use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, StepOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    North,
    South,
}

impl Face {
    pub const BOTH: [Face; 2] = [Face::North, Face::South];

    pub fn name(self) -> &'static str {
        match self {
            Face::North => "north",
            Face::South => "south",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    /// Progress at which the summit is reached.
    pub summit: usize,
    /// Largest fall after a wrong action.
    pub slope: usize,
    /// Reward for every non-summit step (negative).
    pub step_cost: f64,
    pub summit_reward: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClimberParams {
    pub north: FaceParams,
    pub south: FaceParams,
}

impl Default for ClimberParams {
    fn default() -> Self {
        ClimberParams {
            north: FaceParams {
                summit: 10,
                slope: 4,
                step_cost: -0.02,
                summit_reward: 10.0,
            },
            south: FaceParams {
                summit: 20,
                slope: 1,
                step_cost: -0.01,
                summit_reward: 1.0,
            },
        }
    }
}

impl ClimberParams {
    pub fn face(&self, face: Face) -> &FaceParams {
        match face {
            Face::North => &self.north,
            Face::South => &self.south,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        for face in Face::BOTH {
            let p = self.face(face);
            if p.summit < 2 {
                return Err(EnvError::InvalidParams(format!("{} summit must be at least 2", face.name())));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EnvError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EnvError> {
        let p: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        p.validate()?;
        Ok(p)
    }
}

/// Progress is 0 at camp, where no face has been chosen yet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClimberState {
    pub progress: usize,
    pub face: Option<Face>,
}

impl ClimberState {
    pub const CAMP: ClimberState = ClimberState {
        progress: 0,
        face: None,
    };

    pub fn is_camp(&self) -> bool {
        self.progress == 0
    }
}

/// Two routes to a summit. Each step the correct bit advances one unit; the
/// wrong bit drops the climber by a uniform amount up to the face's slope.
/// The correct bits are drawn once per instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Climber {
    params: ClimberParams,
    north_bits: Vec<u8>,
    south_bits: Vec<u8>,
}

impl Climber {
    pub fn new(params: ClimberParams, seed: u64) -> Result<Self, EnvError> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = |n: usize| (0..n).map(|_| rng.random_range(0..2u8)).collect::<Vec<_>>();
        let north_bits = bits(params.north.summit);
        let south_bits = bits(params.south.summit);
        Ok(Climber {
            params,
            north_bits,
            south_bits,
        })
    }

    pub fn with_bits(params: ClimberParams, north_bits: Vec<u8>, south_bits: Vec<u8>) -> Result<Self, EnvError> {
        params.validate()?;
        if north_bits.len() != params.north.summit || south_bits.len() != params.south.summit {
            return Err(EnvError::InvalidParams("one bit per progress level is required".into()));
        }
        Ok(Climber {
            params,
            north_bits,
            south_bits,
        })
    }

    pub fn params(&self) -> &ClimberParams {
        &self.params
    }

    /// The action that advances from `progress` on `face`.
    pub fn correct_action(&self, face: Face, progress: usize) -> u8 {
        match face {
            Face::North => self.north_bits[progress],
            Face::South => self.south_bits[progress],
        }
    }

    pub fn bits(&self, face: Face) -> &[u8] {
        match face {
            Face::North => &self.north_bits,
            Face::South => &self.south_bits,
        }
    }

    pub fn is_terminal(&self, state: &ClimberState) -> bool {
        state.face.is_some_and(|f| state.progress >= self.params.face(f).summit)
    }

    /// Biggest summit reward, the scale used to cap intrinsic rewards.
    pub fn reward_scale(&self) -> f64 {
        self.params.north.summit_reward.abs().max(self.params.south.summit_reward.abs())
    }

    fn arrive(&self, face: Face, progress: usize) -> StepOutcome<ClimberState> {
        let p = self.params.face(face);
        let summit = progress >= p.summit;
        let next_state = if progress == 0 {
            ClimberState::CAMP
        } else {
            ClimberState {
                progress,
                face: Some(face),
            }
        };
        StepOutcome {
            next_state,
            reward: vec![if summit { p.summit_reward } else { p.step_cost }],
            terminal: summit,
        }
    }
}

impl Environment for Climber {
    type State = ClimberState;

    fn n_actions(&self) -> usize {
        2
    }

    fn reward_dim(&self) -> usize {
        1
    }

    /// Camp, then every progress level of each face including its summit.
    fn n_states(&self) -> usize {
        1 + self.params.north.summit + self.params.south.summit
    }

    fn reset(&self) -> ClimberState {
        ClimberState::CAMP
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &ClimberState,
        action: usize,
        rng: &mut R,
    ) -> Result<StepOutcome<ClimberState>, EnvError> {
        self.check_action(action)?;
        if self.is_terminal(state) {
            return Err(EnvError::TerminalState);
        }
        let face = match state.face {
            None if state.progress == 0 => {
                let face = if action == 1 { Face::South } else { Face::North };
                return Ok(self.arrive(face, 1));
            }
            Some(face) if state.progress > 0 => face,
            _ => return Err(EnvError::InvalidState(format!("{state:?}"))),
        };
        let s = state.progress;
        if action as u8 == self.correct_action(face, s) {
            Ok(self.arrive(face, s + 1))
        } else {
            let fall = rng.random_range(0..=self.params.face(face).slope);
            Ok(self.arrive(face, s.saturating_sub(fall)))
        }
    }

    fn state_index(&self, state: &ClimberState) -> usize {
        match state.face {
            None => 0,
            Some(Face::North) => state.progress,
            Some(Face::South) => self.params.north.summit + state.progress,
        }
    }

    fn state_from_index(&self, index: usize) -> ClimberState {
        let n = self.params.north.summit;
        match index {
            0 => ClimberState::CAMP,
            i if i <= n => ClimberState {
                progress: i,
                face: Some(Face::North),
            },
            i => ClimberState {
                progress: i - n,
                face: Some(Face::South),
            },
        }
    }

    /// Progress as a fraction of the face's summit, and a North indicator.
    fn state_features(&self, state: &ClimberState) -> Vec<f64> {
        match state.face {
            None => vec![0.0, 0.0],
            Some(f) => vec![
                state.progress as f64 / self.params.face(f).summit as f64,
                if f == Face::North { 1.0 } else { 0.0 },
            ],
        }
    }
}
