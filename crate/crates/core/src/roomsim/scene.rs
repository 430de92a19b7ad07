use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Pair, DEFAULT_SPEED_OF_SOUND_MPS};
use crate::error::{invalid, Error, Result};
use crate::geometry::{is_finite, to_array, vec3, Vec3};
use crate::signals::DEFAULT_SAMPLE_RATE_HZ;

/// Axis-aligned room spanning `[0, extents]` with one reflection coefficient
/// shared by all six walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Room {
    pub extents: Vec3,
    pub beta: f64,
}

impl Room {
    pub fn diagonal_m(&self) -> f64 {
        self.extents.norm()
    }

    pub fn contains_strictly(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] > 0.0 && p[a] < self.extents[a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room: Option<Room>,
    pub speakers: Vec<Vec3>,
    pub microphones: Vec<Vec3>,
    pub speed_of_sound_mps: f64,
    pub image_order: u32,
    pub sample_rate_hz: f64,
}

impl Scene {
    pub fn free_space(speakers: Vec<Vec3>, microphones: Vec<Vec3>) -> Self {
        Self {
            room: None,
            speakers,
            microphones,
            speed_of_sound_mps: DEFAULT_SPEED_OF_SOUND_MPS,
            image_order: 0,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }

    pub fn shoebox(
        extents: [f64; 3],
        beta: f64,
        speakers: Vec<Vec3>,
        microphones: Vec<Vec3>,
        image_order: u32,
    ) -> Result<Self> {
        let scene = Self {
            room: Some(Room {
                extents: vec3(extents),
                beta,
            }),
            image_order,
            ..Self::free_space(speakers, microphones)
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.speed_of_sound_mps.is_finite() && self.speed_of_sound_mps > 0.0) {
            return Err(invalid(format!(
                "speed of sound must be positive, got {}",
                self.speed_of_sound_mps
            )));
        }
        crate::signals::check_rate(self.sample_rate_hz)?;
        let all = self.speakers.iter().chain(&self.microphones);
        if let Some(p) = all.clone().find(|p| !is_finite(p)) {
            return Err(invalid(format!("non-finite position {p:?}")));
        }
        if let Some(room) = &self.room {
            if !(0.0..=1.0).contains(&room.beta) {
                return Err(invalid(format!("wall reflection coefficient {} outside [0, 1]", room.beta)));
            }
            if !room.extents.iter().all(|e| e.is_finite() && *e > 0.0) {
                return Err(invalid(format!("room extents must be positive, got {:?}", room.extents)));
            }
            if let Some(p) = all.clone().find(|p| !room.contains_strictly(p)) {
                return Err(invalid(format!(
                    "position {:?} is not strictly inside the room",
                    to_array(p)
                )));
            }
        }
        Ok(())
    }

    pub fn pair_positions(&self, pair: Pair) -> Result<(Vec3, Vec3)> {
        let spk = self
            .speakers
            .get(pair.speaker)
            .ok_or_else(|| invalid(format!("speaker index {} out of range", pair.speaker)))?;
        let mic = self
            .microphones
            .get(pair.microphone)
            .ok_or_else(|| invalid(format!("microphone index {} out of range", pair.microphone)))?;
        Ok((*spk, *mic))
    }

    /// Every (speaker, microphone) combination, speaker-major.
    pub fn all_pairs(&self) -> Vec<Pair> {
        (0..self.speakers.len())
            .flat_map(|s| (0..self.microphones.len()).map(move |m| Pair::new(s, m)))
            .collect()
    }

    pub fn with_beta(&self, beta: f64) -> Scene {
        let mut out = self.clone();
        if let Some(room) = &mut out.room {
            room.beta = beta;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    pub position: Vec3,
    pub gain: f64,
}

/// Point reflectors standing in for a body surface.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReflectorCloud {
    pub points: Vec<Reflector>,
}

impl ReflectorCloud {
    pub fn single(position: Vec3, gain: f64) -> Self {
        Self {
            points: vec![Reflector { position, gain }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self
            .points
            .iter()
            .find(|r| !is_finite(&r.position) || !r.gain.is_finite())
        {
            Some(r) => Err(invalid(format!("non-finite reflector {r:?}"))),
            None => Ok(()),
        }
    }
}

/// On-disk JSON scene. Lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    #[serde(default)]
    pub room: Option<[f64; 3]>,
    #[serde(default)]
    pub beta: f64,
    pub speakers: Vec<[f64; 3]>,
    pub microphones: Vec<[f64; 3]>,
    #[serde(default = "default_speed")]
    pub speed_of_sound: f64,
    #[serde(default)]
    pub image_order: u32,
    #[serde(default)]
    pub reflectors: Vec<ReflectorEntry>,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflectorEntry {
    pub position: [f64; 3],
    #[serde(default = "unit_gain")]
    pub gain: f64,
}

fn default_speed() -> f64 {
    DEFAULT_SPEED_OF_SOUND_MPS
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

fn unit_gain() -> f64 {
    1.0
}

impl SceneFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scene file {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("scene JSON line {} column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn to_scene(&self) -> Result<(Scene, ReflectorCloud)> {
        let scene = Scene {
            room: self.room.map(|r| Room {
                extents: vec3(r),
                beta: self.beta,
            }),
            speakers: self.speakers.iter().copied().map(vec3).collect(),
            microphones: self.microphones.iter().copied().map(vec3).collect(),
            speed_of_sound_mps: self.speed_of_sound,
            image_order: self.image_order,
            sample_rate_hz: self.sample_rate,
        };
        scene.validate()?;
        let cloud = ReflectorCloud {
            points: self
                .reflectors
                .iter()
                .map(|r| Reflector {
                    position: vec3(r.position),
                    gain: r.gain,
                })
                .collect(),
        };
        cloud.validate()?;
        Ok((scene, cloud))
    }

    pub fn from_scene(scene: &Scene, body: &ReflectorCloud) -> Self {
        Self {
            room: scene.room.map(|r| to_array(&r.extents)),
            beta: scene.room.map_or(0.0, |r| r.beta),
            speakers: scene.speakers.iter().map(to_array).collect(),
            microphones: scene.microphones.iter().map(to_array).collect(),
            speed_of_sound: scene.speed_of_sound_mps,
            image_order: scene.image_order,
            reflectors: body
                .points
                .iter()
                .map(|r| ReflectorEntry {
                    position: to_array(&r.position),
                    gain: r.gain,
                })
                .collect(),
            sample_rate: scene.sample_rate_hz,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_and_full() {
        let f = SceneFile::parse(r#"{"speakers": [[0,0,0]], "microphones": [[1,0,0]]}"#).unwrap();
        let (scene, cloud) = f.to_scene().unwrap();
        assert!(scene.room.is_none());
        assert_eq!(scene.speed_of_sound_mps, 343.0);
        assert!(cloud.points.is_empty());

        let f = SceneFile::parse(
            r#"{"room": [4,5,3], "beta": 0.4, "speakers": [[1,1,1]], "microphones": [[2,2,2]],
                "speed_of_sound": 340, "image_order": 2,
                "reflectors": [{"position": [2,3,1], "gain": 0.5}]}"#,
        )
        .unwrap();
        let (scene, cloud) = f.to_scene().unwrap();
        assert_eq!(scene.room.unwrap().beta, 0.4);
        assert_eq!(cloud.points[0].gain, 0.5);
        assert_eq!(SceneFile::from_scene(&scene, &cloud), f);
    }

    #[test]
    fn invalid_scenes() {
        let outside = r#"{"room": [4,5,3], "speakers": [[5,1,1]], "microphones": [[2,2,2]]}"#;
        assert!(SceneFile::parse(outside).unwrap().to_scene().is_err());
        let beta = r#"{"room": [4,5,3], "beta": 1.5, "speakers": [[1,1,1]], "microphones": [[2,2,2]]}"#;
        assert!(SceneFile::parse(beta).unwrap().to_scene().is_err());
        let speed = r#"{"speakers": [[1,1,1]], "microphones": [[2,2,2]], "speed_of_sound": 0}"#;
        assert!(SceneFile::parse(speed).unwrap().to_scene().is_err());
        let err = SceneFile::parse("{\n\"speakers\": oops}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
