//! Bookshelf domain model: shelf and book geometry, the five book modes,
//! problem instances with their 17-dim parameter vector, and solutions.
//!
//! Conventions: lengths in cm, angles in rad, clockwise-positive θ (θ > 0
//! tilts a book's top toward +x). Shelf frame: x ∈ [−W/2, W/2], y ∈ [0, H].
//! Vertex order per book is v1 = top-right, v2 = bottom-right,
//! v3 = bottom-left, v4 = top-left in the body frame, so the separating
//! plane of a leaning contact crosses v1 of the left book and v4 of the
//! right book, and the ground pivot is v2 (leaning right) or v3 (leaning
//! left).

mod build;
mod generate;
mod oracle;

pub use build::{
    bookshelf_grid, build_minlp, encode_scene, GridAxis, GridConfig, VarLayout, MODE_COUNT,
};
pub use generate::{generate_instance, generate_with_witness, GenConfig, GenerationFailed};
pub use oracle::{check_solution, objective_value, FamilyCheck, FeasibilityReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, RotRect, Vec2};

pub const LAY_LEFT: usize = 0;
pub const UPRIGHT: usize = 1;
pub const LAY_RIGHT: usize = 2;
pub const LEAN_LEFT: usize = 3;
pub const LEAN_RIGHT: usize = 4;

/// Small angular margin separating lean modes from lay/upright poses (rad).
pub const LEAN_MARGIN: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("instance JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelfSpec {
    #[serde(rename = "W")]
    pub width: f64,
    #[serde(rename = "H")]
    pub height: f64,
}

impl ShelfSpec {
    pub fn new(width: f64, height: f64) -> Self {
        assert!(width > 0.0 && height > 0.0, "shelf dimensions must be positive");
        ShelfSpec { width, height }
    }

    pub fn x_min(&self) -> f64 {
        -0.5 * self.width
    }

    pub fn x_max(&self) -> f64 {
        0.5 * self.width
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BookSpec {
    pub width: f64,
    pub height: f64,
}

impl BookSpec {
    pub fn new(width: f64, height: f64) -> Self {
        BookSpec { width, height }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Pose {
    pub x: Vec2,
    pub theta: f64,
}

impl Pose {
    pub fn rect(&self, spec: &BookSpec) -> RotRect {
        RotRect {
            center: self.x,
            half_w: 0.5 * spec.width,
            half_h: 0.5 * spec.height,
            theta: self.theta,
        }
    }

    /// World vertices v1..v4.
    pub fn vertices(&self, spec: &BookSpec) -> [Vec2; 4] {
        self.rect(spec).corners()
    }
}

/// What a leaning book rests against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportRef {
    Book(usize),
    LeftWall,
    RightWall,
}

impl SupportRef {
    /// The support's centroid x for stability checks; walls count as
    /// zero-width books at x = ±W/2.
    pub fn centroid_x(&self, shelf: &ShelfSpec, centroids: &[f64]) -> f64 {
        match self {
            SupportRef::Book(j) => centroids[*j],
            SupportRef::LeftWall => shelf.x_min(),
            SupportRef::RightWall => shelf.x_max(),
        }
    }
}

/// One-hot book mode; lean modes carry the supporting book or wall.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    LayLeft,
    Upright,
    LayRight,
    LeanLeft(SupportRef),
    LeanRight(SupportRef),
}

impl Mode {
    pub fn index(&self) -> usize {
        match self {
            Mode::LayLeft => LAY_LEFT,
            Mode::Upright => UPRIGHT,
            Mode::LayRight => LAY_RIGHT,
            Mode::LeanLeft(_) => LEAN_LEFT,
            Mode::LeanRight(_) => LEAN_RIGHT,
        }
    }

    pub fn support(&self) -> Option<SupportRef> {
        match self {
            Mode::LeanLeft(s) | Mode::LeanRight(s) => Some(*s),
            _ => None,
        }
    }

    pub fn is_lean(&self) -> bool {
        matches!(self, Mode::LeanLeft(_) | Mode::LeanRight(_))
    }
}

#[derive(Clone, Debug)]
pub struct StoredBook {
    pub spec: BookSpec,
    pub pose: Pose,
    pub mode: Mode,
}

/// A problem instance: shelf, the N−1 stored books with their current
/// poses and modes, and the book to insert.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub shelf: ShelfSpec,
    pub stored: Vec<StoredBook>,
    pub insert: BookSpec,
}

impl ProblemInstance {
    pub fn n_books(&self) -> usize {
        self.stored.len() + 1
    }

    /// Index of the inserted book in solution vectors (always last).
    pub fn insert_index(&self) -> usize {
        self.stored.len()
    }

    /// Flattens to the parameter vector Θ: per stored book
    /// (x, y, θ, W_i, H_i), then (W_N, H_N) — 17 numbers for N = 4.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = Vec::with_capacity(self.theta_dim());
        for b in &self.stored {
            t.extend_from_slice(&[b.pose.x[0], b.pose.x[1], b.pose.theta, b.spec.width, b.spec.height]);
        }
        t.push(self.insert.width);
        t.push(self.insert.height);
        t
    }

    pub fn theta_dim(&self) -> usize {
        5 * self.stored.len() + 2
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.shelf.width <= 0.0 || self.shelf.height <= 0.0 {
            return Err(ModelError::InvalidInstance("non-positive shelf dimensions".into()));
        }
        for (i, b) in self.stored.iter().enumerate() {
            if b.spec.width <= 0.0 || b.spec.height <= 0.0 {
                return Err(ModelError::InvalidInstance(format!("book {i} has non-positive size")));
            }
            if b.spec.width.min(b.spec.height) > self.shelf.height
                || b.spec.width.max(b.spec.height) > self.shelf.width.max(self.shelf.height)
            {
                return Err(ModelError::InvalidInstance(format!("book {i} cannot fit the shelf")));
            }
            if let Some(SupportRef::Book(j)) = b.mode.support() {
                if j == i || j >= self.stored.len() {
                    return Err(ModelError::InvalidInstance(format!(
                        "book {i} has invalid lean support {j}"
                    )));
                }
            }
        }
        if self.insert.width <= 0.0 || self.insert.height <= 0.0 {
            return Err(ModelError::InvalidInstance("insert book has non-positive size".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&WireInstance::from(self)).expect("instance serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let wire: WireInstance = serde_json::from_str(s)?;
        let inst = wire.try_into()?;
        Ok(inst)
    }
}

/// Full assignment for one instance: poses and modes for all N books
/// (stored books first, inserted book last) plus one separating plane per
/// unordered pair.
#[derive(Clone, Debug)]
pub struct BookshelfSolution {
    pub poses: Vec<Pose>,
    pub modes: Vec<Mode>,
    pub planes: Vec<PlaneVars>,
    pub objective: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct PlaneVars {
    pub a: Vec2,
    pub b: f64,
}

impl BookshelfSolution {
    pub fn book_specs(instance: &ProblemInstance) -> Vec<BookSpec> {
        let mut specs: Vec<BookSpec> = instance.stored.iter().map(|b| b.spec).collect();
        specs.push(instance.insert);
        specs
    }

    pub fn rect(&self, instance: &ProblemInstance, i: usize) -> RotRect {
        self.poses[i].rect(&Self::book_specs(instance)[i])
    }
}

/// Separating planes for a full scene, one per unordered pair (i < j),
/// oriented so book i sits on the ≤ side. `None` when a pair overlaps.
pub fn scene_planes(specs: &[BookSpec], poses: &[Pose]) -> Vec<Option<PlaneVars>> {
    let n = specs.len();
    let mut planes = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let pa = poses[i].vertices(&specs[i]);
            let pb = poses[j].vertices(&specs[j]);
            planes.push(
                geom::max_margin_plane(&pa, &pb)
                    .map(|p| PlaneVars { a: p.normal, b: p.offset }),
            );
        }
    }
    planes
}

// ---------------------------------------------------------------------------
// Wire format (instance JSON schema)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireInstance {
    shelf: ShelfSpec,
    stored: Vec<WireStored>,
    insert: WireBook,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireBook {
    w: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireStored {
    w: f64,
    h: f64,
    x: f64,
    y: f64,
    theta: f64,
    mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<WireSupport>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireSupport {
    Book(usize),
    Wall(String),
}

impl From<&ProblemInstance> for WireInstance {
    fn from(inst: &ProblemInstance) -> Self {
        let stored = inst
            .stored
            .iter()
            .map(|b| {
                let mode = match b.mode {
                    Mode::LayLeft => "lay_left",
                    Mode::Upright => "upright",
                    Mode::LayRight => "lay_right",
                    Mode::LeanLeft(_) => "lean_left",
                    Mode::LeanRight(_) => "lean_right",
                };
                let support = b.mode.support().map(|s| match s {
                    SupportRef::Book(j) => WireSupport::Book(j),
                    SupportRef::LeftWall => WireSupport::Wall("left_wall".into()),
                    SupportRef::RightWall => WireSupport::Wall("right_wall".into()),
                });
                WireStored {
                    w: b.spec.width,
                    h: b.spec.height,
                    x: b.pose.x[0],
                    y: b.pose.x[1],
                    theta: b.pose.theta,
                    mode: mode.into(),
                    support,
                }
            })
            .collect();
        WireInstance {
            shelf: inst.shelf,
            stored,
            insert: WireBook { w: inst.insert.width, h: inst.insert.height },
        }
    }
}

impl TryFrom<WireInstance> for ProblemInstance {
    type Error = ModelError;

    fn try_from(wire: WireInstance) -> Result<Self, ModelError> {
        let parse_support = |s: &Option<WireSupport>| -> Result<SupportRef, ModelError> {
            match s {
                Some(WireSupport::Book(j)) => Ok(SupportRef::Book(*j)),
                Some(WireSupport::Wall(w)) if w == "left_wall" => Ok(SupportRef::LeftWall),
                Some(WireSupport::Wall(w)) if w == "right_wall" => Ok(SupportRef::RightWall),
                Some(WireSupport::Wall(w)) => {
                    Err(ModelError::InvalidInstance(format!("unknown support `{w}`")))
                }
                None => Err(ModelError::InvalidInstance("lean mode requires a support".into())),
            }
        };
        let mut stored = Vec::new();
        for b in &wire.stored {
            let mode = match b.mode.as_str() {
                "lay_left" => Mode::LayLeft,
                "upright" => Mode::Upright,
                "lay_right" => Mode::LayRight,
                "lean_left" => Mode::LeanLeft(parse_support(&b.support)?),
                "lean_right" => Mode::LeanRight(parse_support(&b.support)?),
                other => {
                    return Err(ModelError::InvalidInstance(format!("unknown mode `{other}`")))
                }
            };
            stored.push(StoredBook {
                spec: BookSpec::new(b.w, b.h),
                pose: Pose { x: [b.x, b.y], theta: b.theta },
                mode,
            });
        }
        let inst = ProblemInstance {
            shelf: wire.shelf,
            stored,
            insert: BookSpec::new(wire.insert.w, wire.insert.h),
        };
        inst.validate()?;
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_book_instance() -> ProblemInstance {
        ProblemInstance {
            shelf: ShelfSpec::new(18.0, 11.0),
            stored: vec![
                StoredBook {
                    spec: BookSpec::new(3.0, 8.0),
                    pose: Pose { x: [-6.0, 4.0], theta: 0.0 },
                    mode: Mode::Upright,
                },
                StoredBook {
                    spec: BookSpec::new(2.0, 7.0),
                    pose: Pose { x: [-2.0, 3.5], theta: 0.0 },
                    mode: Mode::Upright,
                },
            ],
            insert: BookSpec::new(2.5, 6.0),
        }
    }

    #[test]
    fn theta_flattening_dimension() {
        let inst = two_book_instance();
        assert_eq!(inst.theta_dim(), 12);
        assert_eq!(inst.theta().len(), 12);
        // 17 for the paper-scale 3+1 layout
        let mut big = inst.clone();
        big.stored.push(big.stored[0].clone());
        assert_eq!(big.theta_dim(), 17);
    }

    #[test]
    fn json_round_trip() {
        let inst = two_book_instance();
        let s = inst.to_json();
        let back = ProblemInstance::from_json(&s).unwrap();
        assert_eq!(back.stored.len(), 2);
        assert_eq!(back.stored[0].mode, Mode::Upright);
        assert!((back.insert.width - 2.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_rejected() {
        let s = r#"{"shelf":{"W":18.0,"H":11.0},"stored":[],"insert":{"w":2.0,"h":6.0},"extra":1}"#;
        assert!(ProblemInstance::from_json(s).is_err());
    }

    #[test]
    fn lean_without_support_rejected() {
        let s = r#"{"shelf":{"W":18.0,"H":11.0},
            "stored":[{"w":2.0,"h":7.0,"x":0.0,"y":3.5,"theta":-0.4,"mode":"lean_left"}],
            "insert":{"w":2.0,"h":6.0}}"#;
        assert!(ProblemInstance::from_json(s).is_err());
    }

    #[test]
    fn wall_support_round_trip() {
        let mut inst = two_book_instance();
        inst.stored[0].mode = Mode::LeanLeft(SupportRef::LeftWall);
        inst.stored[0].pose.theta = -0.5;
        let back = ProblemInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(back.stored[0].mode, Mode::LeanLeft(SupportRef::LeftWall));
    }
}
