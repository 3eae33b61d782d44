//! Linear microphone array geometry.
//!
//! Angles follow one convention throughout the crate: θ is measured from
//! broadside, in degrees, and θ > 0 points toward the *first* microphone of
//! the array. With that orientation the steering model
//! `exp(-j ω u_i sinθ / c)` matches a forward DFT of a delayed signal, since
//! microphones farther along the axis hear a positive-θ source later.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

const GEOMETRY_TOL: f64 = 1e-9;

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// A uniform linear microphone array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct ArrayGeometry {
    mic_positions: Vec<Vec3>,
    u0: f64,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    mic_positions: Vec<Vec3>,
    sound_speed: f64,
}

impl TryFrom<RawGeometry> for ArrayGeometry {
    type Error = Error;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        ArrayGeometry::new(raw.mic_positions, raw.sound_speed)
    }
}

impl From<ArrayGeometry> for RawGeometry {
    fn from(g: ArrayGeometry) -> Self {
        RawGeometry {
            mic_positions: g.mic_positions,
            sound_speed: g.c,
        }
    }
}

impl ArrayGeometry {
    /// Validates collinearity and equal adjacent spacing (both within 1e-9 m).
    pub fn new(mic_positions: Vec<Vec3>, sound_speed: f64) -> Result<Self> {
        if mic_positions.len() < 2 {
            return Err(Error::Geometry("at least 2 microphones required".into()));
        }
        if !(sound_speed > 0.0) {
            return Err(Error::Geometry("sound speed must be positive".into()));
        }
        let first = mic_positions[0];
        let last = mic_positions[mic_positions.len() - 1];
        let span = norm(sub(last, first));
        if span <= GEOMETRY_TOL {
            return Err(Error::Geometry("microphones coincide".into()));
        }
        let axis = scale(sub(last, first), 1.0 / span);
        let u0 = norm(sub(mic_positions[1], first));
        for (i, pair) in mic_positions.windows(2).enumerate() {
            let d = sub(pair[1], pair[0]);
            let along = dot(d, axis);
            let off = norm(sub(d, scale(axis, along)));
            if off > GEOMETRY_TOL || along <= 0.0 {
                return Err(Error::Geometry(format!(
                    "microphone {} is not on the array axis",
                    i + 1
                )));
            }
            if (along - u0).abs() > GEOMETRY_TOL {
                return Err(Error::Geometry(format!(
                    "spacing between microphones {i} and {} is {along} m, expected {u0} m",
                    i + 1
                )));
            }
        }
        Ok(ArrayGeometry {
            mic_positions,
            u0,
            c: sound_speed,
        })
    }

    /// A horizontal ULA of `count` microphones centred on `center`, laid out
    /// along `axis`.
    pub fn uniform(
        center: Vec3,
        axis: Vec3,
        count: usize,
        spacing: f64,
        sound_speed: f64,
    ) -> Result<Self> {
        let len = norm(axis);
        if len == 0.0 || !(spacing > 0.0) {
            return Err(Error::Geometry("degenerate axis or spacing".into()));
        }
        let axis = scale(axis, 1.0 / len);
        let mid = (count as f64 - 1.0) / 2.0;
        let positions = (0..count)
            .map(|i| add(center, scale(axis, (i as f64 - mid) * spacing)))
            .collect();
        Self::new(positions, sound_speed)
    }

    pub fn mic_positions(&self) -> &[Vec3] {
        &self.mic_positions
    }

    pub fn num_mics(&self) -> usize {
        self.mic_positions.len()
    }

    /// Adjacent spacing u0 in meters.
    pub fn spacing(&self) -> f64 {
        self.u0
    }

    pub fn sound_speed(&self) -> f64 {
        self.c
    }

    pub fn center(&self) -> Vec3 {
        let n = self.mic_positions.len() as f64;
        let sum = self
            .mic_positions
            .iter()
            .fold([0.0; 3], |acc, &p| add(acc, p));
        scale(sum, 1.0 / n)
    }

    /// Unit vector from the first toward the last microphone.
    pub fn axis(&self) -> Vec3 {
        let first = self.mic_positions[0];
        let last = self.mic_positions[self.mic_positions.len() - 1];
        let d = sub(last, first);
        scale(d, 1.0 / norm(d))
    }

    /// Horizontal unit vector perpendicular to the axis (θ = 0 direction).
    pub fn broadside(&self) -> Vec3 {
        let axis = self.axis();
        let b = cross([0.0, 0.0, 1.0], axis);
        let n = norm(b);
        if n < 1e-12 {
            // vertical array: any horizontal direction is broadside
            [1.0, 0.0, 0.0]
        } else {
            scale(b, 1.0 / n)
        }
    }

    /// Signed microphone coordinates along the axis, origin at the array centre.
    pub fn axis_positions(&self) -> Vec<f64> {
        let center = self.center();
        let axis = self.axis();
        self.mic_positions
            .iter()
            .map(|&p| dot(sub(p, center), axis))
            .collect()
    }

    /// c / (2 u0): above this frequency inter-microphone phase wraps.
    pub fn spatial_nyquist(&self) -> f64 {
        self.c / (2.0 * self.u0)
    }

    /// Largest adjacent-pair TDOA, u0 / c.
    pub fn max_tdoa(&self) -> f64 {
        self.u0 / self.c
    }

    /// Unit vector pointing from the array centre toward angle θ (degrees),
    /// in the horizontal plane.
    pub fn direction(&self, theta_deg: f64) -> Vec3 {
        let t = theta_deg.to_radians();
        add(
            scale(self.broadside(), t.cos()),
            scale(self.axis(), -t.sin()),
        )
    }

    /// Point at `distance` meters from the array centre toward θ.
    pub fn point_at(&self, theta_deg: f64, distance: f64) -> Vec3 {
        add(self.center(), scale(self.direction(theta_deg), distance))
    }

    /// The same microphones listed in reverse order; angles flip sign.
    pub fn reversed(&self) -> Self {
        let mut mic_positions = self.mic_positions.clone();
        mic_positions.reverse();
        ArrayGeometry {
            mic_positions,
            u0: self.u0,
            c: self.c,
        }
    }
}
