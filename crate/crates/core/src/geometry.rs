//! Three-cell rhombic cluster geometry.
//!
//! The coverage area is a regular hexagon of circumradius `D` centred at the
//! origin. The BSs sit on three alternating hexagon vertices and point their
//! boresight at the centre. Each cell is the rhombus formed by the two
//! hexagon triangles adjacent to its BS vertex, so the cell radius (BS to any
//! rhombus vertex) is `D` and every cell spans 120 degrees in azimuth.

use rand::Rng;

use crate::rng::{self, SimRng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLayout {
    pub num_cells: usize,
    /// Cell radius `D` in metres; also the hexagon circumradius.
    pub cell_radius: f64,
    pub bs_height: f64,
    pub user_height: f64,
    pub bs_positions: Vec<Point2>,
    /// Boresight azimuth per BS, degrees from the x-axis.
    pub bs_orientations: Vec<f64>,
}

impl Default for NetworkLayout {
    fn default() -> Self {
        Self::three_cell(150.0, 32.0, 1.5).expect("default layout is valid")
    }
}

impl NetworkLayout {
    /// The symmetric three-cell cluster: BSs at hexagon vertices 0, 120 and
    /// 240 degrees, each boresight pointing at the hexagon centre.
    pub fn three_cell(cell_radius: f64, bs_height: f64, user_height: f64) -> Result<Self> {
        let vertex_angles = [0.0_f64, 120.0, 240.0];
        let bs_positions = vertex_angles
            .iter()
            .map(|a| {
                let r = a.to_radians();
                Point2::new(cell_radius * r.cos(), cell_radius * r.sin())
            })
            .collect();
        let bs_orientations = vertex_angles
            .iter()
            .map(|a| wrap_degrees(a + 180.0))
            .collect();
        let layout = Self {
            num_cells: 3,
            cell_radius,
            bs_height,
            user_height,
            bs_positions,
            bs_orientations,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cells < 1 {
            return Err(Error::InvalidLayout("need at least one cell".into()));
        }
        if !(self.cell_radius > 0.0 && self.cell_radius.is_finite()) {
            return Err(Error::InvalidLayout(format!(
                "cell radius must be positive, got {}",
                self.cell_radius
            )));
        }
        if !(self.user_height >= 0.0 && self.bs_height > self.user_height) {
            return Err(Error::InvalidLayout(format!(
                "need bs_height > user_height >= 0, got {} and {}",
                self.bs_height, self.user_height
            )));
        }
        if self.bs_positions.len() != self.num_cells || self.bs_orientations.len() != self.num_cells {
            return Err(Error::InvalidLayout(format!(
                "{} cells but {} positions and {} orientations",
                self.num_cells,
                self.bs_positions.len(),
                self.bs_orientations.len()
            )));
        }
        Ok(())
    }

    /// BS height above user height.
    pub fn height_difference(&self) -> f64 {
        self.bs_height - self.user_height
    }

    pub fn center(&self) -> Point2 {
        Point2::new(0.0, 0.0)
    }

    pub fn hexagon_vertices(&self) -> [Point2; 6] {
        std::array::from_fn(|i| {
            let a = (60.0 * i as f64).to_radians();
            Point2::new(self.cell_radius * a.cos(), self.cell_radius * a.sin())
        })
    }

    pub fn coverage_area(&self) -> f64 {
        1.5 * 3f64.sqrt() * self.cell_radius * self.cell_radius
    }

    /// Point-in-hexagon test, boundary inclusive (with a small tolerance).
    pub fn contains(&self, p: Point2) -> bool {
        let apothem = self.cell_radius * 3f64.sqrt() / 2.0;
        (0..6).all(|k| {
            let a = (30.0 + 60.0 * k as f64).to_radians();
            p.x * a.cos() + p.y * a.sin() <= apothem * (1.0 + 1e-12) + 1e-9
        })
    }

    /// Index of the cell whose rhombus contains `p`.
    ///
    /// Rhombus `b` is the 120-degree angular sector (seen from the hexagon
    /// centre) around BS `b`'s vertex, so containment reduces to picking the
    /// BS with the smallest angular separation. Returns `None` outside the
    /// hexagon.
    pub fn home_cell(&self, p: Point2) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let c = self.center();
        let ang = (p.y - c.y).atan2(p.x - c.x).to_degrees();
        let mut best = 0;
        let mut best_sep = f64::INFINITY;
        for (b, bs) in self.bs_positions.iter().enumerate() {
            let bs_ang = (bs.y - c.y).atan2(bs.x - c.x).to_degrees();
            let sep = wrap_degrees(ang - bs_ang).abs();
            if sep < best_sep - 1e-12 {
                best_sep = sep;
                best = b;
            }
        }
        Some(best)
    }

    /// Corners of cell `b`'s rhombus: BS vertex, next hexagon vertex,
    /// hexagon centre, previous hexagon vertex.
    pub fn rhombus(&self, b: usize) -> [Point2; 4] {
        let v = self.bs_positions[b];
        let c = self.center();
        let r = v.sub(c);
        let rot = |deg: f64| {
            let (s, co) = deg.to_radians().sin_cos();
            Point2::new(c.x + r.x * co - r.y * s, c.y + r.x * s + r.y * co)
        };
        [v, rot(60.0), c, rot(-60.0)]
    }

    pub fn rhombus_centroid(&self, b: usize) -> Point2 {
        let q = self.rhombus(b);
        Point2::new(
            q.iter().map(|p| p.x).sum::<f64>() / 4.0,
            q.iter().map(|p| p.y).sum::<f64>() / 4.0,
        )
    }

    pub fn user_at(&self, position: Point2) -> Result<UserLocation> {
        let home_cell = self.home_cell(position).ok_or_else(|| {
            Error::param(
                "position",
                format!("({}, {}) lies outside the coverage area", position.x, position.y),
            )
        })?;
        Ok(UserLocation {
            position,
            height: self.user_height,
            home_cell,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLocation {
    pub position: Point2,
    pub height: f64,
    pub home_cell: usize,
}

/// Azimuth, elevation and 3D distance from a BS to a user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalAngles {
    /// Degrees from the x-axis to the horizontal BS-to-user ray.
    pub azimuth: f64,
    /// Degrees below the horizon.
    pub elevation: f64,
    pub distance_3d: f64,
    pub distance_2d: f64,
}

/// Angles of `user` as seen from BS `bs_index`.
///
/// A user exactly at the BS ground position has no defined azimuth; it gets
/// azimuth 0 and elevation 90 degrees.
pub fn spherical_angles(user: &UserLocation, bs_index: usize, layout: &NetworkLayout) -> Result<SphericalAngles> {
    let bs = *layout.bs_positions.get(bs_index).ok_or(Error::DimensionMismatch {
        expected: layout.num_cells,
        got: bs_index,
    })?;
    let dx = user.position.x - bs.x;
    let dy = user.position.y - bs.y;
    let d2 = dx.hypot(dy);
    let dh = layout.bs_height - user.height;
    let (azimuth, elevation) = if d2 == 0.0 {
        (0.0, 90.0)
    } else {
        (dy.atan2(dx).to_degrees(), dh.atan2(d2).to_degrees())
    };
    Ok(SphericalAngles {
        azimuth,
        elevation,
        distance_3d: d2.hypot(dh),
        distance_2d: d2,
    })
}

/// Drop `per_cell_counts[b]` users uniformly over rhombus `b`.
///
/// Users are returned cell by cell in index order; the sequence is a pure
/// function of `(layout, counts, seed)`.
pub fn sample_users(layout: &NetworkLayout, per_cell_counts: &[usize], seed: u64) -> Result<Vec<UserLocation>> {
    if per_cell_counts.len() != layout.num_cells {
        return Err(Error::DimensionMismatch {
            expected: layout.num_cells,
            got: per_cell_counts.len(),
        });
    }
    let mut rng = rng::stream(seed, &[rng::tag::USER_DROP]);
    let mut users = Vec::with_capacity(per_cell_counts.iter().sum());
    for (b, &n) in per_cell_counts.iter().enumerate() {
        for _ in 0..n {
            users.push(sample_in_cell(layout, b, &mut rng));
        }
    }
    Ok(users)
}

/// One uniform point in rhombus `b`, as `V + s (A - V) + t (C - V)`.
pub fn sample_in_cell(layout: &NetworkLayout, b: usize, rng: &mut SimRng) -> UserLocation {
    let [v, a, _, c] = layout.rhombus(b);
    let s: f64 = rng.random();
    let t: f64 = rng.random();
    let p = Point2::new(
        v.x + s * (a.x - v.x) + t * (c.x - v.x),
        v.y + s * (a.y - v.y) + t * (c.y - v.y),
    );
    // Boundary points may be assigned to a neighbour by the sector rule;
    // the sampled cell is authoritative.
    UserLocation {
        position: p,
        height: layout.user_height,
        home_cell: b,
    }
}

/// Square grid with spacing `resolution`, offset by half a step from the
/// hexagon centre and clipped to the coverage area.
pub fn grid_over_coverage(layout: &NetworkLayout, resolution: f64) -> Result<Vec<UserLocation>> {
    if !(resolution > 0.0) {
        return Err(Error::param("resolution", format!("must be positive, got {resolution}")));
    }
    if resolution > layout.cell_radius {
        return Err(Error::DegenerateGrid {
            resolution,
            radius: layout.cell_radius,
        });
    }
    let r = layout.cell_radius;
    let n = (r / resolution).ceil() as i64 + 1;
    let mut out = Vec::new();
    for j in -n..n {
        for i in -n..n {
            let p = Point2::new((i as f64 + 0.5) * resolution, (j as f64 + 0.5) * resolution);
            if let Some(home_cell) = layout.home_cell(p) {
                out.push(UserLocation {
                    position: p,
                    height: layout.user_height,
                    home_cell,
                });
            }
        }
    }
    Ok(out)
}

/// Vertical region a user belongs to under region-specific transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// Inside the disc of radius `d_int` around its home BS; served by CST.
    Interior(usize),
    /// Everything else; served jointly by NMT.
    Edge,
}

pub fn region_of(user: &UserLocation, layout: &NetworkLayout, d_int: f64) -> Region {
    let b = user.home_cell;
    if user.position.distance(layout.bs_positions[b]) <= d_int {
        Region::Interior(b)
    } else {
        Region::Edge
    }
}

/// Closed-form fraction of the coverage area inside the interior discs.
///
/// Valid while `d_int` does not exceed the rhombus altitude `D sin 60`: each
/// disc then contributes a 120-degree sector.
pub fn interior_area_fraction(layout: &NetworkLayout, d_int: f64) -> f64 {
    let sector = std::f64::consts::PI * d_int * d_int / 3.0;
    layout.num_cells as f64 * sector / layout.coverage_area()
}

/// Wrap an angle in degrees to (-180, 180].
pub fn wrap_degrees(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}
