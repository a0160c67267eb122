//! Plan-view geometry: wall segments, occlusion and first-order image sources.

use serde::{Deserialize, Serialize};

/// Point in the 2D plan view, meters. `x` points right, `y` forward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn mirrored(self) -> Point {
        Point::new(-self.x, self.y)
    }

    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: Point,
    pub b: Point,
}

impl Wall {
    pub const fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn mirrored(&self) -> Wall {
        Wall::new(self.a.mirrored(), self.b.mirrored())
    }

    /// Mirror image of `p` across the wall's infinite line.
    pub fn reflect(&self, p: Point) -> Point {
        self.reflection().apply(p)
    }

    /// The reflection across the wall's line as an affine map.
    pub fn reflection(&self) -> Reflection {
        let d = self.b.sub(self.a);
        let len2 = d.x * d.x + d.y * d.y;
        let (ux, uy) = (d.x * d.x / len2, d.y * d.y / len2);
        let uxy = d.x * d.y / len2;
        // p' = 2·(a + P(p - a)) - p with P the projector onto d.
        let m = [[2.0 * ux - 1.0, 2.0 * uxy], [2.0 * uxy, 2.0 * uy - 1.0]];
        let offset = Point::new(
            self.a.x - (m[0][0] * self.a.x + m[0][1] * self.a.y),
            self.a.y - (m[1][0] * self.a.x + m[1][1] * self.a.y),
        );
        Reflection { m, offset }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflection {
    m: [[f64; 2]; 2],
    offset: Point,
}

impl Reflection {
    #[inline]
    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.m[0][0] * p.x + self.m[0][1] * p.y + self.offset.x,
            self.m[1][0] * p.x + self.m[1][1] * p.y + self.offset.y,
        )
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test; touching endpoints count.
pub fn segments_intersect(p: Point, q: Point, a: Point, b: Point) -> bool {
    let d1 = cross(a, b, p);
    let d2 = cross(a, b, q);
    let d3 = cross(p, q, a);
    let d4 = cross(p, q, b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(p, a, b))
        || (d2 == 0.0 && on_segment(q, a, b))
        || (d3 == 0.0 && on_segment(a, p, q))
        || (d4 == 0.0 && on_segment(b, p, q))
}

/// True iff segment `p`–`q` touches no wall.
pub fn line_of_sight(walls: &[Wall], p: Point, q: Point) -> bool {
    walls.iter().all(|w| !segments_intersect(p, q, w.a, w.b))
}

fn line_of_sight_except(walls: &[Wall], skip: usize, p: Point, q: Point) -> bool {
    walls
        .iter()
        .enumerate()
        .all(|(i, w)| i == skip || !segments_intersect(p, q, w.a, w.b))
}

/// First-order mirror image of a source across one wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Point,
    pub wall: usize,
}

impl ImageSource {
    /// Specular reflection point on the wall for `receiver`, if the path
    /// source → wall → receiver is geometrically realizable and unoccluded.
    pub fn reflection_point(
        &self,
        walls: &[Wall],
        source: Point,
        receiver: Point,
    ) -> Option<Point> {
        let wall = walls[self.wall];
        let (p, q) = (receiver, self.position);
        let r = q.sub(p);
        let s = wall.b.sub(wall.a);
        let denom = r.x * s.y - r.y * s.x;
        if denom == 0.0 {
            return None;
        }
        let ap = wall.a.sub(p);
        let t = (ap.x * s.y - ap.y * s.x) / denom;
        let u = (ap.x * r.y - ap.y * r.x) / denom;
        if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&u) {
            return None;
        }
        // Source and receiver must sit on the same side of the wall.
        if cross(wall.a, wall.b, source) * cross(wall.a, wall.b, receiver) <= 0.0 {
            return None;
        }
        let hit = Point::new(p.x + t * r.x, p.y + t * r.y);
        (line_of_sight_except(walls, self.wall, source, hit)
            && line_of_sight_except(walls, self.wall, hit, receiver))
        .then_some(hit)
    }
}

/// One image per wall (first order only).
pub fn image_sources(walls: &[Wall], source: Point) -> Vec<ImageSource> {
    walls
        .iter()
        .enumerate()
        .map(|(wall, w)| ImageSource {
            position: w.reflect(source),
            wall,
        })
        .collect()
}
