//! Small planar geometry helpers shared by the layout, grid and evaluation code.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

pub type Vec2 = Vector2<f64>;

/// Axis-aligned rectangle, `min` inclusive corner and `max` opposite corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    /// Strict interior test.
    pub fn contains_interior(&self, p: &Vec2) -> bool {
        p.x > self.min.x && p.x < self.max.x && p.y > self.min.y && p.y < self.max.y
    }

    pub fn corners(&self) -> [Vec2; 4] {
        [
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }
}

/// Even-odd ray casting. Points exactly on an edge may land on either side.
pub fn point_in_polygon(p: &Vec2, polygon: &[Vec2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_segment_distance(p: &Vec2, a: &Vec2, b: &Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance to a polyline; a single vertex degenerates to a point distance.
/// `None` when the polyline is empty.
pub fn point_polyline_distance(p: &Vec2, line: &[Vec2]) -> Option<f64> {
    match line.len() {
        0 => None,
        1 => Some((p - line[0]).norm()),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .min_by(f64::total_cmp),
    }
}

/// Liang-Barsky clip: does segment `a`-`b` touch the closed rectangle?
pub fn segment_intersects_rect(a: &Vec2, b: &Vec2, rect: &Rect) -> bool {
    let d = b - a;
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    let checks = [
        (-d.x, a.x - rect.min.x),
        (d.x, rect.max.x - a.x),
        (-d.y, a.y - rect.min.y),
        (d.y, rect.max.y - a.y),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                t0 = t0.max(r);
            } else {
                t1 = t1.min(r);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// True when two segments properly cross (shared endpoints excluded).
fn segments_cross(a: &Vec2, b: &Vec2, c: &Vec2, d: &Vec2) -> bool {
    let orient = |p: &Vec2, q: &Vec2, r: &Vec2| (q - p).perp(&(r - p));
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// O(n^2) simplicity check: no two non-adjacent edges cross.
pub fn polygon_is_simple(polygon: &[Vec2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || j == (i + 1) % n {
                continue;
            }
            let (c, d) = (polygon[j], polygon[(j + 1) % n]);
            if segments_cross(&a, &b, &c, &d) {
                return false;
            }
        }
    }
    true
}

pub fn polyline_length(line: &[Vec2]) -> f64 {
    line.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(10.0, 10.0),
            Vec2::new(0.0, 10.0),
        ]
    }

    #[test]
    fn polygon_membership() {
        let sq = square();
        assert!(point_in_polygon(&Vec2::new(5.0, 5.0), &sq));
        assert!(!point_in_polygon(&Vec2::new(11.0, 5.0), &sq));
        assert!(!point_in_polygon(&Vec2::new(5.0, -0.1), &sq));
    }

    #[test]
    fn simple_vs_bowtie() {
        assert!(polygon_is_simple(&square()));
        let bowtie = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(10.0, 10.0),
            Vec2::new(10.0, 0.0),
            Vec2::new(0.0, 10.0),
        ];
        assert!(!polygon_is_simple(&bowtie));
    }

    #[test]
    fn segment_rect_clip() {
        let r = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        assert!(segment_intersects_rect(&Vec2::new(-1.0, 0.5), &Vec2::new(2.0, 0.5), &r));
        assert!(!segment_intersects_rect(&Vec2::new(-1.0, 1.5), &Vec2::new(2.0, 1.5), &r));
        assert!(segment_intersects_rect(&Vec2::new(0.2, 0.2), &Vec2::new(0.3, 0.3), &r));
        assert!(!segment_intersects_rect(&Vec2::new(-1.0, 0.0), &Vec2::new(0.0, -1.0), &Rect::new(Vec2::new(0.1, 0.1), Vec2::new(1.0, 1.0))));
    }

    #[test]
    fn distances() {
        let line = [Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)];
        assert_eq!(point_polyline_distance(&Vec2::new(5.0, 3.0), &line), Some(3.0));
        assert_eq!(point_polyline_distance(&Vec2::new(13.0, 4.0), &line), Some(5.0));
        assert_eq!(point_polyline_distance(&Vec2::new(0.0, 0.0), &[]), None);
    }

    #[test]
    fn angle_wrap() {
        use std::f64::consts::PI;
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(0.5) - 0.5).abs() < 1e-15);
    }
}
