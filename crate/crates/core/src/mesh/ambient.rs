use crate::error::{Error, Result};
use crate::geom::dist3;

/// Where the vertex coordinates of a mesh live. Coordinates are only used to place new
/// vertices and to derive edge lengths; the metric the solver sees is always the edge lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ambient {
    /// Planar domain, coordinates `(x, y, 0)`.
    Plane,
    /// Unit sphere in R^3; edge lengths are chordal distances.
    Sphere,
    /// Flat torus `R^2 / (lx Z x ly Z)`, coordinates `(x, y, 0)` with `x in [0, lx)`.
    FlatTorus { lx: f64, ly: f64 },
    /// Two copies of a planar domain glued along their boundary; coordinates `(x, y, sheet)`.
    Doubled,
    /// No usable embedding (e.g. after a connected sum).
    Abstract,
}

impl Ambient {
    /// Edge length between two embedded points.
    pub fn distance(&self, a: [f64; 3], b: [f64; 3]) -> Result<f64> {
        match *self {
            Ambient::Plane | Ambient::Doubled => {
                Ok(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
            }
            Ambient::Sphere => Ok(dist3(a, b)),
            Ambient::FlatTorus { lx, ly } => {
                let dx = wrap_delta(b[0] - a[0], lx);
                let dy = wrap_delta(b[1] - a[1], ly);
                Ok((dx * dx + dy * dy).sqrt())
            }
            Ambient::Abstract => Err(Error::NotEmbedded),
        }
    }

    /// Radius below which geodesic balls are embedded disks.
    pub fn injectivity_cap(&self) -> f64 {
        match *self {
            Ambient::Plane | Ambient::Doubled => f64::INFINITY,
            // the azimuthal chart is injective below pi; stay well clear of the antipode
            Ambient::Sphere => 2.0,
            Ambient::FlatTorus { lx, ly } => 0.45 * lx.min(ly),
            Ambient::Abstract => 0.0,
        }
    }

    pub fn is_embedded(&self) -> bool {
        !matches!(self, Ambient::Abstract)
    }

    /// Geodesic polar chart centred at `center`.
    pub fn chart(&self, center: [f64; 3]) -> Result<Chart> {
        match *self {
            Ambient::Abstract => Err(Error::NotEmbedded),
            Ambient::Sphere => {
                let n = normalize(center);
                // any vector not parallel to n
                let trial = if n[0].abs() < 0.9 {
                    [1.0, 0.0, 0.0]
                } else {
                    [0.0, 1.0, 0.0]
                };
                let e1 = normalize(sub(trial, scale(n, dot(trial, n))));
                let e2 = cross(n, e1);
                Ok(Chart {
                    ambient: *self,
                    center: n,
                    e1,
                    e2,
                    mirrored: false,
                })
            }
            _ => Ok(Chart {
                ambient: *self,
                center,
                e1: [1.0, 0.0, 0.0],
                e2: [0.0, 1.0, 0.0],
                mirrored: false,
            }),
        }
    }
}

fn wrap_delta(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

/// Geodesic polar coordinates `(r, theta)` around a point of the ambient surface.
#[derive(Debug, Clone, Copy)]
pub struct Chart {
    ambient: Ambient,
    center: [f64; 3],
    e1: [f64; 3],
    e2: [f64; 3],
    mirrored: bool,
}

impl Chart {
    pub fn center(&self) -> [f64; 3] {
        self.center
    }

    /// Flips the angular orientation of the chart.
    pub fn mirror(&mut self) {
        self.mirrored = !self.mirrored;
    }

    pub fn to_polar(&self, p: [f64; 3]) -> (f64, f64) {
        let (r, th) = match self.ambient {
            Ambient::Sphere => {
                let q = normalize(p);
                let r = dot(q, self.center).clamp(-1.0, 1.0).acos();
                let th = dot(q, self.e2).atan2(dot(q, self.e1));
                (r, th)
            }
            Ambient::FlatTorus { lx, ly } => {
                let dx = wrap_delta(p[0] - self.center[0], lx);
                let dy = wrap_delta(p[1] - self.center[1], ly);
                ((dx * dx + dy * dy).sqrt(), dy.atan2(dx))
            }
            _ => {
                let dx = p[0] - self.center[0];
                let dy = p[1] - self.center[1];
                ((dx * dx + dy * dy).sqrt(), dy.atan2(dx))
            }
        };
        if self.mirrored {
            (r, -th)
        } else {
            (r, th)
        }
    }

    pub fn from_polar(&self, r: f64, theta: f64) -> [f64; 3] {
        let th = if self.mirrored { -theta } else { theta };
        match self.ambient {
            Ambient::Sphere => {
                let t = add(scale(self.e1, th.cos()), scale(self.e2, th.sin()));
                add(scale(self.center, r.cos()), scale(t, r.sin()))
            }
            Ambient::FlatTorus { lx, ly } => {
                let x = (self.center[0] + r * th.cos()).rem_euclid(lx);
                let y = (self.center[1] + r * th.sin()).rem_euclid(ly);
                [x, y, 0.0]
            }
            _ => [
                self.center[0] + r * th.cos(),
                self.center[1] + r * th.sin(),
                self.center[2],
            ],
        }
    }

    /// Azimuthal-equidistant planar image of `p`.
    pub fn to_plane(&self, p: [f64; 3]) -> [f64; 2] {
        let (dx, dy) = match self.ambient {
            Ambient::Sphere => {
                let (r, th) = self.to_polar(p);
                return [r * th.cos(), r * th.sin()];
            }
            // flat charts are exact translations, so collinear points stay collinear
            Ambient::FlatTorus { lx, ly } => (
                wrap_delta(p[0] - self.center[0], lx),
                wrap_delta(p[1] - self.center[1], ly),
            ),
            _ => (p[0] - self.center[0], p[1] - self.center[1]),
        };
        if self.mirrored {
            [dx, -dy]
        } else {
            [dx, dy]
        }
    }
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
pub(crate) fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
pub(crate) fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    scale(a, 1.0 / n)
}

/// Great-circle distance between two points of the unit sphere.
pub fn great_circle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = cross(a, b);
    dot(c, c).sqrt().atan2(dot(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_chart_round_trip() {
        let c = normalize([0.3, -0.2, 0.9]);
        let chart = Ambient::Sphere.chart(c).unwrap();
        for &(r, th) in &[(0.1, 0.3), (0.5, -2.0), (0.9, 3.0)] {
            let p = chart.from_polar(r, th);
            assert!((dot(p, p) - 1.0).abs() < 1e-14);
            let (r2, th2) = chart.to_polar(p);
            assert!((r - r2).abs() < 1e-12);
            assert!((th - th2).abs() < 1e-12);
            assert!((great_circle(c, p) - r).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_chart_wraps() {
        let amb = Ambient::FlatTorus { lx: 1.0, ly: 1.0 };
        let chart = amb.chart([0.95, 0.05, 0.0]).unwrap();
        let p = chart.from_polar(0.1, 0.0);
        assert!((p[0] - 0.05).abs() < 1e-12);
        let (r, _) = chart.to_polar(p);
        assert!((r - 0.1).abs() < 1e-12);
        assert!((amb.distance([0.95, 0.0, 0.0], [0.05, 0.0, 0.0]).unwrap() - 0.1).abs() < 1e-12);
    }
}
