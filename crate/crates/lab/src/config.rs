//! Plain `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. Recognised keys:
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `geometry.m1` | first summand / base surface | `sphere:4` |
//! | `geometry.m2` | second summand | `torus:43:16:1` |
//! | `geometry.omega` | planar domain for the Payne studies | `rectangle:2:1:0.03125` |
//! | `sweep.eps0` | upper bound for the collar radius | `0.2` |
//! | `sweep.steps` | `s`: the schedule is `eps0 * 2^-(i+1)`, `i = 0..=s` | `5` |
//! | `solve.m` | highest eigenpair index of interest | `4` |
//! | `solve.tol` | relative residual tolerance | `1e-9` |
//! | `threshold.m` | comma-separated list of `m` for the threshold fit | `2,3,4,6,8` |
//! | `payne.x1` | attachment point on the domain boundary | `0.7,1` |
//! | `payne.anchor` | radius-grid anchor of the attachment sweep | `0.1` |
//! | `payne.socket_h` | mesh size of the socket before scaling | `0.25` |
//! | `perforation.centers` | hole centres `x,y;x,y;...` (empty for none) | `0.5,0.5;1.5,0.5` |
//! | `perforation.anchor` | radius-grid anchor of the perforation sweep | `0.1` |
//! | `lewy.samples` | coefficient samples per cluster | `10000` |
//! | `lewy.degrees` | harmonic degrees to search | `1,2,3` |
//! | `lewy.genus` | genus of the surface glued to the sphere | `1` |
//! | `seed` | random seed | `42` |
//! | `out` | output directory | `./results` |
//!
//! Geometry strings: `sphere:S` (icosphere with `S` subdivisions), `torus:L:h`, `torus:LX:LY:h`,
//! `genus:G:h`, `rectangle:W:H:h`, `disk:R:h`, `imesh:PATH`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nodal_core::mesh::io::read_imesh;
use nodal_core::mesh::{
    build_disk, build_flat_torus, build_genus_surface, build_rectangle, build_sphere, IntrinsicMesh,
};

use crate::LabError;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Sphere(u32),
    Torus { lx: f64, ly: f64, h: f64 },
    Genus { genus: u32, h: f64 },
    Rectangle { width: f64, height: f64, h: f64 },
    Disk { radius: f64, h: f64 },
    Imesh(PathBuf),
}

impl Geometry {
    pub fn parse(s: &str) -> Result<Self, LabError> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || LabError::Config(format!("bad geometry `{s}`"));
        let num = |i: usize| -> Result<f64, LabError> {
            let v: f64 = parts.get(i).ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        let int = |i: usize| -> Result<u32, LabError> { parts.get(i).ok_or_else(bad)?.trim().parse().map_err(|_| bad()) };
        let g = match (parts[0], parts.len()) {
            ("sphere", 2) => Geometry::Sphere(int(1)?),
            ("torus", 3) => Geometry::Torus {
                lx: num(1)?,
                ly: num(1)?,
                h: num(2)?,
            },
            ("torus", 4) => Geometry::Torus {
                lx: num(1)?,
                ly: num(2)?,
                h: num(3)?,
            },
            ("genus", 3) => Geometry::Genus {
                genus: int(1)?,
                h: num(2)?,
            },
            ("rectangle", 4) => Geometry::Rectangle {
                width: num(1)?,
                height: num(2)?,
                h: num(3)?,
            },
            ("disk", 3) => Geometry::Disk {
                radius: num(1)?,
                h: num(2)?,
            },
            ("imesh", _) if parts.len() >= 2 => Geometry::Imesh(PathBuf::from(parts[1..].join(":"))),
            _ => return Err(bad()),
        };
        Ok(g)
    }

    pub fn build(&self) -> Result<IntrinsicMesh, LabError> {
        Ok(match self {
            Geometry::Sphere(s) => build_sphere(*s)?,
            Geometry::Torus { lx, ly, h } => build_flat_torus(*lx, *ly, *h)?,
            Geometry::Genus { genus, h } => build_genus_surface(*genus, *h)?,
            Geometry::Rectangle { width, height, h } => build_rectangle(*width, *height, *h)?,
            Geometry::Disk { radius, h } => build_disk(*radius, *h)?,
            Geometry::Imesh(p) => {
                let f = std::fs::File::open(p).map_err(|e| LabError::Io(format!("{}: {e}", p.display())))?;
                read_imesh(std::io::BufReader::new(f))?
            }
        })
    }

    /// Nominal mesh size.
    pub fn h(&self) -> Option<f64> {
        match self {
            Geometry::Torus { h, .. }
            | Geometry::Genus { h, .. }
            | Geometry::Rectangle { h, .. }
            | Geometry::Disk { h, .. } => Some(*h),
            _ => None,
        }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Geometry::Sphere(s) => write!(f, "sphere:{s}"),
            Geometry::Torus { lx, ly, h } => write!(f, "torus:{lx}:{ly}:{h}"),
            Geometry::Genus { genus, h } => write!(f, "genus:{genus}:{h}"),
            Geometry::Rectangle { width, height, h } => write!(f, "rectangle:{width}:{height}:{h}"),
            Geometry::Disk { radius, h } => write!(f, "disk:{radius}:{h}"),
            Geometry::Imesh(p) => write!(f, "imesh:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub m1: Geometry,
    pub m2: Geometry,
    pub omega: Geometry,
    pub eps0: f64,
    pub steps: usize,
    pub m: usize,
    pub tol: f64,
    pub threshold_m: Vec<usize>,
    pub payne_x1: [f64; 2],
    pub payne_anchor: f64,
    pub socket_h: f64,
    pub perforation_centers: Vec<[f64; 2]>,
    pub perforation_anchor: f64,
    pub lewy_samples: usize,
    pub lewy_degrees: Vec<usize>,
    pub lewy_genus: u32,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            m1: Geometry::Sphere(4),
            m2: Geometry::Torus {
                lx: 43.0,
                ly: 16.0,
                h: 1.0,
            },
            omega: Geometry::Rectangle {
                width: 2.0,
                height: 1.0,
                h: 1.0 / 32.0,
            },
            eps0: 0.2,
            steps: 5,
            m: 4,
            tol: 1e-9,
            threshold_m: vec![2, 3, 4, 6, 8],
            payne_x1: [0.7, 1.0],
            payne_anchor: 0.1,
            socket_h: 0.25,
            perforation_centers: vec![[0.5, 0.5], [1.5, 0.5]],
            perforation_anchor: 0.1,
            lewy_samples: 10_000,
            lewy_degrees: vec![1, 2, 3],
            lewy_genus: 1,
            seed: 42,
            out: PathBuf::from("./results"),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, LabError> {
    v.split(',')
        .map(|x| x.trim().parse().map_err(|_| LabError::Config(format!("{key}: cannot parse `{x}`"))))
        .collect()
}

fn parse_point(key: &str, v: &str) -> Result<[f64; 2], LabError> {
    let p: Vec<f64> = parse_list(key, v)?;
    if p.len() != 2 {
        return Err(LabError::Config(format!("{key}: expected `x,y`, got `{v}`")));
    }
    Ok([p[0], p[1]])
}

impl SweepConfig {
    pub fn parse(text: &str) -> Result<Self, LabError> {
        let mut kv = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected `key = value`", i + 1)))?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(LabError::Config(format!("line {}: duplicate key `{}`", i + 1, k.trim())));
            }
        }
        let mut c = SweepConfig::default();
        for (k, v) in &kv {
            let num = || -> Result<f64, LabError> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| LabError::Config(format!("{k}: `{v}` is not a number")))
            };
            let uint = || -> Result<usize, LabError> {
                v.parse::<usize>()
                    .map_err(|_| LabError::Config(format!("{k}: `{v}` is not a non-negative integer")))
            };
            match k.as_str() {
                "geometry.m1" => c.m1 = Geometry::parse(v)?,
                "geometry.m2" => c.m2 = Geometry::parse(v)?,
                "geometry.omega" => c.omega = Geometry::parse(v)?,
                "sweep.eps0" => c.eps0 = num()?,
                "sweep.steps" => c.steps = uint()?,
                "solve.m" => c.m = uint()?,
                "solve.tol" => c.tol = num()?,
                "threshold.m" => c.threshold_m = parse_list(k, v)?,
                "payne.x1" => c.payne_x1 = parse_point(k, v)?,
                "payne.anchor" => c.payne_anchor = num()?,
                "payne.socket_h" => c.socket_h = num()?,
                "perforation.centers" => {
                    c.perforation_centers = if v.is_empty() {
                        vec![]
                    } else {
                        v.split(';').map(|p| parse_point(k, p)).collect::<Result<_, _>>()?
                    }
                }
                "perforation.anchor" => c.perforation_anchor = num()?,
                "lewy.samples" => c.lewy_samples = uint()?,
                "lewy.degrees" => c.lewy_degrees = parse_list(k, v)?,
                "lewy.genus" => {
                    c.lewy_genus = v
                        .parse()
                        .map_err(|_| LabError::Config(format!("{k}: `{v}` is not an integer")))?
                }
                "seed" => c.seed = v.parse().map_err(|_| LabError::Config(format!("seed: `{v}`")))?,
                "out" => c.out = PathBuf::from(v),
                _ => return Err(LabError::Config(format!("unknown key `{k}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let err = |m: String| Err(LabError::Config(m));
        if !(self.eps0 > 0.0) {
            return err(format!("sweep.eps0 = {} must be positive", self.eps0));
        }
        if self.steps < 3 {
            return err(format!("sweep.steps = {} must be at least 3", self.steps));
        }
        if !(self.tol > 0.0 && self.tol < 1e-2) {
            return err(format!("solve.tol = {} out of range", self.tol));
        }
        if self.threshold_m.iter().any(|&m| m == 0) {
            return err("threshold.m entries must be positive".into());
        }
        if !(self.payne_anchor > 0.0 && self.perforation_anchor > 0.0 && self.socket_h > 0.0) {
            return err("payne and perforation radii must be positive".into());
        }
        if self.lewy_genus == 0 {
            return err("lewy.genus must be at least 1".into());
        }
        Ok(())
    }

    /// `eps0 * 2^-(i+1)` for `i = 0..=steps`, from largest to smallest.
    pub fn schedule(&self, eps0: f64) -> Vec<f64> {
        (0..=self.steps).map(|i| eps0 * 0.5f64.powi(i as i32 + 1)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_keys() {
        let c = SweepConfig::parse(
            "geometry.m1 = sphere:3\n# comment\nsweep.eps0 = 0.15\nsweep.steps = 4\nsolve.m = 6\n\
             solve.tol = 1e-8\nseed = 7\nout = /tmp/x\nperforation.centers =\n",
        )
        .unwrap();
        assert_eq!(c.m1, Geometry::Sphere(3));
        assert_eq!((c.eps0, c.steps, c.m, c.seed), (0.15, 4, 6, 7));
        assert!(c.perforation_centers.is_empty());
        assert_eq!(c.schedule(0.16), vec![0.08, 0.04, 0.02, 0.01, 0.005]);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "sweep.eps0 = -1",
            "nonsense = 1",
            "geometry.m1 = cube:3",
            "sweep.steps = 2",
            "solve.m",
            "seed = 1\nseed = 2",
        ] {
            assert!(matches!(SweepConfig::parse(text), Err(LabError::Config(_))), "{text}");
        }
    }

    #[test]
    fn geometry_strings_round_trip() {
        for s in ["sphere:4", "torus:60:60:1.5", "genus:2:0.3", "rectangle:2:1:0.05", "disk:1:0.1"] {
            let g = Geometry::parse(s).unwrap();
            assert_eq!(Geometry::parse(&g.to_string()).unwrap(), g);
        }
        assert_eq!(
            Geometry::parse("torus:40:1").unwrap(),
            Geometry::Torus {
                lx: 40.0,
                ly: 40.0,
                h: 1.0
            }
        );
    }
}
