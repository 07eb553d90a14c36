//! `IMESH v1` text format.
//!
//! ```text
//! IMESH v1
//! V E F
//! x y [z]            (V lines)
//! i j k region_tag   (F lines)
//! i j length         (E lines)
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{Ambient, IntrinsicMesh, Region};
use crate::error::{Error, Result};

pub fn write_imesh<W: Write>(mesh: &IntrinsicMesh, mut w: W) -> Result<()> {
    w.write_all(to_imesh_string(mesh).as_bytes())?;
    Ok(())
}

pub fn to_imesh_string(mesh: &IntrinsicMesh) -> String {
    let mut s = String::new();
    s.push_str("IMESH v1\n");
    let _ = writeln!(s, "{} {} {}", mesh.n_vertices(), mesh.n_edges(), mesh.n_triangles());
    match mesh.coords() {
        Some(c) => {
            for p in c {
                let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2]);
            }
        }
        None => {
            for _ in 0..mesh.n_vertices() {
                s.push_str("0 0 0\n");
            }
        }
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", tri[0], tri[1], tri[2], mesh.region(t).tag());
    }
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let _ = writeln!(s, "{} {} {:.16e}", a, b, mesh.edge_lengths()[e]);
    }
    s
}

/// Reads an `IMESH v1` file. The result carries the stored coordinates but no ambient
/// embedding; the stored edge lengths are the metric.
pub fn read_imesh<R: BufRead>(r: R) -> Result<IntrinsicMesh> {
    let mut lines = r
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((_, Err(e))) => Err(e.into()),
            None => Err(Error::Parse {
                line: 0,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let (n, header) = next("header")?;
    if header.trim() != "IMESH v1" {
        return Err(Error::Parse {
            line: n,
            msg: format!("bad header {header:?}"),
        });
    }
    let (n, counts) = next("counts")?;
    let c: Vec<usize> = parse_fields(n, &counts, 3)?;
    let (nv, ne, nf) = (c[0], c[1], c[2]);
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = next("vertex")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 2 && f.len() != 3 {
            return Err(Error::Parse {
                line: n,
                msg: "vertex line needs 2 or 3 coordinates".into(),
            });
        }
        let mut p = [0.0; 3];
        for (i, v) in f.iter().enumerate() {
            p[i] = parse_num(n, v)?;
        }
        coords.push(p);
    }
    let mut tris = Vec::with_capacity(nf);
    let mut regions = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = next("face")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 4 {
            return Err(Error::Parse {
                line: n,
                msg: "face line needs `i j k region_tag`".into(),
            });
        }
        let tri = [parse_num(n, f[0])?, parse_num(n, f[1])?, parse_num(n, f[2])?];
        let region = Region::parse(f[3]).ok_or_else(|| Error::Parse {
            line: n,
            msg: format!("unknown region tag {}", f[3]),
        })?;
        tris.push(tri);
        regions.push(region);
    }
    let mut lengths = HashMap::with_capacity(ne);
    for _ in 0..ne {
        let (n, l) = next("edge")?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse {
                line: n,
                msg: "edge line needs `i j length`".into(),
            });
        }
        let (a, b): (usize, usize) = (parse_num(n, f[0])?, parse_num(n, f[1])?);
        lengths.insert(super::edge_key(a, b), parse_num::<f64>(n, f[2])?);
    }
    let mesh = IntrinsicMesh::from_lengths(
        nv,
        tris,
        regions,
        &lengths,
        Some(coords),
        Ambient::Abstract,
        None,
    )?;
    if mesh.n_edges() != ne {
        return Err(Error::Parse {
            line: 2,
            msg: format!("declared {ne} edges, triangles define {}", mesh.n_edges()),
        });
    }
    Ok(mesh)
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {s:?}"),
    })
}

fn parse_fields<T: std::str::FromStr>(line: usize, s: &str, n: usize) -> Result<Vec<T>> {
    let v: Vec<T> = s
        .split_whitespace()
        .map(|f| parse_num(line, f))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(Error::Parse {
            line,
            msg: format!("expected {n} fields"),
        });
    }
    Ok(v)
}
