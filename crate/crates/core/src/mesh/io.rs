use super::{InterfaceEdge, InterfacePair, Side, Triangle, TwoSidedMesh};
use crate::error::{Error, Result};
use crate::geometry::Point;
use std::io::{BufRead, Write};

/// Writes the round-trip text format.
pub fn write_mesh<W: Write>(m: &TwoSidedMesh, comments: &[String], mut w: W) -> Result<()> {
    writeln!(w, "# fractalflux mesh")?;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "h {:.16e}", m.h)?;
    writeln!(w, "merged {}", u8::from(m.merged))?;
    writeln!(w, "vertices {}", m.vertices.len())?;
    for p in &m.vertices {
        writeln!(w, "{:.16e} {:.16e}", p.x, p.y)?;
    }
    writeln!(w, "triangles {}", m.triangles.len())?;
    for t in &m.triangles {
        writeln!(w, "{} {} {} {}", t.v[0], t.v[1], t.v[2], t.side)?;
    }
    writeln!(w, "segments {}", m.interface_segments.len())?;
    for (a, b) in &m.interface_segments {
        writeln!(w, "{:.16e} {:.16e} {:.16e} {:.16e}", a.x, a.y, b.x, b.y)?;
    }
    writeln!(w, "pairs {}", m.interface_pairs.len())?;
    for p in &m.interface_pairs {
        writeln!(
            w,
            "{} {} {:.16e} {:.16e} {:.16e}",
            p.plus, p.minus, p.point.x, p.point.y, p.position
        )?;
    }
    writeln!(w, "edges {}", m.interface_edges.len())?;
    for e in &m.interface_edges {
        writeln!(w, "{} {} {:.16e} {}", e.pairs[0], e.pairs[1], e.length, e.segment)?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<Vec<String>> {
        loop {
            self.line += 1;
            let Some(l) = self.inner.next() else {
                return Err(self.err("unexpected end of file"));
            };
            let l = l?;
            let t = l.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            return Ok(t.split_whitespace().map(str::to_string).collect());
        }
    }

    fn err(&self, m: &str) -> Error {
        Error::Parse {
            line: self.line,
            message: m.to_string(),
        }
    }

    fn header(&mut self, key: &str) -> Result<String> {
        let f = self.next()?;
        if f.len() != 2 || f[0] != key {
            return Err(self.err(&format!("expected `{key} <value>`")));
        }
        Ok(f[1].clone())
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(&format!("bad number `{s}`")))
    }

    fn row(&mut self, n: usize) -> Result<Vec<String>> {
        let f = self.next()?;
        if f.len() != n {
            return Err(self.err(&format!("expected {n} fields")));
        }
        Ok(f)
    }
}

/// Reads the format written by [`write_mesh`].
pub fn read_mesh<R: BufRead>(r: R) -> Result<TwoSidedMesh> {
    let mut l = Lines {
        inner: r.lines(),
        line: 0,
    };
    let h = l.header("h")?;
    let h: f64 = l.num(&h)?;
    let merged = l.header("merged")? == "1";
    let count = |l: &mut Lines<R>, key: &str| -> Result<usize> {
        let s = l.header(key)?;
        l.num(&s)
    };
    let nv = count(&mut l, "vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let f = l.row(2)?;
        vertices.push(Point::new(l.num(&f[0])?, l.num(&f[1])?));
    }
    let nt = count(&mut l, "triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let f = l.row(4)?;
        let side = match f[3].as_str() {
            "plus" => Side::Plus,
            "minus" => Side::Minus,
            _ => return Err(l.err("side must be plus or minus")),
        };
        let v = [l.num(&f[0])?, l.num(&f[1])?, l.num(&f[2])?];
        if v.iter().any(|&k: &usize| k >= nv) {
            return Err(l.err("vertex index out of range"));
        }
        triangles.push(Triangle { v, side });
    }
    let ns = count(&mut l, "segments")?;
    let mut interface_segments = Vec::with_capacity(ns);
    for _ in 0..ns {
        let f = l.row(4)?;
        interface_segments.push((
            Point::new(l.num(&f[0])?, l.num(&f[1])?),
            Point::new(l.num(&f[2])?, l.num(&f[3])?),
        ));
    }
    let np = count(&mut l, "pairs")?;
    let mut interface_pairs = Vec::with_capacity(np);
    for _ in 0..np {
        let f = l.row(5)?;
        interface_pairs.push(InterfacePair {
            plus: l.num(&f[0])?,
            minus: l.num(&f[1])?,
            point: Point::new(l.num(&f[2])?, l.num(&f[3])?),
            position: l.num(&f[4])?,
        });
    }
    let ne = count(&mut l, "edges")?;
    let mut interface_edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let f = l.row(4)?;
        interface_edges.push(InterfaceEdge {
            pairs: [l.num(&f[0])?, l.num(&f[1])?],
            length: l.num(&f[2])?,
            segment: l.num(&f[3])?,
        });
    }
    Ok(TwoSidedMesh {
        vertices,
        triangles,
        interface_pairs,
        interface_edges,
        h,
        interface_segments,
        merged,
    })
}

/// Legacy ASCII VTK unstructured grid with a `side` cell field and the given
/// point fields.
pub fn write_vtk<W: Write>(
    m: &TwoSidedMesh,
    title: &str,
    point_data: &[(&str, &[f64])],
    mut w: W,
) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", m.vertices.len())?;
    for p in &m.vertices {
        writeln!(w, "{:.16e} {:.16e} 0", p.x, p.y)?;
    }
    writeln!(w, "CELLS {} {}", m.triangles.len(), 4 * m.triangles.len())?;
    for t in &m.triangles {
        writeln!(w, "3 {} {} {}", t.v[0], t.v[1], t.v[2])?;
    }
    writeln!(w, "CELL_TYPES {}", m.triangles.len())?;
    for _ in &m.triangles {
        writeln!(w, "5")?;
    }
    writeln!(w, "CELL_DATA {}", m.triangles.len())?;
    writeln!(w, "SCALARS side int 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for t in &m.triangles {
        writeln!(w, "{}", if t.side == Side::Plus { 1 } else { -1 })?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", m.vertices.len())?;
        for (name, values) in point_data {
            if values.len() != m.vertices.len() {
                return Err(Error::InvalidInput(format!(
                    "point field `{name}` has {} values for {} vertices",
                    values.len(),
                    m.vertices.len()
                )));
            }
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:.16e}")?;
            }
        }
    }
    Ok(())
}
