use super::{Family, Point, PolylineInterface};
use crate::error::{Error, Result};
use std::io::{BufRead, Write};

/// Writes the plain-text polyline format: a `# family generation base_length`
/// header, optional extra comment lines, then one `x y` pair per line.
pub fn write_polyline<W: Write>(
    chain: &PolylineInterface,
    comments: &[String],
    mut w: W,
) -> Result<()> {
    writeln!(w, "# family generation base_length")?;
    writeln!(
        w,
        "# {} {} {:.16e}{}",
        chain.family,
        chain.generation,
        chain.base_length,
        if chain.closed { " closed" } else { "" }
    )?;
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    for p in &chain.vertices {
        writeln!(w, "{:.16e} {:.16e}", p.x, p.y)?;
    }
    Ok(())
}

/// Reads a chain written by [`write_polyline`].
pub fn read_polyline<R: BufRead>(r: R) -> Result<PolylineInterface> {
    let mut meta: Option<(Family, u32, f64, bool)> = None;
    let mut vertices = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let f: Vec<&str> = rest.split_whitespace().collect();
            if meta.is_none() && f.len() >= 3 {
                if let (Ok(fam), Ok(g), Ok(b)) =
                    (f[0].parse::<Family>(), f[1].parse::<u32>(), f[2].parse::<f64>())
                {
                    meta = Some((fam, g, b, f.get(3) == Some(&"closed")));
                }
            }
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })
        };
        if f.len() != 2 {
            return Err(Error::Parse {
                line: lineno,
                message: "expected `x y`".into(),
            });
        }
        vertices.push(Point::new(parse(f[0])?, parse(f[1])?));
    }
    let (family, generation, base_length, closed) = meta.ok_or(Error::Parse {
        line: 1,
        message: "missing `# family generation base_length` header".into(),
    })?;
    if vertices.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "fewer than two vertices".into(),
        });
    }
    Ok(PolylineInterface {
        vertices,
        generation,
        family,
        base_length,
        closed,
    })
}
