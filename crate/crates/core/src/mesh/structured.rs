use crate::error::{Error, Result};
use crate::geometry::{Point, TwoSidedDomain};

fn ratio_index(v: f64, origin: f64, h: f64) -> Option<usize> {
    let r = (v - origin) / h;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r.abs().max(1.0) && k >= 0.0).then_some(k as usize)
}

/// True when the box and every chain vertex sit on the lattice of pitch `h`.
pub(super) fn grid_compatible(domain: &TwoSidedDomain, h: f64) -> bool {
    let b = domain.bounds;
    domain.interface.is_axis_aligned()
        && h <= domain.interface.min_segment_length() * (1.0 + 1e-12)
        && ratio_index(b.max.x, b.min.x, h).is_some()
        && ratio_index(b.max.y, b.min.y, h).is_some()
        && domain.interface.vertices.iter().all(|p| {
            ratio_index(p.x, b.min.x, h).is_some() && ratio_index(p.y, b.min.y, h).is_some()
        })
}

/// Right isoceles triangles on the lattice of pitch `h`, every cell cut along
/// the same diagonal.
pub(super) fn grid(domain: &TwoSidedDomain, h: f64) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let chain = &domain.interface;
    if !chain.is_axis_aligned() {
        return Err(Error::Mesh(
            "structured mode needs an axis-aligned interface".into(),
        ));
    }
    let b = domain.bounds;
    let (Some(nx), Some(ny)) = (
        ratio_index(b.max.x, b.min.x, h),
        ratio_index(b.max.y, b.min.y, h),
    ) else {
        return Err(Error::Mesh(format!(
            "h = {h} does not divide the box dimensions"
        )));
    };
    if nx == 0 || ny == 0 {
        return Err(Error::Mesh(format!("h = {h} is larger than the box")));
    }
    if h > chain.min_segment_length() * (1.0 + 1e-12)
        || !chain.vertices.iter().all(|p| {
            ratio_index(p.x, b.min.x, h).is_some() && ratio_index(p.y, b.min.y, h).is_some()
        })
    {
        return Err(Error::Mesh(format!(
            "h = {h} is too coarse to resolve the smallest interface feature ({})",
            chain.min_segment_length()
        )));
    }
    let cols = nx + 1;
    let mut pts = Vec::with_capacity(cols * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            pts.push(Point::new(
                b.min.x + i as f64 * h,
                b.min.y + j as f64 * h,
            ));
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let a = i + j * cols;
            let (b1, c, d) = (a + 1, a + 1 + cols, a + cols);
            tris.push([a, b1, c]);
            tris.push([a, c, d]);
        }
    }
    Ok((pts, tris))
}
