use super::MeshOptions;
use crate::error::{Error, Result};
use crate::geometry::{Point, TwoSidedDomain};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

/// Splits `[a, b]` into pieces no longer than `h`; returns interior points.
fn split(a: Point, b: Point, h: f64) -> Vec<Point> {
    let n = (a.dist(b) / h).ceil().max(1.0) as usize;
    (1..n).map(|k| a.lerp(b, k as f64 / n as f64)).collect()
}

/// Constrained Delaunay refinement of the box with the chain as constraint.
pub(super) fn refine(
    domain: &TwoSidedDomain,
    h: f64,
    options: &MeshOptions,
) -> Result<(Vec<Point>, Vec<[usize; 3]>)> {
    let b = domain.bounds;
    if h >= 0.5 * b.width().min(b.height()) {
        return Err(Error::Mesh(format!(
            "h = {h} is too coarse for the box"
        )));
    }
    let chain = &domain.interface;
    let mut pts: Vec<Point> = Vec::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut push_polyline = |pts: &mut Vec<Point>, line: &[Point], closed: bool| {
        let start = pts.len();
        let m = if closed { line.len() } else { line.len() - 1 };
        pts.push(line[0]);
        for k in 0..m {
            let (p, q) = (line[k], line[(k + 1) % line.len()]);
            for s in split(p, q, h) {
                let i = pts.len();
                pts.push(s);
                edges.push([i - 1, i]);
            }
            if closed && k + 1 == m {
                edges.push([pts.len() - 1, start]);
            } else {
                let i = pts.len();
                pts.push(q);
                edges.push([i - 1, i]);
            }
        }
    };
    // Box outline, passing through the chain anchors on the walls.
    let mut outline = vec![b.min, Point::new(b.max.x, b.min.y)];
    let mut right: Vec<Point> = Vec::new();
    let mut left: Vec<Point> = Vec::new();
    if !chain.closed {
        let (p, q) = (chain.vertices[0], chain.vertices[chain.vertices.len() - 1]);
        for a in [p, q] {
            if (a.x - b.max.x).abs() < (a.x - b.min.x).abs() {
                right.push(Point::new(b.max.x, a.y));
            } else {
                left.push(Point::new(b.min.x, a.y));
            }
        }
    }
    outline.extend(right);
    outline.push(b.max);
    outline.push(Point::new(b.min.x, b.max.y));
    outline.extend(left);
    push_polyline(&mut pts, &outline, true);
    let anchor_ids: Vec<usize> = (0..pts.len()).collect();
    let chain_start = pts.len();
    push_polyline(&mut pts, &chain.vertices, chain.closed);
    // Replace the duplicated anchors with the outline's copies.
    if !chain.closed {
        let n_chain = pts.len() - chain_start;
        let ends = [chain_start, chain_start + n_chain - 1];
        let mut remap: Vec<usize> = (0..pts.len()).collect();
        for &e in &ends {
            if let Some(&k) = anchor_ids.iter().find(|&&k| pts[k].dist(pts[e]) <= chain.tolerance()) {
                remap[e] = k;
            }
        }
        for ed in edges.iter_mut() {
            *ed = ed.map(|v| remap[v]);
        }
        // Compact away the duplicated anchors.
        let keep: Vec<usize> = (0..pts.len()).filter(|&k| remap[k] == k).collect();
        let mut dense = vec![usize::MAX; pts.len()];
        for (n, &k) in keep.iter().enumerate() {
            dense[k] = n;
        }
        pts = keep.iter().map(|&k| pts[k]).collect();
        for ed in edges.iter_mut() {
            *ed = ed.map(|v| dense[v]);
        }
    }
    let vertices: Vec<Point2<f64>> = pts.iter().map(|p| Point2::new(p.x, p.y)).collect();
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(vertices, edges)
        .map_err(|e| Error::Mesh(format!("triangulation failed: {e:?}")))?;
    let max_area = 3f64.sqrt() / 4.0 * h * h;
    // The box is the convex hull, so every face is wanted. Parity-based outer
    // face detection misreads pockets behind the anchor T-junctions.
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(options.min_angle_deg))
        .with_max_allowed_area(max_area)
        .with_max_additional_vertices(options.max_vertices)
        .exclude_outer_faces(false);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::ResourceBound {
            what: "refinement vertices",
            requested: cdt.num_vertices(),
            cap: options.max_vertices,
        });
    }
    let out_pts: Vec<Point> = cdt
        .vertices()
        .map(|v| Point::new(v.position().x, v.position().y))
        .collect();
    let tris: Vec<[usize; 3]> = cdt
        .inner_faces()
        .map(|f| f.vertices().map(|v| v.fix().index()))
        .collect();
    Ok((out_pts, tris))
}
