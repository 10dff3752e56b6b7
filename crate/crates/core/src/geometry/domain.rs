use super::{Point, Polygon, PolylineInterface, Rect, Region};
use crate::error::{Error, Result};
use std::sync::Arc;

/// The box U split by the interface into a hot side and a cold side.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedDomain {
    pub interface: Arc<PolylineInterface>,
    pub bounds: Rect,
    /// Hot side: below an open chain, enclosed by a closed one.
    pub plus_region: Region,
    pub minus_region: Region,
    pub volume_plus: f64,
}

impl TwoSidedDomain {
    pub fn volume_minus(&self) -> f64 {
        self.minus_region.area()
    }

    /// Which side's region contains `p` (by crossing number).
    pub fn side_of(&self, p: Point) -> crate::mesh::Side {
        if self.plus_region.winding_contains(p) {
            crate::mesh::Side::Plus
        } else {
            crate::mesh::Side::Minus
        }
    }

    /// Chain vertices ordered from the left wall to the right wall (open
    /// chains) or as stored (closed chains).
    pub fn chain_left_to_right(&self) -> Vec<Point> {
        let v = &self.interface.vertices;
        if !self.interface.closed && v[0].x > v[v.len() - 1].x {
            v.iter().rev().copied().collect()
        } else {
            v.clone()
        }
    }
}

/// Splits `bounds` along `interface`.
///
/// Open chains must start and end on the two vertical walls and otherwise
/// stay strictly inside; closed chains must stay strictly inside.
pub fn build_two_sided_domain(
    interface: impl Into<Arc<PolylineInterface>>,
    bounds: Rect,
) -> Result<TwoSidedDomain> {
    let interface: Arc<PolylineInterface> = interface.into();
    let tol = interface.tolerance();
    let v = &interface.vertices;
    if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
        return Err(Error::Geometry("degenerate box".into()));
    }
    let strictly_inside = |p: &Point| {
        p.x > bounds.min.x + tol
            && p.x < bounds.max.x - tol
            && p.y > bounds.min.y + tol
            && p.y < bounds.max.y - tol
    };
    let (plus, minus) = if interface.closed {
        if let Some(p) = v.iter().find(|p| !strictly_inside(p)) {
            return Err(Error::Geometry(format!(
                "closed chain vertex ({}, {}) is not strictly inside the box",
                p.x, p.y
            )));
        }
        let inner = Polygon::new(v.clone());
        (
            Region::simple(inner.clone()),
            Region {
                outer: bounds.to_polygon(),
                holes: vec![inner],
            },
        )
    } else {
        let (first, last) = (v[0], v[v.len() - 1]);
        let on_left = |p: Point| (p.x - bounds.min.x).abs() <= tol;
        let on_right = |p: Point| (p.x - bounds.max.x).abs() <= tol;
        let chain: Vec<Point> = if on_left(first) && on_right(last) {
            v.clone()
        } else if on_right(first) && on_left(last) {
            v.iter().rev().copied().collect()
        } else {
            return Err(Error::Geometry(
                "chain endpoints must lie on opposite vertical walls of the box".into(),
            ));
        };
        for p in [first, last] {
            if p.y <= bounds.min.y + tol || p.y >= bounds.max.y - tol {
                return Err(Error::Geometry(
                    "chain touches the top or bottom wall of the box".into(),
                ));
            }
        }
        if let Some(p) = v[1..v.len() - 1].iter().find(|p| !strictly_inside(p)) {
            let msg = if p.y <= bounds.min.y + tol || p.y >= bounds.max.y - tol {
                "touches the top or bottom wall"
            } else {
                "leaves the box interior"
            };
            return Err(Error::Geometry(format!(
                "chain vertex ({}, {}) {msg}",
                p.x, p.y
            )));
        }
        let mut lower = chain.clone();
        lower.push(Point::new(bounds.max.x, bounds.min.y));
        lower.push(bounds.min);
        let mut upper = chain;
        upper.push(bounds.max);
        upper.push(Point::new(bounds.min.x, bounds.max.y));
        (
            Region::simple(Polygon::new(lower)),
            Region::simple(Polygon::new(upper)),
        )
    };
    let volume_plus = plus.area();
    Ok(TwoSidedDomain {
        interface,
        bounds,
        plus_region: plus,
        minus_region: minus,
        volume_plus,
    })
}
