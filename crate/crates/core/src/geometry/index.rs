use super::{point_segment_distance, segments_intersect, Point, Rect, Region};

/// Uniform-grid bucket index over the boundary edges of a region.
///
/// Edges are stored with the region on their left.
pub(crate) struct EdgeIndex {
    pub edges: Vec<(Point, Point)>,
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl EdgeIndex {
    pub fn new(region: &Region) -> Self {
        let mut edges: Vec<(Point, Point)> = region.outer.edges().collect();
        for h in &region.holes {
            edges.extend(h.edges().map(|(a, b)| (b, a)));
        }
        Self::from_edges(edges)
    }

    /// Index over arbitrary segments (containment queries then assume they
    /// form closed rings).
    pub fn from_edges(edges: Vec<(Point, Point)>) -> Self {
        let mut pts = Vec::with_capacity(2 * edges.len());
        for &(a, b) in &edges {
            pts.push(a);
            pts.push(b);
        }
        let bb: Rect = super::bbox_of(&pts);
        let mean = edges.iter().map(|(a, b)| a.dist(*b)).sum::<f64>() / edges.len() as f64;
        let span = bb.width().max(bb.height());
        let cell = mean.max(span / 1024.0).max(f64::MIN_POSITIVE);
        let nx = ((bb.width() / cell).ceil() as usize).max(1);
        let ny = ((bb.height() / cell).ceil() as usize).max(1);
        let mut idx = EdgeIndex {
            edges: Vec::new(),
            origin: bb.min,
            cell,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        };
        for (k, &(a, b)) in edges.iter().enumerate() {
            let (i0, j0) = idx.cell_of(Point::new(a.x.min(b.x), a.y.min(b.y)));
            let (i1, j1) = idx.cell_of(Point::new(a.x.max(b.x), a.y.max(b.y)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    idx.cells[i + j * nx].push(k as u32);
                }
            }
        }
        idx.edges = edges;
        idx
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let i = ((p.x - self.origin.x) / self.cell).floor();
        let j = ((p.y - self.origin.y) / self.cell).floor();
        (
            (i.max(0.0) as usize).min(self.nx - 1),
            (j.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Crossing-number containment using only the row of cells right of `p`.
    pub fn contains(&self, p: Point) -> bool {
        let rel_y = (p.y - self.origin.y) / self.cell;
        if rel_y < 0.0 || rel_y >= self.ny as f64 || p.x >= self.origin.x + self.nx as f64 * self.cell {
            return false;
        }
        let j = (rel_y.floor() as usize).min(self.ny - 1);
        let i0 = self.cell_of(p).0;
        let mut inside = false;
        for i in i0..self.nx {
            let x_lo = self.origin.x + i as f64 * self.cell;
            let x_hi = x_lo + self.cell;
            for &k in &self.cells[i + j * self.nx] {
                let (a, b) = self.edges[k as usize];
                if (a.y > p.y) != (b.y > p.y) {
                    let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                    let in_cell = (x >= x_lo || i == 0) && (x < x_hi || i + 1 == self.nx);
                    if x > p.x && in_cell {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// Distance from `p` to the nearest boundary edge.
    pub fn distance(&self, p: Point) -> f64 {
        let (ci, cj) = self.cell_of(p);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            let (i0, i1) = (ci as isize - ring as isize, ci as isize + ring as isize);
            let (j0, j1) = (cj as isize - ring as isize, cj as isize + ring as isize);
            for j in j0..=j1 {
                if j < 0 || j >= self.ny as isize {
                    continue;
                }
                for i in i0..=i1 {
                    if i < 0 || i >= self.nx as isize {
                        continue;
                    }
                    let on_ring = i == i0 || i == i1 || j == j0 || j == j1;
                    if !on_ring {
                        continue;
                    }
                    for &k in &self.cells[i as usize + j as usize * self.nx] {
                        let (a, b) = self.edges[k as usize];
                        best = best.min(point_segment_distance(p, a, b));
                    }
                }
            }
            // Cells beyond this ring are at least `ring * cell` away, up to the
            // slack from `p` sitting anywhere in its own cell.
            if best <= ring as f64 * self.cell {
                break;
            }
        }
        best
    }

    /// Indices of edges whose buckets meet the square of half-width `r` about `p`.
    pub fn edges_near(&self, p: Point, r: f64) -> Vec<usize> {
        let (i0, j0) = self.cell_of(Point::new(p.x - r, p.y - r));
        let (i1, j1) = self.cell_of(Point::new(p.x + r, p.y + r));
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.extend(self.cells[i + j * self.nx].iter().map(|&k| k as usize));
            }
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&k| {
            let (a, b) = self.edges[k];
            point_segment_distance(p, a, b) <= r
        });
        out
    }

    /// True when the closed segment meets no boundary edge.
    pub fn segment_clear(&self, a: Point, b: Point) -> bool {
        let (i0, j0) = self.cell_of(Point::new(a.x.min(b.x), a.y.min(b.y)));
        let (i1, j1) = self.cell_of(Point::new(a.x.max(b.x), a.y.max(b.y)));
        for j in j0..=j1 {
            for i in i0..=i1 {
                for &k in &self.cells[i + j * self.nx] {
                    let (c, d) = self.edges[k as usize];
                    if segments_intersect(a, b, c, d) {
                        return false;
                    }
                }
            }
        }
        true
    }
}
