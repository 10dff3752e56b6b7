#![allow(dead_code)]

use fractalflux::geometry::{
    build_two_sided_domain, flat_interface, koch_prefractal, minkowski_prefractal, Point, Rect,
    TwoSidedDomain,
};
use fractalflux::mesh::{Side, TwoSidedMesh};

pub fn base() -> [Point; 2] {
    [Point::new(0.0, 0.5), Point::new(1.0, 0.5)]
}

pub fn flat() -> TwoSidedDomain {
    build_two_sided_domain(flat_interface(base()).unwrap(), Rect::unit()).unwrap()
}

pub fn minkowski(g: u32) -> TwoSidedDomain {
    build_two_sided_domain(minkowski_prefractal(g, base()).unwrap(), Rect::unit()).unwrap()
}

pub fn koch(g: u32) -> TwoSidedDomain {
    build_two_sided_domain(koch_prefractal(g, base()).unwrap(), Rect::unit()).unwrap()
}

/// Cell-centred finite volumes for two stacked slabs in `y`, insulated at
/// both ends, exchanging heat `λ (u⁺ − u⁻)` across the interface.
///
/// The plus slab is `[0, y_if]`, the minus slab `[y_if, height]`; the
/// initial state is 1 on plus and 0 on minus. Implicit Euler in time.
pub struct TwoSlab {
    pub y_if: f64,
    pub height: f64,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl TwoSlab {
    #[allow(clippy::too_many_arguments)]
    pub fn run(d_plus: f64, d_minus: f64, lambda: f64, y_if: f64, height: f64, t: f64, n: usize, steps: usize) -> Self {
        let dp = y_if / n as f64;
        let dm = (height - y_if) / n as f64;
        let dt = t / steps as f64;
        let m = 2 * n;
        // Conductance between neighbouring unknowns i and i+1.
        let mut g = vec![0.0; m - 1];
        for (i, gi) in g.iter_mut().enumerate() {
            *gi = if i + 1 < n {
                d_plus / dp
            } else if i + 1 == n {
                let r = dp / (2.0 * d_plus) + dm / (2.0 * d_minus);
                if lambda.is_infinite() { 1.0 / r } else { 1.0 / (r + 1.0 / lambda) }
            } else {
                d_minus / dm
            };
        }
        let width: Vec<f64> = (0..m).map(|i| if i < n { dp } else { dm }).collect();
        let mut c: Vec<f64> = (0..m).map(|i| if i < n { 1.0 } else { 0.0 }).collect();
        let mut lo = vec![0.0; m];
        let mut di = vec![0.0; m];
        let mut up = vec![0.0; m];
        for i in 0..m {
            di[i] = width[i] / dt;
            if i > 0 {
                lo[i] = -g[i - 1];
                di[i] += g[i - 1];
            }
            if i + 1 < m {
                up[i] = -g[i];
                di[i] += g[i];
            }
        }
        let mut cp = vec![0.0; m];
        let mut dp_ = vec![0.0; m];
        for _ in 0..steps {
            // Thomas algorithm.
            for i in 0..m {
                let rhs = width[i] / dt * c[i];
                if i == 0 {
                    cp[i] = up[i] / di[i];
                    dp_[i] = rhs / di[i];
                } else {
                    let den = di[i] - lo[i] * cp[i - 1];
                    cp[i] = up[i] / den;
                    dp_[i] = (rhs - lo[i] * dp_[i - 1]) / den;
                }
            }
            for i in (0..m).rev() {
                c[i] = if i + 1 == m { dp_[i] } else { dp_[i] - cp[i] * c[i + 1] };
            }
        }
        TwoSlab {
            y_if,
            height,
            plus: c[..n].to_vec(),
            minus: c[n..].to_vec(),
        }
    }

    fn interp(cells: &[f64], y0: f64, y1: f64, y: f64) -> f64 {
        let n = cells.len();
        let s = ((y - y0) / (y1 - y0) * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let f = s - i as f64;
        cells[i] * (1.0 - f) + cells[i + 1] * f
    }

    pub fn eval(&self, y: f64, side: Side) -> f64 {
        match side {
            Side::Plus => Self::interp(&self.plus, 0.0, self.y_if, y),
            Side::Minus => Self::interp(&self.minus, self.y_if, self.height, y),
        }
    }
}

/// `‖u_h − g‖_{L²}` by the edge-midpoint rule on every triangle.
pub fn l2_error(mesh: &TwoSidedMesh, u: &[f64], g: impl Fn(Point, Side) -> f64) -> f64 {
    let mut s = 0.0;
    for t in &mesh.triangles {
        let area = mesh.triangle_area(t);
        for k in 0..3 {
            let (a, b) = (t.v[k], t.v[(k + 1) % 3]);
            let p = mesh.vertices[a].lerp(mesh.vertices[b], 0.5);
            let uh = 0.5 * (u[a] + u[b]);
            let e = uh - g(p, t.side);
            s += area / 3.0 * e * e;
        }
    }
    s.sqrt()
}

/// `‖u − w‖_{L²}` for two fields on the same mesh.
pub fn l2_distance(mesh: &TwoSidedMesh, u: &[f64], w: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - b).collect();
    let m = fractalflux::fem::mass(mesh, |_| 1.0, false);
    fractalflux::linalg::quad_form(&m, &d, &d).sqrt()
}
