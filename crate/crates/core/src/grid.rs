//! Space-time grids over backwards parabolic cylinders.
//!
//! A cylinder `C_r(x0,t0) = B_r(x0) × (t0 − r², t0]` is discretized as a
//! tensor product over the bounding box of `B_r`; nodes outside the ball are
//! masked, so the lateral boundary is the staircase of outermost unmasked
//! nodes. Time levels are uniform from the bottom slice `t0 − r²` (included,
//! carrying the data for the open bottom) up to the top slice `t0`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DIV_TOL: f64 = 1e-9;

/// Parabolic distance `((|x−y|² + |t−s|))^{1/2}` between space-time points.
pub fn parabolic_distance(p: (&[f64], f64), q: (&[f64], f64)) -> f64 {
    debug_assert_eq!(p.0.len(), q.0.len());
    let dx2: f64 = p
        .0
        .iter()
        .zip(q.0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (dx2 + (p.1 - q.1).abs()).sqrt()
}

#[derive(Debug)]
struct GridInner {
    n: usize,
    center_x: [f64; 2],
    center_t: f64,
    r: f64,
    h: f64,
    dt: f64,
    /// Nodes per spatial axis; `nx[1] == 1` when `n == 1`.
    nx: [usize; 2],
    /// Time levels, bottom slice included.
    nt: usize,
    /// Spatial mask: node lies in the closed ball.
    mask: Vec<bool>,
    /// Lateral staircase: unmasked node with a masked or out-of-box 4-neighbor.
    lateral: Vec<bool>,
    interior_count: usize,
}

/// Discretization of a backwards parabolic cylinder, `n ∈ {1, 2}` spatial
/// dimensions plus time. Cheap to clone.
#[derive(Clone)]
pub struct GridCylinder(Arc<GridInner>);

impl fmt::Debug for GridCylinder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridCylinder")
            .field("n", &self.0.n)
            .field("r", &self.0.r)
            .field("h", &self.0.h)
            .field("dt", &self.0.dt)
            .field("nx", &self.0.nx)
            .field("nt", &self.0.nt)
            .finish()
    }
}

fn exact_divisions(total: f64, step: f64) -> Option<usize> {
    let q = total / step;
    let m = q.round();
    if m < 1.0 || (q - m).abs() > DIV_TOL * q.max(1.0) {
        None
    } else {
        Some(m as usize)
    }
}

impl GridCylinder {
    /// Builds the grid for `C_r(x0, t0)`. `h` must divide `2r` and `dt` must
    /// divide `r²` exactly (up to roundoff).
    pub fn new(n: usize, center_x: [f64; 2], center_t: f64, r: f64, h: f64, dt: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::Grid(format!("spatial dimension must be 1 or 2, got {n}")));
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Grid(format!("radius must be positive, got {r}")));
        }
        if !(h > 0.0) || !(dt > 0.0) {
            return Err(Error::Grid(format!("mesh widths must be positive (h={h}, dt={dt})")));
        }
        let mx = exact_divisions(2.0 * r, h)
            .ok_or_else(|| Error::Grid(format!("h={h} does not divide 2r={}", 2.0 * r)))?;
        let mt = exact_divisions(r * r, dt)
            .ok_or_else(|| Error::Grid(format!("dt={dt} does not divide r²={}", r * r)))?;
        let nx = [mx + 1, if n == 2 { mx + 1 } else { 1 }];
        let nt = mt + 1;

        let snodes = nx[0] * nx[1];
        let mut mask = vec![true; snodes];
        if n == 2 {
            let r2 = r * r * (1.0 + 1e-12);
            for i1 in 0..nx[1] {
                for i0 in 0..nx[0] {
                    let x0 = -r + i0 as f64 * h;
                    let x1 = -r + i1 as f64 * h;
                    mask[i0 + nx[0] * i1] = x0 * x0 + x1 * x1 <= r2;
                }
            }
        }
        let mut lateral = vec![false; snodes];
        let masked_at = |i0: isize, i1: isize| -> bool {
            if i0 < 0 || i1 < 0 || i0 >= nx[0] as isize || i1 >= nx[1] as isize {
                return true;
            }
            !mask[i0 as usize + nx[0] * i1 as usize]
        };
        for i1 in 0..nx[1] as isize {
            for i0 in 0..nx[0] as isize {
                let s = i0 as usize + nx[0] * i1 as usize;
                if !mask[s] {
                    continue;
                }
                let mut exposed = masked_at(i0 - 1, i1) || masked_at(i0 + 1, i1);
                if n == 2 {
                    exposed = exposed || masked_at(i0, i1 - 1) || masked_at(i0, i1 + 1);
                }
                lateral[s] = exposed;
            }
        }
        let interior_count = mask.iter().filter(|&&m| m).count();
        Ok(GridCylinder(Arc::new(GridInner {
            n,
            center_x,
            center_t,
            r,
            h,
            dt,
            nx,
            nt,
            mask,
            lateral,
            interior_count,
        })))
    }

    /// Unit cylinder `C_r` centered at the space-time origin.
    pub fn centered(n: usize, r: f64, h: f64, dt: f64) -> Result<Self> {
        Self::new(n, [0.0; 2], 0.0, r, h, dt)
    }

    pub fn n(&self) -> usize {
        self.0.n
    }
    pub fn r(&self) -> f64 {
        self.0.r
    }
    pub fn h(&self) -> f64 {
        self.0.h
    }
    pub fn dt(&self) -> f64 {
        self.0.dt
    }
    pub fn center_x(&self) -> &[f64] {
        &self.0.center_x[..self.0.n]
    }
    pub fn center_t(&self) -> f64 {
        self.0.center_t
    }
    /// Nodes per spatial axis.
    pub fn nx(&self) -> [usize; 2] {
        self.0.nx
    }
    /// Time levels including the bottom slice.
    pub fn nt(&self) -> usize {
        self.0.nt
    }
    /// Spatial slots in the bounding box (masked ones included).
    pub fn space_len(&self) -> usize {
        self.0.nx[0] * self.0.nx[1]
    }
    /// Unmasked spatial nodes.
    pub fn space_count(&self) -> usize {
        self.0.interior_count
    }

    pub fn in_ball(&self, s: usize) -> bool {
        self.0.mask[s]
    }
    pub fn on_lateral(&self, s: usize) -> bool {
        self.0.lateral[s]
    }

    pub fn space_index(&self, i: [usize; 2]) -> usize {
        i[0] + self.0.nx[0] * i[1]
    }
    pub fn space_multi(&self, s: usize) -> [usize; 2] {
        [s % self.0.nx[0], s / self.0.nx[0]]
    }

    /// Spatial coordinates of slot `s`.
    pub fn x(&self, s: usize) -> [f64; 2] {
        let i = self.space_multi(s);
        let g = &*self.0;
        [
            g.center_x[0] - g.r + i[0] as f64 * g.h,
            if g.n == 2 { g.center_x[1] - g.r + i[1] as f64 * g.h } else { 0.0 },
        ]
    }
    pub fn t(&self, k: usize) -> f64 {
        let g = &*self.0;
        g.center_t - g.r * g.r + k as f64 * g.dt
    }

    /// Coordinate along the interface-normal axis `e_n` (the last axis).
    pub fn xn(&self, s: usize) -> f64 {
        let x = self.x(s);
        x[self.0.n - 1]
    }
    /// Tangential coordinate `x'` (n = 2 only; 0.0 for n = 1).
    pub fn xprime(&self, s: usize) -> f64 {
        if self.0.n == 2 {
            self.x(s)[0]
        } else {
            0.0
        }
    }

    /// Iterator over unmasked spatial slots.
    pub fn space_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.space_len()).filter(move |&s| self.0.mask[s])
    }

    /// Whether node `(s, k)` lies on the parabolic boundary
    /// (bottom slice or lateral staircase). The top interior slice is not
    /// part of it.
    pub fn on_parabolic_boundary(&self, s: usize, k: usize) -> bool {
        debug_assert!(self.0.mask[s]);
        k == 0 || self.0.lateral[s]
    }

    /// All parabolic-boundary nodes as `(s, k)` pairs.
    pub fn parabolic_boundary(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.0.nt {
            for s in self.space_iter() {
                if self.on_parabolic_boundary(s, k) {
                    out.push((s, k));
                }
            }
        }
        out
    }

    /// Linear node id of `(s, k)`.
    pub fn node_id(&self, s: usize, k: usize) -> usize {
        k * self.space_len() + s
    }
    pub fn node_of_id(&self, id: usize) -> (usize, usize) {
        (id % self.space_len(), id / self.space_len())
    }
    pub fn node_len(&self) -> usize {
        self.space_len() * self.0.nt
    }

    /// Nearest unmasked spatial slot to coordinates `x` (ties toward lower
    /// index). Errors if `x` lies outside the closed ball.
    pub fn nearest_slot(&self, x: &[f64]) -> Result<usize> {
        let g = &*self.0;
        let mut i = [0usize; 2];
        for j in 0..g.n {
            let f = (x[j] - (g.center_x[j] - g.r)) / g.h;
            if f < -0.5 || f > (g.nx[j] - 1) as f64 + 0.5 {
                return Err(Error::Grid(format!("point {x:?} outside the bounding box")));
            }
            i[j] = f.round().max(0.0) as usize;
        }
        let s = self.space_index(i);
        if !g.mask[s] {
            return Err(Error::Grid(format!("point {x:?} falls on a masked node")));
        }
        Ok(s)
    }

    /// Time level nearest to `t` (clamped to the grid range).
    pub fn nearest_level(&self, t: f64) -> usize {
        let g = &*self.0;
        let f = (t - (g.center_t - g.r * g.r)) / g.dt;
        (f.round().max(0.0) as usize).min(g.nt - 1)
    }

    /// JSON metadata object `{n, r, h, dt, center}`.
    pub fn metadata(&self) -> GridMeta {
        GridMeta {
            n: self.0.n,
            r: self.0.r,
            h: self.0.h,
            dt: self.0.dt,
            center: CenterMeta { x: self.center_x().to_vec(), t: self.0.center_t },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub r: f64,
    pub h: f64,
    pub dt: f64,
    pub center: CenterMeta,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterMeta {
    pub x: Vec<f64>,
    pub t: f64,
}
