//! Node-indexed scalar fields and parabolic Hölder / C^{1,α} norm reports.
//!
//! A field carries one value per unmasked node; nodes in the interface band
//! may additionally carry the other side's extension value, so band nodes are
//! double-valued while every other node is single-valued.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{parabolic_distance, GridCylinder};

/// Side tag for values of a transmission field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Scalar field over a grid cylinder. Values at masked slots are NaN and
/// never read.
#[derive(Debug, Clone)]
pub struct Field {
    grid: GridCylinder,
    values: Vec<f64>,
    /// Other-side extension at band nodes: node id -> (side of the stored
    /// extension, value).
    ghosts: BTreeMap<usize, (Side, f64)>,
}

/// How pair suprema were evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairMode {
    Exact,
    Strided { stride: usize },
}

/// Norm evaluation limit: all pairs are visited exactly when the node count
/// stays at or below this; otherwise both pair endpoints come from a
/// deterministic strided subsample.
pub const EXACT_PAIR_LIMIT: usize = 20_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct C1AlphaParts {
    pub grad_sup: f64,
    pub grad_holder: f64,
    /// Seminorm \[u\]_{C_t^{(1+α)/2}} over same-point time pairs.
    pub time_seminorm: f64,
}

/// Report of parabolic Hölder norms. `seminorm` is the full
/// the seminorm \[u\]_{C^{0,α}} over all node pairs under the parabolic distance;
/// `space_seminorm` and `time_seminorm` restrict to equal-time and
/// equal-point pairs respectively (the time pairs are measured against
/// |t−s|^{α/2}, the restriction of d_p^α).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub sup_norm: f64,
    pub holder_alpha: f64,
    pub seminorm: f64,
    pub space_seminorm: f64,
    pub time_seminorm: f64,
    pub c1alpha_parts: Option<C1AlphaParts>,
    pub mode: PairMode,
}

impl Field {
    pub fn constant(grid: &GridCylinder, c: f64) -> Field {
        let mut values = vec![f64::NAN; grid.node_len()];
        for k in 0..grid.nt() {
            for s in grid.space_iter() {
                values[grid.node_id(s, k)] = c;
            }
        }
        Field { grid: grid.clone(), values, ghosts: BTreeMap::new() }
    }

    /// Builds a field by sampling `f(x, t)`.
    pub fn from_fn(grid: &GridCylinder, f: impl Fn(&[f64], f64) -> f64) -> Field {
        let n = grid.n();
        let mut values = vec![f64::NAN; grid.node_len()];
        for k in 0..grid.nt() {
            let t = grid.t(k);
            for s in grid.space_iter() {
                let x = grid.x(s);
                values[grid.node_id(s, k)] = f(&x[..n], t);
            }
        }
        Field { grid: grid.clone(), values, ghosts: BTreeMap::new() }
    }

    pub fn grid(&self) -> &GridCylinder {
        &self.grid
    }

    pub fn get(&self, s: usize, k: usize) -> f64 {
        self.values[self.grid.node_id(s, k)]
    }

    pub fn set(&mut self, s: usize, k: usize, v: f64) {
        let id = self.grid.node_id(s, k);
        self.values[id] = v;
    }

    /// Value seen from a given side: the primary value if the node belongs to
    /// that side (or is single-valued), else the stored band extension.
    pub fn get_on(&self, s: usize, k: usize, side: Side) -> Option<f64> {
        let id = self.grid.node_id(s, k);
        match self.ghosts.get(&id) {
            Some(&(gside, gval)) if gside == side => Some(gval),
            _ => {
                let v = self.values[id];
                v.is_finite().then_some(v)
            }
        }
    }

    pub fn set_ghost(&mut self, s: usize, k: usize, side: Side, v: f64) {
        self.ghosts.insert(self.grid.node_id(s, k), (side, v));
    }

    pub fn ghost_count(&self) -> usize {
        self.ghosts.len()
    }

    pub fn has_ghost(&self, s: usize, k: usize) -> bool {
        self.ghosts.contains_key(&self.grid.node_id(s, k))
    }

    pub fn is_single_valued(&self) -> bool {
        self.ghosts.is_empty()
    }

    /// All values finite on unmasked nodes.
    pub fn all_finite(&self) -> bool {
        for k in 0..self.grid.nt() {
            for s in self.grid.space_iter() {
                if !self.get(s, k).is_finite() {
                    return false;
                }
            }
        }
        self.ghosts.values().all(|(_, v)| v.is_finite())
    }

    pub fn sup_norm(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.grid.nt() {
            for s in self.grid.space_iter() {
                m = m.max(self.get(s, k).abs());
            }
        }
        m
    }

    /// max − min over all nodes.
    pub fn oscillation(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..self.grid.nt() {
            for s in self.grid.space_iter() {
                let v = self.get(s, k);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if hi < lo {
            0.0
        } else {
            hi - lo
        }
    }

    /// max − min over the sub-cylinder C_rho(x_c, t_c).
    pub fn oscillation_in(&self, center_x: &[f64], center_t: f64, rho: f64) -> f64 {
        let g = &self.grid;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..g.nt() {
            let t = g.t(k);
            if t <= center_t - rho * rho - 1e-12 || t > center_t + 1e-12 {
                continue;
            }
            for s in g.space_iter() {
                let x = g.x(s);
                let d2: f64 = (0..g.n()).map(|j| (x[j] - center_x[j]).powi(2)).sum();
                if d2 <= rho * rho * (1.0 + 1e-12) {
                    let v = self.get(s, k);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        if hi < lo {
            0.0
        } else {
            hi - lo
        }
    }

    /// min over the sub-cylinder C_rho centered at (center_x, center_t).
    pub fn min_in(&self, center_x: &[f64], center_t: f64, rho: f64) -> f64 {
        let g = &self.grid;
        let mut lo = f64::INFINITY;
        for k in 0..g.nt() {
            let t = g.t(k);
            if t <= center_t - rho * rho - 1e-12 || t > center_t + 1e-12 {
                continue;
            }
            for s in g.space_iter() {
                let x = g.x(s);
                let d2: f64 = (0..g.n()).map(|j| (x[j] - center_x[j]).powi(2)).sum();
                if d2 <= rho * rho * (1.0 + 1e-12) {
                    lo = lo.min(self.get(s, k));
                }
            }
        }
        lo
    }

    pub fn min(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for k in 0..self.grid.nt() {
            for s in self.grid.space_iter() {
                lo = lo.min(self.get(s, k));
            }
        }
        lo
    }

    /// Bilinear (in space) interpolation on the top slice, then exact in the
    /// time level nearest `t`.
    pub fn interpolate_space(&self, x: &[f64], k: usize) -> Result<f64> {
        let g = &self.grid;
        let n = g.n();
        let h = g.h();
        let base = |j: usize| g.center_x()[j] - g.r();
        let mut i0 = [0usize; 2];
        let mut w = [0.0f64; 2];
        for j in 0..n {
            let f = (x[j] - base(j)) / h;
            if f < -1e-9 || f > (g.nx()[j] - 1) as f64 + 1e-9 {
                return Err(Error::Field(format!("interpolation point {x:?} outside grid")));
            }
            let fi = f.floor().min((g.nx()[j] - 2) as f64).max(0.0);
            i0[j] = fi as usize;
            w[j] = (f - fi).clamp(0.0, 1.0);
        }
        let val = |i: [usize; 2]| -> Result<f64> {
            let s = self.grid.space_index(i);
            if !g.in_ball(s) {
                return Err(Error::Field("interpolation stencil hits masked node".into()));
            }
            Ok(self.get(s, k))
        };
        if n == 1 {
            Ok((1.0 - w[0]) * val([i0[0], 0])? + w[0] * val([i0[0] + 1, 0])?)
        } else {
            let v00 = val([i0[0], i0[1]])?;
            let v10 = val([i0[0] + 1, i0[1]])?;
            let v01 = val([i0[0], i0[1] + 1])?;
            let v11 = val([i0[0] + 1, i0[1] + 1])?;
            Ok((1.0 - w[0]) * (1.0 - w[1]) * v00
                + w[0] * (1.0 - w[1]) * v10
                + (1.0 - w[0]) * w[1] * v01
                + w[0] * w[1] * v11)
        }
    }

    fn live_nodes(&self, filter: Option<&dyn Fn(usize, usize) -> bool>) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for k in 0..self.grid.nt() {
            for s in self.grid.space_iter() {
                if filter.is_none_or(|f| f(s, k)) {
                    out.push((s, k));
                }
            }
        }
        out
    }

    /// Parabolic Hölder norm report at exponent `alpha`, exact over all node
    /// pairs up to [`EXACT_PAIR_LIMIT`] nodes, strided beyond.
    pub fn holder_norm(&self, alpha: f64) -> Result<NormReport> {
        if !self.is_single_valued() {
            return Err(Error::Field(
                "holder_norm needs a single-valued field or a side restriction".into(),
            ));
        }
        self.holder_norm_filtered(alpha, None)
    }

    /// Same as [`holder_norm`](Self::holder_norm) restricted to nodes
    /// accepted by `filter`.
    pub fn holder_norm_filtered(
        &self,
        alpha: f64,
        filter: Option<&dyn Fn(usize, usize) -> bool>,
    ) -> Result<NormReport> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Field(format!("alpha must lie in (0,1], got {alpha}")));
        }
        let nodes = self.live_nodes(filter);
        if nodes.is_empty() {
            return Err(Error::Field("empty field".into()));
        }
        let (sample, mode) = stride_sample(&nodes);
        let g = &self.grid;
        let mut sup: f64 = 0.0;
        let mut semi: f64 = 0.0;
        let mut space: f64 = 0.0;
        let mut time: f64 = 0.0;
        for (a, &(s1, k1)) in sample.iter().enumerate() {
            let v1 = self.get(s1, k1);
            sup = sup.max(v1.abs());
            let x1 = g.x(s1);
            let t1 = g.t(k1);
            for &(s2, k2) in &sample[a + 1..] {
                let v2 = self.get(s2, k2);
                let x2 = g.x(s2);
                let t2 = g.t(k2);
                let d = parabolic_distance((&x1[..g.n()], t1), (&x2[..g.n()], t2));
                if d == 0.0 {
                    continue;
                }
                let q = (v1 - v2).abs() / d.powf(alpha);
                semi = semi.max(q);
                if s1 == s2 {
                    time = time.max(q);
                }
                if k1 == k2 {
                    space = space.max(q);
                }
            }
        }
        Ok(NormReport {
            sup_norm: sup,
            holder_alpha: alpha,
            seminorm: semi,
            space_seminorm: space,
            time_seminorm: time,
            c1alpha_parts: None,
            mode,
        })
    }

    /// C^{1,α} norm report: sup norms of `u` and `∇u`, the parabolic Hölder
    /// seminorm of `∇u`, and the C_t^{(1+α)/2} seminorm of `u`. The gradient
    /// is supplied or computed by central differences where both neighbors
    /// exist (nodes without a full stencil drop out of the gradient parts).
    pub fn c1alpha_norm(&self, grad: Option<&[Field]>, alpha: f64) -> Result<NormReport> {
        if !self.is_single_valued() {
            return Err(Error::Field(
                "c1alpha_norm needs a single-valued field or a side restriction".into(),
            ));
        }
        let base = self.holder_norm(alpha)?;
        let g = &self.grid;
        let n = g.n();
        let computed;
        let grads: &[Field] = match grad {
            Some(gs) => {
                if gs.len() != n {
                    return Err(Error::Field(format!("expected {n} gradient components")));
                }
                gs
            }
            None => {
                computed = self.central_gradient();
                &computed
            }
        };

        // nodes where every gradient component is finite
        let mut nodes = Vec::new();
        for k in 0..g.nt() {
            for s in g.space_iter() {
                if (0..n).all(|j| grads[j].get(s, k).is_finite()) {
                    nodes.push((s, k));
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::Field("no nodes with a full gradient stencil".into()));
        }
        let (sample, _mode) = stride_sample(&nodes);
        let mut grad_sup: f64 = 0.0;
        let mut grad_holder: f64 = 0.0;
        for (a, &(s1, k1)) in sample.iter().enumerate() {
            let g1: Vec<f64> = (0..n).map(|j| grads[j].get(s1, k1)).collect();
            grad_sup = grad_sup.max(g1.iter().map(|v| v * v).sum::<f64>().sqrt());
            let x1 = g.x(s1);
            let t1 = g.t(k1);
            for &(s2, k2) in &sample[a + 1..] {
                let x2 = g.x(s2);
                let t2 = g.t(k2);
                let d = parabolic_distance((&x1[..n], t1), (&x2[..n], t2));
                if d == 0.0 {
                    continue;
                }
                let dg: f64 = (0..n)
                    .map(|j| (g1[j] - grads[j].get(s2, k2)).powi(2))
                    .sum::<f64>()
                    .sqrt();
                grad_holder = grad_holder.max(dg / d.powf(alpha));
            }
        }

        // time seminorm at exponent (1+alpha)/2, same-point pairs
        let e = 0.5 * (1.0 + alpha);
        let mut time_c1: f64 = 0.0;
        let live = self.live_nodes(None);
        let (tsample, _) = stride_sample(&live);
        for (a, &(s1, k1)) in tsample.iter().enumerate() {
            for &(s2, k2) in &tsample[a + 1..] {
                if s1 != s2 || k1 == k2 {
                    continue;
                }
                let dt = (g.t(k1) - g.t(k2)).abs();
                time_c1 = time_c1.max((self.get(s1, k1) - self.get(s2, k2)).abs() / dt.powf(e));
            }
        }

        Ok(NormReport {
            c1alpha_parts: Some(C1AlphaParts { grad_sup, grad_holder, time_seminorm: time_c1 }),
            ..base
        })
    }

    /// Central-difference spatial gradient; NaN where a neighbor is missing.
    pub fn central_gradient(&self) -> Vec<Field> {
        let g = &self.grid;
        let n = g.n();
        let h = g.h();
        let nx = g.nx();
        let mut out: Vec<Field> = (0..n)
            .map(|_| Field {
                grid: g.clone(),
                values: vec![f64::NAN; g.node_len()],
                ghosts: BTreeMap::new(),
            })
            .collect();
        for k in 0..g.nt() {
            for s in g.space_iter() {
                let i = g.space_multi(s);
                for (j, comp) in out.iter_mut().enumerate() {
                    if i[j] == 0 || i[j] + 1 >= nx[j] {
                        continue;
                    }
                    let mut lo = i;
                    lo[j] -= 1;
                    let mut hi = i;
                    hi[j] += 1;
                    let (slo, shi) = (g.space_index(lo), g.space_index(hi));
                    if g.in_ball(slo) && g.in_ball(shi) {
                        let v = (self.get(shi, k) - self.get(slo, k)) / (2.0 * h);
                        comp.set(s, k, v);
                    }
                }
            }
        }
        out
    }

    /// Flat CSV rows `x1[,x2],t,side,value`; side is `+`/`-` for band
    /// extensions and `0` for single values. Extra columns may be appended by
    /// `extra(s, k)`.
    pub fn to_csv(&self, extra: Option<&dyn Fn(usize, usize) -> String>) -> String {
        let g = &self.grid;
        let n = g.n();
        let mut out = String::new();
        if n == 1 {
            out.push_str("x1,t,side,value");
        } else {
            out.push_str("x1,x2,t,side,value");
        }
        if extra.is_some() {
            out.push_str(",contact");
        }
        out.push('\n');
        let mut push_row = |s: usize, k: usize, side: &str, v: f64| {
            let x = g.x(s);
            if n == 1 {
                out.push_str(&format!("{},{},{},{}", x[0], g.t(k), side, v));
            } else {
                out.push_str(&format!("{},{},{},{},{}", x[0], x[1], g.t(k), side, v));
            }
            if let Some(f) = extra {
                out.push(',');
                out.push_str(&f(s, k));
            }
            out.push('\n');
        };
        for k in 0..g.nt() {
            for s in g.space_iter() {
                let id = g.node_id(s, k);
                match self.ghosts.get(&id) {
                    None => push_row(s, k, "0", self.values[id]),
                    Some(&(gside, gval)) => {
                        let (ps, gs) = match gside {
                            Side::Minus => ("+", "-"),
                            Side::Plus => ("-", "+"),
                        };
                        push_row(s, k, ps, self.values[id]);
                        push_row(s, k, gs, gval);
                    }
                }
            }
        }
        out
    }

    /// Pointwise map, preserving ghosts through the same map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        let mut out = self.clone();
        for v in &mut out.values {
            if v.is_finite() {
                *v = f(*v);
            }
        }
        for (_, gv) in out.ghosts.values_mut() {
            *gv = f(*gv);
        }
        out
    }

    /// Pointwise combination of two fields on the same grid (ghosts dropped).
    pub fn zip(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.grid.node_len(), other.grid.node_len());
        let mut out = Field {
            grid: self.grid.clone(),
            values: vec![f64::NAN; self.values.len()],
            ghosts: BTreeMap::new(),
        };
        for k in 0..self.grid.nt() {
            for s in self.grid.space_iter() {
                out.set(s, k, f(self.get(s, k), other.get(s, k)));
            }
        }
        out
    }

    /// sup |self − other| over common nodes.
    pub fn sup_diff(&self, other: &Field) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.grid.nt() {
            for s in self.grid.space_iter() {
                m = m.max((self.get(s, k) - other.get(s, k)).abs());
            }
        }
        m
    }
}

fn stride_sample(nodes: &[(usize, usize)]) -> (Vec<(usize, usize)>, PairMode) {
    if nodes.len() <= EXACT_PAIR_LIMIT {
        (nodes.to_vec(), PairMode::Exact)
    } else {
        let stride = nodes.len().div_ceil(EXACT_PAIR_LIMIT);
        (
            nodes.iter().step_by(stride).copied().collect(),
            PairMode::Strided { stride },
        )
    }
}
