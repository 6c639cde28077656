//! The moving graph interface x_n = ψ(x',t): node classification into Ω±,
//! normals, one-sided normal derivatives along interface columns, and the
//! local trace system that closes the jump condition u_ν⁺ − u_ν⁻ = g.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Side};
use crate::grid::GridCylinder;

/// Built-in ψ families selectable by configuration.
///
/// For n = 1 there is no tangential variable, so `tilt` slopes in time and
/// `bump`/`wave` depend on t alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiFamily {
    Flat { a: f64 },
    /// ψ = slope·x₁ (n = 2) or ψ = slope·t (n = 1).
    Tilt { slope: f64 },
    /// ψ = A·(|x'|² + |t|)^{(1+α)/2}; its pointwise C^{1,α} seminorm at the
    /// origin is exactly A.
    Bump { amplitude: f64, alpha: f64 },
    /// ψ = A·sin(k·(x₁ + t)) (n = 2) or A·sin(k·t) (n = 1).
    Wave { amplitude: f64, k: f64 },
}

impl PsiFamily {
    pub fn eval(&self, n: usize, xprime: f64, t: f64) -> f64 {
        match *self {
            PsiFamily::Flat { a } => a,
            PsiFamily::Tilt { slope } => {
                if n == 2 {
                    slope * xprime
                } else {
                    slope * t
                }
            }
            PsiFamily::Bump { amplitude, alpha } => {
                amplitude * (xprime * xprime + t.abs()).powf(0.5 * (1.0 + alpha))
            }
            PsiFamily::Wave { amplitude, k } => {
                if n == 2 {
                    amplitude * (k * (xprime + t)).sin()
                } else {
                    amplitude * (k * t).sin()
                }
            }
        }
    }

    /// ∂ψ/∂x₁; identically zero for n = 1.
    pub fn grad(&self, n: usize, xprime: f64, t: f64) -> f64 {
        if n == 1 {
            return 0.0;
        }
        match *self {
            PsiFamily::Flat { .. } => 0.0,
            PsiFamily::Tilt { slope } => slope,
            PsiFamily::Bump { amplitude, alpha } => {
                let q = xprime * xprime + t.abs();
                if q == 0.0 {
                    0.0
                } else {
                    amplitude * (1.0 + alpha) * xprime * q.powf(0.5 * (alpha - 1.0))
                }
            }
            PsiFamily::Wave { amplitude, k } => amplitude * k * (k * (xprime + t)).cos(),
        }
    }
}

/// Sampled interface graph over the (x',t) projection of a grid, with
/// tangential gradient samples and the pointwise C^{1,α}(0) seminorm.
#[derive(Debug, Clone)]
pub struct InterfaceGraph {
    grid: GridCylinder,
    /// ψ per (column, level); one column for n = 1.
    psi: Vec<f64>,
    grad_psi: Vec<f64>,
    alpha: f64,
    c1alpha_seminorm: f64,
}

impl InterfaceGraph {
    pub fn from_family(grid: &GridCylinder, family: &PsiFamily, alpha: f64) -> InterfaceGraph {
        let n = grid.n();
        Self::from_fns(grid, alpha, |x, t| family.eval(n, x, t), |x, t| family.grad(n, x, t))
    }

    pub fn from_fns(
        grid: &GridCylinder,
        alpha: f64,
        psi: impl Fn(f64, f64) -> f64,
        grad: impl Fn(f64, f64) -> f64,
    ) -> InterfaceGraph {
        let ncol = Self::columns_of(grid);
        let nt = grid.nt();
        let mut ps = vec![0.0; ncol * nt];
        let mut gs = vec![0.0; ncol * nt];
        for k in 0..nt {
            let t = grid.t(k);
            for c in 0..ncol {
                let xp = Self::col_x(grid, c);
                ps[c + ncol * k] = psi(xp, t);
                gs[c + ncol * k] = grad(xp, t);
            }
        }
        let mut g = InterfaceGraph {
            grid: grid.clone(),
            psi: ps,
            grad_psi: gs,
            alpha,
            c1alpha_seminorm: 0.0,
        };
        g.c1alpha_seminorm = g.pointwise_c1alpha_at_origin();
        g
    }

    fn columns_of(grid: &GridCylinder) -> usize {
        if grid.n() == 2 {
            grid.nx()[0]
        } else {
            1
        }
    }

    fn col_x(grid: &GridCylinder, c: usize) -> f64 {
        if grid.n() == 2 {
            grid.center_x()[0] - grid.r() + c as f64 * grid.h()
        } else {
            0.0
        }
    }

    pub fn grid(&self) -> &GridCylinder {
        &self.grid
    }
    pub fn columns(&self) -> usize {
        Self::columns_of(&self.grid)
    }
    pub fn column_x(&self, c: usize) -> f64 {
        Self::col_x(&self.grid, c)
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn c1alpha_seminorm(&self) -> f64 {
        self.c1alpha_seminorm
    }

    pub fn psi(&self, col: usize, k: usize) -> f64 {
        self.psi[col + self.columns() * k]
    }
    pub fn grad_psi(&self, col: usize, k: usize) -> f64 {
        self.grad_psi[col + self.columns() * k]
    }

    pub fn max_abs_psi(&self) -> f64 {
        self.psi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Pointwise seminorm \[ψ\]_{C^{1,α}(0)} = sup |ψ(x',t) − ψ(0,0) − ∇'ψ(0,0)·x'| /
    /// (|x'|² + |t|)^{(1+α)/2} over the samples.
    pub fn pointwise_c1alpha_at_origin(&self) -> f64 {
        let g = &self.grid;
        let k0 = g.nearest_level(g.center_t());
        let c0 = if g.n() == 2 { (self.columns() - 1) / 2 } else { 0 };
        let p0 = self.psi(c0, k0);
        let g0 = self.grad_psi(c0, k0);
        let x0 = self.column_x(c0);
        let t0 = g.t(k0);
        let mut sup: f64 = 0.0;
        for k in 0..g.nt() {
            let t = g.t(k);
            for c in 0..self.columns() {
                let xp = self.column_x(c) - x0;
                let dt = (t - t0).abs();
                let q = xp * xp + dt;
                if q < 1e-14 {
                    continue;
                }
                let dev = (self.psi(c, k) - p0 - g0 * xp).abs();
                sup = sup.max(dev / q.powf(0.5 * (1.0 + self.alpha)));
            }
        }
        sup
    }

    /// Discrete sup-norm form of ‖ψ‖_{C^{1,α}}: sup|ψ| + sup|∇'ψ| + the
    /// parabolic α-Hölder seminorm of ∇'ψ over the samples.
    pub fn c1alpha_norm(&self) -> f64 {
        let g = &self.grid;
        let mut sup_psi: f64 = 0.0;
        let mut sup_grad: f64 = 0.0;
        for v in &self.psi {
            sup_psi = sup_psi.max(v.abs());
        }
        for v in &self.grad_psi {
            sup_grad = sup_grad.max(v.abs());
        }
        let mut semi: f64 = 0.0;
        let samples: Vec<(usize, usize)> = (0..g.nt())
            .flat_map(|k| (0..self.columns()).map(move |c| (c, k)))
            .collect();
        let stride = samples.len().div_ceil(4000).max(1);
        let sub: Vec<_> = samples.iter().step_by(stride).collect();
        for (i, &&(c1, k1)) in sub.iter().enumerate() {
            for &&(c2, k2) in &sub[i + 1..] {
                let dx = self.column_x(c1) - self.column_x(c2);
                let dt = (g.t(k1) - g.t(k2)).abs();
                let d = (dx * dx + dt).sqrt();
                if d == 0.0 {
                    continue;
                }
                semi = semi
                    .max((self.grad_psi(c1, k1) - self.grad_psi(c2, k2)).abs() / d.powf(self.alpha));
            }
        }
        sup_psi + sup_grad + semi
    }

    /// CSV dump `x1prime,t,psi,gradpsi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x1prime,t,psi,gradpsi\n");
        for k in 0..self.grid.nt() {
            for c in 0..self.columns() {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    self.column_x(c),
                    self.grid.t(k),
                    self.psi(c, k),
                    self.grad_psi(c, k)
                ));
            }
        }
        out
    }
}

/// Spatial unit normal to Γ pointing into Ω⁺: (−∇'ψ, 1)/√(1+|∇'ψ|²).
pub fn normal_vector(gamma: &InterfaceGraph, col: usize, k: usize) -> Vec<f64> {
    let n = gamma.grid().n();
    if n == 1 {
        vec![1.0]
    } else {
        let gp = gamma.grad_psi(col, k);
        let w = (1.0 + gp * gp).sqrt();
        vec![-gp / w, 1.0 / w]
    }
}

/// Disjoint per-node tags; a parabolic-boundary node is tagged `Boundary`
/// regardless of its distance to Γ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeTag {
    PlusInterior,
    MinusInterior,
    BandPlus,
    BandMinus,
    Boundary,
}

#[derive(Debug, Clone, Copy)]
pub struct BandInfo {
    /// x_n of the foot point on Γ in this node's column.
    pub foot_xn: f64,
    /// x_n − ψ(x',t); nonnegative on the plus side (ties tagged plus).
    pub signed_dist: f64,
}

/// Exhaustive classification of the grid nodes against an interface.
#[derive(Debug, Clone)]
pub struct NodeClassification {
    grid: GridCylinder,
    tags: Vec<NodeTag>,
    band: BTreeMap<usize, BandInfo>,
}

impl NodeClassification {
    pub fn tag(&self, s: usize, k: usize) -> NodeTag {
        self.tags[self.grid.node_id(s, k)]
    }
    pub fn band_info(&self, s: usize, k: usize) -> Option<&BandInfo> {
        self.band.get(&self.grid.node_id(s, k))
    }
    pub fn grid(&self) -> &GridCylinder {
        &self.grid
    }

    /// Membership side by signed distance, ignoring the boundary tag
    /// (x_n = ψ counts as plus).
    pub fn side_of(&self, gamma: &InterfaceGraph, s: usize, k: usize) -> Side {
        let d = signed_dist(&self.grid, gamma, s, k);
        if d >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }

    pub fn band_nodes(&self) -> impl Iterator<Item = (usize, usize, &BandInfo)> + '_ {
        self.band.iter().map(move |(&id, info)| {
            let (s, k) = self.grid.node_of_id(id);
            (s, k, info)
        })
    }
}

fn signed_dist(grid: &GridCylinder, gamma: &InterfaceGraph, s: usize, k: usize) -> f64 {
    let col = if grid.n() == 2 { grid.space_multi(s)[0] } else { 0 };
    grid.xn(s) - gamma.psi(col, k)
}

/// Tags every node: plus/minus interior where a full one-sided stencil is
/// available (|x_n − ψ| > h), band within one mesh width of Γ, boundary on
/// ∂_p. Errors when the interface exits the cylinder in the x_n direction.
pub fn classify_nodes(grid: &GridCylinder, gamma: &InterfaceGraph) -> Result<NodeClassification> {
    if gamma.max_abs_psi() >= grid.r() {
        return Err(Error::Interface(format!(
            "interface exits the cylinder: sup|psi| = {} >= r = {}",
            gamma.max_abs_psi(),
            grid.r()
        )));
    }
    let h = grid.h();
    let mut tags = vec![NodeTag::Boundary; grid.node_len()];
    let mut band = BTreeMap::new();
    for k in 0..grid.nt() {
        for s in grid.space_iter() {
            let id = grid.node_id(s, k);
            if grid.on_parabolic_boundary(s, k) {
                tags[id] = NodeTag::Boundary;
                continue;
            }
            let d = signed_dist(grid, gamma, s, k);
            tags[id] = if d > h {
                NodeTag::PlusInterior
            } else if d < -h {
                NodeTag::MinusInterior
            } else {
                let col = if grid.n() == 2 { grid.space_multi(s)[0] } else { 0 };
                band.insert(id, BandInfo { foot_xn: gamma.psi(col, k), signed_dist: d });
                if d >= 0.0 {
                    NodeTag::BandPlus
                } else {
                    NodeTag::BandMinus
                }
            };
        }
    }
    Ok(NodeClassification { grid: grid.clone(), tags, band })
}

/// One-sided derivative weights at ξ = 0 of the quadratic through
/// (0, u_Γ), (ξ1, u1), (ξ2, u2); works for either side with signed offsets.
fn derivative_weights(xi1: f64, xi2: f64) -> [f64; 3] {
    [
        -(xi1 + xi2) / (xi1 * xi2),
        -xi2 / (xi1 * (xi1 - xi2)),
        -xi1 / (xi2 * (xi2 - xi1)),
    ]
}

/// Per-column stencil expressing the one-sided normal derivatives as affine
/// functions of the interface trace and nearby same-side values.
#[derive(Debug, Clone)]
pub struct ColumnStencil {
    pub col: usize,
    pub k: usize,
    pub foot_xn: f64,
    pub sqrt_w: f64,
    /// (spatial slot, signed offset ξ from the foot), nearest first.
    pub plus: [(usize, f64); 2],
    pub minus: [(usize, f64); 2],
    /// ∂_n weights at the foot for (u_Γ, u1, u2) on each side.
    pub w_plus: [f64; 3],
    pub w_minus: [f64; 3],
    /// Coefficient of u_Γ in (u_ν⁺ − u_ν⁻); strictly negative.
    pub trace_coef: f64,
    pub g_value: f64,
}

impl ColumnStencil {
    /// Solves the local jump equation u_ν⁺(u_Γ,·) − u_ν⁻(u_Γ,·) = g for the
    /// trace, given same-side data values (u1⁺, u2⁺, u1⁻, u2⁻). Since u is
    /// continuous across Γ, the tangential jump is −[∂_n u]·∇'ψ and the
    /// condition transfers to the column slopes as
    /// (∂_n u⁺ − ∂_n u⁻)·√(1+|∇'ψ|²) = g.
    pub fn solve_trace(&self, up: [f64; 2], um: [f64; 2]) -> f64 {
        let rest = (self.w_plus[1] * up[0] + self.w_plus[2] * up[1]
            - self.w_minus[1] * um[0]
            - self.w_minus[2] * um[1])
            * self.sqrt_w;
        (self.g_value - rest) / self.trace_coef
    }

    /// ∂_n value on one side from the trace and the side's data values.
    pub fn normal_slope(&self, side: Side, trace: f64, data: [f64; 2]) -> f64 {
        let w = match side {
            Side::Plus => &self.w_plus,
            Side::Minus => &self.w_minus,
        };
        w[0] * trace + w[1] * data[0] + w[2] * data[1]
    }

    /// Quadratic one-sided extension evaluated at signed offset ξ.
    pub fn extend(&self, side: Side, trace: f64, data: [f64; 2], xi: f64) -> f64 {
        let (p, q) = match side {
            Side::Plus => (self.plus[0].1, self.plus[1].1),
            Side::Minus => (self.minus[0].1, self.minus[1].1),
        };
        // Lagrange basis through (0, trace), (p, data0), (q, data1)
        let l0 = (xi - p) * (xi - q) / (p * q);
        let l1 = xi * (xi - q) / (p * (p - q));
        let l2 = xi * (xi - p) / (q * (q - p));
        l0 * trace + l1 * data[0] + l2 * data[1]
    }
}

/// The assembled jump-closure stencils, one per interface column and time
/// level that carries non-boundary band nodes.
#[derive(Debug, Clone)]
pub struct TraceSystem {
    columns: BTreeMap<(usize, usize), ColumnStencil>,
}

impl TraceSystem {
    pub fn get(&self, col: usize, k: usize) -> Option<&ColumnStencil> {
        self.columns.get(&(col, k))
    }
    pub fn iter(&self) -> impl Iterator<Item = &ColumnStencil> {
        self.columns.values()
    }
    pub fn len(&self) -> usize {
        self.columns.len()
    }
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Finds the first two same-side nodes along the column at offsets
/// |ξ| ≥ h/2 from the foot, on `side`.
fn side_data_nodes(
    grid: &GridCylinder,
    col: usize,
    foot_xn: f64,
    side: Side,
) -> Result<[(usize, f64); 2]> {
    let h = grid.h();
    let n = grid.n();
    let nxn = grid.nx()[n - 1];
    let base = grid.center_x()[n - 1] - grid.r();
    let sign = side.sign();
    let mut found = Vec::with_capacity(2);
    // walk outward from the foot
    let start = ((foot_xn - base) / h).round() as isize;
    let mut j = start - 2 * sign as isize;
    let mut steps = 0;
    while found.len() < 2 && steps < nxn as isize + 4 {
        steps += 1;
        j += sign as isize;
        if j < 0 || j >= nxn as isize {
            continue;
        }
        let xn = base + j as f64 * h;
        let xi = xn - foot_xn;
        if xi * sign < 0.5 * h - 1e-12 {
            continue;
        }
        let i = if n == 2 { [col, j as usize] } else { [j as usize, 0] };
        let s = grid.space_index(i);
        if !grid.in_ball(s) {
            break; // past the lateral staircase
        }
        found.push((s, xi));
    }
    found.try_into().map_err(|_| {
        Error::Interface(format!(
            "insufficient one-sided stencil on the {side:?} side at column {col} (foot x_n = {foot_xn})"
        ))
    })
}

/// Assembles the trace system for every column/level pair that has at least
/// one non-boundary band node. Errors on singular local equations or missing
/// stencils.
pub fn build_trace_system(
    class: &NodeClassification,
    gamma: &InterfaceGraph,
    g: &dyn Fn(f64, f64) -> f64,
) -> Result<TraceSystem> {
    let grid = class.grid();
    let mut needed: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    for (s, k, _) in class.band_nodes() {
        let col = if grid.n() == 2 { grid.space_multi(s)[0] } else { 0 };
        needed.insert((col, k), ());
    }
    let mut columns = BTreeMap::new();
    for (col, k) in needed.into_keys() {
        columns.insert((col, k), column_stencil(grid, gamma, g, col, k)?);
    }
    Ok(TraceSystem { columns })
}

pub(crate) fn column_stencil(
    grid: &GridCylinder,
    gamma: &InterfaceGraph,
    g: &dyn Fn(f64, f64) -> f64,
    col: usize,
    k: usize,
) -> Result<ColumnStencil> {
    let foot_xn = gamma.psi(col, k);
    let gp = if grid.n() == 2 { gamma.grad_psi(col, k) } else { 0.0 };
    let g_value = g(gamma.column_x(col), grid.t(k));
    assemble_column_stencil(grid, col, k, foot_xn, gp, g_value)
}

/// Stencil assembly from raw level values (the marcher evaluates ψ per
/// level itself and skips the sampled-graph carrier).
pub(crate) fn assemble_column_stencil(
    grid: &GridCylinder,
    col: usize,
    k: usize,
    foot_xn: f64,
    grad_psi: f64,
    g_value: f64,
) -> Result<ColumnStencil> {
    let sqrt_w = (1.0 + grad_psi * grad_psi).sqrt();
    let plus = side_data_nodes(grid, col, foot_xn, Side::Plus)?;
    let minus = side_data_nodes(grid, col, foot_xn, Side::Minus)?;
    let w_plus = derivative_weights(plus[0].1, plus[1].1);
    let w_minus = derivative_weights(minus[0].1, minus[1].1);
    // Continuity of u along Γ ties the tangential jump to the normal one,
    // so the local equation involves only the column slopes, scaled by the
    // surface measure factor.
    let trace_coef = (w_plus[0] - w_minus[0]) * sqrt_w;
    if trace_coef.abs() < 1e-12 {
        return Err(Error::Interface(format!(
            "singular local jump equation at column {col}, level {k}"
        )));
    }
    Ok(ColumnStencil {
        col,
        k,
        foot_xn,
        sqrt_w,
        plus,
        minus,
        w_plus,
        w_minus,
        trace_coef,
        g_value,
    })
}

/// One-sided normal derivative of `u` at the interface point of `(col, k)`:
/// a second-order one-sided difference along e_n closed by the trace value,
/// corrected by the tangential term −∇'ψ·∇'u (taken from the plus side when
/// both are available) and normalized by √(1+|∇'ψ|²).
pub fn one_sided_normal_derivative(
    u: &Field,
    trace_value: f64,
    gamma: &InterfaceGraph,
    col: usize,
    k: usize,
    side: Side,
) -> Result<f64> {
    let grid = u.grid();
    let st = column_stencil(grid, gamma, &|_, _| 0.0, col, k)?;
    let (nodes, _w) = match side {
        Side::Plus => (&st.plus, &st.w_plus),
        Side::Minus => (&st.minus, &st.w_minus),
    };
    let data = [
        u.get_on(nodes[0].0, k, side)
            .ok_or_else(|| Error::Interface("missing side value in normal stencil".into()))?,
        u.get_on(nodes[1].0, k, side)
            .ok_or_else(|| Error::Interface("missing side value in normal stencil".into()))?,
    ];
    let dn = st.normal_slope(side, trace_value, data);
    if grid.n() == 1 {
        return Ok(dn);
    }
    let gp = gamma.grad_psi(col, k);
    let tangential = tangential_gradient(u, &st, k)?;
    Ok((dn - gp * tangential) / st.sqrt_w)
}

/// ∇'u near the foot point: central x₁ difference at the first data node's
/// row, preferring the plus side.
fn tangential_gradient(u: &Field, st: &ColumnStencil, k: usize) -> Result<f64> {
    let grid = u.grid();
    let h = grid.h();
    for (side, nodes) in [(Side::Plus, &st.plus), (Side::Minus, &st.minus)] {
        let i = grid.space_multi(nodes[0].0);
        if i[0] == 0 || i[0] + 1 >= grid.nx()[0] {
            continue;
        }
        let l = grid.space_index([i[0] - 1, i[1]]);
        let rr = grid.space_index([i[0] + 1, i[1]]);
        if !grid.in_ball(l) || !grid.in_ball(rr) {
            continue;
        }
        if let (Some(a), Some(b)) = (u.get_on(rr, k, side), u.get_on(l, k, side)) {
            return Ok((a - b) / (2.0 * h));
        }
    }
    Err(Error::Interface("no tangential gradient stencil near the foot".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(h: f64) -> GridCylinder {
        GridCylinder::centered(1, 1.0, h, 0.25).unwrap()
    }

    #[test]
    fn classify_flat_1d() {
        // psi = 0, h = 0.25: nodes with x > 0.25 plus-interior, x < -0.25
        // minus-interior, x in {0, ±0.25} band (away from the boundary).
        let g = grid1(0.25);
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);
        let class = classify_nodes(&g, &gamma).unwrap();
        let k = 2; // interior level
        for s in g.space_iter() {
            let x = g.xn(s);
            let tag = class.tag(s, k);
            if g.on_parabolic_boundary(s, k) {
                assert_eq!(tag, NodeTag::Boundary);
            } else if x > 0.25 + 1e-12 {
                assert_eq!(tag, NodeTag::PlusInterior, "x={x}");
            } else if x < -0.25 - 1e-12 {
                assert_eq!(tag, NodeTag::MinusInterior, "x={x}");
            } else if x >= 0.0 {
                assert_eq!(tag, NodeTag::BandPlus, "x={x}");
            } else {
                assert_eq!(tag, NodeTag::BandMinus, "x={x}");
            }
        }
    }

    #[test]
    fn classify_partitions_every_node() {
        let g = GridCylinder::centered(2, 1.0, 0.25, 0.25).unwrap();
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Tilt { slope: 0.3 }, 0.5);
        let class = classify_nodes(&g, &gamma).unwrap();
        let mut count = 0;
        for k in 0..g.nt() {
            for s in g.space_iter() {
                let _ = class.tag(s, k); // every unmasked node has a tag
                count += 1;
            }
        }
        assert_eq!(count, g.space_count() * g.nt());
    }

    #[test]
    fn interface_outside_cylinder_rejected() {
        let g = GridCylinder::centered(1, 0.5, 0.125, 0.0625).unwrap();
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.9 }, 0.5);
        assert!(classify_nodes(&g, &gamma).is_err());
    }

    #[test]
    fn moving_interface_matches_flat_at_t0() {
        // psi = 0.1 t agrees with psi = 0 on the top slice t = 0.
        let g = grid1(0.25);
        let moving = InterfaceGraph::from_family(&g, &PsiFamily::Tilt { slope: 0.1 }, 0.5);
        let flat = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);
        let ca = classify_nodes(&g, &moving).unwrap();
        let cb = classify_nodes(&g, &flat).unwrap();
        let top = g.nt() - 1;
        for s in g.space_iter() {
            assert_eq!(ca.tag(s, top), cb.tag(s, top));
        }
    }

    #[test]
    fn normal_vector_values() {
        let g = grid1(0.25);
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);
        assert_eq!(normal_vector(&gamma, 0, 0), vec![1.0]);

        let g2 = GridCylinder::centered(2, 1.0, 0.25, 0.25).unwrap();
        let tilt = InterfaceGraph::from_family(&g2, &PsiFamily::Tilt { slope: 0.5 }, 0.5);
        let c = 1; // off-center column so grad = slope
        let nu = normal_vector(&tilt, c, 0);
        let w = 1.25f64.sqrt();
        assert!((nu[0] + 0.5 / w).abs() < 1e-12 && (nu[1] - 1.0 / w).abs() < 1e-12);
    }

    #[test]
    fn normal_vector_unit_length() {
        let g2 = GridCylinder::centered(2, 1.0, 0.25, 0.25).unwrap();
        let mut rng = crate::rng::Rng::stream(0, 11);
        for _ in 0..500 {
            let slope = rng.range(-3.0, 3.0);
            let gamma = InterfaceGraph::from_family(&g2, &PsiFamily::Tilt { slope }, 0.5);
            let nu = normal_vector(&gamma, 2, 1);
            let len: f64 = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((len - 1.0).abs() < 1e-12);
            assert!(nu[1] > 0.0);
        }
    }

    #[test]
    fn grad_psi_consistent_with_central_differences() {
        let g2 = GridCylinder::centered(2, 1.0, 0.03125, 0.25).unwrap();
        let gamma = InterfaceGraph::from_family(&g2, &PsiFamily::Wave { amplitude: 0.1, k: 2.0 }, 0.5);
        let k = 1;
        let h = g2.h();
        for c in 1..gamma.columns() - 1 {
            let fd = (gamma.psi(c + 1, k) - gamma.psi(c - 1, k)) / (2.0 * h);
            assert!((fd - gamma.grad_psi(c, k)).abs() < 2.0 * h * h, "col {c}");
        }
    }

    #[test]
    fn bump_seminorm_is_amplitude() {
        let g2 = GridCylinder::centered(2, 1.0, 0.125, 0.25).unwrap();
        let gamma =
            InterfaceGraph::from_family(&g2, &PsiFamily::Bump { amplitude: 0.05, alpha: 0.5 }, 0.5);
        assert!((gamma.c1alpha_seminorm() - 0.05).abs() < 1e-9);
    }

    #[test]
    fn interface_csv_dump() {
        let g2 = GridCylinder::centered(2, 1.0, 0.5, 0.5).unwrap();
        let gamma = InterfaceGraph::from_family(&g2, &PsiFamily::Tilt { slope: 0.25 }, 0.5);
        let csv = gamma.to_csv();
        assert!(csv.starts_with("x1prime,t,psi,gradpsi"));
        assert_eq!(csv.lines().count(), 1 + gamma.columns() * g2.nt());
    }

    #[test]
    fn trace_recovers_piecewise_affine() {
        // u = p+ x_n⁺ − p− x_n⁻ with p+ − p− = g0 and flat psi: the local
        // equation recovers u_Γ = 0 exactly.
        let g = grid1(0.25);
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);
        let class = classify_nodes(&g, &gamma).unwrap();
        let (pp, pm) = (1.25, -0.75);
        let g0 = pp - pm;
        let u = Field::from_fn(&g, |x, _| if x[0] >= 0.0 { pp * x[0] } else { pm * x[0] });
        let ts = build_trace_system(&class, &gamma, &|_, _| g0).unwrap();
        assert!(!ts.is_empty());
        for st in ts.iter() {
            let up = [u.get(st.plus[0].0, st.k), u.get(st.plus[1].0, st.k)];
            let um = [u.get(st.minus[0].0, st.k), u.get(st.minus[1].0, st.k)];
            let tr = st.solve_trace(up, um);
            assert!(tr.abs() < 1e-12, "trace {tr}");
            // slopes are exact on one-sided affine data
            assert!((st.normal_slope(Side::Plus, tr, up) - pp).abs() < 1e-12);
            assert!((st.normal_slope(Side::Minus, tr, um) - pm).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_coefficient_flat_aligned() {
        // With the foot on a node and uniform spacing the one-sided weights
        // give coefficient −3/(2h) per side, hence −3/h in the jump.
        let h = 0.25;
        let g = grid1(h);
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);
        let class = classify_nodes(&g, &gamma).unwrap();
        let ts = build_trace_system(&class, &gamma, &|_, _| 0.0).unwrap();
        for st in ts.iter() {
            assert!((st.trace_coef + 3.0 / h).abs() < 1e-12);
            assert!(st.trace_coef < 0.0);
        }
    }

    #[test]
    fn trace_coefficient_bounded_below_for_moderate_slopes() {
        // |∇'ψ| ≤ 1/2 keeps the u_Γ coefficient ≤ −c/h with c > 0.
        let g2 = GridCylinder::centered(2, 1.0, 0.125, 0.25).unwrap();
        for slope in [-0.5, -0.3, 0.0, 0.2, 0.5] {
            let gamma = InterfaceGraph::from_family(&g2, &PsiFamily::Tilt { slope }, 0.5);
            let class = classify_nodes(&g2, &gamma).unwrap();
            let ts = build_trace_system(&class, &gamma, &|_, _| 0.0).unwrap();
            for st in ts.iter() {
                assert!(st.trace_coef < -2.0 / g2.h(), "slope {slope}: {}", st.trace_coef);
            }
        }
    }

    #[test]
    fn trace_consistency_second_order() {
        // Smooth one-sided pieces with exact jump: |u_Γ − u(foot)| = O(h²).
        let exact = |x: f64| {
            if x >= 0.0 {
                (1.3 * x).sin() + 0.5 * x * x
            } else {
                -0.7 * x + x * x
            }
        };
        // jump of slopes at 0: 1.3 − (−0.7) = 2.0
        let mut errs = Vec::new();
        for h in [0.125, 0.0625] {
            let g = grid1(h);
            let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);
            let class = classify_nodes(&g, &gamma).unwrap();
            let u = Field::from_fn(&g, |x, _| exact(x[0]));
            let ts = build_trace_system(&class, &gamma, &|_, _| 2.0).unwrap();
            let st = ts.get(0, 1).unwrap();
            let up = [u.get(st.plus[0].0, 1), u.get(st.plus[1].0, 1)];
            let um = [u.get(st.minus[0].0, 1), u.get(st.minus[1].0, 1)];
            errs.push((st.solve_trace(up, um) - exact(0.0)).abs());
        }
        assert!(errs[1] < errs[0] / 2.5, "not second order: {errs:?}");
        assert!(errs[0] < 0.01);
    }

    #[test]
    fn one_sided_derivative_examples() {
        let g = grid1(0.25);
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);

        let lin = Field::from_fn(&g, |x, _| x[0]);
        let d = one_sided_normal_derivative(&lin, 0.0, &gamma, 0, 1, Side::Plus).unwrap();
        assert!((d - 1.0).abs() < 1e-12);

        let kink = Field::from_fn(&g, |x, _| x[0].abs());
        let dp = one_sided_normal_derivative(&kink, 0.0, &gamma, 0, 1, Side::Plus).unwrap();
        let dm = one_sided_normal_derivative(&kink, 0.0, &gamma, 0, 1, Side::Minus).unwrap();
        assert!((dp - 1.0).abs() < 1e-12 && (dm + 1.0).abs() < 1e-12);
        assert!((dp - dm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn one_sided_derivative_quadratic_exact() {
        let g = GridCylinder::centered(1, 1.0, 0.1, 0.25).unwrap();
        let gamma = InterfaceGraph::from_family(&g, &PsiFamily::Flat { a: 0.0 }, 0.5);
        let u = Field::from_fn(&g, |x, _| x[0] * x[0]);
        let d = one_sided_normal_derivative(&u, 0.0, &gamma, 0, 1, Side::Plus).unwrap();
        assert!(d.abs() < 1e-12, "{d}");
    }
}
