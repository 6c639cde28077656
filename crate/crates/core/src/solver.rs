//! Explicit monotone time stepping for the transmission problem: interior
//! central differences, band nodes closed through the local trace system,
//! Dirichlet data on the parabolic boundary marched from the bottom slice.
//!
//! The field handed back lives on the problem's grid; when the CFL step is
//! finer than the grid's `dt`, the march runs on an internal refinement that
//! divides `dt` exactly and only the grid levels are stored.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, Side};
use crate::grid::GridCylinder;
use crate::interface::{assemble_column_stencil, ColumnStencil, InterfaceGraph, PsiFamily};
use crate::operators::{OperatorSpec, SymMatrix};

pub type DataFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
pub type JumpFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Interface geometry source; evaluated per march level, so moving
/// interfaces stay sharp between stored levels.
#[derive(Clone)]
pub enum PsiSpec {
    Family(PsiFamily),
    Fns { psi: JumpFn, grad: JumpFn },
}

impl PsiSpec {
    pub fn eval(&self, n: usize, xprime: f64, t: f64) -> f64 {
        match self {
            PsiSpec::Family(f) => f.eval(n, xprime, t),
            PsiSpec::Fns { psi, .. } => psi(xprime, t),
        }
    }
    pub fn grad(&self, n: usize, xprime: f64, t: f64) -> f64 {
        match self {
            PsiSpec::Family(f) => f.grad(n, xprime, t),
            PsiSpec::Fns { grad, .. } => grad(xprime, t),
        }
    }
    pub fn instantiate(&self, grid: &GridCylinder, alpha: f64) -> InterfaceGraph {
        let n = grid.n();
        InterfaceGraph::from_fns(grid, alpha, |x, t| self.eval(n, x, t), |x, t| self.grad(n, x, t))
    }
}

/// How the cylinder is split by the interface.
#[derive(Clone)]
pub enum InterfaceMode {
    /// Two phases coupled by the jump condition; the trace is solved.
    Transmission,
    /// Single phase on one side of the graph with a given Dirichlet value on
    /// it; the far side is filled with that value and never stepped.
    OnePhase { side: Side, boundary: JumpFn },
    /// Plain Cauchy-Dirichlet problem on the full cylinder (`f_plus_op`,
    /// `f_plus` govern everything).
    NoInterface,
}

/// The assembled problem (F⁺, F⁻, f⁺, f⁻, g, ψ, φ) on a grid cylinder.
#[derive(Clone)]
pub struct TransmissionProblem {
    pub grid: GridCylinder,
    pub f_plus_op: OperatorSpec,
    pub f_minus_op: OperatorSpec,
    pub f_plus: DataFn,
    pub f_minus: DataFn,
    pub g: JumpFn,
    pub psi: PsiSpec,
    pub psi_alpha: f64,
    pub phi: DataFn,
    pub mode: InterfaceMode,
    /// CFL safety factor θ ∈ (0, 1]; the band stencils need θ ≤ 1/2.
    pub theta: f64,
}

pub fn constant_fn(c: f64) -> DataFn {
    Arc::new(move |_, _| c)
}
pub fn constant_jump(c: f64) -> JumpFn {
    Arc::new(move |_, _| c)
}

impl TransmissionProblem {
    /// Heat-type default: trace operators, zero data, flat interface at 0.
    pub fn new(grid: GridCylinder) -> TransmissionProblem {
        TransmissionProblem {
            grid,
            f_plus_op: OperatorSpec::trace_laplace(),
            f_minus_op: OperatorSpec::trace_laplace(),
            f_plus: constant_fn(0.0),
            f_minus: constant_fn(0.0),
            g: constant_jump(0.0),
            psi: PsiSpec::Family(PsiFamily::Flat { a: 0.0 }),
            psi_alpha: 0.5,
            phi: constant_fn(0.0),
            mode: InterfaceMode::Transmission,
            theta: 0.45,
        }
    }

    pub fn lambda_up_max(&self) -> f64 {
        self.f_plus_op.lambda_up().max(self.f_minus_op.lambda_up())
    }
    pub fn lambda_min(&self) -> f64 {
        self.f_plus_op.lambda().min(self.f_minus_op.lambda())
    }

    /// Interface sampled on the storage grid.
    pub fn gamma(&self) -> InterfaceGraph {
        self.psi.instantiate(&self.grid, self.psi_alpha)
    }

    pub fn side_source(&self, side: Side) -> &DataFn {
        match side {
            Side::Plus => &self.f_plus,
            Side::Minus => &self.f_minus,
        }
    }
    pub fn side_operator(&self, side: Side) -> &OperatorSpec {
        match side {
            Side::Plus => &self.f_plus_op,
            Side::Minus => &self.f_minus_op,
        }
    }
}

/// CFL-stable step θ·h²/(2nΛ + 4Λ·[n=2]), rounded down so that it divides
/// r² exactly.
pub fn cfl_dt(grid: &GridCylinder, lambda_up: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Solver(format!("CFL safety factor must lie in (0,1], got {theta}")));
    }
    let raw = cfl_dt_raw(grid.n(), grid.h(), lambda_up, theta);
    let r2 = grid.r() * grid.r();
    let m = (r2 / raw).ceil().max(1.0);
    Ok(r2 / m)
}

/// The unrounded CFL step.
pub fn cfl_dt_raw(n: usize, h: f64, lambda_up: f64, theta: f64) -> f64 {
    let denom = 2.0 * n as f64 * lambda_up + if n == 2 { 4.0 * lambda_up } else { 0.0 };
    theta * h * h / denom
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    /// March steps taken (internal refinement included).
    pub steps: usize,
    /// March step actually used.
    pub dt: f64,
    /// Storage step of the returned field.
    pub dt_stored: f64,
    /// dt·(2nΛ + 4Λ[n=2])/h², at most θ ≤ 1.
    pub cfl_ratio: f64,
    /// Max over levels of the solved local jump-equation residual.
    pub max_interface_residual: f64,
    /// (min(u − lower), min(upper − u)) when barriers were requested.
    pub sandwich_margin: Option<(f64, f64)>,
    #[serde(skip)]
    pub wall_ms: f64,
}

/// Node roles at one march level.
#[derive(Clone, Copy, PartialEq)]
enum Role {
    Boundary,
    Interior(Side),
    /// |d| within [h/2, h]: stepped with the one-sided closure.
    Band(Side),
    /// |d| below h/2: interpolated between the trace and the first data node.
    Slave(Side),
    /// One-phase far side.
    Far,
}

struct LevelCtx {
    roles: Vec<Role>,
    /// Signed distance x_n − ψ per slot (NaN where meaningless).
    dist: Vec<f64>,
    /// Per interface column: stencil and its solved (or given) trace.
    stencils: Vec<Option<(ColumnStencil, f64)>>,
}

/// One-level-at-a-time explicit marcher; `values()` exposes the complete
/// current level and [`step`](Marcher::step) advances it by one march step.
pub struct Marcher {
    problem: TransmissionProblem,
    grid: GridCylinder,
    pub dt: f64,
    pub level: usize,
    pub steps_total: usize,
    cur: Vec<f64>,
    ctx: LevelCtx,
    max_residual: f64,
}

fn columns(grid: &GridCylinder) -> usize {
    if grid.n() == 2 {
        grid.nx()[0]
    } else {
        1
    }
}

fn col_of(grid: &GridCylinder, s: usize) -> usize {
    if grid.n() == 2 {
        grid.space_multi(s)[0]
    } else {
        0
    }
}

fn col_x(grid: &GridCylinder, c: usize) -> f64 {
    if grid.n() == 2 {
        grid.center_x()[0] - grid.r() + c as f64 * grid.h()
    } else {
        0.0
    }
}

impl Marcher {
    /// Sets up the march at the CFL step refined to divide the grid's dt.
    pub fn new(problem: &TransmissionProblem) -> Result<Marcher> {
        let grid = problem.grid.clone();
        let dt_store = grid.dt();
        let dt_cfl = cfl_dt_raw(grid.n(), grid.h(), problem.lambda_up_max(), problem.theta);
        let m = (dt_store / dt_cfl).ceil().max(1.0) as usize;
        let dt = dt_store / m as f64;
        let steps_total = m * (grid.nt() - 1);

        let mut cur = vec![f64::NAN; grid.space_len()];
        let t0 = grid.t(0);
        for s in grid.space_iter() {
            let x = grid.x(s);
            cur[s] = (problem.phi)(&x[..grid.n()], t0);
        }
        let mut marcher = Marcher {
            problem: problem.clone(),
            grid,
            dt,
            level: 0,
            steps_total,
            cur,
            ctx: LevelCtx { roles: Vec::new(), dist: Vec::new(), stencils: Vec::new() },
            max_residual: 0.0,
        };
        marcher.build_ctx()?;
        marcher.fix_slaves();
        Ok(marcher)
    }

    pub fn t(&self) -> f64 {
        self.grid.t(0) + self.level as f64 * self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.cur
    }

    pub fn grid(&self) -> &GridCylinder {
        &self.grid
    }

    pub fn max_residual(&self) -> f64 {
        self.max_residual
    }

    /// Lateral nodes are pinned to φ at every level; the bottom slice only
    /// seeds the march and is stepped like any other level.
    fn is_boundary(&self, s: usize) -> bool {
        self.grid.on_lateral(s)
    }

    /// Level roles, interface stencils, and solved traces at the current level.
    fn build_ctx(&mut self) -> Result<()> {
        let grid = self.grid.clone();
        let n = grid.n();
        let h = grid.h();
        let t = self.t();
        let ncol = columns(&grid);

        let mut psi_col = vec![0.0; ncol];
        let mut grad_col = vec![0.0; ncol];
        let no_interface = matches!(self.problem.mode, InterfaceMode::NoInterface);
        if !no_interface {
            for c in 0..ncol {
                let xp = col_x(&grid, c);
                psi_col[c] = self.problem.psi.eval(n, xp, t);
                grad_col[c] = self.problem.psi.grad(n, xp, t);
                if psi_col[c].abs() >= grid.r() {
                    return Err(Error::Interface(format!(
                        "interface exits the cylinder at t = {t}: psi = {}",
                        psi_col[c]
                    )));
                }
            }
        }

        let mut roles = vec![Role::Boundary; grid.space_len()];
        let mut dist = vec![f64::NAN; grid.space_len()];
        let mut needs_trace = vec![false; ncol];
        for s in grid.space_iter() {
            let c = col_of(&grid, s);
            let d = if no_interface { f64::NAN } else { grid.xn(s) - psi_col[c] };
            dist[s] = d;
            if self.is_boundary(s) {
                roles[s] = Role::Boundary;
                if let InterfaceMode::OnePhase { side, .. } = &self.problem.mode {
                    if d * side.sign() < 0.0 {
                        roles[s] = Role::Far;
                    }
                }
                continue;
            }
            if no_interface {
                roles[s] = Role::Interior(Side::Plus);
                continue;
            }
            let side = if d >= 0.0 { Side::Plus } else { Side::Minus };
            if let InterfaceMode::OnePhase { side: dom, .. } = &self.problem.mode {
                if side != *dom {
                    roles[s] = Role::Far;
                    continue;
                }
            }
            roles[s] = if d.abs() > h {
                Role::Interior(side)
            } else if d.abs() >= 0.5 * h {
                needs_trace[c] = true;
                Role::Band(side)
            } else {
                needs_trace[c] = true;
                Role::Slave(side)
            };
        }

        let mut stencils: Vec<Option<(ColumnStencil, f64)>> = vec![None; ncol];
        if !no_interface {
            let gfun = self.problem.g.clone();
            for (c, slot) in stencils.iter_mut().enumerate() {
                if !needs_trace[c] {
                    continue;
                }
                let g_value = gfun(col_x(&grid, c), t);
                let st = assemble_column_stencil(&grid, c, 0, psi_col[c], grad_col[c], g_value)?;
                let trace = match &self.problem.mode {
                    InterfaceMode::Transmission => {
                        let up = [self.cur[st.plus[0].0], self.cur[st.plus[1].0]];
                        let um = [self.cur[st.minus[0].0], self.cur[st.minus[1].0]];
                        let tr = st.solve_trace(up, um);
                        let dp = st.normal_slope(Side::Plus, tr, up);
                        let dm = st.normal_slope(Side::Minus, tr, um);
                        let res = ((dp - dm) * st.sqrt_w - st.g_value).abs();
                        self.max_residual = self.max_residual.max(res);
                        tr
                    }
                    InterfaceMode::OnePhase { boundary, .. } => boundary(col_x(&grid, c), t),
                    InterfaceMode::NoInterface => unreachable!(),
                };
                *slot = Some((st, trace));
            }
        }

        self.ctx = LevelCtx { roles, dist, stencils };
        Ok(())
    }

    /// Overwrites slave nodes (and the one-phase far side) at the current
    /// level. Bottom-slice values are data and keep φ.
    fn fix_slaves(&mut self) {
        let grid = self.grid.clone();
        let t = self.t();
        let skip_slaves = self.level == 0;
        for s in grid.space_iter() {
            match self.ctx.roles[s] {
                Role::Slave(_) if skip_slaves => {}
                Role::Slave(side) => {
                    let c = col_of(&grid, s);
                    let (st, trace) = self.ctx.stencils[c].as_ref().expect("slave without stencil");
                    let nearest = match side {
                        Side::Plus => st.plus[0],
                        Side::Minus => st.minus[0],
                    };
                    let xi = self.ctx.dist[s];
                    // linear interpolation between the trace and the first
                    // data node: monotone and exact on one-sided affine data
                    let w = xi / nearest.1;
                    self.cur[s] = (1.0 - w) * trace + w * self.cur[nearest.0];
                }
                Role::Far => {
                    if let InterfaceMode::OnePhase { boundary, .. } = &self.problem.mode {
                        self.cur[s] = boundary(col_x(&grid, col_of(&grid, s)), t);
                    }
                }
                _ => {}
            }
        }
    }

    /// Value on `side` at slot `ss`, reading through the interface when the
    /// slot belongs to the other side (its column extension is used).
    fn side_value(&self, ss: usize, side: Side) -> f64 {
        match self.ctx.roles[ss] {
            Role::Interior(sd) | Role::Band(sd) | Role::Slave(sd) if sd != side => {
                let c = col_of(&self.grid, ss);
                if let Some((st, trace)) = &self.ctx.stencils[c] {
                    let data = match side {
                        Side::Plus => [self.cur[st.plus[0].0], self.cur[st.plus[1].0]],
                        Side::Minus => [self.cur[st.minus[0].0], self.cur[st.minus[1].0]],
                    };
                    let xi = self.grid.xn(ss) - st.foot_xn;
                    st.extend(side, *trace, data, xi)
                } else {
                    self.cur[ss]
                }
            }
            _ => self.cur[ss],
        }
    }

    /// Discrete Hessian at an interior node; the cross term is dropped where
    /// a corner leaves the ball (staircase cells).
    fn interior_hessian(&self, s: usize, side: Side) -> SymMatrix {
        let grid = &self.grid;
        let n = grid.n();
        let h = grid.h();
        let i = grid.space_multi(s);
        let c = self.cur[s];
        let at = |i0: isize, i1: isize| -> Option<f64> {
            if i0 < 0 || i1 < 0 || i0 >= grid.nx()[0] as isize || i1 >= grid.nx()[1] as isize {
                return None;
            }
            let ss = grid.space_index([i0 as usize, i1 as usize]);
            grid.in_ball(ss).then(|| self.side_value(ss, side))
        };
        let (i0, i1) = (i[0] as isize, i[1] as isize);
        if n == 1 {
            let a = at(i0 - 1, 0).expect("interior stencil");
            let b = at(i0 + 1, 0).expect("interior stencil");
            return SymMatrix::scalar((a - 2.0 * c + b) / (h * h));
        }
        let d11 = (at(i0 - 1, i1).expect("x stencil") - 2.0 * c + at(i0 + 1, i1).expect("x stencil"))
            / (h * h);
        let d22 = (at(i0, i1 - 1).expect("y stencil") - 2.0 * c + at(i0, i1 + 1).expect("y stencil"))
            / (h * h);
        let d12 = match (at(i0 + 1, i1 + 1), at(i0 - 1, i1 - 1), at(i0 + 1, i1 - 1), at(i0 - 1, i1 + 1))
        {
            (Some(pp), Some(mm), Some(pm), Some(mp)) => (pp + mm - pm - mp) / (4.0 * h * h),
            _ => 0.0,
        };
        SymMatrix::new2(d11, d12, d22)
    }

    /// Hessian at a band node: non-uniform second difference along e_n
    /// closed by the trace, central tangential part, one-sided cross term.
    fn band_hessian(&self, s: usize, side: Side) -> SymMatrix {
        let grid = &self.grid;
        let n = grid.n();
        let h = grid.h();
        let c = col_of(grid, s);
        let (_, trace) = self.ctx.stencils[c].as_ref().expect("band without stencil");
        let xi = self.ctx.dist[s];
        let i = grid.space_multi(s);
        let sign = side.sign();
        let step = sign as isize;
        let up_idx = if n == 2 {
            [i[0], (i[1] as isize + step) as usize]
        } else {
            [(i[0] as isize + step) as usize, 0]
        };
        let s_up = grid.space_index(up_idx);
        let u_c = self.cur[s];
        let u_up = self.cur[s_up];
        let (a, b) = (xi, xi + sign * h);
        // second derivative of the quadratic through (0,trace),(a,u_c),(b,u_up)
        let dnn = 2.0 * (trace / (a * b) - u_c / (a * (b - a)) + u_up / (b * (b - a)));
        if n == 1 {
            return SymMatrix::scalar(dnn);
        }
        let (i0, i1) = (i[0] as isize, i[1] as isize);
        let at = |a0: isize, a1: isize| -> Option<f64> {
            if a0 < 0 || a1 < 0 || a0 >= grid.nx()[0] as isize || a1 >= grid.nx()[1] as isize {
                return None;
            }
            let ss = grid.space_index([a0 as usize, a1 as usize]);
            grid.in_ball(ss).then(|| self.side_value(ss, side))
        };
        // tangential neighbors stay on this side for |grad psi| <= 1/2
        let d11 = match (at(i0 - 1, i1), at(i0 + 1, i1)) {
            (Some(l), Some(r)) => (l - 2.0 * u_c + r) / (h * h),
            _ => 0.0,
        };
        // cross term one-sided away from the interface
        let d12 = match (at(i0 + 1, i1 + step), at(i0 - 1, i1 + step), at(i0 + 1, i1), at(i0 - 1, i1)) {
            (Some(pu), Some(mu), Some(p0), Some(m0)) => sign * ((pu - mu) - (p0 - m0)) / (2.0 * h * h),
            _ => 0.0,
        };
        SymMatrix::new2(d11, d12, dnn)
    }

    /// Advances one march step; the new level is complete on return
    /// (PDE update, boundary data, slaves, far side).
    pub fn step(&mut self) -> Result<()> {
        if self.level >= self.steps_total {
            return Err(Error::Solver("march already at the top slice".into()));
        }
        let grid = self.grid.clone();
        let n = grid.n();
        let dt = self.dt;
        let t = self.t();
        let mut next = self.cur.clone();

        for s in grid.space_iter() {
            let (m, side) = match self.ctx.roles[s] {
                Role::Interior(side) => (self.interior_hessian(s, side), side),
                Role::Band(side) => (self.band_hessian(s, side), side),
                Role::Boundary | Role::Slave(_) | Role::Far => continue,
            };
            let op = self.problem.side_operator(side);
            let x = grid.x(s);
            let fv = (self.problem.side_source(side))(&x[..n], t);
            let v = self.cur[s] + dt * (op.evaluate(&m)? + fv);
            if !v.is_finite() {
                return Err(Error::Solver(format!(
                    "non-finite update at node {:?}, march level {}",
                    grid.x(s),
                    self.level + 1
                )));
            }
            next[s] = v;
        }

        self.level += 1;
        let t_next = t + dt;
        for s in grid.space_iter() {
            if grid.on_lateral(s) {
                let x = grid.x(s);
                next[s] = (self.problem.phi)(&x[..n], t_next);
            }
        }
        self.cur = next;
        self.build_ctx()?;
        self.fix_slaves();
        Ok(())
    }
}

/// Marches from the bottom slice to the top and returns the stored
/// space-time field (band nodes carrying both side values) with a report.
pub fn solve(problem: &TransmissionProblem) -> Result<(Field, SolveReport)> {
    let start = Instant::now();
    let grid = &problem.grid;
    let mut marcher = Marcher::new(problem)?;
    let m = marcher.steps_total / (grid.nt() - 1).max(1);

    let mut out = Field::constant(grid, 0.0);
    store_level(&mut out, &marcher, 0);
    let mut stored = 1;
    while marcher.level < marcher.steps_total {
        marcher.step()?;
        if marcher.level % m == 0 {
            store_level(&mut out, &marcher, stored);
            stored += 1;
        }
    }
    debug_assert_eq!(stored, grid.nt());

    let report = SolveReport {
        steps: marcher.steps_total,
        dt: marcher.dt,
        dt_stored: grid.dt(),
        cfl_ratio: marcher.dt / cfl_dt_raw(grid.n(), grid.h(), problem.lambda_up_max(), 1.0),
        max_interface_residual: marcher.max_residual(),
        sandwich_margin: None,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok((out, report))
}

fn store_level(field: &mut Field, marcher: &Marcher, k: usize) {
    let grid = marcher.grid().clone();
    for s in grid.space_iter() {
        field.set(s, k, marcher.values()[s]);
    }
    for s in grid.space_iter() {
        if let Role::Band(side) | Role::Slave(side) = marcher.ctx.roles[s] {
            let c = col_of(&grid, s);
            if let Some((st, trace)) = &marcher.ctx.stencils[c] {
                let other = side.opposite();
                let data = match other {
                    Side::Plus => [marcher.cur[st.plus[0].0], marcher.cur[st.plus[1].0]],
                    Side::Minus => [marcher.cur[st.minus[0].0], marcher.cur[st.minus[1].0]],
                };
                let xi = marcher.ctx.dist[s];
                field.set_ghost(s, k, other, st.extend(other, *trace, data, xi));
            }
        }
    }
}

/// Symbolic monotonicity audit of the n = 1 update weights: interior and
/// band stencils have nonnegative neighbor weights (the trace treated as an
/// input) and a nonnegative center weight under the CFL step; the trace
/// coefficient of every assembled column is strictly negative.
pub fn assert_monotone_weights(problem: &TransmissionProblem) -> Result<()> {
    let grid = &problem.grid;
    if grid.n() != 1 {
        return Err(Error::Solver(
            "the symbolic monotonicity audit covers n = 1 only (the n = 2 cross term is a documented caveat)".into(),
        ));
    }
    let h = grid.h();
    let lambda_up = problem.lambda_up_max();
    let dt_store = grid.dt();
    let dt_cfl = cfl_dt_raw(1, h, lambda_up, problem.theta);
    let mdiv = (dt_store / dt_cfl).ceil().max(1.0);
    let dt = dt_store / mdiv;

    // interior stencil: center 1 − 2Λdt/h², neighbors Λdt/h² ≥ 0
    if 1.0 - 2.0 * lambda_up * dt / (h * h) < -1e-12 {
        return Err(Error::Solver("interior center weight negative under CFL".into()));
    }
    // band stencil, worst offset xi = h/2: center 1 − 2Λdt/(xi·h)
    let xi = 0.5 * h;
    if 1.0 - 2.0 * lambda_up * dt / (xi * h) < -1e-12 {
        return Err(Error::Solver(
            "band center weight negative: CFL safety factor must be <= 1/2".into(),
        ));
    }
    let gamma = problem.gamma();
    let class = crate::interface::classify_nodes(grid, &gamma)?;
    let g = problem.g.clone();
    let ts = crate::interface::build_trace_system(&class, &gamma, &|x, t| g(x, t))?;
    for st in ts.iter() {
        if st.trace_coef >= 0.0 {
            return Err(Error::Solver(format!(
                "trace coefficient not negative at column {} level {}",
                st.col, st.k
            )));
        }
        if st.plus[0].1 <= 0.0 || st.minus[0].1 >= 0.0 {
            return Err(Error::Solver("data nodes on the wrong side of the foot".into()));
        }
    }
    Ok(())
}

/// Perron barrier pair for a flat-interface problem (ψ ≡ a): the two Pucci
/// Cauchy-Dirichlet solves under the ∓½‖g‖·|x_n − a| boundary shifts,
/// reassembled into a discrete subsolution u̲ and supersolution ū.
pub fn perron_barriers(problem: &TransmissionProblem) -> Result<(Field, Field)> {
    let a = match &problem.psi {
        PsiSpec::Family(PsiFamily::Flat { a }) => *a,
        _ => return Err(Error::Solver("perron_barriers needs a flat interface".into())),
    };
    let grid = &problem.grid;
    let n = grid.n();

    let gamma = problem.gamma();
    let mut g_sup: f64 = 0.0;
    for k in 0..grid.nt() {
        for c in 0..gamma.columns() {
            g_sup = g_sup.max((problem.g)(gamma.column_x(c), grid.t(k)).abs());
        }
    }
    let mut f_sup: f64 = 0.0;
    for k in 0..grid.nt() {
        let t = grid.t(k);
        for s in grid.space_iter() {
            let x = grid.x(s);
            f_sup = f_sup
                .max((problem.f_plus)(&x[..n], t).abs())
                .max((problem.f_minus)(&x[..n], t).abs());
        }
    }

    let lambda = problem.lambda_min();
    let lambda_up = problem.lambda_up_max();
    let kink = move |x: &[f64]| 0.5 * g_sup * (x[x.len() - 1] - a).abs();

    let phi = problem.phi.clone();
    let mut lower_pb = problem.clone();
    lower_pb.mode = InterfaceMode::NoInterface;
    lower_pb.f_plus_op = OperatorSpec::pucci_minus(lambda, lambda_up)?;
    lower_pb.f_plus = constant_fn(f_sup);
    lower_pb.phi = Arc::new(move |x: &[f64], t: f64| phi(x, t) - kink(x));
    let (psi_low, _) = solve(&lower_pb)?;

    let phi = problem.phi.clone();
    let mut upper_pb = problem.clone();
    upper_pb.mode = InterfaceMode::NoInterface;
    upper_pb.f_plus_op = OperatorSpec::pucci_plus(lambda, lambda_up)?;
    upper_pb.f_plus = constant_fn(-f_sup);
    upper_pb.phi = Arc::new(move |x: &[f64], t: f64| phi(x, t) + kink(x));
    let (psi_up, _) = solve(&upper_pb)?;

    let shift = |f: &Field, sign: f64| {
        let mut out = f.clone();
        for k in 0..grid.nt() {
            for s in grid.space_iter() {
                let x = grid.x(s);
                out.set(s, k, f.get(s, k) + sign * kink(&x[..n]));
            }
        }
        out
    };
    Ok((shift(&psi_low, 1.0), shift(&psi_up, -1.0)))
}

/// Solves and records the barrier sandwich margins in the report.
pub fn solve_with_barriers(problem: &TransmissionProblem) -> Result<(Field, SolveReport)> {
    let (u, mut report) = solve(problem)?;
    let (lower, upper) = perron_barriers(problem)?;
    let grid = &problem.grid;
    let mut above_lower = f64::INFINITY;
    let mut below_upper = f64::INFINITY;
    for k in 0..grid.nt() {
        for s in grid.space_iter() {
            above_lower = above_lower.min(u.get(s, k) - lower.get(s, k));
            below_upper = below_upper.min(upper.get(s, k) - u.get(s, k));
        }
    }
    report.sandwich_margin = Some((above_lower, below_upper));
    Ok((u, report))
}

/// Flat decomposition v = w + (g₀/2)|x_n − a|: w solves the zero-jump
/// problem under the shifted boundary data; the reassembled v is compared
/// against the direct interface solve.
pub struct DecompositionResult {
    pub v_decomposed: Field,
    pub w: Field,
    pub v_direct: Field,
    pub sup_diff: f64,
}

pub fn flat_decomposition_solve(
    base: &TransmissionProblem,
    a: f64,
    g0: f64,
) -> Result<DecompositionResult> {
    if a.abs() >= 0.5 {
        return Err(Error::Solver(format!("flat offset must satisfy |a| < 1/2, got {a}")));
    }
    let grid = &base.grid;
    let n = grid.n();

    let mut direct = base.clone();
    direct.psi = PsiSpec::Family(PsiFamily::Flat { a });
    direct.g = constant_jump(g0);
    direct.mode = InterfaceMode::Transmission;
    let (v_direct, _) = solve(&direct)?;

    let phi = base.phi.clone();
    let mut wproblem = direct.clone();
    wproblem.g = constant_jump(0.0);
    wproblem.phi =
        Arc::new(move |x: &[f64], t: f64| phi(x, t) - 0.5 * g0 * (x[x.len() - 1] - a).abs());
    // With a single operator the zero-jump problem is a plain Cauchy-Dirichlet
    // problem; solving it without the interface machinery makes the two
    // paths genuinely independent discretizations of the same solution.
    if base.f_plus_op.same_builtin(&base.f_minus_op) {
        wproblem.mode = InterfaceMode::NoInterface;
    }
    let (w, _) = solve(&wproblem)?;

    let mut v_dec = w.clone();
    for k in 0..grid.nt() {
        for s in grid.space_iter() {
            let x = grid.x(s);
            v_dec.set(s, k, w.get(s, k) + 0.5 * g0 * (x[n - 1] - a).abs());
        }
    }
    let sup_diff = v_direct.sup_diff(&v_dec);
    Ok(DecompositionResult { v_decomposed: v_dec, w, v_direct, sup_diff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn grid1(r: f64, h: f64, dt: f64) -> GridCylinder {
        GridCylinder::centered(1, r, h, dt).unwrap()
    }

    fn kink_fn(pp: f64, pm: f64, a: f64) -> DataFn {
        Arc::new(move |x: &[f64], _| {
            let xn = x[x.len() - 1] - a;
            if xn >= 0.0 {
                pp * xn
            } else {
                pm * xn
            }
        })
    }

    #[test]
    fn cfl_dt_values() {
        let g = grid1(1.0, 0.1, 0.5);
        assert!((cfl_dt_raw(1, 0.1, 1.0, 0.5) - 0.0025).abs() < 1e-15);
        assert!((cfl_dt_raw(1, 0.1, 2.0, 0.5) - 0.00125).abs() < 1e-15);
        assert!((cfl_dt_raw(2, 0.1, 1.0, 1.0) - 0.01 / 8.0).abs() < 1e-15);
        let dt = cfl_dt(&g, 1.0, 0.5).unwrap();
        let m = (1.0 / dt).round();
        assert!((m * dt - 1.0).abs() < 1e-12);
        assert!(dt <= 0.0025 + 1e-15);
        assert!(cfl_dt(&g, 1.0, 1.5).is_err());
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = grid1(1.0, 0.125, 0.25);
        let mut p = TransmissionProblem::new(g.clone());
        p.phi = constant_fn(5.0);
        let (u, rep) = solve(&p).unwrap();
        assert!(rep.cfl_ratio <= p.theta + 1e-12);
        for k in 0..g.nt() {
            for s in g.space_iter() {
                assert!((u.get(s, k) - 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn caloric_quadratic_preserved_one_step() {
        // u*(x,t) = |x|² + 2n·t solves u_t = Δu; the scheme reproduces it to
        // machine precision (space-quadratic, time-affine).
        for n in [1usize, 2] {
            let g = GridCylinder::centered(n, 1.0, 0.25, 0.0625).unwrap();
            let exact =
                move |x: &[f64], t: f64| x.iter().map(|v| v * v).sum::<f64>() + 2.0 * n as f64 * t;
            let mut p = TransmissionProblem::new(g.clone());
            p.phi = Arc::new(exact);
            let mut marcher = Marcher::new(&p).unwrap();
            marcher.step().unwrap();
            let t = marcher.t();
            for s in g.space_iter() {
                let x = g.x(s);
                let want = exact(&x[..n], t);
                assert!(
                    (marcher.values()[s] - want).abs() < 1e-12,
                    "n={n} x={x:?} got {} want {want}",
                    marcher.values()[s]
                );
            }
        }
    }

    #[test]
    fn pointwise_source_update() {
        // u ≡ 0, f⁺ ≡ 1, f⁻ ≡ 0: after one step the plus interior carries dt.
        let g = grid1(1.0, 0.25, 0.25);
        let mut p = TransmissionProblem::new(g.clone());
        p.f_plus = constant_fn(1.0);
        let mut marcher = Marcher::new(&p).unwrap();
        marcher.step().unwrap();
        let dt = marcher.dt;
        for s in g.space_iter() {
            let x = g.xn(s);
            if g.on_lateral(s) {
                continue;
            }
            if x > g.h() {
                assert!((marcher.values()[s] - dt).abs() < 1e-15, "x={x}");
            } else if x < -g.h() {
                assert!(marcher.values()[s].abs() < 1e-15, "x={x}");
            }
        }
    }

    #[test]
    fn kink_is_steady_state() {
        // p⁺x⁺ − p⁻x⁻ with jump p⁺ − p⁻ is a discrete fixed point.
        let g = grid1(1.0, 0.0625, 0.0625);
        let (pp, pm) = (1.0, -1.0);
        let mut p = TransmissionProblem::new(g.clone());
        p.phi = kink_fn(pp, pm, 0.0);
        p.g = constant_jump(pp - pm);
        let (u, rep) = solve(&p).unwrap();
        assert!(rep.max_interface_residual < 1e-10);
        for k in 0..g.nt() {
            for s in g.space_iter() {
                let x = g.xn(s);
                let want = if x >= 0.0 { pp * x } else { pm * x };
                assert!((u.get(s, k) - want).abs() < 1e-10, "x={x} k={k}");
            }
        }
        // band nodes carry both side values in the stored field
        assert!(u.ghost_count() > 0);
    }

    #[test]
    fn heat_separable_convergence() {
        // exact solution e^{−π²t/4}·cos(πx/2) of the heat equation on (−1,1);
        // err/h² stays bounded under refinement.
        let exact = |x: f64, t: f64| {
            (-std::f64::consts::PI.powi(2) * t / 4.0).exp() * (std::f64::consts::FRAC_PI_2 * x).cos()
        };
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        let mut errs = Vec::new();
        for &h in &hs {
            let g = grid1(1.0, h, 0.25);
            let mut p = TransmissionProblem::new(g.clone());
            p.mode = InterfaceMode::NoInterface;
            p.phi = Arc::new(move |x: &[f64], t: f64| exact(x[0], t));
            let (u, _) = solve(&p).unwrap();
            let ex = Field::from_fn(&g, |x, t| exact(x[0], t));
            errs.push(u.sup_diff(&ex));
        }
        let c: Vec<f64> = errs.iter().zip(hs).map(|(e, h)| e / (h * h)).collect();
        assert!(c[1] / c[0] < 2.0 && c[0] / c[1] < 2.0, "{errs:?} {c:?}");
        assert!(c[2] / c[1] < 2.0 && c[1] / c[2] < 2.0, "{errs:?} {c:?}");
    }

    #[test]
    fn pucci_ordering() {
        // identical data: the M⁻-governed solution ≤ the M⁺ one, nodewise.
        let g = grid1(1.0, 0.125, 0.25);
        let phi: DataFn = Arc::new(|x: &[f64], t: f64| (2.0 * x[0]).sin() + 0.3 * t);
        let mut lo = TransmissionProblem::new(g.clone());
        lo.f_plus_op = OperatorSpec::pucci_minus(0.5, 2.0).unwrap();
        lo.f_minus_op = OperatorSpec::pucci_minus(0.5, 2.0).unwrap();
        lo.phi = phi.clone();
        let mut hi = lo.clone();
        hi.f_plus_op = OperatorSpec::pucci_plus(0.5, 2.0).unwrap();
        hi.f_minus_op = OperatorSpec::pucci_plus(0.5, 2.0).unwrap();
        let (ulo, _) = solve(&lo).unwrap();
        let (uhi, _) = solve(&hi).unwrap();
        for k in 0..g.nt() {
            for s in g.space_iter() {
                assert!(ulo.get(s, k) <= uhi.get(s, k) + 1e-10);
            }
        }
    }

    #[test]
    fn deterministic_reruns_bitwise() {
        let g = grid1(1.0, 0.125, 0.125);
        let mut p = TransmissionProblem::new(g.clone());
        p.phi = Arc::new(|x: &[f64], t: f64| (x[0] + t).sin());
        p.g = constant_jump(0.7);
        let (a, _) = solve(&p).unwrap();
        let (b, _) = solve(&p).unwrap();
        for k in 0..g.nt() {
            for s in g.space_iter() {
                assert_eq!(a.get(s, k).to_bits(), b.get(s, k).to_bits());
            }
        }
    }

    #[test]
    fn monotone_weights_audit() {
        let g = grid1(1.0, 0.125, 0.125);
        let p = TransmissionProblem::new(g);
        assert_monotone_weights(&p).unwrap();
    }

    #[test]
    fn perron_degenerate_affine() {
        // f ≡ 0, g ≡ 0, affine φ: both barriers equal φ.
        let g = grid1(1.0, 0.25, 0.25);
        let mut p = TransmissionProblem::new(g.clone());
        p.phi = Arc::new(|x: &[f64], _| 2.0 * x[0] - 0.5);
        let (lo, hi) = perron_barriers(&p).unwrap();
        let aff = Field::from_fn(&g, |x, _| 2.0 * x[0] - 0.5);
        assert!(lo.sup_diff(&aff) < 1e-11);
        assert!(hi.sup_diff(&aff) < 1e-11);
    }

    #[test]
    fn perron_jump_spread() {
        // g ≡ g0 ≠ 0, φ ≡ 0, f ≡ 0: u̲ ≤ 0 ≤ ū with a gap of at least
        // |g0|·|x_n| near the interface.
        let g = grid1(1.0, 0.125, 0.25);
        let g0 = 1.5;
        let mut p = TransmissionProblem::new(g.clone());
        p.g = constant_jump(g0);
        let (lo, hi) = perron_barriers(&p).unwrap();
        for k in 1..g.nt() {
            for s in g.space_iter() {
                if g.on_lateral(s) {
                    continue;
                }
                assert!(lo.get(s, k) <= 1e-10);
                assert!(hi.get(s, k) >= -1e-10);
                // near Γ and away from the bottom the smoothing excess of the
                // two Pucci solves dominates the kink, so the sandwich opens
                // at least g0·|x_n| wide
                let xn = g.xn(s).abs();
                if xn <= 0.125 && g.t(k) >= -0.5 {
                    assert!(hi.get(s, k) - lo.get(s, k) >= g0 * xn - 1e-9, "gap at x={xn}");
                }
            }
        }
    }

    #[test]
    fn perron_sandwich_random_flat() {
        let mut rng = Rng::stream(0, 21);
        for case in 0..20u32 {
            let g = grid1(1.0, 0.125, 0.25);
            let (a, b, c) = (rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-0.5, 0.5));
            let g0 = rng.range(-1.0, 1.0);
            let f0 = rng.range(-0.5, 0.5);
            let mut p = TransmissionProblem::new(g.clone());
            p.phi = Arc::new(move |x: &[f64], t: f64| a * (2.0 * x[0] + t).sin() + b * x[0] + c);
            p.g = constant_jump(g0);
            p.f_plus = constant_fn(f0);
            p.f_minus = constant_fn(0.5 * f0);
            let (_, rep) = solve_with_barriers(&p).unwrap();
            let (lo_m, hi_m) = rep.sandwich_margin.unwrap();
            let tol = 5.0 * g.h();
            assert!(lo_m > -tol, "case {case}: u below lower barrier by {lo_m}");
            assert!(hi_m > -tol, "case {case}: u above upper barrier by {hi_m}");
        }
    }

    #[test]
    fn decomposition_trivial_cases() {
        let g = grid1(1.0, 0.125, 0.25);
        // φ = (g0/2)|x_n − a| makes w ≡ 0 and v the pure kink
        let (g0, a) = (2.0, 0.25);
        let mut base = TransmissionProblem::new(g.clone());
        base.phi = Arc::new(move |x: &[f64], _| 0.5 * g0 * (x[0] - a).abs());
        let dec = flat_decomposition_solve(&base, a, g0).unwrap();
        assert!(dec.w.sup_norm() < 1e-10, "w sup {}", dec.w.sup_norm());
        let kink = Field::from_fn(&g, |x, _| 0.5 * g0 * (x[0] - a).abs());
        assert!(dec.v_decomposed.sup_diff(&kink) < 1e-10);

        // g0 = 0 collapses the decomposition: v = w for any φ
        let mut base2 = TransmissionProblem::new(g.clone());
        base2.phi = Arc::new(|x: &[f64], t: f64| (3.0 * x[0]).cos() + t);
        let dec2 = flat_decomposition_solve(&base2, 0.0, 0.0).unwrap();
        assert!(dec2.v_decomposed.sup_diff(&dec2.w) < 1e-15);
    }

    #[test]
    fn decomposition_two_paths_agree() {
        let g = grid1(1.0, 1.0 / 32.0, 0.25);
        let mut base = TransmissionProblem::new(g.clone());
        base.phi = Arc::new(|x: &[f64], t: f64| (2.0 * x[0] + t).sin() * 0.8);
        let dec = flat_decomposition_solve(&base, 0.0, 1.0).unwrap();
        assert!(dec.sup_diff <= 5.0 * g.h(), "sup diff {}", dec.sup_diff);
    }

    #[test]
    fn one_phase_linear_profile() {
        // x_n on {x_n > 0} with zero boundary value on the graph is steady.
        let g = grid1(1.0, 0.125, 0.25);
        let mut p = TransmissionProblem::new(g.clone());
        p.mode = InterfaceMode::OnePhase { side: Side::Plus, boundary: constant_jump(0.0) };
        p.phi = Arc::new(|x: &[f64], _| x[0].max(0.0));
        let (u, _) = solve(&p).unwrap();
        for k in 0..g.nt() {
            for s in g.space_iter() {
                let x = g.xn(s);
                if x >= 0.0 {
                    assert!((u.get(s, k) - x).abs() < 1e-10, "x={x}");
                }
            }
        }
    }

    #[test]
    fn moving_interface_stays_tame() {
        // slowly moving interface: bounded output, tiny trace residual.
        let g = grid1(1.0, 0.0625, 0.0625);
        let mut p = TransmissionProblem::new(g.clone());
        p.psi = PsiSpec::Family(PsiFamily::Tilt { slope: 0.2 }); // ψ = 0.2 t for n = 1
        p.g = constant_jump(1.0);
        p.phi = Arc::new(|x: &[f64], t: f64| 0.5 * (x[0] - 0.2 * t).abs());
        let (u, rep) = solve(&p).unwrap();
        assert!(rep.max_interface_residual < 1e-9);
        assert!(u.sup_norm() < 2.0);
        assert!(u.all_finite());
    }

    #[test]
    fn discrete_comparison_on_ordered_pairs() {
        // sub/super data pairs on flat interfaces: boundary data ordered and
        // g_sub >= g_super imply u_h <= v_h + 5h nodewise.
        let mut rng = Rng::stream(0, 22);
        for case in 0..20u32 {
            let g = grid1(1.0, 0.125, 0.25);
            let (a1, b1) = (rng.range(-0.8, 0.8), rng.range(0.5, 2.5));
            let gap = rng.range(0.0, 0.6);
            let g_super = rng.range(-0.8, 0.8);
            let g_sub = g_super + rng.range(0.0, 0.8);
            let a = rng.range(-0.25, 0.25);

            let mut sub = TransmissionProblem::new(g.clone());
            sub.psi = PsiSpec::Family(PsiFamily::Flat { a });
            sub.phi = Arc::new(move |x: &[f64], t: f64| a1 * (b1 * x[0] + t).sin());
            sub.g = constant_jump(g_sub);
            let mut sup = sub.clone();
            sup.phi = Arc::new(move |x: &[f64], t: f64| a1 * (b1 * x[0] + t).sin() + gap);
            sup.g = constant_jump(g_super);

            let (u, _) = solve(&sub).unwrap();
            let (v, _) = solve(&sup).unwrap();
            let tol = 5.0 * g.h();
            for k in 0..g.nt() {
                for s in g.space_iter() {
                    assert!(
                        u.get(s, k) <= v.get(s, k) + tol,
                        "case {case}: ordering violated by {}",
                        u.get(s, k) - v.get(s, k)
                    );
                }
            }
        }
    }

    #[test]
    fn non_finite_update_is_reported() {
        // data at the overflow edge turns the first stencil evaluations into
        // infinities; the march must fail loudly instead of storing them
        let g = grid1(1.0, 0.25, 0.25);
        let mut p = TransmissionProblem::new(g);
        p.phi = Arc::new(|x: &[f64], _| 1e308 * (1.0 + x[0]));
        let err = solve(&p).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn tilted_kink_is_steady_state_n2() {
        // piecewise-linear profile across the tilted interface x2 = s·x1:
        // u = p⁺d⁺ − p⁻d⁻ in the signed distance d = (x2 − s·x1)/√(1+s²),
        // harmonic on both sides with normal-derivative jump p⁺ − p⁻.
        let slope: f64 = 0.25;
        let (pp, pm) = (1.5, 0.5);
        let w = (1.0 + slope * slope).sqrt();
        let g = GridCylinder::centered(2, 1.0, 0.0625, 0.125).unwrap();
        let mut p = TransmissionProblem::new(g.clone());
        p.psi = PsiSpec::Family(PsiFamily::Tilt { slope });
        p.g = constant_jump(pp - pm);
        p.phi = Arc::new(move |x: &[f64], _| {
            let d = (x[1] - slope * x[0]) / w;
            if d >= 0.0 {
                pp * d
            } else {
                pm * d
            }
        });
        let (u, rep) = solve(&p).unwrap();
        assert!(rep.max_interface_residual < 1e-9, "{}", rep.max_interface_residual);
        for k in 0..g.nt() {
            for s in g.space_iter() {
                let x = g.x(s);
                let d = (x[1] - slope * x[0]) / w;
                let want = if d >= 0.0 { pp * d } else { pm * d };
                assert!(
                    (u.get(s, k) - want).abs() < 1e-9,
                    "x={x:?} k={k}: got {} want {want}",
                    u.get(s, k)
                );
            }
        }
    }

    #[test]
    fn two_phase_n2_tilt_runs() {
        let g = GridCylinder::centered(2, 1.0, 0.125, 0.25).unwrap();
        let mut p = TransmissionProblem::new(g.clone());
        p.psi = PsiSpec::Family(PsiFamily::Tilt { slope: 0.25 });
        p.g = constant_jump(-0.5);
        p.phi = Arc::new(|x: &[f64], t: f64| (x[0] + x[1] + t).cos());
        let (u, rep) = solve(&p).unwrap();
        assert!(u.all_finite());
        assert!(rep.max_interface_residual < 1e-9);
    }
}
