//! Regularity metrology on solved fields: the ABP inequality with its
//! contact-set-restricted variant, the Harnack cylinder geometry and lower
//! bound, oscillation decay, dyadic Hölder exponents, the constrained
//! affine-fit iteration at the interface, and the interface-perturbation
//! stability experiment.

use std::sync::Arc;

use serde::Serialize;

use crate::envelope::{contact_set, default_contact_tol, parabolic_convex_envelope};
use crate::error::{Error, Result};
use crate::field::{Field, Side};
use crate::grid::GridCylinder;
use crate::interface::InterfaceGraph;
use crate::solver::{self, InterfaceMode, PsiSpec, TransmissionProblem};

/// Which part of the source enters a discrete L^{n+1} norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourcePart {
    Abs,
    /// The part that pushes solutions down under the marching orientation
    /// u_t = F(D²u) + f, namely max(−f, 0).
    DipDriving,
}

/// Discrete L^{n+1} norm (Σ |v|^{n+1} hⁿ dt)^{1/(n+1)} of the side-respecting
/// source part.
pub fn source_lnp1_norm(problem: &TransmissionProblem, part: SourcePart) -> f64 {
    let grid = &problem.grid;
    let n = grid.n();
    let gamma = problem.gamma();
    let cell = grid.h().powi(n as i32) * grid.dt();
    let p = (n + 1) as f64;
    let mut acc = 0.0;
    for k in 0..grid.nt() {
        let t = grid.t(k);
        for s in grid.space_iter() {
            let x = grid.x(s);
            let side = node_side(grid, &gamma, s, k, &problem.mode);
            let raw = (problem.side_source(side))(&x[..n], t);
            let v = match part {
                SourcePart::Abs => raw.abs(),
                SourcePart::DipDriving => (-raw).max(0.0),
            };
            acc += v.powf(p) * cell;
        }
    }
    acc.powf(1.0 / p)
}

fn node_side(grid: &GridCylinder, gamma: &InterfaceGraph, s: usize, k: usize, mode: &InterfaceMode) -> Side {
    if matches!(mode, InterfaceMode::NoInterface) {
        return Side::Plus;
    }
    let col = if grid.n() == 2 { grid.space_multi(s)[0] } else { 0 };
    if grid.xn(s) - gamma.psi(col, k) >= 0.0 {
        Side::Plus
    } else {
        Side::Minus
    }
}

/// sup of g₊ (or |g|) over the interface samples.
pub fn jump_sup(problem: &TransmissionProblem, positive_part: bool) -> f64 {
    let grid = &problem.grid;
    if matches!(problem.mode, InterfaceMode::NoInterface) {
        return 0.0;
    }
    let gamma = problem.gamma();
    let mut m: f64 = 0.0;
    for k in 0..grid.nt() {
        for c in 0..gamma.columns() {
            let v = (problem.g)(gamma.column_x(c), grid.t(k));
            m = m.max(if positive_part { v.max(0.0) } else { v.abs() });
        }
    }
    m
}

#[derive(Debug, Clone, Serialize)]
pub struct AbpReport {
    /// sup of u⁻ over the cylinder.
    pub lhs: f64,
    /// sup of u⁻ over the parabolic boundary.
    pub boundary_term: f64,
    pub max_g_plus: f64,
    /// L^{n+1} norm of the dip-driving source part (positive part of −f
    /// under the marching orientation u_t = F(D²u) + f).
    pub f_plus_norm: f64,
    /// ‖f₊‖_{L^{n+1}} restricted to the contact set of the convex envelope
    /// of −u⁻ on the doubled cylinder.
    pub f_plus_norm_contact: f64,
    /// (lhs − boundary term) / (max g₊ + ‖f₊‖); None when the denominator is
    /// below 1e-8 (vacuous).
    pub empirical_c: Option<f64>,
}

impl AbpReport {
    /// lhs ≤ boundary + C·(g + f) + slack.
    pub fn holds_with(&self, c: f64, slack: f64) -> bool {
        self.lhs <= self.boundary_term + c * (self.max_g_plus + self.f_plus_norm) + slack
    }
}

/// Measures both sides of the ABP inequality on a solved field, together
/// with the flat-interface contact-restricted source norm.
pub fn abp_verify(problem: &TransmissionProblem, u: &Field) -> Result<AbpReport> {
    let grid = &problem.grid;
    let n = grid.n();
    let mut lhs: f64 = 0.0;
    let mut boundary: f64 = 0.0;
    for k in 0..grid.nt() {
        for s in grid.space_iter() {
            let um = (-u.get(s, k)).max(0.0);
            lhs = lhs.max(um);
            if grid.on_parabolic_boundary(s, k) {
                boundary = boundary.max(um);
            }
        }
    }
    let max_g_plus = jump_sup(problem, true);
    let f_plus_norm = source_lnp1_norm(problem, SourcePart::DipDriving);

    // contact-restricted norm: envelope of −u⁻ extended by zero on the
    // doubled cylinder, contact read back on the original nodes
    let neg_part = u.map(|v| -(-v).max(0.0));
    let env = parabolic_convex_envelope(&neg_part, true)?;
    let big = env.grid().clone();
    let ext = crate::envelope::extend_by_zero(&neg_part, 2.0)?;
    let contact = contact_set(&ext, &env, default_contact_tol(grid));
    let gamma = problem.gamma();
    let cell = grid.h().powi(n as i32) * grid.dt();
    let p = (n + 1) as f64;
    let level_offset = big.nt() - grid.nt();
    let mut acc = 0.0;
    for k in 0..grid.nt() {
        let t = grid.t(k);
        for s in grid.space_iter() {
            let x = grid.x(s);
            let sb = big.nearest_slot(&x[..n])?;
            if !contact.contains(&big, sb, k + level_offset) {
                continue;
            }
            let side = node_side(grid, &gamma, s, k, &problem.mode);
            let v = (-(problem.side_source(side))(&x[..n], t)).max(0.0);
            acc += v.powf(p) * cell;
        }
    }
    let f_plus_norm_contact = acc.powf(1.0 / p);

    let denom = max_g_plus + f_plus_norm;
    let empirical_c = (denom > 1e-8).then(|| ((lhs - boundary).max(0.0)) / denom);
    Ok(AbpReport { lhs, boundary_term: boundary, max_g_plus, f_plus_norm, f_plus_norm_contact, empirical_c })
}

/// Spatial shape of a Harnack box.
#[derive(Debug, Clone, Copy, Serialize)]
pub enum BoxShape {
    /// Cube (−half, half)ⁿ around the center.
    Cube { half: f64 },
    /// Euclidean ball of the given radius.
    Ball { radius: f64 },
}

/// Space-time box: shape × (t_lo, t_hi].
#[derive(Debug, Clone, Serialize)]
pub struct SpaceTimeBox {
    pub center: Vec<f64>,
    pub shape: BoxShape,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl SpaceTimeBox {
    pub fn contains(&self, x: &[f64], t: f64) -> bool {
        if t <= self.t_lo - 1e-12 || t > self.t_hi + 1e-12 {
            return false;
        }
        match self.shape {
            BoxShape::Cube { half } => x
                .iter()
                .zip(&self.center)
                .all(|(a, c)| (a - c).abs() <= half + 1e-12),
            BoxShape::Ball { radius } => {
                let d2: f64 = x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 <= radius * radius + 1e-12
            }
        }
    }

    /// Farthest spatial distance from the box center to a corner.
    fn outer_radius(&self, n: usize) -> f64 {
        match self.shape {
            BoxShape::Cube { half } => half * (n as f64).sqrt(),
            BoxShape::Ball { radius } => radius,
        }
    }
}

/// The explicit cylinder geometry of the Harnack transfer: r = 1/(4√n),
/// σ = 1/(2(1+2r)), base point (2σr·e_n, −12σ²r²), the interior boxes
/// K̃¹, K̃², K̃³ and the host P̃, and the conclusion radius r₀ = σr.
#[derive(Debug, Clone, Serialize)]
pub struct HarnackGeometry {
    pub n: usize,
    pub r: f64,
    pub sigma: f64,
    pub r0: f64,
    pub xbar: Vec<f64>,
    pub tbar: f64,
    pub ttilde: f64,
    pub host: SpaceTimeBox,
    pub k1: SpaceTimeBox,
    pub k2: SpaceTimeBox,
    pub k3: SpaceTimeBox,
}

/// Instantiates the Harnack geometry; errors when the interface is too wide
/// for K̃¹ to sit inside Ω⁺ (needs ‖ψ‖∞ ≤ σr/2).
pub fn harnack_geometry(n: usize, gamma: Option<&InterfaceGraph>) -> Result<HarnackGeometry> {
    if n != 1 && n != 2 {
        return Err(Error::Estimate(format!("n must be 1 or 2, got {n}")));
    }
    let nf = n as f64;
    let r = 1.0 / (4.0 * nf.sqrt());
    let sigma = 1.0 / (2.0 * (1.0 + 2.0 * r));
    let r0 = sigma * r;
    if let Some(g) = gamma {
        if g.max_abs_psi() > 0.5 * sigma * r {
            return Err(Error::Estimate(format!(
                "interface too large for the Harnack geometry: sup|psi| = {} > sigma r/2 = {}",
                g.max_abs_psi(),
                0.5 * sigma * r
            )));
        }
    }
    let mut xbar = vec![0.0; n];
    xbar[n - 1] = 2.0 * sigma * r;
    let tbar = -12.0 * sigma * sigma * r * r;
    let ttilde = tbar + 2.0 * sigma * sigma * r * r;
    let s2r2 = sigma * sigma * r * r;
    let geometry = HarnackGeometry {
        n,
        r,
        sigma,
        r0,
        xbar: xbar.clone(),
        tbar,
        ttilde,
        host: SpaceTimeBox {
            center: xbar.clone(),
            shape: BoxShape::Ball { radius: sigma },
            t_lo: ttilde,
            t_hi: ttilde + sigma * sigma,
        },
        k1: SpaceTimeBox {
            center: xbar.clone(),
            shape: BoxShape::Cube { half: sigma * r },
            t_lo: ttilde,
            t_hi: ttilde + s2r2,
        },
        k2: SpaceTimeBox {
            center: xbar.clone(),
            shape: BoxShape::Cube { half: 3.0 * sigma * r },
            t_lo: ttilde + s2r2,
            t_hi: ttilde + 10.0 * s2r2,
        },
        k3: SpaceTimeBox {
            center: xbar,
            shape: BoxShape::Ball { radius: sigma * r / 4.0 },
            t_lo: tbar - 0.25 * s2r2,
            t_hi: tbar,
        },
    };
    debug_assert!(geometry.containments_hold());
    Ok(geometry)
}

impl HarnackGeometry {
    /// Box arithmetic for the drawn containments: K̃¹ ⊂ P̃, K̃² ⊂ P̃, and
    /// K̃³ ∩ K̃¹ = ∅ (they are disjoint in time).
    pub fn containments_hold(&self) -> bool {
        let inside = |inner: &SpaceTimeBox, outer: &SpaceTimeBox| {
            inner.outer_radius(self.n) <= outer.outer_radius(self.n) + 1e-12
                && inner.t_lo >= outer.t_lo - 1e-12
                && inner.t_hi <= outer.t_hi + 1e-12
        };
        let disjoint_time = self.k3.t_hi <= self.k1.t_lo + 1e-12;
        inside(&self.k1, &self.host)
            && inside(&self.k2, &self.host)
            && disjoint_time
            && self.r0 < 1.0 / (2.0 * (1.0 + 2.0 * (self.n as f64).sqrt()))
    }

    fn sup_in(&self, u: &Field, b: &SpaceTimeBox) -> Option<f64> {
        let g = u.grid();
        let mut m = f64::NEG_INFINITY;
        for k in 0..g.nt() {
            let t = g.t(k);
            for s in g.space_iter() {
                let x = g.x(s);
                if b.contains(&x[..g.n()], t) {
                    m = m.max(u.get(s, k));
                }
            }
        }
        m.is_finite().then_some(m)
    }

    fn inf_in(&self, u: &Field, b: &SpaceTimeBox) -> Option<f64> {
        let g = u.grid();
        let mut m = f64::INFINITY;
        for k in 0..g.nt() {
            let t = g.t(k);
            for s in g.space_iter() {
                let x = g.x(s);
                if b.contains(&x[..g.n()], t) {
                    m = m.min(u.get(s, k));
                }
            }
        }
        m.is_finite().then_some(m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HarnackReport {
    pub measured_c: f64,
    pub passed: bool,
    /// sup of u+1 over K̃³ and inf over K̃¹ — the interior transfer pair;
    /// None when the stored levels miss the box's time window.
    pub sup_k3: Option<f64>,
    pub inf_k1: Option<f64>,
    pub base_value: f64,
    pub smallness: f64,
}

/// Harness smallness threshold for ‖g‖∞ + ‖f‖_{L^{n+1}}.
pub const HARNACK_EPS0: f64 = 0.01;

/// Verifies the Harnack lower bound inf_{C_{r0}} u ≥ −1 + c on a normalized
/// run: requires ‖u‖∞ ≤ 1, u(x̄, t̄) ≥ 0, and data below ε₀ = 0.01.
pub fn harnack_verify(
    problem: &TransmissionProblem,
    u: &Field,
    geometry: &HarnackGeometry,
) -> Result<HarnackReport> {
    let grid = &problem.grid;
    let sup = u.sup_norm();
    if sup > 1.0 + 1e-9 {
        return Err(Error::Estimate(format!("needs ‖u‖∞ ≤ 1, got {sup}")));
    }
    let k_bar = grid.nearest_level(geometry.tbar);
    let base = u.interpolate_space(&geometry.xbar, k_bar)?;
    if base < -1e-9 {
        return Err(Error::Estimate(format!("needs u(x̄,t̄) ≥ 0, got {base}")));
    }
    let smallness = jump_sup(problem, false) + source_lnp1_norm(problem, SourcePart::Abs);
    if smallness > HARNACK_EPS0 + 1e-12 {
        return Err(Error::Estimate(format!(
            "data too large: ‖g‖∞ + ‖f‖_{{n+1}} = {smallness} > {HARNACK_EPS0}"
        )));
    }
    let origin = vec![0.0; grid.n()];
    let inf_small = u.min_in(&origin, 0.0, geometry.r0);
    let measured_c = 1.0 + inf_small;
    let shifted = u.map(|v| v + 1.0);
    Ok(HarnackReport {
        measured_c,
        passed: measured_c + 5.0 * grid.h() > 0.0,
        sup_k3: geometry.sup_in(&shifted, &geometry.k3),
        inf_k1: geometry.inf_in(&shifted, &geometry.k1),
        base_value: base,
        smallness,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OscillationReport {
    pub osc_small: f64,
    pub osc_full: f64,
    pub correction: f64,
    /// (osc_{C_{r0}} − correction)/osc_{C_1}; None when the run is constant.
    pub mu_est: Option<f64>,
    pub vacuous: bool,
}

/// Oscillation-decay ratio over C_{r0} against the full cylinder, with the
/// measured data correction c_factor·(‖g‖∞ + ‖f‖_{n+1}) subtracted.
pub fn oscillation_decay(
    problem: &TransmissionProblem,
    u: &Field,
    r0: f64,
    c_factor: f64,
) -> OscillationReport {
    let grid = &problem.grid;
    let origin = vec![0.0; grid.n()];
    let osc_full = u.oscillation();
    let osc_small = u.oscillation_in(&origin, 0.0, r0);
    let correction = c_factor * (jump_sup(problem, false) + source_lnp1_norm(problem, SourcePart::Abs));
    if osc_full < 1e-10 {
        return OscillationReport { osc_small, osc_full, correction, mu_est: None, vacuous: true };
    }
    OscillationReport {
        osc_small,
        osc_full,
        correction,
        mu_est: Some((osc_small - correction) / osc_full),
        vacuous: false,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HolderReport {
    /// (scale, oscillation) per dyadic level, coarsest first.
    pub levels: Vec<(f64, f64)>,
    /// Largest exponent with geometric decay anchored at the full cylinder:
    /// min_j log2(osc_0/osc_j)/j.
    pub fitted_alpha: Option<f64>,
    /// sup_j osc_j / (scale_j^fitted · data_norm); None when vacuous.
    pub constant: Option<f64>,
}

/// Fits the dyadic Hölder exponent of the oscillation sequence
/// osc_{C_{2^{−j}}} down to scales resolved by 8h.
pub fn holder_estimate(u: &Field, data_norm: f64) -> HolderReport {
    let grid = u.grid();
    let origin = vec![0.0; grid.n()];
    let mut levels = Vec::new();
    let mut scale = grid.r();
    while scale >= 8.0 * grid.h() - 1e-12 {
        levels.push((scale, u.oscillation_in(&origin, 0.0, scale)));
        scale *= 0.5;
    }
    if levels.len() < 2 || levels[0].1 < 1e-10 {
        return HolderReport { levels, fitted_alpha: None, constant: None };
    }
    let osc0 = levels[0].1;
    let mut alpha = f64::INFINITY;
    for (j, &(_, osc)) in levels.iter().enumerate().skip(1) {
        let a = if osc < 1e-14 { 3.0 } else { (osc0 / osc).log2() / j as f64 };
        alpha = alpha.min(a.min(3.0));
    }
    let mut constant: f64 = 0.0;
    for &(sc, osc) in &levels {
        constant = constant.max(osc / (sc.powf(alpha) * data_norm.max(1e-14)));
    }
    HolderReport { levels, fitted_alpha: Some(alpha), constant: Some(constant) }
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineFitLevel {
    pub k: usize,
    pub scale: f64,
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    pub b: f64,
    pub g_hat: f64,
    /// sup |u± − l±| over the level's nodes.
    pub residual: f64,
    pub nodes_plus: usize,
    pub nodes_minus: usize,
    /// Scale resolved by 8h and the fit well-posed.
    pub usable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct AffineFitSequence {
    pub rho: f64,
    pub levels: Vec<AffineFitLevel>,
    /// Least-squares slope of ln residual against ln scale over usable
    /// levels (≈ 1 + α).
    pub loglog_slope: Option<f64>,
    pub fitted_alpha: Option<f64>,
    /// ĝ at the deepest usable level.
    pub g_hat: Option<f64>,
    pub g_reference: f64,
}

/// Constrained least-squares affine fits of u over Ω±_{ρᵏ}: shared offset b
/// and A⁺ − A⁻ = ĝ·e_n enforced exactly, ĝ free; the pointwise foot of the
/// interface must pass through the origin.
pub fn c1alpha_fit(
    problem: &TransmissionProblem,
    u: &Field,
    g0: f64,
    rho: f64,
    k_levels: usize,
) -> Result<AffineFitSequence> {
    let grid = &problem.grid;
    let n = grid.n();
    let gamma = problem.gamma();
    let k_top = grid.nt() - 1;
    let c0 = if n == 2 { (gamma.columns() - 1) / 2 } else { 0 };
    let psi0 = gamma.psi(c0, k_top);
    if psi0.abs() > 1e-9 {
        return Err(Error::Estimate(format!("needs psi(0,0) = 0, got {psi0}")));
    }

    let mut levels = Vec::new();
    for k in 1..=k_levels {
        let scale = rho.powi(k as i32);
        // gather nodes of C_{rho^k} with their side
        let mut rows: Vec<([f64; 4], f64)> = Vec::new(); // basis (x1.., xn, 1, xn·[plus]), value
        let (mut np, mut nm) = (0usize, 0usize);
        for kk in 0..grid.nt() {
            let t = grid.t(kk);
            if t < -scale * scale - 1e-12 || t > 1e-12 {
                continue;
            }
            for s in grid.space_iter() {
                let x = grid.x(s);
                let d2: f64 = (0..n).map(|j| x[j] * x[j]).sum();
                if d2 > scale * scale * (1.0 + 1e-12) {
                    continue;
                }
                let col = if n == 2 { grid.space_multi(s)[0] } else { 0 };
                let plus = x[n - 1] - gamma.psi(col, kk) >= 0.0;
                if plus {
                    np += 1;
                } else {
                    nm += 1;
                }
                let mut basis = [0.0f64; 4];
                basis[..n].copy_from_slice(&x[..n]);
                basis[n] = 1.0;
                basis[n + 1] = if plus { x[n - 1] } else { 0.0 };
                rows.push((basis, u.get(s, kk)));
            }
        }
        let dim = n + 2;
        let solution = (np > 0 && nm > 0 && rows.len() > dim)
            .then(|| solve_normal_equations(&rows, dim))
            .flatten();
        let level = match solution {
            Some(beta) => {
                let a_minus: Vec<f64> = beta[..n].to_vec();
                let g_hat = beta[n + 1];
                let mut a_plus = a_minus.clone();
                a_plus[n - 1] += g_hat;
                let b = beta[n];
                let mut residual: f64 = 0.0;
                for (basis, val) in &rows {
                    let pred: f64 = basis.iter().zip(&beta).map(|(p, q)| p * q).sum();
                    residual = residual.max((val - pred).abs());
                }
                AffineFitLevel {
                    k,
                    scale,
                    a_plus,
                    a_minus,
                    b,
                    g_hat,
                    residual,
                    nodes_plus: np,
                    nodes_minus: nm,
                    usable: scale >= 8.0 * grid.h() - 1e-12,
                }
            }
            None => AffineFitLevel {
                k,
                scale,
                a_plus: vec![0.0; n],
                a_minus: vec![0.0; n],
                b: 0.0,
                g_hat: 0.0,
                residual: f64::NAN,
                nodes_plus: np,
                nodes_minus: nm,
                usable: false,
            },
        };
        levels.push(level);
    }

    let usable: Vec<&AffineFitLevel> =
        levels.iter().filter(|l| l.usable && l.residual.is_finite()).collect();
    if usable.len() < 2 {
        return Err(Error::Estimate(format!(
            "fewer than 2 usable levels (got {} of {k_levels})",
            usable.len()
        )));
    }
    // least squares ln(residual) ~ slope·ln(scale) + const; exact fits
    // (vanishing residuals) leave the slope undefined
    let fit: Vec<&&AffineFitLevel> = usable.iter().filter(|l| l.residual > 1e-14).collect();
    let loglog_slope = (fit.len() >= 2).then(|| {
        let m = fit.len() as f64;
        let sx: f64 = fit.iter().map(|l| l.scale.ln()).sum();
        let sy: f64 = fit.iter().map(|l| l.residual.ln()).sum();
        let sxx: f64 = fit.iter().map(|l| l.scale.ln().powi(2)).sum();
        let sxy: f64 = fit.iter().map(|l| l.scale.ln() * l.residual.ln()).sum();
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    });
    let g_hat = usable.last().map(|l| l.g_hat);
    Ok(AffineFitSequence {
        rho,
        levels,
        loglog_slope,
        fitted_alpha: loglog_slope.map(|s| s - 1.0),
        g_hat,
        g_reference: g0,
    })
}

/// Normal equations for the small constrained LS system; None when the
/// system is numerically singular.
fn solve_normal_equations(rows: &[([f64; 4], f64)], dim: usize) -> Option<Vec<f64>> {
    let mut ata = vec![vec![0.0f64; dim]; dim];
    let mut atb = vec![0.0f64; dim];
    for (basis, val) in rows {
        for i in 0..dim {
            atb[i] += basis[i] * val;
            for j in 0..dim {
                ata[i][j] += basis[i] * basis[j];
            }
        }
    }
    // Gaussian elimination with partial pivoting
    for col in 0..dim {
        let mut piv = col;
        for r in col + 1..dim {
            if ata[r][col].abs() > ata[piv][col].abs() {
                piv = r;
            }
        }
        if ata[piv][col].abs() < 1e-12 {
            return None;
        }
        ata.swap(col, piv);
        atb.swap(col, piv);
        for r in col + 1..dim {
            let f = ata[r][col] / ata[col][col];
            #[allow(clippy::needless_range_loop)]
            for c in col..dim {
                ata[r][c] -= f * ata[col][c];
            }
            atb[r] -= f * atb[col];
        }
    }
    let mut beta = vec![0.0f64; dim];
    for r in (0..dim).rev() {
        let mut acc = atb[r];
        for c in r + 1..dim {
            acc -= ata[r][c] * beta[c];
        }
        beta[r] = acc / ata[r][r];
    }
    Some(beta)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub delta: f64,
    /// Measured ‖ψ_δ‖_{C^{1,α}} of the scaled profile.
    pub psi_norm: f64,
    pub vbar_vlow_sup: f64,
    /// ‖u − v‖ over C_{1/2} with v the glued flat pair.
    pub u_v_sup_half: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    /// Log-log slope of ‖u − v‖ against δ over the positive rows.
    pub tau_estimate: Option<f64>,
}

/// For each δ: solves the curved problem with ‖ψ‖_{C^{1,α}} = δ and the two
/// flat problems at a = ±δ under the same data, glues v = v̲·χ_{Ω⁺} +
/// v̄·χ_{Ω̄⁻}, and measures ‖v̄ − v̲‖∞ and ‖u − v‖_{L∞(C_{1/2})}.
pub fn stability_experiment(
    base: &TransmissionProblem,
    profile: &InterfaceGraph,
    g0: f64,
    deltas: &[f64],
) -> Result<StabilityReport> {
    let grid = &base.grid;
    let n = grid.n();
    let profile_norm = profile.c1alpha_norm();
    if profile_norm <= 0.0 {
        return Err(Error::Estimate("stability profile must be non-flat".into()));
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        if !(0.0..0.25 + 1e-12).contains(&delta) {
            return Err(Error::Estimate(format!("delta must lie in [0, 1/4), got {delta}")));
        }
        let scale = delta / profile_norm;

        let mut curved = base.clone();
        curved.g = solver::constant_jump(g0);
        let prof = profile.clone();
        curved.psi = PsiSpec::Fns {
            psi: Arc::new(move |xp: f64, t: f64| {
                scale * sample_graph(&prof, xp, t)
            }),
            grad: {
                let prof = profile.clone();
                Arc::new(move |xp: f64, t: f64| scale * sample_graph_grad(&prof, xp, t))
            },
        };
        let (u, _) = solver::solve(&curved)?;
        let gamma_d = curved.gamma();

        let mut flat_hi = curved.clone();
        flat_hi.psi = PsiSpec::Family(crate::interface::PsiFamily::Flat { a: delta });
        let (vbar, _) = solver::solve(&flat_hi)?;
        let mut flat_lo = curved.clone();
        flat_lo.psi = PsiSpec::Family(crate::interface::PsiFamily::Flat { a: -delta });
        let (vlow, _) = solver::solve(&flat_lo)?;

        let mut vbar_vlow: f64 = 0.0;
        let mut uv_half: f64 = 0.0;
        for k in 0..grid.nt() {
            let t = grid.t(k);
            for s in grid.space_iter() {
                let x = grid.x(s);
                vbar_vlow = vbar_vlow.max((vbar.get(s, k) - vlow.get(s, k)).abs());
                let col = if n == 2 { grid.space_multi(s)[0] } else { 0 };
                let on_plus = grid.xn(s) - gamma_d.psi(col, k) > 0.0;
                let v = if on_plus { vlow.get(s, k) } else { vbar.get(s, k) };
                let d2: f64 = (0..n).map(|j| x[j] * x[j]).sum();
                if d2 <= 0.25 + 1e-12 && t >= -0.25 - 1e-12 {
                    uv_half = uv_half.max((u.get(s, k) - v).abs());
                }
            }
        }
        rows.push(StabilityRow {
            delta,
            psi_norm: gamma_d.c1alpha_norm(),
            vbar_vlow_sup: vbar_vlow,
            u_v_sup_half: uv_half,
        });
    }

    let pos: Vec<&StabilityRow> =
        rows.iter().filter(|r| r.delta > 0.0 && r.u_v_sup_half > 1e-14).collect();
    let tau_estimate = (pos.len() >= 2).then(|| {
        let m = pos.len() as f64;
        let sx: f64 = pos.iter().map(|r| r.delta.ln()).sum();
        let sy: f64 = pos.iter().map(|r| r.u_v_sup_half.ln()).sum();
        let sxx: f64 = pos.iter().map(|r| r.delta.ln().powi(2)).sum();
        let sxy: f64 = pos.iter().map(|r| r.delta.ln() * r.u_v_sup_half.ln()).sum();
        (m * sxy - sx * sy) / (m * sxx - sx * sx)
    });
    Ok(StabilityReport { rows, tau_estimate })
}

/// Nearest-sample evaluation of a stored interface graph.
fn sample_graph(gamma: &InterfaceGraph, xp: f64, t: f64) -> f64 {
    let g = gamma.grid();
    let c = if g.n() == 2 {
        let f = (xp - (g.center_x()[0] - g.r())) / g.h();
        (f.round().max(0.0) as usize).min(gamma.columns() - 1)
    } else {
        0
    };
    gamma.psi(c, g.nearest_level(t))
}

fn sample_graph_grad(gamma: &InterfaceGraph, xp: f64, t: f64) -> f64 {
    let g = gamma.grid();
    let c = if g.n() == 2 {
        let f = (xp - (g.center_x()[0] - g.r())) / g.h();
        (f.round().max(0.0) as usize).min(gamma.columns() - 1)
    } else {
        0
    };
    gamma.grad_psi(c, g.nearest_level(t))
}
