//! Dini moduli and their integrals, interior C^{1,Dini} graph domains, the
//! dyadic recursion A_k = max{ω(ρᵏ), ρ^{α₀}A_{k−1}} with its 4c₀ summability
//! bound, and numerical verification of the Hopf lower bound
//! u(rl, 0) ≥ c·l_n·u(e_n/2, −3/4)·r on one-phase runs.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, Side};
use crate::grid::GridCylinder;
use crate::interface::PsiFamily;
use crate::operators::OperatorSpec;
use crate::solver::{constant_jump, InterfaceMode, PsiSpec, TransmissionProblem};

/// Built-in boundary-flatness moduli.
#[derive(Debug, Clone)]
pub enum DiniModulus {
    /// ω(r) = κ·r^α.
    Power { kappa: f64, alpha: f64 },
    /// ω(r) = κ/(1 + |log r|)².
    LogSquared { kappa: f64 },
    Zero,
}

impl DiniModulus {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            DiniModulus::Power { kappa, alpha } => kappa * r.powf(alpha),
            DiniModulus::LogSquared { kappa } => {
                if r <= 0.0 {
                    0.0
                } else {
                    let l = 1.0 + r.ln().abs();
                    kappa / (l * l)
                }
            }
            DiniModulus::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DiniReport {
    /// ∫ ω(r)/r dr over [~0, r1], dyadic-octave quadrature with a geometric
    /// tail estimate.
    pub integral: f64,
    pub is_dini: bool,
    pub monotone: bool,
    /// Per-octave contributions, coarsest first.
    pub octaves: Vec<f64>,
}

/// Quadrature of ω(r)/r over [r1·2⁻⁴⁰, r1] by dyadic octaves with Richardson
/// control, a 10⁴-point monotonicity sample, and divergence detection from
/// the octave decay (harmonic-like tails are flagged non-Dini).
pub fn dini_check(omega: &dyn Fn(f64) -> f64, r1: f64) -> Result<DiniReport> {
    if !(r1 > 0.0) {
        return Err(Error::Hopf(format!("r1 must be positive, got {r1}")));
    }
    const OCTAVES: usize = 40;
    let mut octaves = Vec::with_capacity(OCTAVES);
    for j in 0..OCTAVES {
        let hi = r1 * 0.5f64.powi(j as i32);
        let lo = 0.5 * hi;
        octaves.push(adaptive_simpson(&|r| omega(r) / r, lo, hi));
    }
    let partial: f64 = octaves.iter().sum();

    // monotone on a 10^4-point sample
    let mut monotone = true;
    let mut prev = omega(1e-12);
    for i in 1..=10_000 {
        let r = 1e-12 + (r1 - 1e-12) * i as f64 / 10_000.0;
        let w = omega(r);
        if w < prev - 1e-12 * (1.0 + prev.abs()) {
            monotone = false;
            break;
        }
        prev = w;
    }

    // decay classification over the last octaves
    let tail: Vec<f64> = octaves[OCTAVES - 12..].to_vec();
    let total_scale = partial.abs().max(1e-300);
    let negligible = tail.iter().all(|c| *c <= 1e-14 * total_scale + 1e-300);
    let (is_dini, tail_estimate) = if negligible {
        (true, 0.0)
    } else {
        let mut ratios = Vec::new();
        for w in tail.windows(2) {
            if w[0] > 0.0 {
                ratios.push(w[1] / w[0]);
            }
        }
        let rho = ratios.iter().copied().fold(0.0f64, f64::max);
        if rho < 0.95 {
            let last = *octaves.last().unwrap();
            (true, last * rho / (1.0 - rho))
        } else {
            // power-law fit c_j ~ j^{−p}: convergent iff p > 1
            let j0 = (OCTAVES - 12) as f64;
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, w) in tail.windows(2).enumerate() {
                if w[0] > 0.0 && w[1] > 0.0 {
                    let j = j0 + i as f64 + 1.0;
                    num += (w[0] / w[1]).ln();
                    den += ((j + 1.0) / j).ln();
                }
            }
            let p = if den > 0.0 { num / den } else { 0.0 };
            if p > 1.05 {
                // tail of Σ c_j with c_j ~ C·j^{−p}
                let last = *octaves.last().unwrap();
                (true, last * OCTAVES as f64 / (p - 1.0))
            } else {
                (false, 0.0)
            }
        }
    };

    Ok(DiniReport {
        integral: partial + tail_estimate,
        is_dini: is_dini && monotone,
        monotone,
        octaves,
    })
}

/// Simpson with interval-halving Richardson control.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
        let h = (hi - lo) / panels as f64;
        let mut acc = 0.0;
        for i in 0..panels {
            let a = lo + i as f64 * h;
            acc += (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h)) * h / 6.0;
        }
        acc
    }
    let mut panels = 8;
    let mut prev = simpson(f, lo, hi, panels);
    for _ in 0..8 {
        panels *= 2;
        let cur = simpson(f, lo, hi, panels);
        if (cur - prev).abs() <= 1e-12 * (1.0 + cur.abs()) {
            return cur;
        }
        prev = cur;
    }
    prev
}

#[derive(Debug, Clone, Serialize)]
pub struct HopfRecursion {
    pub rho: f64,
    pub alpha0: f64,
    pub c0: f64,
    pub a_seq: Vec<f64>,
    /// Accumulated slope corrections a_k = Σ_{j≤k} C̃·A_j with C̃ = 1.
    pub slope_seq: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub sum_bound_ok: bool,
}

/// The dyadic recursion A₀ = c₀, A_k = max{ω(ρᵏ), ρ^{α₀}·A_{k−1}}, run to
/// level K under the proviso (1 − ρ^{α₀})(1 − ρ) ≥ 1/2 and the normalization
/// ω(1) ≤ c₀, ∫₀¹ ω/r ≤ c₀; checks Σ A_k ≤ 4c₀.
pub fn hopf_recursion(
    omega: &DiniModulus,
    rho: f64,
    alpha0: f64,
    c0: f64,
    levels: usize,
) -> Result<HopfRecursion> {
    if !(rho > 0.0 && rho < 1.0 && alpha0 > 0.0 && c0 > 0.0) {
        return Err(Error::Hopf("need 0 < rho < 1, alpha0 > 0, c0 > 0".into()));
    }
    let proviso = (1.0 - rho.powf(alpha0)) * (1.0 - rho);
    if proviso < 0.5 {
        return Err(Error::Hopf(format!(
            "proviso violated: (1 - rho^alpha0)(1 - rho) = {proviso} < 1/2"
        )));
    }
    if omega.eval(1.0) > c0 + 1e-12 {
        return Err(Error::Hopf(format!("normalization omega(1) = {} > c0 = {c0}", omega.eval(1.0))));
    }
    let dini = dini_check(&|r| omega.eval(r), 1.0)?;
    if !dini.is_dini || dini.integral > c0 + 1e-9 {
        return Err(Error::Hopf(format!(
            "normalization needs a Dini modulus with integral <= c0 (got {}, dini = {})",
            dini.integral, dini.is_dini
        )));
    }

    let mut a_seq = Vec::with_capacity(levels + 1);
    let mut slope_seq = Vec::with_capacity(levels + 1);
    let mut partial_sums = Vec::with_capacity(levels + 1);
    let mut prev = c0;
    let mut sum = 0.0;
    let mut slope = 0.0;
    for k in 0..=levels {
        let a = if k == 0 { c0 } else { omega.eval(rho.powi(k as i32)).max(rho.powf(alpha0) * prev) };
        sum += a;
        slope += a;
        a_seq.push(a);
        slope_seq.push(slope);
        partial_sums.push(sum);
        prev = a;
    }
    Ok(HopfRecursion {
        rho,
        alpha0,
        c0,
        a_seq,
        slope_seq,
        partial_sums,
        sum_bound_ok: sum <= 4.0 * c0 + 1e-12,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HopfRatio {
    pub direction: Vec<f64>,
    pub r: f64,
    pub ratio: f64,
    /// Probe radius at least 8h, so (rl, 0) is grid-resolved.
    pub well_resolved: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HopfReport {
    pub reference_value: f64,
    pub ratios: Vec<HopfRatio>,
    pub measured_c: f64,
    pub passed: bool,
}

/// Measures u(rl, 0) / (l_n · u(e_n/2, −3/4) · r) over the given directions
/// (l_n > 0) and radii; `measured_c` is the smallest ratio and the pass flag
/// allows a 5h slack. Radii below 8h are evaluated by interpolation and
/// flagged as under-resolved.
pub fn hopf_verify(u: &Field, directions: &[Vec<f64>], r_values: &[f64]) -> Result<HopfReport> {
    let g = u.grid();
    let n = g.n();
    let h = g.h();
    let top = g.nt() - 1;

    let mut ref_pt = vec![0.0; n];
    ref_pt[n - 1] = 0.5;
    let k_ref = g.nearest_level(-0.75);
    let u_ref = u.interpolate_space(&ref_pt, k_ref)?;
    if u_ref <= 0.0 {
        return Err(Error::Hopf(format!(
            "degenerate normalization: u(e_n/2, -3/4) = {u_ref} <= 0"
        )));
    }

    let mut ratios = Vec::new();
    let mut measured_c = f64::INFINITY;
    for l in directions {
        if l.len() != n {
            return Err(Error::Hopf(format!("direction {l:?} has wrong dimension")));
        }
        let ln = l[n - 1];
        if ln <= 0.0 {
            return Err(Error::Hopf(format!("direction {l:?} needs l_n > 0")));
        }
        for &r in r_values {
            let probe: Vec<f64> = l.iter().map(|c| c * r).collect();
            let val = u.interpolate_space(&probe, top)?;
            let ratio = val / (ln * u_ref * r);
            measured_c = measured_c.min(ratio);
            ratios.push(HopfRatio {
                direction: l.clone(),
                r,
                ratio,
                well_resolved: r >= 8.0 * h,
            });
        }
    }
    Ok(HopfReport {
        reference_value: u_ref,
        ratios,
        measured_c,
        passed: measured_c + 5.0 * h > 0.0,
    })
}

/// One-phase problem over Ω = {x_n > ψ(x')} mirroring the barrier setup:
/// Pucci-minus operator, f ≡ 0, zero Dirichlet data on the graph, and
/// φ = min(1, 2·(x_n − ψ(x'))₊) elsewhere on ∂_p.
pub fn hopf_problem(
    grid: GridCylinder,
    family: PsiFamily,
    lambda: f64,
    lambda_up: f64,
) -> Result<TransmissionProblem> {
    let n = grid.n();
    let fam = family.clone();
    let mut p = TransmissionProblem::new(grid);
    p.f_plus_op = OperatorSpec::pucci_minus(lambda, lambda_up)?;
    p.f_minus_op = p.f_plus_op.clone();
    p.psi = PsiSpec::Family(family);
    p.mode = InterfaceMode::OnePhase { side: Side::Plus, boundary: constant_jump(0.0) };
    p.phi = Arc::new(move |x: &[f64], _t: f64| {
        let xp = if n == 2 { x[0] } else { 0.0 };
        let d = x[n - 1] - fam.eval(n, xp, 0.0);
        (2.0 * d.max(0.0)).min(1.0)
    });
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dini_zero_modulus() {
        let rep = dini_check(&|_| 0.0, 1.0).unwrap();
        assert_eq!(rep.integral, 0.0);
        assert!(rep.is_dini);
    }

    #[test]
    fn dini_power_quarter() {
        // ∫₀¹ (r/4)/r dr = 1/4
        let m = DiniModulus::Power { kappa: 0.25, alpha: 1.0 };
        let rep = dini_check(&|r| m.eval(r), 1.0).unwrap();
        assert!(rep.is_dini);
        assert!((rep.integral - 0.25).abs() < 1e-9, "{}", rep.integral);
    }

    #[test]
    fn dini_power_half_exponent() {
        // ∫₀¹ κ r^{1/2 − 1} dr = 2κ
        let m = DiniModulus::Power { kappa: 0.1, alpha: 0.5 };
        let rep = dini_check(&|r| m.eval(r), 1.0).unwrap();
        assert!(rep.is_dini);
        assert!((rep.integral - 0.2).abs() < 1e-8, "{}", rep.integral);
    }

    #[test]
    fn dini_log_squared_converges() {
        // ∫₀^{r1} κ/(r(1+|log r|)²) dr = κ/(1+|log r1|)
        let m = DiniModulus::LogSquared { kappa: 1.0 };
        let rep = dini_check(&|r| m.eval(r), 0.5).unwrap();
        assert!(rep.is_dini);
        let exact = 1.0 / (1.0 + 0.5f64.ln().abs());
        assert!((rep.integral - exact).abs() < 5e-3, "{} vs {exact}", rep.integral);
    }

    #[test]
    fn dini_harmonic_diverges() {
        // ω(r) = 1/|log r| on (0, 1/2]: octave masses decay like 1/j.
        let rep =
            dini_check(&|r: f64| if r > 0.0 && r < 1.0 { 1.0 / r.ln().abs() } else { 0.0 }, 0.5)
                .unwrap();
        assert!(!rep.is_dini);
    }

    #[test]
    fn dini_detects_non_monotone() {
        let rep = dini_check(&|r| (20.0 * r).sin().abs() * r, 1.0).unwrap();
        assert!(!rep.monotone);
        assert!(!rep.is_dini);
    }

    #[test]
    fn recursion_zero_modulus_closed_form() {
        // ω ≡ 0: A_k = c0·ρ^{kα0}; partial sums match the geometric series
        // and stay under 4c0 by the proviso.
        let (rho, alpha0, c0) = (0.1, 0.5, 0.25);
        assert!((1.0 - f64::powf(rho, alpha0)) * (1.0 - rho) >= 0.5);
        let rec = hopf_recursion(&DiniModulus::Zero, rho, alpha0, c0, 64).unwrap();
        for (k, a) in rec.a_seq.iter().enumerate() {
            let want = c0 * rho.powf(alpha0 * k as f64);
            assert!((a - want).abs() < 1e-12 * (1.0 + want), "k={k}");
        }
        let q = rho.powf(alpha0);
        let closed = c0 * (1.0 - q.powi(65)) / (1.0 - q);
        assert!((rec.partial_sums.last().unwrap() - closed).abs() < 1e-10);
        assert!(rec.sum_bound_ok);
    }

    #[test]
    fn recursion_power_modulus_dominated() {
        // κ·r^{α0} with κ ≤ c0: the recursion branch dominates every level.
        let (rho, alpha0, c0) = (0.05, 0.6, 0.35);
        let m = DiniModulus::Power { kappa: 0.2, alpha: 0.6 };
        let rec = hopf_recursion(&m, rho, alpha0, c0, 40).unwrap();
        for (k, a) in rec.a_seq.iter().enumerate() {
            let want = c0 * rho.powf(alpha0 * k as f64);
            assert!((a - want).abs() < 1e-12 * (1.0 + want), "k={k}");
        }
    }

    #[test]
    fn recursion_satisfies_its_recurrence() {
        let m = DiniModulus::Power { kappa: 0.25, alpha: 0.3 };
        let (rho, alpha0, c0) = (0.02, 0.9, 0.9);
        let rec = hopf_recursion(&m, rho, alpha0, c0, 50).unwrap();
        assert_eq!(rec.a_seq[0], c0);
        for k in 1..rec.a_seq.len() {
            let want = m.eval(rho.powi(k as i32)).max(rho.powf(alpha0) * rec.a_seq[k - 1]);
            assert_eq!(rec.a_seq[k], want);
        }
        for w in rec.slope_seq.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(rec.sum_bound_ok);
    }

    #[test]
    fn recursion_monotone_in_c0_and_modulus() {
        let (rho, alpha0) = (0.05, 0.7);
        let small = DiniModulus::Power { kappa: 0.05, alpha: 0.7 };
        let large = DiniModulus::Power { kappa: 0.2, alpha: 0.7 };
        let rec_a = hopf_recursion(&small, rho, alpha0, 0.3, 40).unwrap();
        let rec_b = hopf_recursion(&large, rho, alpha0, 0.3, 40).unwrap();
        assert!(rec_b.partial_sums.last().unwrap() >= rec_a.partial_sums.last().unwrap());
        let rec_c = hopf_recursion(&small, rho, alpha0, 0.5, 40).unwrap();
        assert!(rec_c.partial_sums.last().unwrap() >= rec_a.partial_sums.last().unwrap());
    }

    #[test]
    fn recursion_proviso_rejected() {
        // rho = 0.9 makes (1 − rho^α0)(1 − rho) tiny
        assert!(hopf_recursion(&DiniModulus::Zero, 0.9, 0.5, 0.25, 10).is_err());
    }

    #[test]
    fn hopf_ratio_exact_linear_profile() {
        // u = x_n⁺: ratio = 2 for every direction and radius.
        let g = GridCylinder::centered(2, 1.0, 0.125, 0.25).unwrap();
        let u = Field::from_fn(&g, |x, _| x[1].max(0.0));
        let dirs = vec![vec![0.0, 1.0], vec![std::f64::consts::FRAC_1_SQRT_2; 2]];
        let rs = [0.125, 0.25, 0.5];
        let rep = hopf_verify(&u, &dirs, &rs).unwrap();
        assert!((rep.reference_value - 0.5).abs() < 1e-12);
        for r in &rep.ratios {
            assert!((r.ratio - 2.0).abs() < 1e-9, "{r:?}");
        }
        assert!(rep.passed);
    }

    #[test]
    fn hopf_ratios_scale_invariant() {
        let g = GridCylinder::centered(1, 1.0, 0.125, 0.25).unwrap();
        let u = Field::from_fn(&g, |x, t| x[0].max(0.0) * (1.1 + 0.1 * t));
        let scaled = u.map(|v| 7.3 * v);
        let dirs = vec![vec![1.0]];
        let rs = [0.25, 0.5];
        let a = hopf_verify(&u, &dirs, &rs).unwrap();
        let b = hopf_verify(&scaled, &dirs, &rs).unwrap();
        for (x, y) in a.ratios.iter().zip(&b.ratios) {
            assert!((x.ratio - y.ratio).abs() < 1e-9);
        }
    }

    #[test]
    fn hopf_degenerate_reference_rejected() {
        let g = GridCylinder::centered(1, 1.0, 0.25, 0.25).unwrap();
        let u = Field::constant(&g, 0.0);
        assert!(hopf_verify(&u, &[vec![1.0]], &[0.25]).is_err());
    }

    #[test]
    fn hopf_solve_flat_boundary() {
        // one-phase Pucci-minus run on {x_n > 0}: positive ratios.
        let g = GridCylinder::centered(1, 1.0, 0.0625, 0.0625).unwrap();
        let p = hopf_problem(g, PsiFamily::Flat { a: 0.0 }, 1.0, 2.0).unwrap();
        let (u, _) = crate::solver::solve(&p).unwrap();
        let rep = hopf_verify(&u, &[vec![1.0]], &[0.125, 0.25, 0.5]).unwrap();
        assert!(rep.measured_c > 0.0, "{rep:?}");
    }
}
