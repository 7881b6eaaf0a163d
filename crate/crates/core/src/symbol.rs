//! Fourier symbol of the linearization about a roll and its spectrum.
//!
//! The linearization of the (r, psi, B) perturbation system about the roll
//! is a constant-coefficient operator whose spectrum is the union over k of
//! the eigenvalues of a real 3x3 symbol matrix. This module assembles that
//! symbol, checks Routh-Hurwitz stability of its characteristic cubic,
//! continues the three eigenvalue branches in k, and evaluates the
//! closed-form low-frequency data: the splitting curvatures of the two
//! critical branches and the spectral projection onto the damped branch
//! together with its second derivative at k = 0.

use crate::linalg::{c, cr, cubic_roots, eig3, spectral_projection, Mat3, C};
use crate::params::RollParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SymbolError {
    #[error(
        "branch continuation failed at k = {k}: eigenvalue gap {gap:.3e} exceeds bound {bound:.3e}"
    )]
    BranchContinuation { k: f64, gap: f64, bound: f64 },
    #[error("parameters are not spectrally stable: {0:?}")]
    NotStable(RollParams),
    #[error("eigenvalue residual {0:.3e} exceeds tolerance (ill-conditioned symbol)")]
    IllConditioned(f64),
}

/// The symbol matrix at one wavenumber. Entries are real for real k; the
/// matrix is even in k (it depends on k^2 only).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymbolMatrix {
    pub k: f64,
    pub m: [[f64; 3]; 3],
}

impl SymbolMatrix {
    pub fn to_cmat(&self) -> Mat3 {
        Mat3::from_real(self.m)
    }
}

/// L(k) with rows
///   (-k^2 - 2(1-q^2), -2q, 1)
///   (-2q k^2, -k^2, 0)
///   (-2 gamma (1-q^2) k^2, 0, -D k^2).
pub fn assemble_symbol(p: &RollParams, k: f64) -> SymbolMatrix {
    let k2 = k * k;
    let om = p.one_minus_q2();
    SymbolMatrix {
        k,
        m: [
            [-k2 - 2.0 * om, -2.0 * p.q, 1.0],
            [-2.0 * p.q * k2, -k2, 0.0],
            [-2.0 * p.gamma * om * k2, 0.0, -p.d * k2],
        ],
    }
}

/// Coefficients (a2, a1, a0) of det(nu I - L(k)) = nu^3 + a2 nu^2 + a1 nu + a0.
pub fn char_poly_coeffs(p: &RollParams, k: f64) -> (f64, f64, f64) {
    let k2 = k * k;
    let q2 = p.q * p.q;
    let om = p.one_minus_q2();
    let a2 = 2.0 * om + (2.0 + p.d) * k2;
    let a1 = (2.0 + k2 - 6.0 * q2 + 2.0 * p.d * (1.0 + k2 - q2) + 2.0 * p.gamma * om) * k2;
    let a0 = (p.d * k2 + 2.0 * (p.d + p.gamma) * om - 4.0 * p.d * q2) * k2 * k2;
    (a2, a1, a0)
}

/// Coefficients (b4, b2, b0) of the reduced Routh-Hurwitz quartic:
/// a2(k) a1(k) - a0(k) = 2 k^2 (b4 k^4 + b2 k^2 + b0).
pub fn routh_quartic_coeffs(p: &RollParams) -> (f64, f64, f64) {
    let q2 = p.q * p.q;
    let om = p.one_minus_q2();
    let dg = p.d + p.gamma;
    let b4 = (1.0 + p.d) * (1.0 + p.d);
    let b2 = 3.0 * (1.0 - 3.0 * q2) + 2.0 * q2 + p.d * dg * om + dg * om + 3.0 * p.d * om;
    let b0 = 2.0 * om * (1.0 - 3.0 * q2 + dg * om);
    (b4, b2, b0)
}

/// The second-order rescaling limit of the symbol at infinite wavenumber,
/// lim l->0 of l^2 L(1/l).
pub fn symbol_at_infinity(p: &RollParams) -> [[f64; 3]; 3] {
    let om = p.one_minus_q2();
    [
        [-1.0, 0.0, 0.0],
        [-2.0 * p.q, -1.0, 0.0],
        [-2.0 * p.gamma * om, 0.0, -p.d],
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason")]
pub enum StabilityVerdict {
    Stable,
    Unstable(String),
    /// Some tested quantity sits within tolerance of zero.
    Boundary(String),
}

/// Routh-Hurwitz stability report for one parameter point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    pub params: RollParams,
    /// (k, a2, a1, a0) samples of the characteristic coefficients.
    pub a_samples: Vec<(f64, f64, f64, f64)>,
    /// (b4, b2, b0) of the reduced quartic.
    pub b_coeffs: (f64, f64, f64),
    /// min over sampled k != 0 of -sup Re sigma(L(k)) / k^2.
    pub margin: f64,
    /// Rescaled symbol at k -> infinity and its spectral bound.
    pub l_infinity: [[f64; 3]; 3],
    pub l_infinity_spectral_bound: f64,
    pub verdict: StabilityVerdict,
}

/// Evaluates the Routh-Hurwitz conditions on the characteristic cubic over
/// `k_grid` (zeros are skipped for the margin). The verdict reproduces the
/// closed-form stability condition; the sampled margin is the numerical
/// cross-check.
pub fn routh_hurwitz_check(p: &RollParams, k_grid: &[f64], boundary_tol: f64) -> StabilityReport {
    let (b4, b2, b0) = routh_quartic_coeffs(p);
    let l_inf = symbol_at_infinity(p);
    let l_inf_bound = (-1.0f64).max(-p.d);

    let mut margin = f64::INFINITY;
    let mut a_samples = Vec::new();
    let stride = (k_grid.len() / 200).max(1);
    for (i, &k) in k_grid.iter().enumerate() {
        if i % stride == 0 {
            let (a2, a1, a0) = char_poly_coeffs(p, k);
            a_samples.push((k, a2, a1, a0));
        }
        if k == 0.0 {
            continue;
        }
        let (lams, _) = eig3(&assemble_symbol(p, k).to_cmat());
        let sup_re = lams.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        margin = margin.min(-sup_re / (k * k));
    }
    if !margin.is_finite() {
        margin = f64::NAN;
    }

    let eck = p.eckhaus_margin();
    let cpl = p.coupling_margin();
    let near_zero = [eck, cpl, b0, b2, b4, margin]
        .iter()
        .any(|v| v.is_finite() && v.abs() <= boundary_tol);
    let verdict = if near_zero {
        StabilityVerdict::Boundary(format!(
            "a tested quantity is within {boundary_tol:e} of zero (eckhaus {eck:.3e}, coupling {cpl:.3e}, margin {margin:.3e})"
        ))
    } else if eck <= 0.0 {
        StabilityVerdict::Unstable(format!("q^2 >= 1/3 (q^2 = {:.6})", p.q * p.q))
    } else if cpl <= 0.0 {
        StabilityVerdict::Unstable(format!("D + gamma - 2 D q^2/(1-q^2) = {cpl:.6} <= 0"))
    } else {
        StabilityVerdict::Stable
    };

    StabilityReport {
        params: *p,
        a_samples,
        b_coeffs: (b4, b2, b0),
        margin,
        l_infinity: l_inf,
        l_infinity_spectral_bound: l_inf_bound,
        verdict,
    }
}

/// Splitting curvatures of the two critical eigenvalue branches,
/// lambda_{c,+-}(k) = lambda1 k^2 + O(k^4).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Lambda1 {
    pub plus: f64,
    pub minus: f64,
    /// True when the pair is complex-conjugate; `plus`/`minus` then carry
    /// the common real part and `imag` the imaginary magnitude.
    pub complex_pair: bool,
    pub imag: f64,
}

impl Lambda1 {
    pub fn plus_c(&self) -> C {
        c(self.plus, self.imag)
    }
    pub fn minus_c(&self) -> C {
        c(self.minus, -self.imag)
    }
}

/// Closed form
/// lambda1_{+-} = -(1+D+gamma)/2 + q^2/(1-q^2)
///                +- sqrt( (-(1+D+gamma)/2 + q^2/(1-q^2))^2 - D - gamma + 2Dq^2/(1-q^2) ).
pub fn lambda1_pm(p: &RollParams) -> Lambda1 {
    let half = -0.5 * (1.0 + p.d + p.gamma) + p.q * p.q / p.one_minus_q2();
    let disc = half * half - p.coupling_margin();
    if disc >= 0.0 {
        let s = disc.sqrt();
        Lambda1 {
            plus: half + s,
            minus: half - s,
            complex_pair: false,
            imag: 0.0,
        }
    } else {
        Lambda1 {
            plus: half,
            minus: half,
            complex_pair: true,
            imag: (-disc).sqrt(),
        }
    }
}

/// Closed-form spectral projection P(0) onto the damped eigenspace and its
/// second derivative P''(0) in k.
pub fn projection_p0_p2(p: &RollParams) -> (Mat3, Mat3) {
    let q = p.q;
    let g = p.gamma;
    let om = p.one_minus_q2();
    let p0 = Mat3::from_real([
        [1.0, q / om, -1.0 / (2.0 * om)],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
    ]);
    let p2 = Mat3::from_real([
        [
            g / om - 2.0 * q * q / (om * om),
            2.0 * g * q / (om * om) - 4.0 * q * q * q / (om * om * om),
            (1.0 + 3.0 * q * q) / (2.0 * om * om * om) - (p.d + 2.0 * g) / (2.0 * om * om),
        ],
        [2.0 * q / om, 2.0 * q * q / (om * om), -q / (om * om)],
        [2.0 * g, 2.0 * g * q / om, -g / om],
    ]);
    (p0, p2)
}

/// Residual of the algebraic identity
/// (I - P(0)) (1, 0, gamma k^2)^T - (k^2/2) P''(0) (1,0,0)^T
///   = k^2 (q^2/(1-q^2)^2, -q/(1-q^2), 0)^T,
/// maximized over the supplied wavenumbers.
pub fn verify_projection_identity(p: &RollParams, k_samples: &[f64]) -> f64 {
    let (p0, p2) = projection_p0_p2(p);
    let id = Mat3::identity();
    let ip0 = id.sub(&p0);
    let om = p.one_minus_q2();
    let mut worst = 0.0f64;
    for &k in k_samples {
        let k2 = k * k;
        let lhs1 = ip0.matvec(&[cr(1.0), cr(0.0), cr(p.gamma * k2)]);
        let lhs2 = p2.matvec(&[cr(k2 / 2.0), cr(0.0), cr(0.0)]);
        let rhs = [cr(k2 * p.q * p.q / (om * om)), cr(-k2 * p.q / om), cr(0.0)];
        for i in 0..3 {
            worst = worst.max((lhs1[i] - lhs2[i] - rhs[i]).norm());
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReducedCriteria {
    /// (1 - 2q^2/(1-q^2)) (D + gamma) + 2 gamma q^2/(1-q^2)
    pub c1: f64,
    /// 1 - 2q^2/(1-q^2)
    pub c2: f64,
    /// Whether positivity of both agrees with the spectral stability flag.
    pub consistent: bool,
}

/// The formally reduced phase-diffusion stability criteria and their
/// agreement with the full condition.
pub fn reduced_phase_diffusion_check(p: &RollParams) -> ReducedCriteria {
    let s = p.q * p.q / p.one_minus_q2();
    let c2 = 1.0 - 2.0 * s;
    let c1 = c2 * (p.d + p.gamma) + 2.0 * p.gamma * s;
    let reduced_stable = c1 > 0.0 && c2 > 0.0;
    ReducedCriteria {
        c1,
        c2,
        consistent: reduced_stable == p.spectrally_stable(),
    }
}

/// Continued eigenvalue branches, projections and low-frequency data on a
/// wavenumber grid.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub k_grid: Vec<f64>,
    /// Critical branch with the larger curvature (lambda1_plus).
    pub lc_plus: Vec<C>,
    /// Critical branch with the smaller curvature (lambda1_minus).
    pub lc_minus: Vec<C>,
    /// Damped branch, lambda_s(0) = -2(1-q^2).
    pub ls: Vec<C>,
    /// Spectral projection onto the damped eigenspace at each grid point.
    pub proj: Vec<Mat3>,
    pub split_curvatures: Lambda1,
    pub k0: f64,
}

impl SpectralData {
    pub fn sup_re_nonzero(&self) -> f64 {
        let mut sup = f64::NEG_INFINITY;
        for (i, &k) in self.k_grid.iter().enumerate() {
            if k == 0.0 {
                continue;
            }
            sup = sup
                .max(self.lc_plus[i].re)
                .max(self.lc_minus[i].re)
                .max(self.ls[i].re);
        }
        sup
    }

    /// Uniform damping margin of the damped branch on |k| < k0.
    pub fn damped_branch_margin(&self) -> f64 {
        let mut mu = f64::INFINITY;
        for (i, &k) in self.k_grid.iter().enumerate() {
            if k.abs() < self.k0 {
                mu = mu.min(-self.ls[i].re);
            }
        }
        mu
    }
}

/// Cutoff selection: scan upward from k = 0 and return half the first
/// wavenumber at which the gap between the damped branch and the critical
/// pair drops below `frac` of its value at k = 0. The scan is capped: for
/// decoupled cases (gamma = 0) the gap never shrinks and the cap applies.
pub fn select_k0(p: &RollParams, frac: f64, scan_max: f64) -> f64 {
    let gap0 = 2.0 * p.one_minus_q2();
    let dk = 1e-3;
    let mut prev = sorted_eigs_at(p, 0.0);
    let mut k = dk;
    while k <= scan_max {
        let cur = continue_triple(p, k, &prev);
        let gap = cur[0].re.min(cur[1].re) - cur[2].re;
        if gap < frac * gap0 {
            return (k / 2.0).min(1.0);
        }
        prev = cur;
        k += dk;
    }
    (scan_max / 2.0).min(1.0)
}

/// Eigentriple ordered (critical_plus, critical_minus, damped), exact at k=0.
fn sorted_eigs_at(p: &RollParams, k: f64) -> [C; 3] {
    if k == 0.0 {
        return [cr(0.0), cr(0.0), cr(-2.0 * p.one_minus_q2())];
    }
    let (lams, _) = eig3(&assemble_symbol(p, k).to_cmat());
    let mut v = lams.to_vec();
    // Damped branch last: farthest from zero along the real axis.
    v.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap());
    [v[0], v[1], v[2]]
}

/// Nearest-match continuation of an ordered triple to wavenumber `k`.
fn continue_triple(p: &RollParams, k: f64, prev: &[C; 3]) -> [C; 3] {
    let (lams, _) = eig3(&assemble_symbol(p, k).to_cmat());
    best_permutation(prev, &lams).0
}

/// Assign `new` to the slots of `prev` minimizing the total displacement;
/// returns the assignment and its total displacement.
fn best_permutation(prev: &[C; 3], new: &[C; 3]) -> ([C; 3], f64) {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = f64::INFINITY;
    let mut out = *new;
    for perm in PERMS {
        let d: f64 = (0..3).map(|i| (new[perm[i]] - prev[i]).norm()).sum();
        if d < best {
            best = d;
            out = [new[perm[0]], new[perm[1]], new[perm[2]]];
        }
    }
    (out, best)
}

/// Continues the three eigenvalue branches over a symmetric grid, seeded
/// at the point nearest k = 0 by the exact eigenstructure, and assembles
/// the damped-branch spectral projections by the product formula.
pub fn spectral_curves(p: &RollParams, k_grid: &[f64]) -> Result<SpectralData, SymbolError> {
    spectral_curves_with_bound(p, k_grid, 1.0)
}

/// `spectral_curves` with the continuity bound scaled by `bound_scale`
/// (values below 1 make the continuation stricter).
pub fn spectral_curves_with_bound(
    p: &RollParams,
    k_grid: &[f64],
    bound_scale: f64,
) -> Result<SpectralData, SymbolError> {
    if !p.spectrally_stable() {
        return Err(SymbolError::NotStable(*p));
    }
    let mut grid: Vec<f64> = k_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let n = grid.len();
    let i0 = (0..n)
        .min_by(|&a, &b| grid[a].abs().partial_cmp(&grid[b].abs()).unwrap())
        .unwrap();

    let mut branches = vec![[cr(0.0); 3]; n];
    branches[i0] = sorted_eigs_at(p, grid[i0]);

    let bound = |k: f64, dk: f64| {
        bound_scale * (0.2 + 8.0 * (2.0 + p.d + p.gamma.abs()) * (k.abs() + 1.0) * dk)
    };

    for i in (i0 + 1)..n {
        let dk = grid[i] - grid[i - 1];
        let (next, gap) = best_permutation(&branches[i - 1], &sorted_eigs_at_raw(p, grid[i]));
        let b = bound(grid[i], dk);
        if gap > b {
            return Err(SymbolError::BranchContinuation {
                k: grid[i],
                gap,
                bound: b,
            });
        }
        branches[i] = next;
    }
    for i in (0..i0).rev() {
        let dk = grid[i + 1] - grid[i];
        let (next, gap) = best_permutation(&branches[i + 1], &sorted_eigs_at_raw(p, grid[i]));
        let b = bound(grid[i], dk);
        if gap > b {
            return Err(SymbolError::BranchContinuation {
                k: grid[i],
                gap,
                bound: b,
            });
        }
        branches[i] = next;
    }

    // Order the critical pair by curvature: the plus branch dominates near 0.
    let mut lc_a: Vec<C> = branches.iter().map(|b| b[0]).collect();
    let mut lc_b: Vec<C> = branches.iter().map(|b| b[1]).collect();
    let ls: Vec<C> = branches.iter().map(|b| b[2]).collect();
    let probe = if i0 + 1 < n {
        i0 + 1
    } else {
        i0.saturating_sub(1)
    };
    if lc_a[probe].re < lc_b[probe].re {
        std::mem::swap(&mut lc_a, &mut lc_b);
    }

    let k0 = select_k0(p, 0.25, 2.0);
    let proj: Vec<Mat3> = (0..n)
        .map(|i| {
            let m = assemble_symbol(p, grid[i]).to_cmat();
            spectral_projection(&m, ls[i], lc_a[i], lc_b[i])
        })
        .collect();

    Ok(SpectralData {
        k_grid: grid,
        lc_plus: lc_a,
        lc_minus: lc_b,
        ls,
        proj,
        split_curvatures: lambda1_pm(p),
        k0,
    })
}

fn sorted_eigs_at_raw(p: &RollParams, k: f64) -> [C; 3] {
    if k == 0.0 {
        return [cr(0.0), cr(0.0), cr(-2.0 * p.one_minus_q2())];
    }
    let (lams, _) = eig3(&assemble_symbol(p, k).to_cmat());
    lams
}

/// Spectral projection onto the damped branch at a single wavenumber,
/// without grid continuation. Valid where the damped branch is separated.
pub fn damped_projection_at(p: &RollParams, k: f64) -> Mat3 {
    let m = assemble_symbol(p, k).to_cmat();
    if k == 0.0 {
        let (p0, _) = projection_p0_p2(p);
        return p0;
    }
    let (lams, _) = eig3(&m);
    // The damped branch continues from -2(1-q^2): pick the eigenvalue
    // closest to it after subtracting the common -k^2 drift.
    let anchor = c(-2.0 * p.one_minus_q2() - k * k, 0.0);
    let mut idx = 0;
    let mut best = f64::INFINITY;
    for (i, l) in lams.iter().enumerate() {
        let d = (l - anchor).norm();
        if d < best {
            best = d;
            idx = i;
        }
    }
    let others: Vec<C> = (0..3).filter(|&i| i != idx).map(|i| lams[i]).collect();
    spectral_projection(&m, lams[idx], others[0], others[1])
}

/// Symmetric uniform grid [-kmax, kmax] with `n` points per side plus 0.
pub fn symmetric_grid(kmax: f64, n: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(2 * n + 1);
    for i in (1..=n).rev() {
        g.push(-kmax * i as f64 / n as f64);
    }
    g.push(0.0);
    for i in 1..=n {
        g.push(kmax * i as f64 / n as f64);
    }
    g
}

/// Numeric characteristic coefficients via minors of the assembled symbol;
/// an independent route used to cross-check `char_poly_coeffs`.
pub fn char_poly_numeric(p: &RollParams, k: f64) -> (f64, f64, f64) {
    let (c2, c1, c0) = assemble_symbol(p, k).to_cmat().char_poly();
    (c2.re, c1.re, c0.re)
}

/// Roots of the closed-form characteristic cubic; oracle route for eig3.
pub fn char_poly_roots(p: &RollParams, k: f64) -> [C; 3] {
    let (a2, a1, a0) = char_poly_coeffs(p, k);
    cubic_roots(cr(a2), cr(a1), cr(a0))
}
