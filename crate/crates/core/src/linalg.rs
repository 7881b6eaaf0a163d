//! Dense complex matrices of small fixed dimension.
//!
//! Everything in this crate that touches a Fourier symbol works with 3x3
//! (perturbation variables) or 4x4 (perturbation variables plus phase)
//! matrices, so the implementations below are written for `CMat<N>` with
//! const-generic `N` and make no attempt at cache blocking or SIMD.
//!
//! Provided here:
//! - arithmetic, inverses (Gauss-Jordan with partial pivoting),
//! - `expm` via [13/13] Pade with scaling and squaring (Higham 2005),
//! - `eig3`: eigenvalues of a 3x3 through the characteristic cubic with
//!   Newton polishing, plus a relative residual diagnostic,
//! - spectral projections for a simple eigenvalue via the product formula
//!   P = (M - l1)(M - l2) / ((ls - l1)(ls - l2)).

use num_complex::Complex;

pub type C = Complex<f64>;

pub const fn c(re: f64, im: f64) -> C {
    Complex::new(re, im)
}

pub fn cr(re: f64) -> C {
    Complex::new(re, 0.0)
}

/// Column-major-agnostic dense complex matrix, `e[row][col]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CMat<const N: usize> {
    pub e: [[C; N]; N],
}

pub type Mat3 = CMat<3>;
pub type Mat4 = CMat<4>;

impl<const N: usize> CMat<N> {
    pub fn zero() -> Self {
        CMat {
            e: [[C::new(0.0, 0.0); N]; N],
        }
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.e[i][i] = cr(1.0);
        }
        m
    }

    pub fn from_real(a: [[f64; N]; N]) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for j in 0..N {
                m.e[i][j] = cr(a[i][j]);
            }
        }
        m
    }

    pub fn diag(d: [C; N]) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            m.e[i][i] = d[i];
        }
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for j in 0..N {
                m.e[i][j] = self.e[i][j].conj();
            }
        }
        m
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut m = *self;
        for i in 0..N {
            for j in 0..N {
                m.e[i][j] += other.e[i][j];
            }
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut m = *self;
        for i in 0..N {
            for j in 0..N {
                m.e[i][j] -= other.e[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: C) -> Self {
        let mut m = *self;
        for i in 0..N {
            for j in 0..N {
                m.e[i][j] *= s;
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let mut m = Self::zero();
        for i in 0..N {
            for k in 0..N {
                let a = self.e[i][k];
                if a == cr(0.0) {
                    continue;
                }
                for j in 0..N {
                    m.e[i][j] += a * other.e[k][j];
                }
            }
        }
        m
    }

    pub fn matvec(&self, v: &[C; N]) -> [C; N] {
        let mut out = [C::new(0.0, 0.0); N];
        for i in 0..N {
            let mut s = C::new(0.0, 0.0);
            for j in 0..N {
                s += self.e[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// Maximum absolute row sum (the operator infinity norm).
    pub fn norm_inf(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..N {
            let mut s = 0.0;
            for j in 0..N {
                s += self.e[i][j].norm();
            }
            best = best.max(s);
        }
        best
    }

    /// Largest entry magnitude.
    pub fn norm_max(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..N {
            for j in 0..N {
                best = best.max(self.e[i][j].norm());
            }
        }
        best
    }

    /// Largest imaginary part in absolute value; realness diagnostic.
    pub fn max_imag(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..N {
            for j in 0..N {
                best = best.max(self.e[i][j].im.abs());
            }
        }
        best
    }

    pub fn trace(&self) -> C {
        let mut s = C::new(0.0, 0.0);
        for i in 0..N {
            s += self.e[i][i];
        }
        s
    }

    /// Gauss-Jordan inverse with partial pivoting. Returns `None` when a
    /// pivot falls below `1e-300` (structurally singular input).
    pub fn inverse(&self) -> Option<Self> {
        let mut a = *self;
        let mut inv = Self::identity();
        for col in 0..N {
            let mut piv = col;
            let mut best = a.e[col][col].norm();
            for r in col + 1..N {
                let mag = a.e[r][col].norm();
                if mag > best {
                    best = mag;
                    piv = r;
                }
            }
            if best < 1e-300 {
                return None;
            }
            a.e.swap(col, piv);
            inv.e.swap(col, piv);
            let d = a.e[col][col];
            for j in 0..N {
                a.e[col][j] /= d;
                inv.e[col][j] /= d;
            }
            for r in 0..N {
                if r == col {
                    continue;
                }
                let f = a.e[r][col];
                if f == cr(0.0) {
                    continue;
                }
                for j in 0..N {
                    let acj = a.e[col][j];
                    let icj = inv.e[col][j];
                    a.e[r][j] -= f * acj;
                    inv.e[r][j] -= f * icj;
                }
            }
        }
        Some(inv)
    }
}

impl Mat3 {
    pub fn det(&self) -> C {
        let e = &self.e;
        e[0][0] * (e[1][1] * e[2][2] - e[1][2] * e[2][1])
            - e[0][1] * (e[1][0] * e[2][2] - e[1][2] * e[2][0])
            + e[0][2] * (e[1][0] * e[2][1] - e[1][1] * e[2][0])
    }

    /// Coefficients (c2, c1, c0) of det(nu I - M) = nu^3 + c2 nu^2 + c1 nu + c0.
    pub fn char_poly(&self) -> (C, C, C) {
        let e = &self.e;
        let c2 = -self.trace();
        // Sum of principal 2x2 minors.
        let m01 = e[0][0] * e[1][1] - e[0][1] * e[1][0];
        let m02 = e[0][0] * e[2][2] - e[0][2] * e[2][0];
        let m12 = e[1][1] * e[2][2] - e[1][2] * e[2][1];
        let c1 = m01 + m02 + m12;
        let c0 = -self.det();
        (c2, c1, c0)
    }
}

/// Roots of the monic quadratic z^2 + b z + c, stable branch selection.
pub fn quadratic_roots(b: C, cc: C) -> [C; 2] {
    let disc = (b * b - cr(4.0) * cc).sqrt();
    // Pick the sign that avoids cancellation in -b -/+ disc.
    let q = if (b + disc).norm() >= (b - disc).norm() {
        -(b + disc) * cr(0.5)
    } else {
        -(b - disc) * cr(0.5)
    };
    if q.norm() < 1e-300 {
        [C::new(0.0, 0.0), -b]
    } else {
        [q, cc / q]
    }
}

/// Roots of the monic cubic z^3 + a2 z^2 + a1 z + a0 via Cardano with a
/// stable cube-root branch, followed by Newton polishing of simple roots.
pub fn cubic_roots(a2: C, a1: C, a0: C) -> [C; 3] {
    let scale = a2.norm().max(a1.norm().sqrt()).max(a0.norm().cbrt());
    if scale < 1e-300 {
        return [C::new(0.0, 0.0); 3];
    }
    // Deflate exact zero roots; keeps semisimple zero eigenvalues exact,
    // which the k = 0 symbol relies on.
    if a0.norm() <= 1e-250 {
        let q = quadratic_roots(a2, a1);
        return [C::new(0.0, 0.0), q[0], q[1]];
    }

    // Depressed cubic t^3 + p t + q with z = t - a2/3.
    let shift = a2 / cr(3.0);
    let p = a1 - a2 * a2 / cr(3.0);
    let q = a0 - a1 * a2 / cr(3.0) + a2 * a2 * a2 * cr(2.0 / 27.0);

    let mut roots = if p.norm() < 1e-14 * scale * scale && q.norm() < 1e-20 * scale * scale * scale
    {
        [C::new(0.0, 0.0); 3]
    } else {
        let disc = (q * q * cr(0.25) + p * p * p / cr(27.0)).sqrt();
        let u_cand_a = -q * cr(0.5) + disc;
        let u_cand_b = -q * cr(0.5) - disc;
        let w = if u_cand_a.norm() >= u_cand_b.norm() {
            u_cand_a
        } else {
            u_cand_b
        };
        let u = w.cbrt();
        let v = if u.norm() < 1e-280 {
            C::new(0.0, 0.0)
        } else {
            -p / (cr(3.0) * u)
        };
        let omega = c(-0.5, 0.75f64.sqrt());
        let omega2 = omega * omega;
        [u + v, omega * u + omega2 * v, omega2 * u + omega * v]
    };

    for r in roots.iter_mut() {
        *r -= shift;
    }

    // Newton polish on the original monic cubic; skipped near multiple
    // roots where p' degenerates.
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let z = *r;
            let pv = ((z + a2) * z + a1) * z + a0;
            let dv = (cr(3.0) * z + cr(2.0) * a2) * z + a1;
            if dv.norm() < 1e-8 * scale * scale {
                break;
            }
            let step = pv / dv;
            if !step.re.is_finite() || !step.im.is_finite() {
                break;
            }
            *r = z - step;
            if step.norm() < 1e-16 * scale {
                break;
            }
        }
    }
    roots
}

/// Eigenvalues of a 3x3 complex matrix together with a scale-relative
/// residual max |p(lambda)| / max(1, |M|^3). The residual is the
/// ill-conditioning diagnostic: simple spectra polish to ~1e-13.
pub fn eig3(m: &Mat3) -> ([C; 3], f64) {
    let (c2, c1, c0) = m.char_poly();
    let roots = cubic_roots(c2, c1, c0);
    let scale = m.norm_inf().max(1.0);
    let mut res = 0.0f64;
    for &r in roots.iter() {
        let pv = ((r + c2) * r + c1) * r + c0;
        res = res.max(pv.norm() / (scale * scale * scale));
    }
    (roots, res)
}

/// Spectral projection onto the eigenspace of the simple eigenvalue
/// `l_simple`, the other two eigenvalues being `l_a`, `l_b`:
/// P = (M - l_a)(M - l_b) / ((l_s - l_a)(l_s - l_b)).
///
/// Exact for semisimple `l_a = l_b` as well (Cayley-Hamilton on the
/// complementary block).
pub fn spectral_projection(m: &Mat3, l_simple: C, l_a: C, l_b: C) -> Mat3 {
    let id = Mat3::identity();
    let fa = m.sub(&id.scale(l_a));
    let fb = m.sub(&id.scale(l_b));
    let denom = (l_simple - l_a) * (l_simple - l_b);
    fa.matmul(&fb).scale(cr(1.0) / denom)
}

// Pade [13/13] coefficients (Higham, "The scaling and squaring method for
// the matrix exponential revisited", 2005).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential e^M by scaling and squaring with the [13/13] Pade
/// approximant. Intended for the tiny matrices of this crate; accuracy is
/// near machine precision for the (sectorial) symbols that arise here.
pub fn expm<const N: usize>(m: &CMat<N>) -> CMat<N> {
    let norm = m.norm_inf();
    if !norm.is_finite() {
        // Propagate the problem visibly rather than looping in squarings.
        return CMat::diag([c(f64::NAN, 0.0); N]);
    }
    let theta13 = 5.371920351148152;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(cr(0.5f64.powi(s)));

    let a2 = a.matmul(&a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);
    let b = &PADE13;
    let id = CMat::<N>::identity();

    // u = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let w1 = a6
        .scale(cr(b[13]))
        .add(&a4.scale(cr(b[11])))
        .add(&a2.scale(cr(b[9])));
    let w2 = a6
        .scale(cr(b[7]))
        .add(&a4.scale(cr(b[5])))
        .add(&a2.scale(cr(b[3])))
        .add(&id.scale(cr(b[1])));
    let u = a.matmul(&a6.matmul(&w1).add(&w2));

    // v = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let z1 = a6
        .scale(cr(b[12]))
        .add(&a4.scale(cr(b[10])))
        .add(&a2.scale(cr(b[8])));
    let z2 = a6
        .scale(cr(b[6]))
        .add(&a4.scale(cr(b[4])))
        .add(&a2.scale(cr(b[2])))
        .add(&id.scale(cr(b[0])));
    let v = a6.matmul(&z1).add(&z2);

    let num = v.add(&u);
    let den = v.sub(&u);
    let mut r = den
        .inverse()
        .map(|di| di.matmul(&num))
        .unwrap_or_else(CMat::<N>::identity);
    for _ in 0..s {
        r = r.matmul(&r);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: C, b: C, tol: f64) {
        assert!((a - b).norm() <= tol, "expected {b}, got {a} (tol {tol:e})");
    }

    #[test]
    fn inverse_roundtrip() {
        let m = Mat3::from_real([[2.0, 1.0, 0.5], [0.0, -1.0, 3.0], [4.0, 0.1, 1.0]]);
        let inv = m.inverse().unwrap();
        let id = m.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { cr(1.0) } else { cr(0.0) };
                assert_close(id.e[i][j], want, 1e-13);
            }
        }
    }

    #[test]
    fn cubic_simple_roots() {
        // (z-1)(z-2)(z-3) = z^3 - 6z^2 + 11z - 6
        let mut r = cubic_roots(cr(-6.0), cr(11.0), cr(-6.0))
            .map(|z| z.re)
            .to_vec();
        r.sort_by(f64::total_cmp);
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!((r[1] - 2.0).abs() < 1e-12);
        assert!((r[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_double_root() {
        // (z+1)^2 (z+3) = z^3 + 5 z^2 + 7 z + 3
        let r = cubic_roots(cr(5.0), cr(7.0), cr(3.0));
        let mut near_m1 = 0;
        let mut near_m3 = 0;
        for z in r {
            if (z - cr(-1.0)).norm() < 1e-6 {
                near_m1 += 1;
            }
            if (z - cr(-3.0)).norm() < 1e-10 {
                near_m3 += 1;
            }
        }
        assert_eq!(near_m1, 2);
        assert_eq!(near_m3, 1);
    }

    #[test]
    fn cubic_zero_factor() {
        // z^2 (z + a): degenerate constant/linear coefficients stay exact.
        let r = cubic_roots(cr(1.8), cr(0.0), cr(0.0));
        let zeros = r.iter().filter(|z| z.norm() == 0.0).count();
        assert_eq!(zeros, 2);
        assert!(r.iter().any(|z| (z + cr(1.8)).norm() < 1e-14));
    }

    #[test]
    fn eig3_identity_and_diag() {
        let (l, res) = eig3(&Mat3::identity());
        for z in l {
            assert_close(z, cr(1.0), 1e-12);
        }
        assert!(res < 1e-12);

        let (l, _) = eig3(&Mat3::from_real([
            [-3.0, 0.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, -1.0],
        ]));
        let mut re: Vec<f64> = l.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 3.0).abs() < 1e-8);
        assert!((re[1] + 1.0).abs() < 1e-8);
        assert!((re[2] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn eig3_complex_pair() {
        // Rotation-like block: eigenvalues -1, +/- i.
        let m = Mat3::from_real([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]);
        let (l, res) = eig3(&m);
        assert!(res < 1e-12);
        assert!(l.iter().any(|z| (z - c(0.0, 1.0)).norm() < 1e-10));
        assert!(l.iter().any(|z| (z - c(0.0, -1.0)).norm() < 1e-10));
        assert!(l.iter().any(|z| (z - cr(-1.0)).norm() < 1e-10));
    }

    #[test]
    fn expm_diagonal() {
        let m = Mat3::from_real([[-1.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 0.5]]);
        let e = expm(&m);
        assert_close(e.e[0][0], cr((-1.0f64).exp()), 1e-14);
        assert_close(e.e[1][1], cr((-2.0f64).exp()), 1e-14);
        assert_close(e.e[2][2], cr(0.5f64.exp()), 1e-14);
        assert!(e.e[0][1].norm() < 1e-16);
    }

    #[test]
    fn expm_nilpotent() {
        // exp([[0,1],[0,0]]-style embedded in 3x3) = I + N.
        let m = Mat3::from_real([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let e = expm(&m);
        assert_close(e.e[0][1], cr(1.0), 1e-15);
        assert_close(e.e[0][0], cr(1.0), 1e-15);
    }

    #[test]
    fn expm_group_property() {
        let m = Mat3::from_real([[-2.3, 0.7, 0.1], [0.4, -1.1, 0.0], [-0.3, 0.2, -0.9]]);
        let e1 = expm(&m);
        let e2 = expm(&m.scale(cr(2.0)));
        let sq = e1.matmul(&e1);
        assert!(sq.sub(&e2).norm_max() < 1e-13);
    }

    #[test]
    fn expm_large_negative_underflows_cleanly() {
        let m = Mat3::from_real([
            [-30000.0, 0.0, 0.0],
            [0.0, -40000.0, 0.0],
            [0.0, 0.0, -35000.0],
        ]);
        let e = expm(&m);
        assert!(e.norm_max() < 1e-300);
    }

    #[test]
    fn projection_product_formula() {
        // diag(-2, 0, 0): projection onto the -2 eigenspace is e1 e1^T.
        let m = Mat3::from_real([[-2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let p = spectral_projection(&m, cr(-2.0), cr(0.0), cr(0.0));
        assert_close(p.e[0][0], cr(1.0), 1e-14);
        assert!(p.e[1][1].norm() < 1e-14);
        let p2 = p.matmul(&p);
        assert!(p2.sub(&p).norm_max() < 1e-13);
    }
}
