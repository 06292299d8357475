//! Small dense complex helpers and a closed-form 2×2 SVD.

use num_complex::Complex64;
use serde::Serialize;

/// Hermitian inner product `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn norm(v: &[Complex64]) -> f64 {
    norm_sqr(v).sqrt()
}

pub fn scale(v: &[Complex64], s: f64) -> Vec<Complex64> {
    v.iter().map(|z| z * s).collect()
}

/// Dense complex 2×2 matrix, row-major: `[[m00, m01], [m10, m11]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self([[m00, m01], [m10, m11]])
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        Self::new(one, zero, zero, one)
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.0[r][c]
    }

    pub fn mul_vec(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn frobenius_sqr(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Dominant singular triple of a 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominantSvd {
    pub sigma: f64,
    pub left: [Complex64; 2],
    pub right: [Complex64; 2],
}

/// Rotate the global phase so the first nonzero component is real-positive.
pub fn canonical_phase(v: [Complex64; 2]) -> [Complex64; 2] {
    let lead = if v[0].norm() > 1e-300 { v[0] } else { v[1] };
    if lead.norm() <= 1e-300 {
        return v;
    }
    let rot = lead.conj() / lead.norm();
    [v[0] * rot, v[1] * rot]
}

/// Closed-form dominant singular vectors via the eigenproblem of `M^H M`.
///
/// Returns `None` for the zero matrix.
pub fn dominant_svd(m: &Mat2) -> Option<DominantSvd> {
    let [[a, b], [c, d]] = m.0;
    // M^H M = [[p, q], [q*, r]]
    let p = a.norm_sqr() + c.norm_sqr();
    let r = b.norm_sqr() + d.norm_sqr();
    let q = a.conj() * b + c.conj() * d;
    let total = p + r;
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    let disc = ((p - r) * (p - r) + 4.0 * q.norm_sqr()).sqrt();
    let lambda = 0.5 * (total + disc);
    // Two algebraically equivalent eigenvector forms; keep the better-conditioned one.
    let v1 = [q, Complex64::new(lambda - p, 0.0)];
    let v2 = [Complex64::new(lambda - r, 0.0), q.conj()];
    let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
    let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
    let (v, nv) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
    let right = if nv <= total * total * 1e-30 {
        // M^H M is a multiple of the identity: any unit vector is dominant.
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
    } else {
        let s = nv.sqrt();
        [v[0] / s, v[1] / s]
    };
    let mv = m.mul_vec(right);
    let sigma = (mv[0].norm_sqr() + mv[1].norm_sqr()).sqrt();
    if sigma <= 0.0 {
        return None;
    }
    let left = [mv[0] / sigma, mv[1] / sigma];
    Some(DominantSvd {
        sigma,
        left: canonical_phase(left),
        right: canonical_phase(right),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_svd() {
        let s = dominant_svd(&Mat2::identity()).unwrap();
        assert!((s.sigma - 1.0).abs() < 1e-12);
        assert!((s.left[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((s.right[0] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_no_svd() {
        let z = c(0.0, 0.0);
        assert!(dominant_svd(&Mat2::new(z, z, z, z)).is_none());
    }

    #[test]
    fn rank_one_matrix() {
        // [1, i]^T [2, 1]
        let m = Mat2::new(c(2.0, 0.0), c(1.0, 0.0), c(0.0, 2.0), c(0.0, 1.0));
        let s = dominant_svd(&m).unwrap();
        assert!((s.sigma - (2.0f64 * 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn canonical_phase_makes_lead_real() {
        let v = canonical_phase([c(0.0, 0.6), c(0.8, 0.0)]);
        assert!(v[0].im.abs() < 1e-15 && v[0].re > 0.0);
        assert!((v[1] - c(0.0, -0.8)).norm() < 1e-15);
    }
}
