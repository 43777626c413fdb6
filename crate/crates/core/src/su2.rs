//! Exact 2x2 propagator algebra for instantaneous-rotation analysis of pulse
//! sequences.
//!
//! Sign convention, fixed once for the whole crate: a rotation pulse of angle
//! `theta` about the in-plane axis `(cos phi, sin phi, 0)` is
//!
//! ```text
//! U(theta, phi) = exp(-i * theta * (cos(phi) Sx + sin(phi) Sy)),   S = sigma/2
//! ```
//!
//! so positive `theta` about +x takes the Bloch vector +z to -y. Global phase
//! is kept in storage; only [`gate_fidelity`] and the Bloch projection are
//! phase-invariant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unitarity residual above which inputs are rejected by checked operations.
pub const UNITARITY_LIMIT: f64 = 1e-9;

/// A 2x2 complex matrix, row-major `[m00, m01, m10, m11]`.
///
/// Values built by [`rotation_unitary`], [`rz_unitary`] and products thereof
/// are unitary to machine precision. [`Unitary2::new`] checks unitarity of
/// externally supplied entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    entries: [Complex64; 4],
}

impl Unitary2 {
    /// Build from row-major entries, rejecting matrices with unitarity
    /// residual above [`UNITARITY_LIMIT`].
    pub fn new(entries: [Complex64; 4]) -> Result<Self> {
        let u = Self { entries };
        let residual = u.unitarity_residual();
        if !residual.is_finite() || residual > UNITARITY_LIMIT {
            return Err(Error::NotUnitary {
                residual,
                limit: UNITARITY_LIMIT,
            });
        }
        Ok(u)
    }

    pub(crate) fn from_entries_unchecked(entries: [Complex64; 4]) -> Self {
        Self { entries }
    }

    pub fn identity() -> Self {
        Self {
            entries: [
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
            ],
        }
    }

    /// Row-major entries `[m00, m01, m10, m11]`.
    pub fn entries(&self) -> [Complex64; 4] {
        self.entries
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Unitary2) -> Unitary2 {
        let a = &self.entries;
        let b = &rhs.entries;
        Unitary2 {
            entries: [
                a[0] * b[0] + a[1] * b[2],
                a[0] * b[1] + a[1] * b[3],
                a[2] * b[0] + a[3] * b[2],
                a[2] * b[1] + a[3] * b[3],
            ],
        }
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> Unitary2 {
        let a = &self.entries;
        Unitary2 {
            entries: [a[0].conj(), a[2].conj(), a[1].conj(), a[3].conj()],
        }
    }

    pub fn det(&self) -> Complex64 {
        self.entries[0] * self.entries[3] - self.entries[1] * self.entries[2]
    }

    /// Max-entry deviation of `U† U` from the identity.
    pub fn unitarity_residual(&self) -> f64 {
        let p = self.dagger().mul(self);
        let mut r: f64 = 0.0;
        for (k, e) in p.entries.iter().enumerate() {
            let target = if k == 0 || k == 3 { 1.0 } else { 0.0 };
            r = r.max((e - Complex64::new(target, 0.0)).norm());
        }
        r
    }

    fn check_unitary(&self, _name: &'static str) -> Result<()> {
        let residual = self.unitarity_residual();
        if residual > UNITARITY_LIMIT {
            return Err(Error::NotUnitary {
                residual,
                limit: UNITARITY_LIMIT,
            });
        }
        Ok(())
    }
}

/// Net magnetization direction; `|m| <= 1` for physical states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Thermal equilibrium: unit magnetization along +z.
    pub const fn equilibrium() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Transverse magnetization as `mx + i my`.
    pub fn transverse(&self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }
}

/// Propagator of a `theta` rotation about the axis `(cos phi, sin phi, 0)`.
///
/// Closed form of `exp(-i theta (cos phi Sx + sin phi Sy))`:
///
/// ```text
/// [ cos(theta/2),            -i sin(theta/2) e^{-i phi} ]
/// [ -i sin(theta/2) e^{i phi},            cos(theta/2)  ]
/// ```
pub fn rotation_unitary(theta: f64, phi: f64) -> Result<Unitary2> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("theta"));
    }
    if !phi.is_finite() {
        return Err(Error::NonFinite("phi"));
    }
    let (s, c) = (0.5 * theta).sin_cos();
    let (sp, cp) = phi.sin_cos();
    let mis = Complex64::new(0.0, -s);
    Ok(Unitary2::from_entries_unchecked([
        Complex64::new(c, 0.0),
        mis * Complex64::new(cp, -sp),
        mis * Complex64::new(cp, sp),
        Complex64::new(c, 0.0),
    ]))
}

/// Propagator of an `angle` rotation about an arbitrary axis (normalized
/// internally): `exp(-i angle (n . sigma) / 2)`.
pub fn axis_rotation_unitary(angle: f64, axis: [f64; 3]) -> Result<Unitary2> {
    if !angle.is_finite() || axis.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("axis rotation"));
    }
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm == 0.0 {
        if angle == 0.0 {
            return Ok(Unitary2::identity());
        }
        return Err(Error::invalid("axis", "zero axis with nonzero angle"));
    }
    let (nx, ny, nz) = (axis[0] / norm, axis[1] / norm, axis[2] / norm);
    let (s, c) = (0.5 * angle).sin_cos();
    Ok(Unitary2::from_entries_unchecked([
        Complex64::new(c, -s * nz),
        Complex64::new(-s * ny, -s * nx),
        Complex64::new(s * ny, -s * nx),
        Complex64::new(c, s * nz),
    ]))
}

/// Propagator of a `phi` rotation about +z: `diag(e^{-i phi/2}, e^{i phi/2})`.
pub fn rz_unitary(phi: f64) -> Result<Unitary2> {
    if !phi.is_finite() {
        return Err(Error::NonFinite("phi"));
    }
    let (s, c) = (0.5 * phi).sin_cos();
    Ok(Unitary2::from_entries_unchecked([
        Complex64::new(c, -s),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(c, s),
    ]))
}

/// Net propagator of a time-ordered list of unitaries.
///
/// The first list element acts first in time, so the result is the
/// right-to-left matrix product `U_n ... U_2 U_1`.
pub fn compose(sequence: &[Unitary2]) -> Result<Unitary2> {
    let (first, rest) = sequence
        .split_first()
        .ok_or(Error::Empty("unitary sequence"))?;
    let mut acc = *first;
    for u in rest {
        acc = u.mul(&acc);
    }
    Ok(acc)
}

/// Global-phase-invariant gate fidelity `|Tr(U† V)| / 2`, in `[0, 1]`.
pub fn gate_fidelity(u: &Unitary2, v: &Unitary2) -> Result<f64> {
    u.check_unitary("u")?;
    v.check_unitary("v")?;
    let m = u.dagger().mul(v);
    let e = m.entries();
    Ok(((e[0] + e[3]) * 0.5).norm().min(1.0))
}

/// Gate infidelity `1 - |Tr(U† V)| / 2`, computed without cancellation.
///
/// `U† V` is decomposed as `a I + b . sigma`; for unitary input
/// `|a|^2 + |b|^2 = 1`, so the infidelity equals
/// `|b|^2 / (1 + sqrt(1 - |b|^2))`, which stays accurate down to ~1e-30
/// where the direct `1 - fidelity` would be swamped by rounding.
pub fn gate_infidelity(u: &Unitary2, v: &Unitary2) -> Result<f64> {
    u.check_unitary("u")?;
    v.check_unitary("v")?;
    let m = u.dagger().mul(v);
    let e = m.entries();
    let bx = (e[1] + e[2]) * 0.5;
    let by = Complex64::i() * (e[1] - e[2]) * 0.5;
    let bz = (e[0] - e[3]) * 0.5;
    let b2 = (bx.norm_sqr() + by.norm_sqr() + bz.norm_sqr()).min(1.0);
    Ok(b2 / (1.0 + (1.0 - b2).sqrt()))
}

/// Rotate a Bloch vector: conjugates the density matrix `(I + m.sigma)/2`
/// by `U` and re-extracts the vector. Preserves the norm.
pub fn apply_to_bloch(u: &Unitary2, m: &BlochVector) -> Result<BlochVector> {
    u.check_unitary("u")?;
    // m.sigma = [[mz, mx - i my], [mx + i my, -mz]]
    let ms = Unitary2::from_entries_unchecked([
        Complex64::new(m.z, 0.0),
        Complex64::new(m.x, -m.y),
        Complex64::new(m.x, m.y),
        Complex64::new(-m.z, 0.0),
    ]);
    let out = u.mul(&ms).mul(&u.dagger());
    let e = out.entries();
    Ok(BlochVector::new(e[2].re, e[2].im, e[0].re))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Matrix exponential by scalar Taylor series; independent oracle for the
    /// closed-form rotation.
    fn exp_series(h: [Complex64; 4]) -> [Complex64; 4] {
        let mut term = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let mut acc = term;
        for n in 1..60 {
            let t = term;
            term = [
                (t[0] * h[0] + t[1] * h[2]) / n as f64,
                (t[0] * h[1] + t[1] * h[3]) / n as f64,
                (t[2] * h[0] + t[3] * h[2]) / n as f64,
                (t[2] * h[1] + t[3] * h[3]) / n as f64,
            ];
            for k in 0..4 {
                acc[k] += term[k];
            }
        }
        acc
    }

    fn rotation_oracle(theta: f64, phi: f64) -> [Complex64; 4] {
        // -i * theta * (cos(phi) sx + sin(phi) sy) / 2
        let f = Complex64::new(0.0, -0.5 * theta);
        let off = Complex64::new(phi.cos(), -phi.sin());
        exp_series([
            Complex64::new(0.0, 0.0),
            f * off,
            f * off.conj(),
            Complex64::new(0.0, 0.0),
        ])
    }

    fn max_entry_diff(a: &[Complex64; 4], b: &[Complex64; 4]) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_rotation_is_identity() {
        let u = rotation_unitary(0.0, 1.3).unwrap();
        assert_eq!(
            max_entry_diff(&u.entries(), &Unitary2::identity().entries()),
            0.0
        );
    }

    #[test]
    fn full_rotation_is_minus_identity() {
        let u = rotation_unitary(2.0 * PI, 0.0).unwrap();
        let minus_i = [
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ];
        assert!(max_entry_diff(&u.entries(), &minus_i) < 1e-15);
        // Acts as the identity on Bloch vectors.
        let m = apply_to_bloch(&u, &BlochVector::new(0.3, -0.4, 0.2)).unwrap();
        assert!((m.x - 0.3).abs() < 1e-14);
        assert!((m.y + 0.4).abs() < 1e-14);
        assert!((m.z - 0.2).abs() < 1e-14);
    }

    #[test]
    fn rotation_matches_series_oracle() {
        for &(theta, phi) in &[
            (0.5 * PI, 0.0),
            (PI, 0.3),
            (2.7, -1.1),
            (4.0 * PI, 0.54 * PI),
            (0.01, 2.0),
        ] {
            let u = rotation_unitary(theta, phi).unwrap();
            let oracle = rotation_oracle(theta, phi);
            assert!(
                max_entry_diff(&u.entries(), &oracle) < 1e-12,
                "theta={theta} phi={phi}"
            );
        }
    }

    #[test]
    fn half_pi_about_x_takes_z_to_minus_y() {
        let u = rotation_unitary(0.5 * PI, 0.0).unwrap();
        let m = apply_to_bloch(&u, &BlochVector::equilibrium()).unwrap();
        assert!(m.x.abs() < 1e-15);
        assert!((m.y + 1.0).abs() < 1e-15);
        assert!(m.z.abs() < 1e-15);
    }

    #[test]
    fn half_pi_about_y_takes_z_to_plus_x() {
        let u = rotation_unitary(0.5 * PI, 0.5 * PI).unwrap();
        let m = apply_to_bloch(&u, &BlochVector::equilibrium()).unwrap();
        assert!((m.x - 1.0).abs() < 1e-15);
        assert!(m.y.abs() < 1e-15);
        assert!(m.z.abs() < 1e-15);
    }

    #[test]
    fn pi_flip_inverts_z() {
        let u = rotation_unitary(PI, 0.0).unwrap();
        let m = apply_to_bloch(&u, &BlochVector::equilibrium()).unwrap();
        assert!((m.z + 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_preserves_bloch() {
        let m0 = BlochVector::new(0.1, 0.2, 0.97);
        let m = apply_to_bloch(&Unitary2::identity(), &m0).unwrap();
        assert_eq!((m.x, m.y, m.z), (m0.x, m0.y, m0.z));
    }

    #[test]
    fn compose_singleton_and_angle_additivity() {
        let u = rotation_unitary(0.7, 0.2).unwrap();
        let c = compose(&[u]).unwrap();
        assert_eq!(max_entry_diff(&c.entries(), &u.entries()), 0.0);

        let pi_x = rotation_unitary(PI, 0.0).unwrap();
        let two = compose(&[pi_x, pi_x]).unwrap();
        let full = rotation_unitary(2.0 * PI, 0.0).unwrap();
        assert!(max_entry_diff(&two.entries(), &full.entries()) < 1e-15);
    }

    #[test]
    fn compose_empty_errors() {
        assert!(matches!(compose(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn fidelity_self_and_orthogonal() {
        let u = rotation_unitary(1.234, 0.7).unwrap();
        assert!((gate_fidelity(&u, &u).unwrap() - 1.0).abs() < 1e-14);
        let pi_x = rotation_unitary(PI, 0.0).unwrap();
        assert!(gate_fidelity(&Unitary2::identity(), &pi_x).unwrap() < 1e-15);
    }

    #[test]
    fn fidelity_closed_form_for_coaxial_rotations() {
        // |cos(d_theta / 2)| with d_theta = 0.1 * pi/2.
        let u = rotation_unitary(0.5 * PI, 0.0).unwrap();
        let v = rotation_unitary(0.55 * PI, 0.0).unwrap();
        let f = gate_fidelity(&u, &v).unwrap();
        let expected = (0.05 * PI / 2.0).cos();
        assert!((f - expected).abs() < 1e-14);
        assert!((f - 0.99692).abs() < 1e-5);
    }

    #[test]
    fn fidelity_rejects_non_unitary() {
        let bad = Unitary2::from_entries_unchecked([
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        assert!(matches!(
            gate_fidelity(&bad, &Unitary2::identity()),
            Err(Error::NotUnitary { .. })
        ));
        assert!(Unitary2::new(bad.entries()).is_err());
    }

    #[test]
    fn infidelity_agrees_with_fidelity_at_moderate_error() {
        let u = rotation_unitary(0.5 * PI, 0.0).unwrap();
        let v = rotation_unitary(0.6 * PI, 0.1).unwrap();
        let f = gate_fidelity(&u, &v).unwrap();
        let inf = gate_infidelity(&u, &v).unwrap();
        assert!((inf - (1.0 - f)).abs() < 1e-12);
    }

    #[test]
    fn infidelity_resolves_tiny_errors() {
        let u = rotation_unitary(0.5 * PI, 0.0).unwrap();
        let v = rotation_unitary(0.5 * PI * (1.0 + 1e-7), 0.0).unwrap();
        let inf = gate_infidelity(&u, &v).unwrap();
        // 1 - cos(sigma theta / 2) = (sigma theta)^2 / 8 + O(sigma^4)
        let expected = (1e-7 * 0.5 * PI).powi(2) / 8.0;
        assert!((inf / expected - 1.0).abs() < 1e-6, "inf={inf:e}");
    }

    #[test]
    fn rotation_rejects_non_finite() {
        assert!(rotation_unitary(f64::NAN, 0.0).is_err());
        assert!(rotation_unitary(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn determinant_modulus_is_one() {
        let u = rotation_unitary(2.3, -0.9).unwrap();
        assert!((u.det().norm() - 1.0).abs() < 1e-14);
    }
}
