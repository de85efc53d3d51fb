//! Natural adaptation law on the SPD image of inertial parameters.
//!
//! A 10-dim inertial parameter vector `phi = [m, h, vecI]` maps linearly
//! and bijectively onto a symmetric 4x4 matrix
//!
//! ```text
//! L = | 0.5 tr(I) 1 - I   h |
//!     | h^T               m |
//! ```
//!
//! which is positive definite exactly when the parameters are physically
//! consistent (realizable by a nonnegative mass density). Adaptation runs
//! as a flow on L,
//!
//! ```text
//! dL/dt = (1/gamma) L S L
//! ```
//!
//! with a single scalar gain and a symmetric drive matrix `S` that is the
//! dual image of the regressor-error product `s = W^T e` under the map:
//! `tr(f(phi) S) = phi . s` for every direction `phi`. The flow preserves
//! symmetry exactly and positive definiteness whenever the initial estimate
//! is consistent; the discrete step guards the latter by backtracking.
//!
//! The log-det Bregman divergence between true and estimated L is the
//! adaptive term of the accompanying function used by the diagnostics.

use std::sync::OnceLock;

use nalgebra::{Matrix3, Matrix4, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VdcError};

/// 10-dim inertial parameters: mass, first mass moment `h = m * com`, and
/// the rotational inertia about the body frame origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialParams {
    pub mass: f64,
    pub first_moment: [f64; 3],
    /// `[Ixx, Iyy, Izz, Ixy, Iyz, Ixz]` about the body frame origin.
    pub inertia: [f64; 6],
}

impl InertialParams {
    pub fn zero() -> Self {
        Self {
            mass: 0.0,
            first_moment: [0.0; 3],
            inertia: [0.0; 6],
        }
    }

    pub fn from_vector(v: &SVector<f64, 10>) -> Self {
        Self {
            mass: v[0],
            first_moment: [v[1], v[2], v[3]],
            inertia: [v[4], v[5], v[6], v[7], v[8], v[9]],
        }
    }

    pub fn to_vector(&self) -> SVector<f64, 10> {
        SVector::<f64, 10>::from_column_slice(&[
            self.mass,
            self.first_moment[0],
            self.first_moment[1],
            self.first_moment[2],
            self.inertia[0],
            self.inertia[1],
            self.inertia[2],
            self.inertia[3],
            self.inertia[4],
            self.inertia[5],
        ])
    }

    pub fn h(&self) -> Vector3<f64> {
        Vector3::from(self.first_moment)
    }

    /// Rotational inertia matrix about the frame origin.
    pub fn inertia_matrix(&self) -> Matrix3<f64> {
        let [ixx, iyy, izz, ixy, iyz, ixz] = self.inertia;
        Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
    }

    /// Physically consistent iff the SPD image is positive definite.
    pub fn is_physically_consistent(&self) -> bool {
        nal_map(self).is_positive_definite()
    }
}

/// Symmetric 4x4 image of an inertial parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LMatrix(Matrix4<f64>);

const SYMMETRY_TOL: f64 = 1e-12;

impl LMatrix {
    /// Rejects inputs whose asymmetry exceeds 1e-12 relative to scale.
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        let residual = (m - m.transpose()).norm();
        if residual > SYMMETRY_TOL * (1.0 + m.norm()) {
            return Err(VdcError::NotSymmetric { residual });
        }
        // Store the exactly symmetric part so downstream identities are exact.
        Ok(Self((m + m.transpose()) * 0.5))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.symmetric_eigenvalues().min()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.cholesky().is_some()
    }
}

/// Lemma-style linear bijection from parameters to the symmetric 4x4 image.
pub fn nal_map(phi: &InertialParams) -> LMatrix {
    let ibar = phi.inertia_matrix();
    let sigma = Matrix3::identity() * (0.5 * ibar.trace()) - ibar;
    let h = phi.h();
    let mut l = Matrix4::zeros();
    l.fixed_view_mut::<3, 3>(0, 0).copy_from(&sigma);
    l.fixed_view_mut::<3, 1>(0, 3).copy_from(&h);
    l.fixed_view_mut::<1, 3>(3, 0).copy_from(&h.transpose());
    l[(3, 3)] = phi.mass;
    LMatrix(l)
}

/// Inverse of [`nal_map`]: `I = tr(Sigma) 1 - Sigma`.
pub fn nal_unmap(l: &LMatrix) -> InertialParams {
    let m = l.matrix();
    let sigma: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
    let ibar = Matrix3::identity() * sigma.trace() - sigma;
    InertialParams {
        mass: m[(3, 3)],
        first_moment: [m[(0, 3)], m[(1, 3)], m[(2, 3)]],
        inertia: [
            ibar[(0, 0)],
            ibar[(1, 1)],
            ibar[(2, 2)],
            ibar[(0, 1)],
            ibar[(1, 2)],
            ibar[(0, 2)],
        ],
    }
}

/// Symmetric 4x4 basis element for index `k` over the upper triangle,
/// ordered (0,0),(1,1),(2,2),(3,3),(0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
fn sym_basis(k: usize) -> Matrix4<f64> {
    const IDX: [(usize, usize); 10] = [
        (0, 0),
        (1, 1),
        (2, 2),
        (3, 3),
        (0, 1),
        (0, 2),
        (0, 3),
        (1, 2),
        (1, 3),
        (2, 3),
    ];
    let (i, j) = IDX[k];
    let mut e = Matrix4::zeros();
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

fn phi_basis(k: usize) -> InertialParams {
    let mut v = SVector::<f64, 10>::zeros();
    v[k] = 1.0;
    InertialParams::from_vector(&v)
}

/// Inverse of the 10x10 duality system `tr(f(e_k) E_l) c_l = s_k`,
/// precomputed once.
fn duality_inverse() -> &'static SMatrix<f64, 10, 10> {
    static INV: OnceLock<SMatrix<f64, 10, 10>> = OnceLock::new();
    INV.get_or_init(|| {
        let mut a = SMatrix::<f64, 10, 10>::zeros();
        for k in 0..10 {
            let fk = nal_map(&phi_basis(k));
            for l in 0..10 {
                a[(k, l)] = (fk.matrix() * sym_basis(l)).trace();
            }
        }
        a.try_inverse().expect("duality system is invertible")
    })
}

/// The unique symmetric matrix `S` with `tr(f(phi) S) = phi . s` for all
/// `phi`, given `s = W^T e`.
pub fn dual_s_matrix(s: &SVector<f64, 10>) -> LMatrix {
    let coeffs = duality_inverse() * s;
    let mut out = Matrix4::zeros();
    for (l, c) in coeffs.iter().enumerate() {
        out += sym_basis(l) * *c;
    }
    LMatrix(out)
}

/// Floor on the minimum eigenvalue below which a discrete adaptation step
/// is considered to have left the consistent set.
pub const PD_GUARD_EPS: f64 = 1e-9;

/// One explicit Euler step of the SPD flow, `L' = L + (dt/gamma) L S L`,
/// with a backtracking guard: the effective step is halved until the result
/// stays positive definite. Fails only if even a vanishing step does not,
/// which indicates dt is far too large for the gain.
pub fn nal_update(l_hat: &LMatrix, s: &LMatrix, gain: f64, dt: f64) -> Result<LMatrix> {
    assert!(gain > 0.0 && dt > 0.0);
    let l = l_hat.matrix();
    let delta = l * s.matrix() * l * (dt / gain);
    let mut scale = 1.0;
    for _ in 0..60 {
        let candidate = l + delta * scale;
        let sym = (candidate + candidate.transpose()) * 0.5;
        if sym.symmetric_eigenvalues().min() > PD_GUARD_EPS {
            return Ok(LMatrix(sym));
        }
        scale *= 0.5;
    }
    Err(VdcError::AdaptationStepFailed)
}

/// Log-det Bregman divergence `D(L || L_hat)`; nonnegative, zero iff equal.
pub fn bregman_divergence(l_true: &LMatrix, l_hat: &LMatrix) -> Result<f64> {
    let chol_hat = l_hat.matrix().cholesky().ok_or(VdcError::NotPositiveDefinite {
        min_eig: l_hat.min_eigenvalue(),
    })?;
    let chol_true = l_true.matrix().cholesky().ok_or(VdcError::NotPositiveDefinite {
        min_eig: l_true.min_eigenvalue(),
    })?;
    let log_det_hat = chol_hat.determinant().ln();
    let log_det_true = chol_true.determinant().ln();
    let trace_term = chol_hat.solve(l_true.matrix()).trace();
    Ok(log_det_hat - log_det_true + trace_term - 4.0)
}

/// Per-subsystem adaptation state: one SPD estimate per rigid body and one
/// per actuator, sharing a single gain.
#[derive(Debug, Clone)]
pub struct AdaptationState {
    pub body: Vec<LMatrix>,
    pub actuator: Vec<LMatrix>,
    pub gain: f64,
}

impl AdaptationState {
    pub fn new(body: Vec<LMatrix>, actuator: Vec<LMatrix>, gain: f64) -> Result<Self> {
        // A non-positive gain silently reverses the adaptation flow; reject
        // it here so the fault surfaces as a diagnosable error instead of a
        // slow divergence.
        if gain <= 0.0 {
            return Err(VdcError::Config(format!(
                "adaptation gain must be positive, got {gain}"
            )));
        }
        for l in body.iter().chain(actuator.iter()) {
            if !l.is_positive_definite() {
                return Err(VdcError::NotPositiveDefinite {
                    min_eig: l.min_eigenvalue(),
                });
            }
        }
        Ok(Self {
            body,
            actuator,
            gain,
        })
    }

    pub fn body_params(&self, i: usize) -> InertialParams {
        nal_unmap(&self.body[i])
    }

    pub fn actuator_params(&self, i: usize) -> InertialParams {
        nal_unmap(&self.actuator[i])
    }
}

/// Multiplicatively perturbs true parameters and projects the image back to
/// the consistent set. Used to seed adaptation with a known parameter error.
pub fn perturbed_consistent(
    phi_true: &InertialParams,
    fraction: f64,
    rng: &mut impl rand::Rng,
) -> LMatrix {
    let v = phi_true.to_vector();
    let mut out = SVector::<f64, 10>::zeros();
    for k in 0..10 {
        let factor = 1.0 + fraction * (rng.gen::<f64>() * 2.0 - 1.0);
        out[k] = v[k] * factor;
    }
    // Project by shrinking the perturbation toward the (consistent) truth
    // until the image stays comfortably positive definite; a hard eigenvalue
    // floor would seed near-singular estimates whose inverse-scaled Bregman
    // terms dwarf everything else.
    let l_true = nal_map(phi_true);
    let target = 0.2 * l_true.min_eigenvalue();
    let delta = nal_map(&InertialParams::from_vector(&out)).matrix() - l_true.matrix();
    let mut beta = 1.0;
    for _ in 0..60 {
        let candidate = LMatrix(l_true.matrix() + delta * beta);
        if candidate.min_eigenvalue() > target {
            return candidate;
        }
        beta *= 0.5;
    }
    l_true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_sphere_params() -> InertialParams {
        InertialParams {
            mass: 1.0,
            first_moment: [0.0; 3],
            inertia: [1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
        }
    }

    #[test]
    fn map_of_identity_inertia() {
        let l = nal_map(&unit_sphere_params());
        let expected = Matrix4::from_diagonal(&nalgebra::Vector4::new(0.5, 0.5, 0.5, 1.0));
        assert_relative_eq!(*l.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn map_of_zero_is_zero() {
        let l = nal_map(&InertialParams::zero());
        assert_eq!(*l.matrix(), Matrix4::zeros());
    }

    #[test]
    fn unmap_of_diagonal_example() {
        let l = LMatrix::new(Matrix4::from_diagonal(&nalgebra::Vector4::new(0.5, 0.5, 0.5, 1.0)))
            .unwrap();
        let phi = nal_unmap(&l);
        assert_relative_eq!(phi.to_vector(), unit_sphere_params().to_vector(), epsilon = 1e-15);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let mut m = Matrix4::identity();
        m[(0, 1)] = 0.5;
        assert!(LMatrix::new(m).is_err());
    }

    #[test]
    fn dual_s_of_zero_is_zero() {
        let s = dual_s_matrix(&SVector::<f64, 10>::zeros());
        assert_eq!(*s.matrix(), Matrix4::zeros());
    }

    #[test]
    fn update_with_zero_drive_is_identity() {
        let l = nal_map(&unit_sphere_params());
        let s = LMatrix::new(Matrix4::zeros()).unwrap();
        let l2 = nal_update(&l, &s, 10.0, 1e-3).unwrap();
        assert_relative_eq!(*l2.matrix(), *l.matrix(), epsilon = 1e-15);
    }

    #[test]
    fn bregman_closed_form() {
        let l = LMatrix::new(Matrix4::identity()).unwrap();
        let l_hat = LMatrix::new(Matrix4::identity() * 2.0).unwrap();
        let d = bregman_divergence(&l, &l_hat).unwrap();
        assert_relative_eq!(d, 4.0 * 2.0_f64.ln() - 2.0, epsilon = 1e-12);
    }

    #[test]
    fn bregman_zero_on_equal() {
        let l = nal_map(&unit_sphere_params());
        assert_relative_eq!(bregman_divergence(&l, &l).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn bregman_rejects_non_pd() {
        let bad = LMatrix::new(Matrix4::from_diagonal(&nalgebra::Vector4::new(
            -1.0, 1.0, 1.0, 1.0,
        )))
        .unwrap();
        let good = LMatrix::new(Matrix4::identity()).unwrap();
        assert!(bregman_divergence(&bad, &good).is_err());
        assert!(bregman_divergence(&good, &bad).is_err());
    }

    /// Lemma-2 derivative identity against finite differences of D itself.
    #[test]
    fn bregman_derivative_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l_true = random_pd(&mut rng);
        let l_hat = random_pd(&mut rng);
        // An arbitrary symmetric flow direction for L_hat.
        let dir = {
            let m: Matrix4<f64> = random_sym(&mut rng);
            m
        };
        let h = 1e-7;
        let lh = l_hat.matrix();
        let d_plus = bregman_divergence(&l_true, &LMatrix::new(lh + dir * h).unwrap()).unwrap();
        let d_minus = bregman_divergence(&l_true, &LMatrix::new(lh - dir * h).unwrap()).unwrap();
        let fd = (d_plus - d_minus) / (2.0 * h);
        let inv = lh.try_inverse().unwrap();
        let analytic = (inv * dir * inv * (lh - l_true.matrix())).trace();
        assert_relative_eq!(fd, analytic, epsilon = 1e-6, max_relative = 1e-6);
    }

    fn random_sym(rng: &mut impl rand::Rng) -> Matrix4<f64> {
        let m = Matrix4::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0);
        (m + m.transpose()) * 0.5
    }

    fn random_pd(rng: &mut impl rand::Rng) -> LMatrix {
        let m = Matrix4::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0);
        LMatrix::new(m * m.transpose() + Matrix4::identity() * 0.5).unwrap()
    }

    #[test]
    fn round_trip_exact_on_random_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let v = SVector::<f64, 10>::from_fn(|_, _| rng.gen::<f64>() * 4.0 - 2.0);
            let phi = InertialParams::from_vector(&v);
            let back = nal_unmap(&nal_map(&phi));
            assert_relative_eq!(back.to_vector(), v, epsilon = 1e-14);
        }
    }

    #[test]
    fn dual_s_defining_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s_vec = SVector::<f64, 10>::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let s_mat = dual_s_matrix(&s_vec);
            for _ in 0..10 {
                let phi_dir = SVector::<f64, 10>::from_fn(|_, _| rng.gen::<f64>() * 2.0 - 1.0);
                let lhs = (nal_map(&InertialParams::from_vector(&phi_dir)).matrix()
                    * s_mat.matrix())
                .trace();
                let rhs = phi_dir.dot(&s_vec);
                assert!(
                    (lhs - rhs).abs() <= 1e-11 * (1.0 + rhs.abs()),
                    "duality violated: {lhs} vs {rhs}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn bregman_nonnegative(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_pd(&mut rng);
            let b = random_pd(&mut rng);
            let d = bregman_divergence(&a, &b).unwrap();
            prop_assert!(d >= -1e-12);
        }

        #[test]
        fn update_preserves_symmetry_and_pd(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = random_pd(&mut rng);
            let s = LMatrix::new(random_sym(&mut rng)).unwrap();
            let l2 = nal_update(&l, &s, 10.0, 1e-3).unwrap();
            let m = l2.matrix();
            prop_assert!((m - m.transpose()).norm() == 0.0);
            prop_assert!(l2.min_eigenvalue() > 0.0);
        }
    }
}
