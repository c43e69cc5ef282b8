//! Two-level-system kernel: spin operators, member Hamiltonians, commutation
//! superoperators and step propagators with exact directional derivatives.
//!
//! Density matrices are vectorised by column stacking, `vec(ρ)[2j + i] = ρ[i][j]`,
//! under which the commutation superoperator of `H` is `I⊗H − Hᵀ⊗I` and the
//! conjugation map `ρ ↦ uρu†` is `ū⊗u`.
//!
//! The control operators are the spin-½ operators `σ̂ = σ/2` (Pauli matrix
//! over two), so a Hamiltonian `A·σ̂ₓ` applied for a time `T` rotates the
//! Bloch vector by the angle `A·T`.

use nalgebra::{Matrix2, Matrix4, SMatrix, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expm::expm_unchecked;

pub type Mat2 = Matrix2<Complex64>;
pub type Mat4 = Matrix4<Complex64>;
pub type Mat8 = SMatrix<Complex64, 8, 8>;

/// A 4×4 Liouville-space operator acting on column-stacked density matrices.
pub type Superoperator = Mat4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const HALF: Complex64 = Complex64::new(0.5, 0.0);
const HALF_I: Complex64 = Complex64::new(0.0, 0.5);

pub fn spin_x() -> Mat2 {
    Mat2::new(ZERO, HALF, HALF, ZERO)
}

pub fn spin_y() -> Mat2 {
    Mat2::new(ZERO, -HALF_I, HALF_I, ZERO)
}

pub fn spin_z() -> Mat2 {
    Mat2::new(HALF, ZERO, ZERO, -HALF)
}

/// Pauli matrices, used for Bloch-vector extraction.
pub fn pauli() -> [Mat2; 3] {
    let two = Complex64::from(2.0);
    [spin_x() * two, spin_y() * two, spin_z() * two]
}

/// Hermitian 2×2 Hamiltonian in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hamiltonian2(Mat2);

impl Hamiltonian2 {
    pub fn new(matrix: Mat2) -> Result<Self> {
        let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let defect = (matrix - matrix.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if defect > 1e-12 * scale.max(f64::MIN_POSITIVE) && defect > 0.0 {
            return Err(Error::invalid(format!(
                "Hamiltonian is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.0
    }
}

/// `ω·σ̂z + A·cos(φ)·σ̂x + A·sin(φ)·σ̂y` for one ensemble member.
pub fn member_hamiltonian(phase: f64, amplitude: f64, offset: f64) -> Result<Hamiltonian2> {
    if !(phase.is_finite() && amplitude.is_finite() && offset.is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite Hamiltonian parameters (phase {phase}, amplitude {amplitude}, offset {offset})"
        )));
    }
    Ok(Hamiltonian2(raw_hamiltonian(phase, amplitude, offset)))
}

#[inline]
pub(crate) fn raw_hamiltonian(phase: f64, amplitude: f64, offset: f64) -> Mat2 {
    let (s, c) = phase.sin_cos();
    spin_z() * Complex64::from(offset)
        + spin_x() * Complex64::from(amplitude * c)
        + spin_y() * Complex64::from(amplitude * s)
}

pub fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    Mat4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// `L = I⊗H − Hᵀ⊗I`, so that `L·vec(ρ) = vec(Hρ − ρH)`.
pub fn commutation_superoperator(h: &Hamiltonian2) -> Superoperator {
    commutator_of(h.matrix())
}

pub(crate) fn commutator_of(h: &Mat2) -> Superoperator {
    let ident = Mat2::identity();
    kron2(&ident, h) - kron2(&h.transpose(), &ident)
}

/// Superoperator of the conjugation map `ρ ↦ uρu†`.
pub fn conjugation_superoperator(u: &Mat2) -> Superoperator {
    kron2(&u.conjugate(), u)
}

pub fn vectorize(rho: &Mat2) -> Vector4<Complex64> {
    Vector4::new(rho[(0, 0)], rho[(1, 0)], rho[(0, 1)], rho[(1, 1)])
}

pub fn unvectorize(v: &Vector4<Complex64>) -> Mat2 {
    Mat2::new(v[0], v[2], v[1], v[3])
}

/// Hilbert–Schmidt inner product `⟨a|b⟩ = tr(a†b)`.
#[inline]
pub fn hs_inner<const D: usize>(a: &SMatrix<Complex64, D, D>, b: &SMatrix<Complex64, D, D>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Real part of `tr(a†·b·c)` without forming the product.
#[inline]
pub(crate) fn re_inner_product3(a: &Mat4, b: &Mat4, c: &Mat4) -> f64 {
    let bc = b * c;
    a.iter().zip(bc.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `exp(−i·L·dt)`.
pub fn step_propagator(l: &Superoperator, dt: f64) -> Result<Superoperator> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::invalid(format!("time step must be finite and non-negative, got {dt}")));
    }
    Ok(expm_unchecked(&(l * Complex64::new(0.0, -dt))))
}

/// Step propagator together with its derivatives along `σ̂x` and `σ̂y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDerivatives {
    pub propagator: Superoperator,
    pub d_dx: Superoperator,
    pub d_dy: Superoperator,
}

/// Propagator `exp(−i·L·dt)` and its directional derivative along `dir`,
/// read off the blocks of
///
/// ```text
/// exp(−i·dt·[L  dir])  =  [P  ∂P]
///           [0   L ]      [0   P]
/// ```
///
/// The derivative is linear in `dir`, so a combination of directions costs
/// a single exponential.
pub fn step_with_direction(
    l: &Superoperator,
    dir: &Superoperator,
    dt: f64,
) -> Result<(Superoperator, Superoperator)> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::invalid(format!("time step must be finite and non-negative, got {dt}")));
    }
    Ok(block_exponential(l, dir, dt))
}

#[inline]
pub(crate) fn block_exponential(l: &Superoperator, dir: &Superoperator, dt: f64) -> (Superoperator, Superoperator) {
    let scale = Complex64::new(0.0, -dt);
    let mut block = Mat8::zeros();
    let ls = l * scale;
    block.fixed_view_mut::<4, 4>(0, 0).copy_from(&ls);
    block.fixed_view_mut::<4, 4>(4, 4).copy_from(&ls);
    block.fixed_view_mut::<4, 4>(0, 4).copy_from(&(dir * scale));
    let e = expm_unchecked(&block);
    (e.fixed_view::<4, 4>(0, 0).into_owned(), e.fixed_view::<4, 4>(0, 4).into_owned())
}

/// Directional derivatives along `dx` and `dy` (the commutation
/// superoperators of `σ̂x` and `σ̂y`), one block exponential per direction.
pub fn step_with_derivatives(
    l: &Superoperator,
    dx: &Superoperator,
    dy: &Superoperator,
    dt: f64,
) -> Result<StepDerivatives> {
    let (propagator, d_dx) = step_with_direction(l, dx, dt)?;
    let (_, d_dy) = step_with_direction(l, dy, dt)?;
    Ok(StepDerivatives { propagator, d_dx, d_dy })
}

/// Commutation superoperators of the two control operators `(σ̂x, σ̂y)`.
pub fn control_directions() -> (Superoperator, Superoperator) {
    (commutator_of(&spin_x()), commutator_of(&spin_y()))
}

/// Bloch vector `(tr σx ρ, tr σy ρ, tr σz ρ)` of a density matrix.
pub fn bloch_of(rho: &Mat2) -> [f64; 3] {
    let [px, py, pz] = pauli();
    [
        (px * rho).trace().re,
        (py * rho).trace().re,
        (pz * rho).trace().re,
    ]
}

/// Density matrix `(I + r·σ)/2`.
pub fn density_of(r: [f64; 3]) -> Mat2 {
    let [px, py, pz] = pauli();
    (Mat2::identity() + px * Complex64::from(r[0]) + py * Complex64::from(r[1]) + pz * Complex64::from(r[2]))
        * HALF
}
