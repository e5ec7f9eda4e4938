//! Gate matrices for the small vocabulary the pipelines need.

use num_complex::Complex;

use crate::scalar::Scalar;

/// Single-qubit Pauli operator tag.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix<T: Scalar>(self) -> [[Complex<T>; 2]; 2] {
        let o = Complex::from(T::one());
        let z = Complex::<T>::default();
        let i = Complex::new(T::zero(), T::one());
        match self {
            Pauli::I => [[o, z], [z, o]],
            Pauli::X => [[z, o], [o, z]],
            Pauli::Y => [[z, -i], [i, z]],
            Pauli::Z => [[o, z], [z, -o]],
        }
    }
}

/// A 1- or 2-qubit unitary in dense form.
#[derive(Clone, Debug)]
pub enum Unitary<T: Scalar> {
    One([[Complex<T>; 2]; 2]),
    Two([[Complex<T>; 4]; 4]),
}

impl<T: Scalar> Unitary<T> {
    pub fn arity(&self) -> usize {
        match self {
            Unitary::One(_) => 1,
            Unitary::Two(_) => 2,
        }
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex<T> {
        match self {
            Unitary::One(m) => m[r][c],
            Unitary::Two(m) => m[r][c],
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.arity()
    }
}

pub fn h<T: Scalar>() -> Unitary<T> {
    let r = Complex::from(T::one() / T::of(2.0).sqrt());
    Unitary::One([[r, r], [r, -r]])
}

pub fn x<T: Scalar>() -> Unitary<T> {
    Unitary::One(Pauli::X.matrix())
}

pub fn y<T: Scalar>() -> Unitary<T> {
    Unitary::One(Pauli::Y.matrix())
}

pub fn z<T: Scalar>() -> Unitary<T> {
    Unitary::One(Pauli::Z.matrix())
}

/// CNOT with the first target as control, second as target.
pub fn cnot<T: Scalar>() -> Unitary<T> {
    let o = Complex::from(T::one());
    let z = Complex::<T>::default();
    Unitary::Two([
        [o, z, z, z],
        [z, o, z, z],
        [z, z, z, o],
        [z, z, o, z],
    ])
}

/// Tensor of two single-qubit Paulis as a two-qubit unitary.
pub fn pauli_pair<T: Scalar>(a: Pauli, b: Pauli) -> Unitary<T> {
    let ma = a.matrix::<T>();
    let mb = b.matrix::<T>();
    let mut m = [[Complex::<T>::default(); 4]; 4];
    for ra in 0..2 {
        for ca in 0..2 {
            for rb in 0..2 {
                for cb in 0..2 {
                    m[ra * 2 + rb][ca * 2 + cb] = ma[ra][ca] * mb[rb][cb];
                }
            }
        }
    }
    Unitary::Two(m)
}
