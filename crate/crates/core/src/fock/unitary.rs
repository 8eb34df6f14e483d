use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Elementwise tolerance on `U†U - I` accepted as unitary.
pub const UNITARY_TOL: f64 = 1e-10;

/// A single-particle mode transformation.
///
/// Column `k` holds the image of the creation operator of mode `k`:
/// `a†_k -> Σ_j U[j, k] a†_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeUnitary {
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let deviation = unitarity_deviation(&matrix);
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dimension: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dimension, dimension),
        }
    }

    /// The balanced beamsplitter `(1/√2) [[1, i], [i, 1]]`.
    pub fn balanced_beamsplitter() -> Self {
        Self::beamsplitter(0.5, 0.0)
    }

    /// Two-mode beamsplitter with power reflectivity `r` and coupling phase `phase`:
    /// `[[√(1-r), i e^{-iφ} √r], [i e^{iφ} √r, √(1-r)]]`.
    pub fn beamsplitter(reflectivity: f64, phase: f64) -> Self {
        Self {
            matrix: beamsplitter_block(reflectivity, phase),
        }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    /// `next · self`: apply `self` first, then `next`.
    pub fn then(&self, next: &ModeUnitary) -> Result<ModeUnitary> {
        if next.dimension() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: next.dimension(),
            });
        }
        Ok(ModeUnitary {
            matrix: &next.matrix * &self.matrix,
        })
    }

    pub fn adjoint(&self) -> ModeUnitary {
        ModeUnitary {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    /// Sparse column view: for each input mode, the output modes it feeds.
    pub(crate) fn columns(&self) -> Vec<Vec<(usize, Complex64)>> {
        let n = self.dimension();
        (0..n)
            .map(|col| {
                (0..n)
                    .filter_map(|row| {
                        let value = self.matrix[(row, col)];
                        (value.norm_sqr() > 0.0).then_some((row, value))
                    })
                    .collect()
            })
            .collect()
    }
}

pub(crate) fn beamsplitter_block(reflectivity: f64, phase: f64) -> DMatrix<Complex64> {
    let t = Complex64::new((1.0 - reflectivity).max(0.0).sqrt(), 0.0);
    let r = reflectivity.max(0.0).sqrt();
    let i = Complex64::i();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            t,
            i * Complex64::from_polar(r, -phase),
            i * Complex64::from_polar(r, phase),
            t,
        ],
    )
}

/// Largest entry of `|U†U - I|`. Accumulates row by row over nonzeros, which keeps
/// sparse interferometer matrices cheap.
pub fn unitarity_deviation(matrix: &DMatrix<Complex64>) -> f64 {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return f64::INFINITY;
    }
    let mut product = DMatrix::<Complex64>::identity(n, n).map(|c| -c);
    let mut nonzero = Vec::with_capacity(n);
    for row in 0..n {
        nonzero.clear();
        nonzero.extend((0..n).filter(|&col| matrix[(row, col)].norm_sqr() > 0.0));
        for &j in &nonzero {
            let left = matrix[(row, j)].conj();
            for &k in &nonzero {
                product[(j, k)] += left * matrix[(row, k)];
            }
        }
    }
    product.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// One two-mode factor of a Givens factorization.
#[derive(Clone, Debug)]
pub struct TwoModeFactor {
    pub modes: (usize, usize),
    /// Mode transformation restricted to `(modes.0, modes.1)`, same column convention as [`ModeUnitary`].
    pub block: [[Complex64; 2]; 2],
}

/// `U = F_1 · F_2 ⋯ F_K · D` with `F_k` two-mode factors and `D` diagonal.
#[derive(Clone, Debug)]
pub struct GivensFactorization {
    pub factors: Vec<TwoModeFactor>,
    pub phases: Vec<Complex64>,
}

/// Reduce `U` to a diagonal by nulling sub-diagonal entries with adjacent-row rotations.
pub fn givens_factorize(u: &ModeUnitary) -> GivensFactorization {
    let n = u.dimension();
    let mut m = u.matrix().clone();
    let mut rotations: Vec<(usize, [[Complex64; 2]; 2])> = Vec::new();
    for col in 0..n {
        for row in (col + 1..n).rev() {
            let x = m[(row - 1, col)];
            let y = m[(row, col)];
            if y.norm() == 0.0 {
                continue;
            }
            let rho = (x.norm_sqr() + y.norm_sqr()).sqrt();
            // G (x, y)ᵀ = (ρ, 0)ᵀ
            let g = [[x.conj() / rho, y.conj() / rho], [-y / rho, x / rho]];
            for c in 0..n {
                let a = m[(row - 1, c)];
                let b = m[(row, c)];
                m[(row - 1, c)] = g[0][0] * a + g[0][1] * b;
                m[(row, c)] = g[1][0] * a + g[1][1] * b;
            }
            rotations.push((row - 1, g));
        }
    }
    // G_K ⋯ G_1 U = D  =>  U = G_1† ⋯ G_K† D
    let factors = rotations
        .into_iter()
        .map(|(top, g)| TwoModeFactor {
            modes: (top, top + 1),
            block: [
                [g[0][0].conj(), g[1][0].conj()],
                [g[0][1].conj(), g[1][1].conj()],
            ],
        })
        .collect();
    let phases = (0..n).map(|k| m[(k, k)]).collect();
    GivensFactorization { factors, phases }
}
