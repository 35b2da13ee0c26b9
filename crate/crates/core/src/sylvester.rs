//! Sylvester equation solvers.
//!
//! Three routes, chosen by structure and size:
//! - dense Kronecker vectorization for small generic problems,
//! - blockwise decoupling when both coefficient matrices are in the
//!   rotation/zero block-diagonal form of the interpolation designs,
//! - shifted complex solves against the full-order A when only the
//!   small side is structured (the n-by-nu equations).

use nalgebra::{Complex, DMatrix};
use num_complex::Complex64;

use crate::design::Block;
use crate::error::{Error, Result};

/// Largest total unknown count accepted by the Kronecker route.
pub const KRON_MAX_UNKNOWNS: usize = 20_000;

fn block_matrix(b: &Block) -> DMatrix<f64> {
    match b {
        Block::Pair(w) => DMatrix::from_row_slice(2, 2, &[0.0, *w, -*w, 0.0]),
        Block::Zero => DMatrix::zeros(1, 1),
    }
}

/// Solve `A X - X B = W` by Kronecker vectorization
/// `(I (x) A - B^T (x) I) vec X = vec W`.
pub fn solve_kron(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (na, nb) = (a.nrows(), b.nrows());
    assert_eq!(a.ncols(), na);
    assert_eq!(b.ncols(), nb);
    assert_eq!((w.nrows(), w.ncols()), (na, nb));
    if na * nb > KRON_MAX_UNKNOWNS {
        return Err(Error::InvalidArgument(format!(
            "Kronecker solve limited to {KRON_MAX_UNKNOWNS} unknowns, got {}",
            na * nb
        )));
    }
    let eye_a = DMatrix::<f64>::identity(na, na);
    let eye_b = DMatrix::<f64>::identity(nb, nb);
    let big = eye_b.kronecker(a) - b.transpose().kronecker(&eye_a);
    let rhs = DMatrix::from_column_slice(na * nb, 1, w.as_slice());
    let x = big.lu().solve(&rhs).ok_or(Error::SolveFailed {
        context: "Kronecker Sylvester solve",
    })?;
    Ok(DMatrix::from_column_slice(na, nb, x.as_slice()))
}

/// Solve `Q X - X S = W` where both Q and S are block-diagonal in the
/// rotation/zero form. Decouples into independent solves of at most 4
/// unknowns per block pair.
pub fn solve_block_diag(
    q_blocks: &[Block],
    s_blocks: &[Block],
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let nq: usize = q_blocks.iter().map(Block::dim).sum();
    let ns: usize = s_blocks.iter().map(Block::dim).sum();
    assert_eq!((w.nrows(), w.ncols()), (nq, ns));
    let mut x = DMatrix::zeros(nq, ns);
    let mut ro = 0;
    for qb in q_blocks {
        let qm = block_matrix(qb);
        let mut co = 0;
        for sb in s_blocks {
            let sm = block_matrix(sb);
            // shared eigenvalue => singular block equation
            let clash = qb
                .eigenvalues()
                .iter()
                .any(|e| sb.eigenvalues().iter().any(|f| (e - f).norm() < 1e-12));
            if clash {
                return Err(Error::SpectrumOverlap {
                    value: qb.eigenvalues()[0],
                });
            }
            let wij = w.view((ro, co), (qb.dim(), sb.dim())).into_owned();
            let xij = solve_kron(&qm, &sm, &wij)?;
            x.view_mut((ro, co), (qb.dim(), sb.dim())).copy_from(&xij);
            co += sb.dim();
        }
        ro += qb.dim();
    }
    Ok(x)
}

/// Solve `A X + G = X S` for X in R^{n x nu}, with S block-diagonal in
/// the rotation/zero form. Each pair block reduces to one shifted
/// complex solve `(iw I - A) z = g_a + i g_b`; each zero block to a real
/// solve `A x = -g`. Requires `sigma(A)` disjoint from `sigma(S)`.
pub fn solve_shifted(a: &DMatrix<f64>, g: &DMatrix<f64>, s_blocks: &[Block]) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let nu: usize = s_blocks.iter().map(Block::dim).sum();
    assert_eq!((g.nrows(), g.ncols()), (n, nu));
    let mut x = DMatrix::zeros(n, nu);
    let mut off = 0;
    for b in s_blocks {
        match b {
            Block::Zero => {
                let rhs = -g.column(off).into_owned();
                let col = a.clone().lu().solve(&rhs).ok_or(Error::SolveFailed {
                    context: "shifted Sylvester solve (zero block)",
                })?;
                x.set_column(off, &col);
            }
            Block::Pair(w) => {
                let mut m =
                    DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex::new(-a[(i, j)], 0.0));
                for i in 0..n {
                    m[(i, i)] += Complex64::new(0.0, *w);
                }
                let rhs = DMatrix::<Complex64>::from_fn(n, 1, |i, _| {
                    Complex::new(g[(i, off)], g[(i, off + 1)])
                });
                let z = m.lu().solve(&rhs).ok_or(Error::SolveFailed {
                    context: "shifted Sylvester solve (pair block)",
                })?;
                for i in 0..n {
                    x[(i, off)] = z[(i, 0)].re;
                    x[(i, off + 1)] = z[(i, 0)].im;
                }
            }
        }
        off += b.dim();
    }
    Ok(x)
}

/// Residual norm of `A X - X B - W`.
pub fn residual(a: &DMatrix<f64>, b: &DMatrix<f64>, w: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    (a * x - x * b - w).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kron_scalar_case() {
        // -X = 2 - 3  =>  X = 1  (Q=0, S=1, W = 2-3)
        let q = DMatrix::from_element(1, 1, 0.0);
        let s = DMatrix::from_element(1, 1, 1.0);
        let w = DMatrix::from_element(1, 1, -1.0);
        let x = solve_kron(&q, &s, &w).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn block_diag_zero_rhs_gives_zero() {
        let qb = [Block::Pair(2.0), Block::Zero];
        let sb = [Block::Pair(1.0)];
        let w = DMatrix::zeros(3, 2);
        let x = solve_block_diag(&qb, &sb, &w).unwrap();
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn block_diag_matches_kron() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let qb = [Block::Pair(2.0), Block::Zero, Block::Pair(5.0)];
        let sb = [Block::Pair(1.0), Block::Pair(3.0)];
        let q = DMatrix::from_fn(5, 5, |_, _| 0.0)
            + {
                let mut m = DMatrix::zeros(5, 5);
                m[(0, 1)] = 2.0;
                m[(1, 0)] = -2.0;
                m[(3, 4)] = 5.0;
                m[(4, 3)] = -5.0;
                m
            };
        let s = {
            let mut m = DMatrix::zeros(4, 4);
            m[(0, 1)] = 1.0;
            m[(1, 0)] = -1.0;
            m[(2, 3)] = 3.0;
            m[(3, 2)] = -3.0;
            m
        };
        let w = DMatrix::from_fn(5, 4, |_, _| rng.gen_range(-1.0..1.0));
        let x_block = solve_block_diag(&qb, &sb, &w).unwrap();
        let x_kron = solve_kron(&q, &s, &w).unwrap();
        assert!((&x_block - &x_kron).norm() <= 1e-12 * x_kron.norm());
        assert!(residual(&q, &s, &w, &x_block) <= 1e-12 * (q.norm() + s.norm()) * x_block.norm().max(1.0));
    }

    #[test]
    fn block_diag_detects_common_eigenvalue() {
        let qb = [Block::Pair(2.0)];
        let sb = [Block::Pair(2.0)];
        let w = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(
            solve_block_diag(&qb, &sb, &w),
            Err(Error::SpectrumOverlap { .. })
        ));
    }

    #[test]
    fn shifted_matches_kron_on_random_system() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 7;
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        for i in 0..n {
            a[(i, i)] -= 3.0;
        }
        let blocks = [Block::Pair(1.5), Block::Zero];
        let s = {
            let mut m = DMatrix::zeros(3, 3);
            m[(0, 1)] = 1.5;
            m[(1, 0)] = -1.5;
            m
        };
        let g = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
        // A X + G = X S  <=>  (-A) X - X (-S) = G ... check against Kron on A X - X S = -G
        let x = solve_shifted(&a, &g, &blocks).unwrap();
        let x_ref = solve_kron(&a, &s, &(-&g)).unwrap();
        assert!((&x - &x_ref).norm() <= 1e-11 * x_ref.norm());
    }
}
