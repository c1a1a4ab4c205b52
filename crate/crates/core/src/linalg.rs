//! Dense symmetric eigensolver, double centering and Procrustes alignment.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dataset::Points;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Smallest,
    Largest,
}

/// Eigenpairs in ascending eigenvalue order; column `j` of `vectors` belongs to `values[j]`.
/// Each vector has unit norm and its largest-magnitude component positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            found: format!("{}x{}", a.nrows(), a.ncols()),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let scale = a.amax().max(1.0);
    let mut max_asymmetry: f64 = 0.0;
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            max_asymmetry = max_asymmetry.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    if max_asymmetry > SYMMETRY_TOL * scale {
        return Err(Error::NonSymmetric { max_asymmetry });
    }
    Ok((a + a.transpose()) * 0.5)
}

fn decompose(a: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = a.nrows();
    SymmetricEigen::try_new(a, f64::EPSILON, 10 * n.max(10)).ok_or(Error::ConvergenceFailure { n })
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Flips `v` so that its largest-magnitude component (first one on ties) is positive.
pub(crate) fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `count` extreme eigenpairs of a symmetric matrix, returned in ascending order.
pub fn symmetric_eigen(a: &DMatrix<f64>, count: usize, side: Side) -> Result<EigenResult> {
    let n = a.nrows();
    if count == 0 || count > n {
        return Err(Error::Config(format!("eigenpair count {count} outside 1..={n}")));
    }
    let eig = decompose(check_symmetric(a)?)?;
    let order = ascending_order(eig.eigenvalues.as_slice());
    let picked = match side {
        Side::Smallest => &order[..count],
        Side::Largest => &order[n - count..],
    };
    let mut vectors = DMatrix::zeros(n, count);
    let mut values = Vec::with_capacity(count);
    for (c, &idx) in picked.iter().enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        fix_sign(&mut v);
        vectors.column_mut(c).copy_from_slice(&v);
        values.push(eig.eigenvalues[idx]);
    }
    Ok(EigenResult { values, vectors })
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let a = check_symmetric(a)?;
    let n = a.nrows();
    let values = nalgebra::linalg::SymmetricEigen::try_new(a, f64::EPSILON, 10 * n.max(10))
        .ok_or(Error::ConvergenceFailure { n })?
        .eigenvalues;
    let mut v: Vec<f64> = values.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// `B = -1/2 J D2 J` with `J = I - 11ᵀ/n`.
pub fn double_center(d2: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d2.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let nf = n as f64;
    let row_mean: Vec<f64> = (0..n).map(|i| d2.row(i).sum() / nf).collect();
    let col_mean: Vec<f64> = (0..n).map(|j| d2.column(j).sum() / nf).collect();
    let grand = row_mean.iter().sum::<f64>() / nf;
    let mut b = DMatrix::from_fn(n, n, |i, j| -0.5 * (d2[(i, j)] - row_mean[i] - col_mean[j] + grand));
    // Exact symmetry regardless of summation order.
    for j in 0..n {
        for i in 0..j {
            let m = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = m;
            b[(j, i)] = m;
        }
    }
    b
}

/// Projection of each centered point onto the leading principal axis.
pub fn principal_scores<P: Points + ?Sized>(p: &P) -> Vec<f64> {
    let mut x = to_matrix(p);
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let cov = x.transpose() * &x;
    let cov = 0.5 * (&cov + cov.transpose());
    let axis = symmetric_eigen(&cov, 1, Side::Largest).expect("covariance is symmetric");
    (&x * axis.vectors.column(0)).iter().copied().collect()
}

/// Copies a point set into an `n x dim` matrix.
pub fn to_matrix<P: Points + ?Sized>(p: &P) -> DMatrix<f64> {
    DMatrix::from_fn(p.n_points(), p.dim(), |i, j| p.point(i)[j])
}

/// Root-mean-square distance between `y` and the best similarity transform of `x`
/// (translation, rotation, reflection and uniform scale).
pub fn procrustes_error(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch { expected: format!("{:?}", x.shape()), found: format!("{:?}", y.shape()) });
    }
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidInput("procrustes needs at least two points".into()));
    }
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for mut col in c.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        c
    };
    let xc = center(x);
    let yc = center(y);
    let xx = xc.norm_squared();
    let aligned = if xx == 0.0 {
        DMatrix::zeros(n, x.ncols())
    } else {
        let svd = (xc.transpose() * &yc).svd(true, true);
        let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
        let rotation = &u * &v_t;
        let scale = svd.singular_values.sum() / xx;
        (&xc * rotation) * scale
    };
    Ok(((yc - aligned).norm_squared() / n as f64).sqrt())
}
