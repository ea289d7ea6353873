//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn identity(n: usize) -> RMat {
    RMat::identity(n, n)
}

/// Eigenvalues of a real square matrix (complex, unordered).
pub fn eigenvalues(m: &RMat) -> Vec<C64> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Eigenvalues of a complex square matrix via the Schur form.
pub fn eigenvalues_c(m: &CMat) -> Vec<C64> {
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// A group of numerically coincident eigenvalues.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub value: C64,
    pub count: usize,
}

/// Groups values whose mutual distance is below `tol` (single linkage), then
/// sorts clusters by real part, then imaginary part.
pub fn cluster(values: &[C64], tol: f64) -> Vec<Cluster> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            if (values[i] - values[j]).norm() <= tol {
                let (a, b) = (label[i], label[j]);
                if a != b {
                    for l in label.iter_mut() {
                        if *l == b {
                            *l = a;
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<Cluster> = Vec::new();
    let mut seen: Vec<usize> = Vec::new();
    for i in 0..n {
        if seen.contains(&label[i]) {
            continue;
        }
        seen.push(label[i]);
        let members: Vec<C64> = (0..n).filter(|&j| label[j] == label[i]).map(|j| values[j]).collect();
        let mean = members.iter().sum::<C64>() / members.len() as f64;
        out.push(Cluster { value: mean, count: members.len() });
    }
    out.sort_by(|a, b| a.value.re.partial_cmp(&b.value.re).unwrap().then(a.value.im.partial_cmp(&b.value.im).unwrap()));
    out
}

/// Singular values in descending order.
pub fn singular_values_c(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn singular_values(m: &RMat) -> Vec<f64> {
    singular_values_c(&to_complex(m))
}

/// Numeric rank with threshold `rel * sigma_max`.
pub fn rank_c(m: &CMat, rel: f64) -> usize {
    let s = singular_values_c(m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel * smax).count()
}

/// Orthonormal basis of the `dim` right-singular directions with the smallest
/// singular values (a nullspace basis when `dim` matches the nullity).
pub fn nullspace_c(m: &CMat, dim: usize) -> CMat {
    let n = m.ncols();
    // Pad to a square matrix so the SVD returns a full right basis.
    let mut sq = CMat::zeros(n.max(m.nrows()), n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].partial_cmp(&svd.singular_values[b]).unwrap());
    let mut out = CMat::zeros(n, dim);
    for (c, &i) in order.iter().take(dim).enumerate() {
        for r in 0..n {
            out[(r, c)] = vt[(i, r)].conj();
        }
    }
    out
}

/// Canonical basis of the column span of `k`: reduced row echelon form of
/// `k^T`, so the result does not depend on which spanning set was supplied.
pub fn canonical_basis(k: &CMat) -> CMat {
    let (n, dim) = (k.nrows(), k.ncols());
    let mut a = k.transpose();
    let mut row = 0;
    let mut pivots = Vec::new();
    for col in 0..n {
        if row == dim {
            break;
        }
        let (mut best, mut bval) = (row, 0.0);
        for r in row..dim {
            let v = a[(r, col)].norm();
            if v > bval + 1e-12 {
                best = r;
                bval = v;
            }
        }
        if bval < 1e-9 {
            continue;
        }
        a.swap_rows(row, best);
        let p = a[(row, col)];
        for c in 0..n {
            a[(row, c)] /= p;
        }
        for r in 0..dim {
            if r != row {
                let f = a[(r, col)];
                if f != C64::new(0.0, 0.0) {
                    for c in 0..n {
                        let v = a[(row, c)];
                        a[(r, c)] -= f * v;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let mut out = a.transpose();
    for c in 0..dim {
        let nrm = out.column(c).norm();
        if nrm > 0.0 {
            for r in 0..n {
                out[(r, c)] /= nrm;
            }
        }
    }
    out
}

pub fn inverse_c(m: &CMat) -> Option<CMat> {
    m.clone().try_inverse()
}

pub fn inverse(m: &RMat) -> Option<RMat> {
    m.clone().try_inverse()
}

/// Minimum-norm least-squares solution of `m x = b` via the SVD.
pub fn lstsq_c(m: &CMat, b: &[C64]) -> Vec<C64> {
    let svd = m.clone().svd(true, true);
    let bv = nalgebra::DVector::from_column_slice(b);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x = svd.solve(&bv, 1e-12 * smax.max(1e-300)).expect("svd solve");
    x.iter().copied().collect()
}

/// Largest principal angle sine between two subspaces given by orthonormal
/// column bases of equal dimension.
pub fn subspace_distance(a: &CMat, b: &CMat) -> f64 {
    let p = a.adjoint() * b;
    let s = singular_values_c(&p);
    let cmin = s.last().copied().unwrap_or(1.0).min(1.0);
    (1.0 - cmin * cmin).max(0.0).sqrt()
}

/// Orthonormalizes the columns of `m` (thin QR).
pub fn orthonormalize(m: &CMat) -> CMat {
    if m.ncols() == 0 {
        return m.clone();
    }
    m.clone().qr().q()
}

pub fn mat_vec_c(m: &CMat, v: &[C64]) -> Vec<C64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum()).collect()
}

pub fn dot_nc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_basis_is_spanning_set_independent() {
        let k1 = CMat::from_row_slice(
            3,
            2,
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(2.0, 0.0)],
        );
        let mix = CMat::from_row_slice(2, 2, &[C64::new(2.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.5, 0.0), C64::new(3.0, -2.0)]);
        let k2 = &k1 * mix;
        let b1 = canonical_basis(&k1);
        let b2 = canonical_basis(&k2);
        assert!((b1 - b2).norm() < 1e-12);
    }

    #[test]
    fn nullspace_of_rank_one() {
        let m = CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0), C64::new(4.0, 0.0)]);
        let k = nullspace_c(&m, 1);
        let r = &m * &k;
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn cluster_merges_close_values() {
        let v = [C64::new(1.0, 0.0), C64::new(1.0 + 1e-12, 0.0), C64::new(-2.0, 0.0)];
        let c = cluster(&v, 1e-8);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].count, 2);
    }
}
