//! Sparse symmetric forms of 1D P1 meshes and the eigen/linear solvers on them.
//!
//! Every form is tridiagonal, plus one corner entry on periodic meshes. The
//! reduced (free-node) systems keep that shape, so factorizations are O(n):
//! an LDLᵀ whose fill is confined to the last column.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numfmt::fmt15;

/// Symmetric form on the nodes of a mesh: `off[e]` couples the two nodes of
/// element `e`, i.e. `(e, e + 1 mod n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriForm {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub periodic: bool,
}

impl TriForm {
    pub fn zeros(n: usize, periodic: bool) -> Self {
        let n_off = if periodic { n } else { n.saturating_sub(1) };
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n_off],
            periodic,
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub(crate) fn add_element(&mut self, e: usize, i: usize, j: usize, vii: f64, vij: f64, vjj: f64) {
        self.diag[i] += vii;
        self.diag[j] += vjj;
        self.off[e] += vij;
    }

    fn pair(&self, e: usize) -> (usize, usize) {
        (e, (e + 1) % self.diag.len())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for (e, &v) in self.off.iter().enumerate() {
            let (i, j) = self.pair(e);
            y[i] += v * x[j];
            y[j] += v * x[i];
        }
        y
    }

    /// `xᵀ F y`.
    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s: f64 = self.diag.iter().zip(x.iter().zip(y)).map(|(d, (a, b))| d * a * b).sum();
        for (e, &v) in self.off.iter().enumerate() {
            let (i, j) = self.pair(e);
            s += v * (x[i] * y[j] + x[j] * y[i]);
        }
        s
    }

    /// `xᵀ T x` summed as `Σ −t_ij (x_i − x_j)² + Σ r_i x_i²` with row sums
    /// `r_i`. For stiffness forms this avoids the cancellation of `quad` on
    /// smooth fields.
    /// Row sums within rounding of zero are dropped.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let mut row: Vec<f64> = self.diag.clone();
        let mut size: Vec<f64> = self.diag.iter().map(|d| d.abs()).collect();
        let mut s = 0.0;
        for (e, &v) in self.off.iter().enumerate() {
            let (i, j) = self.pair(e);
            row[i] += v;
            row[j] += v;
            size[i] += v.abs();
            size[j] += v.abs();
            let d = x[i] - x[j];
            s -= v * d * d;
        }
        for ((r, z), a) in row.iter().zip(&size).zip(x) {
            if r.abs() > 16.0 * f64::EPSILON * z {
                s += r * a * a;
            }
        }
        s
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            diag: self.diag.iter().map(|v| v * c).collect(),
            off: self.off.iter().map(|v| v * c).collect(),
            periodic: self.periodic,
        }
    }

    /// `self + c * other` for forms on the same mesh.
    pub fn plus(&self, c: f64, other: &TriForm) -> Self {
        Self {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + c * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a + c * b).collect(),
            periodic: self.periodic,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (e, &v) in self.off.iter().enumerate() {
            let (i, j) = self.pair(e);
            m[(i, j)] += v;
            m[(j, i)] += v;
        }
        m
    }

    /// Plain-text sparse triplets, one `row col value` line per stored
    /// nonzero entry, row-major.
    pub fn to_triplets(&self) -> String {
        let n = self.len();
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            entries.push((i, i, self.diag[i]));
        }
        for (e, &v) in self.off.iter().enumerate() {
            let (i, j) = self.pair(e);
            entries.push((i, j, v));
            entries.push((j, i, v));
        }
        entries.retain(|e| e.2 != 0.0);
        entries.sort_by_key(|e| (e.0, e.1));
        let mut out = String::new();
        for (i, j, v) in entries {
            out.push_str(&format!("{i} {j} {}\n", fmt15(v)));
        }
        out
    }

    /// The principal submatrix on `free` (sorted node indices).
    pub fn reduce(&self, free: &[usize]) -> CyclicTri {
        let n = self.len();
        let m = free.len();
        let diag: Vec<f64> = free.iter().map(|&i| self.diag[i]).collect();
        let mut next = vec![0.0; m.saturating_sub(1)];
        for k in 0..m.saturating_sub(1) {
            if free[k + 1] == free[k] + 1 {
                next[k] = self.off[free[k]];
            }
        }
        let mut corner = 0.0;
        if self.periodic && m >= 2 && free[0] == 0 && free[m - 1] == n - 1 {
            let wrap = self.off[n - 1];
            if m == 2 {
                next[0] += wrap;
            } else {
                corner = wrap;
            }
        }
        CyclicTri { diag, next, corner }
    }
}

/// Symmetric tridiagonal matrix with an optional `(0, n-1)` corner entry.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicTri {
    pub diag: Vec<f64>,
    pub next: Vec<f64>,
    pub corner: f64,
}

impl CyclicTri {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, v)| d * v).collect();
        for (k, &v) in self.next.iter().enumerate() {
            y[k] += v * x[k + 1];
            y[k + 1] += v * x[k];
        }
        if n > 2 && self.corner != 0.0 {
            y[0] += self.corner * x[n - 1];
            y[n - 1] += self.corner * x[0];
        }
        y
    }

    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn plus(&self, c: f64, other: &CyclicTri) -> Self {
        Self {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a + c * b).collect(),
            next: self.next.iter().zip(&other.next).map(|(a, b)| a + c * b).collect(),
            corner: self.corner + c * other.corner,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j == i + 1 {
                self.next[i]
            } else if i == j + 1 {
                self.next[j]
            } else if n > 2 && ((i == 0 && j == n - 1) || (j == 0 && i == n - 1)) {
                self.corner
            } else {
                0.0
            }
        })
    }

    /// `L D Lᵀ` without pivoting. Tiny pivots are replaced by a signed floor so
    /// the factorization is always defined; the inertia stays meaningful.
    pub fn ldlt(&self) -> Ldlt {
        let n = self.len();
        let scale = self.diag.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let floor = scale * f64::EPSILON * 1e-3;
        let mut d = self.diag.clone();
        let mut l_next = vec![0.0; n.saturating_sub(1)];
        let mut l_last = vec![0.0; n.saturating_sub(1)];
        // current coupling of row i with the last row (fill travels down it)
        let mut last = vec![0.0; n];
        if n > 2 {
            last[0] = self.corner;
        }
        let mut tiny = false;
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() < floor {
                d[i] = if d[i] < 0.0 { -floor } else { floor };
                tiny = true;
            }
            let piv = d[i];
            if i + 1 == n - 1 {
                let coupling = self.next[i] + last[i];
                l_last[i] = coupling / piv;
                d[n - 1] -= coupling * coupling / piv;
            } else {
                let e = self.next[i];
                l_next[i] = e / piv;
                d[i + 1] -= e * e / piv;
                last[i + 1] -= e * last[i] / piv;
                l_last[i] = last[i] / piv;
                d[n - 1] -= last[i] * last[i] / piv;
            }
        }
        if n > 0 && d[n - 1].abs() < floor {
            d[n - 1] = if d[n - 1] < 0.0 { -floor } else { floor };
            tiny = true;
        }
        Ldlt { d, l_next, l_last, tiny_pivot: tiny }
    }
}

#[derive(Debug, Clone)]
pub struct Ldlt {
    d: Vec<f64>,
    l_next: Vec<f64>,
    l_last: Vec<f64>,
    tiny_pivot: bool,
}

impl Ldlt {
    /// Number of negative pivots: by Sylvester's law, the number of negative
    /// eigenvalues of the factored matrix.
    pub fn negative_count(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn is_positive_definite(&self) -> bool {
        !self.tiny_pivot && self.d.iter().all(|&v| v > 0.0)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut y = b.to_vec();
        for i in 0..n.saturating_sub(1) {
            if i + 1 < n - 1 {
                y[i + 1] -= self.l_next[i] * y[i];
            }
            y[n - 1] -= self.l_last[i] * y[i];
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let mut v = y[i] - self.l_last[i] * y[n - 1];
            if i + 1 < n - 1 {
                v -= self.l_next[i] * y[i + 1];
            }
            y[i] = v;
        }
        y
    }
}

/// Solves `K x = b` for symmetric positive definite `K`.
pub fn solve_spd(k: &CyclicTri, b: &[f64]) -> Result<Vec<f64>> {
    let f = k.ldlt();
    if !f.is_positive_definite() {
        return Err(Error::Factorization("matrix is not positive definite".into()));
    }
    Ok(f.solve(b))
}

/// Dense `A u = λ M u` by Cholesky reduction `M = L Lᵀ`, `C = L⁻¹ A L⁻ᵀ`.
/// Eigenvalues ascend; eigenvectors are the columns, M-orthonormal.
pub fn dense_generalized_eigen(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let la = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    let mut c = l
        .solve_lower_triangular(&la.transpose())
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let u = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Factorization("singular Cholesky factor".into()))?;
    Ok((values, u))
}

/// Eigenpairs of the pencil `(A, M)` on the free nodes.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
}

/// Makes the entry of largest magnitude positive.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-12) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn dense_pairs(a: &CyclicTri, m: &CyclicTri, k: usize) -> Result<Eigenpairs> {
    let (values, u) = dense_generalized_eigen(&a.to_dense(), &m.to_dense())?;
    let n = a.len();
    let vectors = (0..k)
        .map(|j| {
            let mut v: Vec<f64> = (0..n).map(|i| u[(i, j)]).collect();
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(Eigenpairs {
        values: values[..k].to_vec(),
        vectors,
        iterations: 0,
    })
}

/// Free dimension up to which the dense route is used.
pub const DENSE_LIMIT: usize = 200;

/// The `k` smallest eigenpairs of `A u = λ M u` (`A` symmetric positive
/// semidefinite, `M` symmetric positive definite).
///
/// Small problems go through the dense route. Larger ones use shift-invert
/// block subspace iteration with Rayleigh–Ritz, after which an inertia count
/// of `A - σ M` confirms no eigenvalue below the k-th was missed.
pub fn smallest_eigenpairs(a: &CyclicTri, m: &CyclicTri, k: usize) -> Result<Eigenpairs> {
    let n = a.len();
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs { requested: k, available: n });
    }
    if !m.ldlt().is_positive_definite() {
        return Err(Error::Factorization("mass matrix is not positive definite".into()));
    }
    if n <= DENSE_LIMIT || 4 * k >= n {
        return dense_pairs(a, m, k);
    }
    subspace_iteration(a, m, k)
}

/// Every eigenpair, through the dense route.
pub fn all_eigenpairs(a: &CyclicTri, m: &CyclicTri) -> Result<Eigenpairs> {
    dense_pairs(a, m, a.len())
}

fn subspace_iteration(a: &CyclicTri, m: &CyclicTri, k: usize) -> Result<Eigenpairs> {
    let n = a.len();
    let p = n.min((2 * k).max(k + 8));
    let ratio = a
        .diag
        .iter()
        .zip(&m.diag)
        .fold(0.0f64, |acc, (x, y)| acc.max(x / y));
    let alpha = (1e-8 * ratio).max(f64::MIN_POSITIVE.sqrt());
    let shifted = a.plus(alpha, m);
    let fac = shifted.ldlt();
    if !fac.is_positive_definite() {
        return Err(Error::Factorization("shifted stiffness is not positive definite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut theta = vec![0.0; p];
    let max_iter = 20_000;
    let mut iter = 0;
    loop {
        iter += 1;
        let mut y: Vec<Vec<f64>> = x.iter().map(|col| fac.solve(&m.matvec(col))).collect();
        for col in y.iter_mut() {
            let nrm = m.quad(col, col).sqrt();
            if !(nrm > 0.0 && nrm.is_finite()) {
                return Err(Error::Solver("subspace iteration lost rank".into()));
            }
            col.iter_mut().for_each(|v| *v /= nrm);
        }
        let ay: Vec<Vec<f64>> = y.iter().map(|c| a.matvec(c)).collect();
        let my: Vec<Vec<f64>> = y.iter().map(|c| m.matvec(c)).collect();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(s, t)| s * t).sum::<f64>();
        let ar = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i])));
        let mr = DMatrix::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &my[j]) + dot(&y[j], &my[i])));
        let (vals, q) = dense_generalized_eigen(&ar, &mr)?;
        x = (0..p)
            .map(|j| {
                let mut col = vec![0.0; n];
                for (i, yi) in y.iter().enumerate() {
                    let c = q[(i, j)];
                    col.iter_mut().zip(yi).for_each(|(t, s)| *t += c * s);
                }
                col
            })
            .collect();
        theta = vals;

        let rate = (theta[k - 1] + alpha) / (theta[p - 1] + alpha);
        let needed = if rate < 1.0 - 1e-12 {
            ((1e-17f64).ln() / rate.ln()).ceil() as usize + 2
        } else {
            max_iter
        };
        if iter >= needed.max(3) {
            break;
        }
        if iter >= max_iter {
            return Err(Error::Solver(format!("no convergence after {max_iter} iterations")));
        }
    }

    // make sure nothing below the k-th value was missed
    let sigma = theta[k - 1] + 1e-7 * theta[k - 1].abs() + 1e-10 * alpha;
    let below = a.plus(-sigma, m).ldlt().negative_count();
    let found = theta.iter().filter(|&&t| t < sigma).count();
    if below > found {
        return Err(Error::Solver(format!(
            "inertia count finds {below} eigenvalues below {sigma:e}, iteration found {found}"
        )));
    }

    let vectors = x
        .into_iter()
        .take(k)
        .map(|mut v| {
            fix_sign(&mut v);
            v
        })
        .collect();
    Ok(Eigenpairs {
        values: theta[..k].to_vec(),
        vectors,
        iterations: iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize, periodic: bool) -> (TriForm, TriForm) {
        let mut a = TriForm::zeros(n, periodic);
        let mut m = TriForm::zeros(n, periodic);
        let h = 1.0 / n as f64;
        let ne = if periodic { n } else { n - 1 };
        for e in 0..ne {
            let (i, j) = (e, (e + 1) % n);
            a.add_element(e, i, j, 1.0 / h, -1.0 / h, 1.0 / h);
            m.add_element(e, i, j, h / 3.0, h / 6.0, h / 3.0);
        }
        (a, m)
    }

    #[test]
    fn ldlt_solves_cyclic_system() {
        let (a, m) = laplacian(7, true);
        let k = a.plus(2.0, &m).reduce(&(0..7).collect::<Vec<_>>());
        let x: Vec<f64> = (0..7).map(|i| (i as f64 * 0.7).sin() + 0.3).collect();
        let b = k.matvec(&x);
        let sol = solve_spd(&k, &b).unwrap();
        for (s, t) in sol.iter().zip(&x) {
            assert!((s - t).abs() < 1e-12, "{s} vs {t}");
        }
        let dense = k.to_dense();
        let xd = nalgebra::DVector::from_vec(x.clone());
        let bd = &dense * &xd;
        for (s, t) in bd.iter().zip(&b) {
            assert!((s - t).abs() < 1e-12);
        }
    }

    #[test]
    fn inertia_counts_eigenvalues_below_shift() {
        let (a, m) = laplacian(40, true);
        let free: Vec<usize> = (0..40).collect();
        let (ar, mr) = (a.reduce(&free), m.reduce(&free));
        let (vals, _) = dense_generalized_eigen(&ar.to_dense(), &mr.to_dense()).unwrap();
        for sigma in [0.5, 50.0, 500.0, 5000.0] {
            let count = ar.plus(-sigma, &mr).ldlt().negative_count();
            let expected = vals.iter().filter(|&&v| v < sigma).count();
            assert_eq!(count, expected, "sigma {sigma}");
        }
    }

    #[test]
    fn reduce_keeps_wrap_coupling_only_when_ends_free() {
        let (a, _) = laplacian(6, true);
        let r = a.reduce(&[0, 1, 2, 3, 4, 5]);
        assert!(r.corner != 0.0);
        let r = a.reduce(&[1, 2, 3, 4, 5]);
        assert_eq!(r.corner, 0.0);
        let r = a.reduce(&[1, 2, 4]);
        assert_eq!(r.next[1], 0.0);
    }

    #[test]
    fn subspace_iteration_matches_dense_route() {
        for periodic in [false, true] {
            let n = 600;
            let (a, m) = laplacian(n, periodic);
            let free: Vec<usize> = if periodic { (0..n).collect() } else { (1..n - 1).collect() };
            let (ar, mr) = (a.reduce(&free), m.reduce(&free));
            let it = subspace_iteration(&ar, &mr, 6).unwrap();
            let dense = dense_pairs(&ar, &mr, 6).unwrap();
            for (x, y) in it.values.iter().zip(&dense.values) {
                assert!((x - y).abs() <= 1e-10 * y.abs().max(1.0), "{x} vs {y}");
            }
            for (j, v) in it.vectors.iter().enumerate() {
                let r: f64 = ar
                    .matvec(v)
                    .iter()
                    .zip(mr.matvec(v))
                    .map(|(p, q)| (p - it.values[j] * q).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let nm: f64 = mr.matvec(v).iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(r / nm < 1e-9, "residual {}", r / nm);
            }
        }
    }

    #[test]
    fn sign_convention() {
        let mut v = vec![0.1, -0.9, 0.5];
        fix_sign(&mut v);
        assert_eq!(v, vec![-0.1, 0.9, -0.5]);
    }
}
