//! Incremental and structured linear algebra used by the active-set solvers.
//!
//! * [`TrackedInverse`]: Sherman–Morrison rank-one updates of a square
//!   inverse with periodic recomputation to bound round-off drift.
//! * [`TrackedPinv`]: Greville column-append update of a pseudoinverse.
//! * [`qr_restricted_solve`]: projection onto the column span of a tall
//!   matrix through a thin QR factorisation (never forms `A Aᵀ`).
//! * [`cholesky_pinv`]: pseudoinverse from a full-rank Cholesky factor of the
//!   Gram matrix.
//! * [`BandedMatrix`] / [`BandedCholesky`]: O(n) SPD solves for half-bandwidth
//!   at most two, and [`BandedSystem`] for small-bandwidth non-symmetric
//!   systems with partial pivoting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Absolute threshold on pivots and update denominators.
pub const RANK_THRESHOLD: f64 = 1e-12;

/// Number of rank-one updates between full recomputations.
pub const DEFAULT_REFRESH_PERIOD: usize = 150;

fn invert(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix is not invertible".into()))
}

/// Square matrix together with an incrementally maintained inverse.
#[derive(Debug, Clone)]
pub struct TrackedInverse {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    update_count: usize,
    refresh_period: usize,
}

impl TrackedInverse {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        Self::with_refresh_period(matrix, DEFAULT_REFRESH_PERIOD)
    }

    pub fn with_refresh_period(matrix: DMatrix<f64>, refresh_period: usize) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("tracked inverse needs a square matrix".into()));
        }
        if refresh_period == 0 {
            return Err(Error::InvalidArgument("refresh period must be positive".into()));
        }
        let inverse = invert(&matrix)?;
        Ok(Self {
            matrix,
            inverse,
            update_count: 0,
            refresh_period,
        })
    }

    /// Start from a known inverse pair without factorising.
    pub fn from_parts(
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
        refresh_period: usize,
    ) -> Result<Self> {
        if !matrix.is_square() || matrix.shape() != inverse.shape() || refresh_period == 0 {
            return Err(Error::InvalidArgument("inconsistent tracked inverse parts".into()));
        }
        Ok(Self {
            matrix,
            inverse,
            update_count: 0,
            refresh_period,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    pub fn refresh_period(&self) -> usize {
        self.refresh_period
    }

    /// Replace the maintained inverse by a fresh factorisation.
    pub fn refresh(&mut self) -> Result<()> {
        self.inverse = invert(&self.matrix)?;
        self.update_count = 0;
        Ok(())
    }

    /// `A <- A + u vᵀ` with `(A + u vᵀ)⁻¹ = A⁻¹ - z wᵀ / (1 + vᵀz)`,
    /// `z = A⁻¹u`, `w = A⁻ᵀv`. On error the state is left unchanged.
    pub fn sherman_morrison_update(&mut self, u: &DVector<f64>, v: &DVector<f64>) -> Result<()> {
        let n = self.matrix.nrows();
        if u.len() != n || v.len() != n {
            return Err(Error::InvalidArgument("update vectors have the wrong length".into()));
        }
        let z = &self.inverse * u;
        let w = self.inverse.tr_mul(v);
        let denominator = 1.0 + v.dot(&z);
        if denominator.abs() <= RANK_THRESHOLD {
            return Err(Error::SingularUpdate { denominator });
        }
        self.matrix.ger(1.0, u, v, 1.0);
        self.inverse.ger(-1.0 / denominator, &z, &w, 1.0);
        self.after_update()
    }

    /// Replace column `k` by `column`; the rank-one special case used by
    /// basis exchanges (`u = column - old`, `v = e_k`).
    pub fn replace_column(&mut self, k: usize, column: &DVector<f64>) -> Result<()> {
        let n = self.matrix.nrows();
        if k >= n || column.len() != n {
            return Err(Error::InvalidArgument("column replacement out of range".into()));
        }
        let u = column - self.matrix.column(k);
        let z = &self.inverse * &u;
        let denominator = 1.0 + z[k];
        if denominator.abs() <= RANK_THRESHOLD {
            return Err(Error::SingularUpdate { denominator });
        }
        let w = self.inverse.row(k).transpose();
        self.matrix.set_column(k, column);
        self.inverse.ger(-1.0 / denominator, &z, &w, 1.0);
        self.after_update()
    }

    fn after_update(&mut self) -> Result<()> {
        self.update_count += 1;
        if self.update_count >= self.refresh_period {
            self.refresh()?;
        }
        Ok(())
    }

    /// `max |A·inv - I|`.
    pub fn audit(&self) -> f64 {
        let n = self.matrix.nrows();
        let prod = &self.matrix * &self.inverse - DMatrix::<f64>::identity(n, n);
        prod.amax()
    }
}

/// Free-function form of [`TrackedInverse::sherman_morrison_update`].
pub fn sherman_morrison_update(
    mut inv: TrackedInverse,
    u: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<TrackedInverse> {
    inv.sherman_morrison_update(u, v)?;
    Ok(inv)
}

/// Pseudoinverse of a column-appended matrix `[c_1 .. c_r]`.
#[derive(Debug, Clone)]
pub struct TrackedPinv {
    columns: DMatrix<f64>,
    pinv: DMatrix<f64>,
}

impl TrackedPinv {
    /// Empty matrix with `rows` rows and no columns.
    pub fn empty(rows: usize) -> Self {
        Self {
            columns: DMatrix::zeros(rows, 0),
            pinv: DMatrix::zeros(0, rows),
        }
    }

    pub fn from_columns(columns: &DMatrix<f64>) -> Result<Self> {
        let mut p = Self::empty(columns.nrows());
        for c in columns.column_iter() {
            p.append_column(&c.into_owned())?;
        }
        Ok(p)
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn pinv(&self) -> &DMatrix<f64> {
        &self.pinv
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    /// Greville update, full-rank branch only:
    /// `B† = [A† - A†x w†; w†]`, `w = (I - A A†) x`, `w† = wᵀ/‖w‖²`.
    pub fn append_column(&mut self, x: &DVector<f64>) -> Result<()> {
        let n = self.columns.nrows();
        if x.len() != n {
            return Err(Error::InvalidArgument("appended column has the wrong length".into()));
        }
        let d = &self.pinv * x;
        let w = x - &self.columns * &d;
        let norm2 = w.norm_squared();
        if norm2 <= RANK_THRESHOLD {
            return Err(Error::DependentColumn { residual: norm2 });
        }
        let w_dag = w.transpose() / norm2;
        let r = self.columns.ncols();
        let top = &self.pinv - &d * &w_dag;
        let mut pinv = DMatrix::zeros(r + 1, n);
        pinv.rows_mut(0, r).copy_from(&top);
        pinv.row_mut(r).copy_from(&w_dag);
        self.pinv = pinv;
        self.columns = self.columns.clone().insert_column(r, 0.0);
        self.columns.set_column(r, x);
        Ok(())
    }

    /// Drop column `k` and recompute the pseudoinverse through QR.
    pub fn remove_column(&mut self, k: usize) -> Result<()> {
        if k >= self.columns.ncols() {
            return Err(Error::InvalidArgument("column index out of range".into()));
        }
        self.columns = self.columns.clone().remove_column(k);
        self.pinv = qr_pinv(&self.columns)?;
        Ok(())
    }

    /// Largest residual of the four Moore–Penrose conditions.
    pub fn audit(&self) -> f64 {
        penrose_residual(&self.columns, &self.pinv)
    }
}

/// Free-function form of [`TrackedPinv::append_column`].
pub fn pinv_append_column(mut p: TrackedPinv, x: &DVector<f64>) -> Result<TrackedPinv> {
    p.append_column(x)?;
    Ok(p)
}

/// Max entry of the four Penrose residuals `AXA-A`, `XAX-X`, `(AX)ᵀ-AX`, `(XA)ᵀ-XA`.
pub fn penrose_residual(a: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let ax = a * x;
    let xa = x * a;
    let r1 = (&ax * a - a).amax();
    let r2 = (&xa * x - x).amax();
    let r3 = (ax.transpose() - &ax).amax();
    let r4 = (xa.transpose() - &xa).amax();
    r1.max(r2).max(r3).max(r4)
}

fn qr_pinv(columns: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, r) = columns.shape();
    if r == 0 {
        return Ok(DMatrix::zeros(0, n));
    }
    let qr = columns.clone().qr();
    let rmat = qr.r();
    check_r_diagonal(&rmat, columns)?;
    let q = qr.q();
    let rinv = rmat
        .solve_upper_triangular(&DMatrix::identity(r, r))
        .ok_or_else(|| Error::Singular("triangular factor".into()))?;
    Ok(rinv * q.transpose())
}

fn check_r_diagonal(r: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<()> {
    let scale = a.amax().max(1.0);
    for i in 0..r.ncols() {
        let pivot = r[(i, i)];
        if pivot.abs() <= RANK_THRESHOLD * scale {
            return Err(Error::RankDeficient { index: i, pivot });
        }
    }
    Ok(())
}

/// Result of projecting a vector onto the column span of `Aᵀ`.
#[derive(Debug, Clone)]
pub struct RestrictedSolve {
    /// `Aᵀ(AAᵀ)⁻¹A y`.
    pub projection: DVector<f64>,
    /// `(AAᵀ)⁻¹A y`: coefficients of the projection on the columns of `Aᵀ`.
    pub coefficients: DVector<f64>,
}

/// Projection onto the span of the columns of `atr` (`n × r`) through the
/// thin QR `Aᵀ = Q₁R₁`: coefficients `R₁⁻¹Q₁ᵀy`, projection `Q₁Q₁ᵀy`.
pub fn qr_restricted_solve(atr: &DMatrix<f64>, y: &DVector<f64>) -> Result<RestrictedSolve> {
    let (n, r) = atr.shape();
    if y.len() != n {
        return Err(Error::InvalidArgument("right-hand side has the wrong length".into()));
    }
    if r > n {
        return Err(Error::InvalidArgument("more columns than rows".into()));
    }
    if r == 0 {
        return Ok(RestrictedSolve {
            projection: DVector::zeros(n),
            coefficients: DVector::zeros(0),
        });
    }
    let qr = atr.clone().qr();
    let rmat = qr.r();
    check_r_diagonal(&rmat, atr)?;
    let q = qr.q();
    let qty = q.tr_mul(y);
    let coefficients = rmat
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular factor".into()))?;
    let projection = &q * qty;
    Ok(RestrictedSolve {
        projection,
        coefficients,
    })
}

/// Moore–Penrose pseudoinverse through a full-rank Cholesky factor of the
/// smaller Gram matrix (Courrieu's geninv). Rank-deficient and zero inputs
/// are handled by dropping negligible pivots.
pub fn cholesky_pinv(g: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = g.shape();
    if m == 0 || n == 0 {
        return DMatrix::zeros(n, m);
    }
    let transpose = m < n;
    let a = if transpose { g * g.transpose() } else { g.transpose() * g };
    let size = a.nrows();
    let min_pos = a
        .diagonal()
        .iter()
        .copied()
        .filter(|&d| d > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return DMatrix::zeros(n, m);
    }
    let tol = min_pos * 1e-9;
    let mut l = DMatrix::<f64>::zeros(size, size);
    let mut r = 0usize;
    for k in 0..size {
        for i in k..size {
            let mut s = a[(i, k)];
            for j in 0..r {
                s -= l[(i, j)] * l[(k, j)];
            }
            l[(i, r)] = s;
        }
        if l[(k, r)] > tol {
            let d = l[(k, r)].sqrt();
            l[(k, r)] = d;
            for i in (k + 1)..size {
                l[(i, r)] /= d;
            }
            r += 1;
        } else {
            for i in k..size {
                l[(i, r)] = 0.0;
            }
        }
    }
    if r == 0 {
        return DMatrix::zeros(n, m);
    }
    let l = l.columns(0, r).into_owned();
    let ltl = l.transpose() * &l;
    let minv = ltl.try_inverse().unwrap_or_else(|| DMatrix::zeros(r, r));
    let core = &l * &minv * &minv * l.transpose();
    if transpose {
        g.transpose() * core
    } else {
        core * g.transpose()
    }
}

/// Symmetric banded matrix with half-bandwidth at most two, stored by its
/// lower band: `lower[i][k] = M[i][i-k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    bandwidth: usize,
    lower: Vec<[f64; 3]>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Result<Self> {
        if bandwidth > 2 {
            return Err(Error::InvalidArgument(format!(
                "half-bandwidth {bandwidth} exceeds 2"
            )));
        }
        Ok(Self {
            bandwidth,
            lower: vec![[0.0; 3]; n],
        })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    fn slot(&self, i: usize, j: usize) -> Option<(usize, usize)> {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let k = r - c;
        (k <= self.bandwidth && r < self.lower.len()).then_some((r, k))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |(r, k)| self.lower[r][k])
    }

    /// Add `v` to both `M[i][j]` and `M[j][i]` (once on the diagonal).
    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        let (r, k) = self
            .slot(i, j)
            .ok_or_else(|| Error::InvalidArgument(format!("entry ({i},{j}) outside the band")))?;
        self.lower[r][k] += v;
        Ok(())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            out[i] += self.lower[i][0] * x[i];
            for k in 1..=self.bandwidth.min(i) {
                let v = self.lower[i][k];
                out[i] += v * x[i - k];
                out[i - k] += v * x[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.get(i, j))
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.len();
        let p = self.bandwidth;
        let mut l = vec![[0.0f64; 3]; n];
        for i in 0..n {
            let lo = i.saturating_sub(p);
            for j in lo..=i {
                let mut s = self.lower[i][i - j];
                for k in lo.max(j.saturating_sub(p))..j {
                    s -= l[i][i - k] * l[j][j - k];
                }
                if i == j {
                    let diag = self.lower[i][0].abs();
                    if !(s > RANK_THRESHOLD * diag.max(f64::MIN_POSITIVE)) {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i][0] = s.sqrt();
                } else {
                    l[i][i - j] = s / l[j][0];
                }
            }
        }
        Ok(BandedCholesky { bandwidth: p, l })
    }
}

/// Cached banded Cholesky factor `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    bandwidth: usize,
    l: Vec<[f64; 3]>,
}

impl BandedCholesky {
    pub fn len(&self) -> usize {
        self.l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l.is_empty()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.l.len();
        let p = self.bandwidth;
        for i in 0..n {
            let mut s = x[i];
            for k in 1..=p.min(i) {
                s -= self.l[i][k] * x[i - k];
            }
            x[i] = s / self.l[i][0];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in 1..=p.min(n - 1 - i) {
                s -= self.l[i + k][k] * x[i + k];
            }
            x[i] = s / self.l[i][0];
        }
    }
}

/// One-shot SPD banded solve.
pub fn banded_spd_solve(m: &BandedMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.len() {
        return Err(Error::InvalidArgument("right-hand side has the wrong length".into()));
    }
    Ok(m.cholesky()?.solve(b))
}

/// General banded system `M x = b` with `kl` sub- and `ku` super-diagonals,
/// solved by Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedSystem {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedSystem {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    fn index(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as isize - i as isize + self.kl as isize;
        (off >= 0 && (off as usize) < self.width && i < self.n && j < self.n)
            .then(|| i * self.width + off as usize)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        if j + self.kl < i || j > i + self.ku {
            return Err(Error::InvalidArgument(format!("entry ({i},{j}) outside the band")));
        }
        let idx = self
            .index(i, j)
            .ok_or_else(|| Error::InvalidArgument(format!("entry ({i},{j}) out of range")))?;
        self.data[idx] += v;
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if j + self.kl < i || j > i + self.ku {
                0.0
            } else {
                self.index(i, j).map_or(0.0, |k| self.data[k])
            }
        })
    }

    /// Consumes the system; `b` is overwritten by the solution.
    pub fn solve(mut self, b: &mut [f64]) -> Result<()> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::InvalidArgument("right-hand side has the wrong length".into()));
        }
        let scale = self.data.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut piv = k;
            let mut best = self.data[self.index(k, k).unwrap()].abs();
            for i in (k + 1)..=last_row {
                let v = self.data[self.index(i, k).unwrap()].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best <= 1e-14 * scale {
                return Err(Error::Singular(format!("zero pivot in column {k}")));
            }
            let last_col = (k + reach).min(n - 1);
            if piv != k {
                for j in k..=last_col {
                    let a = self.index(k, j).unwrap();
                    let c = self.index(piv, j).unwrap();
                    self.data.swap(a, c);
                }
                b.swap(k, piv);
            }
            let pivot = self.data[self.index(k, k).unwrap()];
            for i in (k + 1)..=last_row {
                let ik = self.index(i, k).unwrap();
                let f = self.data[ik] / pivot;
                if f == 0.0 {
                    continue;
                }
                self.data[ik] = 0.0;
                for j in (k + 1)..=last_col {
                    let kj = self.index(k, j).unwrap();
                    let ij = self.index(i, j).unwrap();
                    self.data[ij] -= f * self.data[kj];
                }
                b[i] -= f * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in (k + 1)..=(k + reach).min(n - 1) {
                s -= self.data[self.index(k, j).unwrap()] * b[j];
            }
            b[k] = s / self.data[self.index(k, k).unwrap()];
        }
        Ok(())
    }
}
