//! Constraint system of the concave regression cone.
//!
//! For abscissae `z_0 < … < z_{n-1}` the feasible set is
//! `K = {x : A x <= 0}` where row `i` of `A` is the discrete second
//! difference touching points `i, i+1, i+2`:
//!
//! ```text
//! A[i] = ( 1/d_i , -(1/d_i + 1/d_{i+1}) , 1/d_{i+1} ),   d_k = z_{k+1} - z_k.
//! ```
//!
//! Projections are taken in the weighted norm `‖v‖²_W = Σ w_i v_i²`. The
//! Lagrangian of `min ½‖x − y‖²_W  s.t.  A x <= 0` is
//! `½‖x − y‖²_W + λᵀ A x`, so stationarity reads `x = y − W⁻¹Aᵀλ`.
//!
//! Geometric quantities used by the finite algorithms (edges `γ`, dual basis
//! `β`, lineality completion) live in the scaled frame `x̃ = W^{1/2} x`, where
//! the weighted problem becomes an ordinary Euclidean projection onto
//! `{x̃ : Ã x̃ <= 0}` with `Ã = A W^{-1/2}`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernels::qr_restricted_solve;
use crate::signal::Signal;

/// Row scaling applied to the second-difference matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowScaling {
    /// Rows exactly as written above.
    #[default]
    Raw,
    /// Each row divided by its Euclidean norm. The cone is unchanged; the
    /// multipliers are rescaled accordingly.
    UnitNorm,
}

/// Second-difference constraint system and its scaled-frame geometry.
#[derive(Debug)]
pub struct ConeSystem {
    z: Vec<f64>,
    w: Vec<f64>,
    gaps: Vec<f64>,
    rows: Vec<[f64; 3]>,
    row_scale: Vec<f64>,
    scaling: RowScaling,
    sqrt_w: Vec<f64>,
    completion: [Vec<f64>; 2],
    gamma: OnceLock<DMatrix<f64>>,
    dual: OnceLock<DMatrix<f64>>,
}

/// Build the constraint system for a signal with unscaled rows.
pub fn build_cone_system(signal: &Signal) -> ConeSystem {
    ConeSystem::new(signal, RowScaling::Raw)
}

impl ConeSystem {
    pub fn new(signal: &Signal, scaling: RowScaling) -> Self {
        let z = signal.z().to_vec();
        let w = signal.w().to_vec();
        let n = z.len();
        let gaps: Vec<f64> = z.windows(2).map(|p| p[1] - p[0]).collect();
        let mut rows = Vec::with_capacity(n - 2);
        let mut row_scale = Vec::with_capacity(n - 2);
        for i in 0..n - 2 {
            let a = 1.0 / gaps[i];
            let c = 1.0 / gaps[i + 1];
            let raw = [a, -(a + c), c];
            let s = match scaling {
                RowScaling::Raw => 1.0,
                RowScaling::UnitNorm => 1.0 / raw.iter().map(|v| v * v).sum::<f64>().sqrt(),
            };
            rows.push([raw[0] * s, raw[1] * s, raw[2] * s]);
            row_scale.push(s);
        }
        let sqrt_w: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let completion = lineality_basis(&z, &w, &sqrt_w);
        Self {
            z,
            w,
            gaps,
            rows,
            row_scale,
            scaling,
            sqrt_w,
            completion,
            gamma: OnceLock::new(),
            dual: OnceLock::new(),
        }
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.z.len()
    }

    /// Number of constraints, `n − 2`.
    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn sqrt_w(&self) -> &[f64] {
        &self.sqrt_w
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn scaling(&self) -> RowScaling {
        self.scaling
    }

    /// Nonzero coefficients of row `i`, acting on points `i, i+1, i+2`.
    pub fn row(&self, i: usize) -> [f64; 3] {
        self.rows[i]
    }

    pub fn rows(&self) -> &[[f64; 3]] {
        &self.rows
    }

    /// Row `i` of `Ã = A W^{-1/2}`.
    pub fn scaled_row(&self, i: usize) -> [f64; 3] {
        let r = self.rows[i];
        [
            r[0] / self.sqrt_w[i],
            r[1] / self.sqrt_w[i + 1],
            r[2] / self.sqrt_w[i + 2],
        ]
    }

    /// `A_i W⁻¹ A_iᵀ`.
    pub fn row_weighted_norm_sq(&self, i: usize) -> f64 {
        let r = self.rows[i];
        r[0] * r[0] / self.w[i] + r[1] * r[1] / self.w[i + 1] + r[2] * r[2] / self.w[i + 2]
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let r = self.rows[i];
        r[0] * x[i] + r[1] * x[i + 1] + r[2] * x[i + 2]
    }

    /// `A x`.
    pub fn apply_a(&self, x: &[f64]) -> Vec<f64> {
        (0..self.m()).map(|i| self.row_dot(i, x)).collect()
    }

    /// `Aᵀ λ`.
    pub fn apply_at(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (i, (r, &l)) in self.rows.iter().zip(lambda).enumerate() {
            out[i] += r[0] * l;
            out[i + 1] += r[1] * l;
            out[i + 2] += r[2] * l;
        }
        out
    }

    /// `y − W⁻¹Aᵀλ`.
    pub fn primal_from_dual(&self, y: &[f64], lambda: &[f64]) -> Vec<f64> {
        let at = self.apply_at(lambda);
        y.iter()
            .zip(&at)
            .zip(&self.w)
            .map(|((yi, a), wi)| yi - a / wi)
            .collect()
    }

    /// Dense `A` (`m × n`).
    pub fn a_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.m(), self.n());
        for (i, r) in self.rows.iter().enumerate() {
            for k in 0..3 {
                a[(i, i + k)] = r[k];
            }
        }
        a
    }

    pub fn to_scaled(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n(), x.iter().zip(&self.sqrt_w).map(|(v, s)| v * s))
    }

    pub fn from_scaled(&self, x: &DVector<f64>) -> Vec<f64> {
        x.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect()
    }

    /// Orthonormal basis of the null space of `Ã` (the scaled image of the
    /// affine functions).
    pub fn completion(&self) -> [&[f64]; 2] {
        [&self.completion[0], &self.completion[1]]
    }

    /// Edge `γʲ`: the scaled row `Ã_jᵀ` for `j < m`, a completion vector for
    /// `j ∈ {m, m+1}`.
    pub fn gamma(&self, j: usize) -> DVector<f64> {
        let n = self.n();
        let m = self.m();
        let mut g = DVector::zeros(n);
        if j < m {
            let r = self.scaled_row(j);
            g[j] = r[0];
            g[j + 1] = r[1];
            g[j + 2] = r[2];
        } else {
            g.copy_from_slice(&self.completion[j - m]);
        }
        g
    }

    /// `n × n` matrix whose columns are the edges `γ⁰ … γ^{n−1}`.
    pub fn gamma_matrix(&self) -> &DMatrix<f64> {
        self.gamma.get_or_init(|| {
            let n = self.n();
            let mut c = DMatrix::zeros(n, n);
            for j in 0..n {
                c.set_column(j, &self.gamma(j));
            }
            c
        })
    }

    /// Dual basis `B = −C^{−T}`: `βⁱᵀγʲ = −δ_ij`. Computed once.
    pub fn dual_basis(&self) -> Result<&DMatrix<f64>> {
        if let Some(b) = self.dual.get() {
            return Ok(b);
        }
        let inv = self
            .gamma_matrix()
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("edge matrix is singular".into()))?;
        let b = -inv.transpose();
        Ok(self.dual.get_or_init(|| b))
    }

    /// Largest constraint value, clipped at zero.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.m()).fold(0.0f64, |acc, i| acc.max(self.row_dot(i, x)))
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }

    /// Multipliers `λ` with `W⁻¹Aᵀλ = y − x`, assuming `y − x` is
    /// `W`-orthogonal to the affine functions (true for any fit that contains
    /// them). The affine part of the computed residual, pure rounding error,
    /// is removed first; otherwise the forward recursion would pile it onto
    /// the last two coordinates.
    pub fn multipliers_from_residual(&self, y: &[f64], x: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let drift = self.affine_fit(&diff);
        let r: Vec<f64> = diff
            .iter()
            .zip(&drift)
            .zip(&self.w)
            .map(|((d, f), w)| w * (d - f))
            .collect();
        self.multipliers_for(&r)
    }

    /// Solves `(Aᵀλ)_k = r_k` for `k < m` by forward recursion.
    pub fn multipliers_for(&self, r: &[f64]) -> Vec<f64> {
        let m = self.m();
        let mut lambda = Vec::with_capacity(m);
        let mut prefix = 0.0;
        let mut prev = 0.0;
        for k in 0..m {
            prefix += r[k];
            prev += self.gaps[k] * prefix;
            lambda.push(prev / self.row_scale[k]);
        }
        lambda
    }

    /// Weighted projection onto `{x : A_i x = 0, i ∈ saturated}`.
    ///
    /// The subspace consists of continuous piecewise-linear interpolants of
    /// the points whose knots sit at `h + 1` for every free constraint `h`,
    /// so the projection is a weighted least-squares fit in a hat-function
    /// basis with a tridiagonal Gram matrix. Cost is `O(n)`.
    pub fn project_equality(&self, y: &[f64], saturated: &[usize]) -> Result<EqualityProjection> {
        let mask = self.saturation_mask(saturated)?;
        self.project_equality_mask(y, &mask)
    }

    pub(crate) fn saturation_mask(&self, saturated: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.m()];
        for &i in saturated {
            if i >= self.m() {
                return Err(Error::InvalidArgument(format!(
                    "constraint index {i} out of range (m = {})",
                    self.m()
                )));
            }
            mask[i] = true;
        }
        Ok(mask)
    }

    /// [`Self::project_equality`] with the saturated set given as a mask.
    pub fn project_equality_mask(&self, y: &[f64], saturated: &[bool]) -> Result<EqualityProjection> {
        let n = self.n();
        let m = self.m();
        if y.len() != n || saturated.len() != m {
            return Err(Error::InvalidArgument("projection input has the wrong length".into()));
        }
        let x = self.equality_fit(y, saturated)?;
        let mut lambda = self.multipliers_from_residual(y, &x);
        for (l, &s) in lambda.iter_mut().zip(saturated) {
            if !s {
                *l = 0.0;
            }
        }
        Ok(EqualityProjection { x, lambda })
    }

    /// Fitted values of [`Self::project_equality_mask`] without multipliers.
    pub(crate) fn equality_fit(&self, y: &[f64], saturated: &[bool]) -> Result<Vec<f64>> {
        let n = self.n();
        let mut knots = Vec::with_capacity(n);
        knots.push(0);
        knots.extend((0..self.m()).filter(|&h| !saturated[h]).map(|h| h + 1));
        knots.push(n - 1);
        let k = knots.len();

        // Tridiagonal Gram matrix of the hat functions: `diag`, `off[j]`
        // coupling knots `j` and `j + 1`.
        let mut diag = vec![0.0; k];
        let mut off = vec![0.0; k - 1];
        let mut rhs = vec![0.0; k];
        for seg in 0..k - 1 {
            let (t0, t1) = (knots[seg], knots[seg + 1]);
            let end = if seg + 2 == k { t1 + 1 } else { t1 };
            let (z0, span) = (self.z[t0], self.z[t1] - self.z[t0]);
            for i in t0..end {
                let right = (self.z[i] - z0) / span;
                let left = 1.0 - right;
                let wi = self.w[i];
                diag[seg] += wi * left * left;
                diag[seg + 1] += wi * right * right;
                off[seg] += wi * left * right;
                rhs[seg] += wi * left * y[i];
                rhs[seg + 1] += wi * right * y[i];
            }
        }
        // LDLᵀ in place.
        for j in 0..k {
            if j > 0 {
                let l = off[j - 1] / diag[j - 1];
                diag[j] -= l * off[j - 1];
                rhs[j] -= l * rhs[j - 1];
                off[j - 1] = l;
            }
            if !(diag[j] > 1e-12 * self.w[knots[j]]) {
                return Err(Error::NotPositiveDefinite { row: j, pivot: diag[j] });
            }
        }
        let mut theta = rhs;
        theta[k - 1] /= diag[k - 1];
        for j in (0..k - 1).rev() {
            theta[j] = theta[j] / diag[j] - off[j] * theta[j + 1];
        }

        let mut x = vec![0.0; n];
        for seg in 0..k - 1 {
            let (t0, t1) = (knots[seg], knots[seg + 1]);
            let (z0, span) = (self.z[t0], self.z[t1] - self.z[t0]);
            for i in t0..=t1 {
                let right = (self.z[i] - z0) / span;
                x[i] = theta[seg] * (1.0 - right) + theta[seg + 1] * right;
            }
        }
        Ok(x)
    }

    /// Same projection computed densely through a QR factorisation of the
    /// scaled saturated rows. Independent of the hat-basis route and meant
    /// for cross-checks.
    pub fn project_equality_dense(&self, y: &[f64], saturated: &[usize]) -> Result<EqualityProjection> {
        let mask = self.saturation_mask(saturated)?;
        let idx: Vec<usize> = (0..self.m()).filter(|&i| mask[i]).collect();
        let n = self.n();
        if y.len() != n {
            return Err(Error::InvalidArgument("projection input has the wrong length".into()));
        }
        let mut atr = DMatrix::zeros(n, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            atr.set_column(c, &self.gamma(i));
        }
        let ys = self.to_scaled(y);
        let solve = qr_restricted_solve(&atr, &ys)?;
        let x = self.from_scaled(&(ys - solve.projection));
        let mut lambda = vec![0.0; self.m()];
        for (c, &i) in idx.iter().enumerate() {
            lambda[i] = solve.coefficients[c];
        }
        Ok(EqualityProjection { x, lambda })
    }

    /// Weighted least-squares affine fit: the projection onto the lineality
    /// space of the cone.
    pub fn affine_fit(&self, y: &[f64]) -> Vec<f64> {
        let line = WeightedLine::fit(&self.z, y, &self.w);
        self.z.iter().map(|&t| line.eval(t)).collect()
    }

    /// KKT residuals of a primal–dual pair for the projection of `y`.
    ///
    /// Residuals are measured relative to the data scale
    /// `s_y = max(1, ‖y‖∞)` and the multiplier scale `s_λ = max(1, ‖λ‖∞)`:
    /// primal and stationarity residuals are divided by `s_y`, the dual
    /// residual by `s_λ` and complementarity by `s_y·s_λ`. For data and
    /// multipliers of magnitude at most one these are the plain residuals;
    /// for large signals they stay at the level of rounding error instead of
    /// growing with `‖y‖` and `‖λ‖`.
    pub fn kkt_certificate(&self, y: &[f64], x: &[f64], lambda: &[f64]) -> KktCertificate {
        let sy = y.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let sl = lambda.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let ax = self.apply_a(x);
        let primal = ax.iter().fold(0.0f64, |a, &v| a.max(v));
        let dual = lambda.iter().fold(0.0f64, |a, &l| a.max(-l));
        let complementarity = ax
            .iter()
            .zip(lambda)
            .fold(0.0f64, |a, (v, l)| a.max((v * l).abs()));
        let at = self.apply_at(lambda);
        let stationarity = (0..self.n()).fold(0.0f64, |a, k| {
            a.max((x[k] - y[k] + at[k] / self.w[k]).abs())
        });
        KktCertificate {
            primal: primal / sy,
            dual: dual / sl,
            complementarity: complementarity / (sy * sl),
            stationarity: stationarity / sy,
        }
    }

    /// Moreau decomposition `y = x̂ + x°` given the projection `x̂`.
    pub fn moreau_split(&self, y: &[f64], x_hat: &[f64]) -> MoreauSplit {
        let polar: Vec<f64> = y.iter().zip(x_hat).map(|(a, b)| a - b).collect();
        let inner = x_hat
            .iter()
            .zip(&polar)
            .zip(&self.w)
            .map(|((a, b), w)| w * a * b)
            .sum();
        let (coefficients, polar_residual) = self.polar_representation(&polar);
        MoreauSplit {
            polar,
            inner,
            coefficients,
            polar_residual,
        }
    }

    /// Membership test for the polar cone `{W⁻¹Aᵀμ : μ >= 0}`.
    ///
    /// The rows of `A` are independent, so the representation is unique when
    /// it exists. Returns `μ` and `max(‖W v − Aᵀμ‖∞, max(0, −min μ))`, which is
    /// zero exactly on the polar cone.
    pub fn polar_representation(&self, v: &[f64]) -> (Vec<f64>, f64) {
        let r: Vec<f64> = v.iter().zip(&self.w).map(|(a, w)| a * w).collect();
        let mu = self.multipliers_for(&r);
        let at = self.apply_at(&mu);
        let range = r.iter().zip(&at).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let sign = mu.iter().fold(0.0f64, |a, &u| a.max(-u));
        (mu, range.max(sign))
    }
}

fn lineality_basis(z: &[f64], w: &[f64], sqrt_w: &[f64]) -> [Vec<f64>; 2] {
    let wsum: f64 = w.iter().sum();
    let zbar = z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
    let mut e1: Vec<f64> = sqrt_w.to_vec();
    let mut e2: Vec<f64> = z.iter().zip(sqrt_w).map(|(t, s)| (t - zbar) * s).collect();
    normalize(&mut e1);
    let proj: f64 = e1.iter().zip(&e2).map(|(a, b)| a * b).sum();
    for (b, a) in e2.iter_mut().zip(&e1) {
        *b -= proj * a;
    }
    normalize(&mut e2);
    [e1, e2]
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for a in v {
        *a /= norm;
    }
}

/// Output of an equality-constrained projection.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityProjection {
    pub x: Vec<f64>,
    /// Length `m`; zero outside the saturated set.
    pub lambda: Vec<f64>,
}

/// Residuals of the KKT system, all nonnegative and scale-normalised (see
/// [`ConeSystem::kkt_certificate`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct KktCertificate {
    /// `max(0, max_i (Ax)_i) / s_y`.
    pub primal: f64,
    /// `max(0, max_i −λ_i) / s_λ`.
    pub dual: f64,
    /// `max_i |λ_i (Ax)_i| / (s_y s_λ)`.
    pub complementarity: f64,
    /// `‖x − y + W⁻¹Aᵀλ‖∞ / s_y`.
    pub stationarity: f64,
}

impl KktCertificate {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.dual)
            .max(self.complementarity)
            .max(self.stationarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// KKT residuals of `(x, λ)` for the projection of the signal's `y`.
pub fn kkt_certificate(signal: &Signal, cone: &ConeSystem, x: &[f64], lambda: &[f64]) -> KktCertificate {
    cone.kkt_certificate(signal.y(), x, lambda)
}

/// Weighted projection onto `{x : A_S x = 0}`.
pub fn project_equality(signal: &Signal, cone: &ConeSystem, saturated: &[usize]) -> Result<EqualityProjection> {
    cone.project_equality(signal.y(), saturated)
}

/// Polar component of a Moreau decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct MoreauSplit {
    /// `y − x̂`.
    pub polar: Vec<f64>,
    /// `⟨x̂, y − x̂⟩_W`; zero at the true projection.
    pub inner: f64,
    /// Coefficients `μ` with `W(y − x̂) = Aᵀμ` on the first `m` coordinates.
    pub coefficients: Vec<f64>,
    /// Distance-like residual of the polar-cone membership test.
    pub polar_residual: f64,
}

pub fn moreau_split(signal: &Signal, cone: &ConeSystem, x_hat: &[f64]) -> MoreauSplit {
    cone.moreau_split(signal.y(), x_hat)
}

/// Weighted least-squares line `a + b (t − t̄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedLine {
    pub center: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl WeightedLine {
    /// Fit over all given points. With a single point the slope is zero.
    pub fn fit(z: &[f64], y: &[f64], w: &[f64]) -> Self {
        let wsum: f64 = w.iter().sum();
        let center = z.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
        let intercept = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / wsum;
        let mut szz = 0.0;
        let mut szy = 0.0;
        for ((t, v), wi) in z.iter().zip(y).zip(w) {
            let dz = t - center;
            szz += wi * dz * dz;
            szy += wi * dz * (v - intercept);
        }
        let slope = if szz > 0.0 { szy / szz } else { 0.0 };
        Self {
            center,
            intercept,
            slope,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.intercept + self.slope * (t - self.center)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, n: usize, weighted: bool) -> Signal {
        let mut z = Vec::with_capacity(n);
        let mut t = 0.0;
        for _ in 0..n {
            t += rng.random_range(0.2..2.0);
            z.push(t);
        }
        let y = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let w = (0..n)
            .map(|_| if weighted { rng.random_range(0.3..3.0) } else { 1.0 })
            .collect();
        Signal::new(z, y, w).unwrap()
    }

    #[test]
    fn nonuniform_row_coefficients() {
        let s = Signal::unweighted(vec![0.0, 1.0, 3.0], vec![0.0; 3]).unwrap();
        let c = build_cone_system(&s);
        assert_eq!(c.m(), 1);
        assert_eq!(c.row(0), [1.0, -1.5, 0.5]);
    }

    #[test]
    fn unit_norm_rows() {
        let s = Signal::unweighted(vec![0.0, 1.0, 3.0, 4.0], vec![0.0; 4]).unwrap();
        let c = ConeSystem::new(&s, RowScaling::UnitNorm);
        for r in c.rows() {
            let norm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dual_basis_three_points() {
        let s = Signal::uniform(vec![0.0; 3]).unwrap();
        let c = build_cone_system(&s);
        let b = c.dual_basis().unwrap();
        let expected = [-1.0 / 6.0, 1.0 / 3.0, -1.0 / 6.0];
        for k in 0..3 {
            assert!((b[(k, 0)] - expected[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn dual_basis_biorthogonal_weighted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_signal(&mut rng, 9, true);
        let c = build_cone_system(&s);
        let prod = c.gamma_matrix().transpose() * c.dual_basis().unwrap();
        let err = (prod + DMatrix::<f64>::identity(9, 9)).amax();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn completion_spans_null_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_signal(&mut rng, 8, true);
        let c = build_cone_system(&s);
        for e in c.completion() {
            for i in 0..c.m() {
                let r = c.scaled_row(i);
                let dot = r[0] * e[i] + r[1] * e[i + 1] + r[2] * e[i + 2];
                assert!(dot.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unit_weight_completion_is_centered_abscissa() {
        let s = Signal::uniform(vec![0.0; 5]).unwrap();
        let c = build_cone_system(&s);
        let [e1, e2] = c.completion();
        let r5 = 1.0 / 5f64.sqrt();
        assert!(e1.iter().all(|v| (v - r5).abs() < 1e-15));
        let norm = 10f64.sqrt();
        for (k, v) in e2.iter().enumerate() {
            assert!((v - (k as f64 - 2.0) / norm).abs() < 1e-15);
        }
    }

    #[test]
    fn three_point_projection() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let p = c.project_equality(s.y(), &[0]).unwrap();
        for v in &p.x {
            assert!((v + 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((p.lambda[0] - 1.0 / 3.0).abs() < 1e-15);
        let cert = c.kkt_certificate(s.y(), &p.x, &p.lambda);
        assert!(cert.passes(1e-14));
    }

    #[test]
    fn infeasible_start_residual() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let cert = c.kkt_certificate(s.y(), s.y(), &[0.0]);
        assert_eq!(cert.primal, 2.0);
    }

    #[test]
    fn hat_and_dense_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 5 + trial % 9;
            let s = random_signal(&mut rng, n, trial % 2 == 0);
            let c = build_cone_system(&s);
            let sat: Vec<usize> = (0..c.m()).filter(|_| rng.random_bool(0.5)).collect();
            let a = c.project_equality(s.y(), &sat).unwrap();
            let b = c.project_equality_dense(s.y(), &sat).unwrap();
            for (p, q) in a.x.iter().zip(&b.x) {
                assert!((p - q).abs() < 1e-10);
            }
            for (p, q) in a.lambda.iter().zip(&b.lambda) {
                assert!((p - q).abs() < 1e-9, "{p} {q}");
            }
            for &i in &sat {
                assert!(c.row_dot(i, &a.x).abs() < 1e-10);
            }
            let at = c.apply_at(&a.lambda);
            for k in 0..n {
                assert!((a.x[k] - s.y()[k] + at[k] / s.w()[k]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn unit_norm_multipliers_rescale() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_signal(&mut rng, 10, true);
        let raw = ConeSystem::new(&s, RowScaling::Raw);
        let unit = ConeSystem::new(&s, RowScaling::UnitNorm);
        let sat = [1usize, 2, 5, 6];
        let a = raw.project_equality(s.y(), &sat).unwrap();
        let b = unit.project_equality(s.y(), &sat).unwrap();
        let cert = unit.kkt_certificate(s.y(), &b.x, &b.lambda);
        assert!(cert.stationarity < 1e-10);
        for (p, q) in a.x.iter().zip(&b.x) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn full_saturation_is_affine_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_signal(&mut rng, 12, true);
        let c = build_cone_system(&s);
        let all: Vec<usize> = (0..c.m()).collect();
        let p = c.project_equality(s.y(), &all).unwrap();
        let fit = c.affine_fit(s.y());
        for (a, b) in p.x.iter().zip(&fit) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn moreau_split_three_points() {
        let s = Signal::uniform(vec![0.0, -1.0, 0.0]).unwrap();
        let c = build_cone_system(&s);
        let x = [-1.0 / 3.0; 3];
        let split = c.moreau_split(s.y(), &x);
        assert!(split.inner.abs() < 1e-15);
        assert!((split.coefficients[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!(split.polar_residual < 1e-15);
        let expected = [1.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0];
        for (a, b) in split.polar.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn polar_membership_rejects_negative_combination() {
        let s = Signal::uniform(vec![0.0; 4]).unwrap();
        let c = build_cone_system(&s);
        let (_, res) = c.polar_representation(&[-1.0, 2.0, -1.0, 0.0]);
        assert!((res - 1.0).abs() < 1e-15);
        let (_, res) = c.polar_representation(&[1.0, 0.0, 0.0, 0.0]);
        assert!(res > 0.1);
    }

    #[test]
    fn out_of_range_constraint_index() {
        let s = Signal::uniform(vec![0.0; 4]).unwrap();
        let c = build_cone_system(&s);
        assert!(c.project_equality(s.y(), &[2]).is_err());
    }
}
