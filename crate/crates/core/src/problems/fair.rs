//! Fair sparse regression through a semidefinite relaxation.
//!
//! Observations follow `y_i = X_i^T w* + gamma z*_i + e_i` with hidden signs
//! `z*_i`. The relaxation minimises `<M(w), Z> + lambda ||w||_1` over
//! `{Z PSD, diag(Z) = 1}` where, with residual `r = Xw - y`,
//!
//! ```text
//! M(w) = [ |r|^2/n + 1    (gamma/n) r^T        ]
//!        [ (gamma/n) r    (gamma^2/n + 1) I_n  ]
//! ```
//!
//! `M(w)` is an arrow matrix, so products and solves with it cost `O(n)` per
//! column and are never formed densely. The invex kernel is
//! `eta((w, Z), (w', Z')) = (w - w', M(w')^{-1} M(w) (Z - Z'))`.

use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sets::{project_psd_block, psd_block_feasible, PinnedDiagonal};
use super::{normal, rng};
use crate::error::{GeometryError, KernelError, ProblemError, ShapeError};
use crate::geometry::Geometry;
use crate::kernels::{dykstra_psd_fixed_diagonal_warm, soft_threshold, symmetrize, DykstraSettings};
use crate::optim::{Objective, Program, Projector};
use crate::point::Point;
use crate::scalar::Real;

/// Symmetric arrow matrix `[[a, b^T], [b, c I]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrowMatrix<T: Real> {
    pub a: T,
    pub b: DVector<T>,
    pub c: T,
}

impl<T: Real> ArrowMatrix<T> {
    pub fn order(&self) -> usize {
        self.b.len() + 1
    }

    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.order();
        let mut m = DMatrix::identity(n, n) * self.c;
        m[(0, 0)] = self.a;
        for (i, &bi) in self.b.iter().enumerate() {
            m[(0, i + 1)] = bi;
            m[(i + 1, 0)] = bi;
        }
        m
    }

    pub fn mul_vec(&self, v: &DVector<T>) -> DVector<T> {
        let n = self.b.len();
        let tail = v.rows(1, n);
        let mut out = tail * self.c + &self.b * v[0];
        let head = self.a * v[0] + self.b.dot(&tail);
        out = out.insert_row(0, head);
        out
    }

    pub fn mul_mat(&self, m: &DMatrix<T>) -> DMatrix<T> {
        let n = self.b.len();
        let head = m.row(0);
        let tail = m.rows(1, n);
        let mut out = DMatrix::zeros(n + 1, m.ncols());
        let top = head * self.a + self.b.transpose() * tail;
        out.row_mut(0).copy_from(&top);
        let bottom = tail * self.c + &self.b * head;
        out.rows_mut(1, n).copy_from(&bottom);
        out
    }

    /// Schur complement of the `c I` block, `a - |b|^2 / c`.
    fn schur(&self) -> Result<T, KernelError> {
        let s = self.a - self.b.norm_squared() / self.c;
        if self.c == T::zero() || !s.is_finite_value() || s == T::zero() {
            return Err(KernelError::Singular);
        }
        Ok(s)
    }

    /// Solves `A X = M` column by column through the Schur complement.
    pub fn solve_mat(&self, m: &DMatrix<T>) -> Result<DMatrix<T>, KernelError> {
        if m.nrows() != self.order() {
            return Err(ShapeError::new(format!("{} rows", self.order()), format!("{} rows", m.nrows())).into());
        }
        let s = self.schur()?;
        let n = self.b.len();
        let head = m.row(0);
        let tail = m.rows(1, n);
        let x0 = (head - self.b.transpose() * tail / self.c) / s;
        let mut out = DMatrix::zeros(n + 1, m.ncols());
        out.row_mut(0).copy_from(&x0);
        let bottom = (tail - &self.b * &x0) / self.c;
        out.rows_mut(1, n).copy_from(&bottom);
        Ok(out)
    }

    pub fn solve_vec(&self, v: &DVector<T>) -> Result<DVector<T>, KernelError> {
        let m = DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        Ok(self.solve_mat(&m)?.column(0).into_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairParams {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    pub sparsity: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct FairLassoInstance<T: Real> {
    pub params: FairParams,
    pub x: DMatrix<T>,
    pub y: DVector<T>,
    pub gamma: T,
    pub lambda: T,
    pub w_star: DVector<T>,
    pub z_star: DVector<T>,
}

impl<T: Real> FairLassoInstance<T> {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    fn check(&self, w: &DVector<T>, z: &DMatrix<T>) -> Result<(), ShapeError> {
        let n = self.n();
        if w.len() != self.d() || z.shape() != (n + 1, n + 1) {
            return Err(ShapeError::new(
                format!("w[{}], Z[{1}x{1}]", self.d(), n + 1),
                format!("w[{}], Z[{}x{}]", w.len(), z.nrows(), z.ncols()),
            ));
        }
        Ok(())
    }

    pub fn residual(&self, w: &DVector<T>) -> DVector<T> {
        &self.x * w - &self.y
    }

    pub fn arrow(&self, w: &DVector<T>) -> ArrowMatrix<T> {
        let n = T::lit(self.n() as f64);
        let r = self.residual(w);
        ArrowMatrix {
            a: r.norm_squared() / n + T::one(),
            b: r * (self.gamma / n),
            c: self.gamma * self.gamma / n + T::one(),
        }
    }
}

/// Draws an instance. `lambda` starts at zero; set it with
/// [`FairLassoInstance::with_lambda`].
pub fn fair_generate<T: Real>(params: FairParams) -> Result<FairLassoInstance<T>, ProblemError> {
    let FairParams { n, d, gamma, sparsity, noise_sigma, seed } = params;
    if n == 0 || d == 0 {
        return Err(ProblemError::Invalid("n and d must be positive".into()));
    }
    if sparsity > d || !(gamma >= 0.0) || !(noise_sigma >= 0.0) {
        return Err(ProblemError::Invalid("need sparsity <= d, gamma >= 0 and noise_sigma >= 0".into()));
    }
    let mut rng = rng(seed);
    let x = DMatrix::<T>::from_fn(n, d, |_, _| normal(&mut rng));
    let mut support: Vec<usize> = (0..d).collect();
    for i in 0..sparsity {
        let j = rng.random_range(i..d);
        support.swap(i, j);
    }
    let mut w_star = DVector::<T>::zeros(d);
    for &j in &support[..sparsity] {
        let mag: f64 = rng.random_range(0.5..=1.5);
        w_star[j] = T::lit(if rng.random_bool(0.5) { mag } else { -mag });
    }
    let z_star = DVector::<T>::from_fn(n, |_, _| if rng.random_bool(0.5) { T::one() } else { -T::one() });
    let g = T::lit(gamma);
    let mut y = &x * &w_star + &z_star * g;
    if noise_sigma > 0.0 {
        let s = T::lit(noise_sigma);
        for yi in y.iter_mut() {
            *yi += s * normal::<T>(&mut rng);
        }
    }
    Ok(FairLassoInstance { params, x, y, gamma: g, lambda: T::zero(), w_star, z_star })
}

/// `<M(w), Z> + lambda |w|_1`.
pub fn fair_objective<T: Real>(w: &DVector<T>, z: &DMatrix<T>, inst: &FairLassoInstance<T>) -> Result<T, ProblemError> {
    inst.check(w, z)?;
    let m = inst.arrow(w);
    let n = inst.n();
    let mut offdiag = T::zero();
    for i in 0..n {
        offdiag += m.b[i] * (z[(0, i + 1)] + z[(i + 1, 0)]);
    }
    let trace_tail = (1..=n).fold(T::zero(), |acc, i| acc + z[(i, i)]);
    let l1 = w.iter().fold(T::zero(), |acc, v| acc + v.abs());
    Ok(m.a * z[(0, 0)] + offdiag + m.c * trace_tail + inst.lambda * l1)
}

/// Gradient of the smooth part: `(2/n) X^T (Z_11 r + gamma z_21)` and `M(w)`.
///
/// `z_21` averages the first row and column so the formula stays exact for
/// slightly asymmetric `Z`.
pub fn fair_grad<T: Real>(
    w: &DVector<T>,
    z: &DMatrix<T>,
    inst: &FairLassoInstance<T>,
) -> Result<(DVector<T>, DMatrix<T>), ProblemError> {
    inst.check(w, z)?;
    let n = inst.n();
    let r = inst.residual(w);
    let half = T::lit(0.5);
    let z21 = DVector::from_fn(n, |i, _| half * (z[(i + 1, 0)] + z[(0, i + 1)]));
    let inner = r * z[(0, 0)] + z21 * inst.gamma;
    let gw = inst.x.transpose() * inner * (T::lit(2.0) / T::lit(n as f64));
    Ok((gw, inst.arrow(w).to_dense()))
}

/// Which Z-step the program takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FairMode {
    /// `Z - alpha M(w_next)^{-1} M(w) grad_Z`.
    Invex,
    /// `Z - alpha grad_Z`.
    Euclidean,
}

/// Unprojected step: soft-thresholded `w` and the raw (not yet symmetrised) `Z`.
pub fn fair_step_unprojected<T: Real>(
    w: &DVector<T>,
    z: &DMatrix<T>,
    grad_w: &DVector<T>,
    grad_z: &DMatrix<T>,
    alpha: T,
    inst: &FairLassoInstance<T>,
    mode: FairMode,
) -> Result<(DVector<T>, DMatrix<T>), ProblemError> {
    inst.check(w, z)?;
    inst.check(grad_w, grad_z)?;
    let w_next = soft_threshold(&(w - grad_w * alpha), alpha * inst.lambda);
    let dir = match mode {
        FairMode::Euclidean => grad_z.clone(),
        FairMode::Invex => inst.arrow(&w_next).solve_mat(&inst.arrow(w).mul_mat(grad_z))?,
    };
    Ok((w_next, z - dir * alpha))
}

/// One projected step from a feasible `(w, Z)`.
pub fn fair_step<T: Real>(
    w: &DVector<T>,
    z: &DMatrix<T>,
    alpha: T,
    inst: &FairLassoInstance<T>,
    mode: FairMode,
    settings: DykstraSettings,
) -> Result<(DVector<T>, DMatrix<T>), ProblemError> {
    let (gw, gz) = fair_grad(w, z, inst)?;
    let (w_next, zbar) = fair_step_unprojected(w, z, &gw, &gz, alpha, inst, mode)?;
    let z_next = project_psd_block(&symmetrize(&zbar), &PinnedDiagonal::All, settings)?;
    Ok((w_next, z_next))
}

/// `eta((w, Z), (w', Z')) = (w - w', M(w')^{-1} M(w) (Z - Z'))`.
pub fn fair_eta<T: Real>(
    w: &DVector<T>,
    z: &DMatrix<T>,
    w_base: &DVector<T>,
    z_base: &DMatrix<T>,
    inst: &FairLassoInstance<T>,
) -> Result<(DVector<T>, DMatrix<T>), ProblemError> {
    inst.check(w, z)?;
    inst.check(w_base, z_base)?;
    let dz = inst.arrow(w_base).solve_mat(&inst.arrow(w).mul_mat(&(z - z_base)))?;
    Ok((w - w_base, dz))
}

/// Spectral norm of the Z-step operator `M(w_next)^{-1} M(w) M(w)`, by power
/// iteration on its Gram matrix.
pub fn fair_step_operator_norm<T: Real>(
    w_next: &DVector<T>,
    w: &DVector<T>,
    inst: &FairLassoInstance<T>,
) -> Result<T, ProblemError> {
    let m_next = inst.arrow(w_next);
    let m = inst.arrow(w);
    let n = m.order();
    let apply = |v: &DVector<T>| -> Result<DVector<T>, KernelError> { m_next.solve_vec(&m.mul_vec(&m.mul_vec(v))) };
    let apply_t = |v: &DVector<T>| -> Result<DVector<T>, KernelError> { Ok(m.mul_vec(&m.mul_vec(&m_next.solve_vec(v)?))) };
    let mut v = DVector::from_fn(n, |i, _| T::one() + T::lit(i as f64 * 1e-3));
    v /= v.norm();
    let mut sigma = T::zero();
    for _ in 0..500 {
        let u = apply_t(&apply(&v)?)?;
        let norm = u.norm();
        if norm == T::zero() {
            return Ok(T::zero());
        }
        let next = norm.sqrt();
        v = u / norm;
        if (next - sigma).abs() <= T::lit(1e-12) * next {
            return Ok(next);
        }
        sigma = next;
    }
    Ok(sigma)
}

/// A feasible starting point: standard normal `w` and a correlation matrix
/// built from normalised Gaussian rows.
pub fn fair_initial_point<T: Real>(inst: &FairLassoInstance<T>, seed: u64) -> Point<T> {
    let mut rng = rng(seed);
    let n = inst.n() + 1;
    let w = DVector::<T>::from_fn(inst.d(), |_, _| normal(&mut rng));
    let mut g = DMatrix::<T>::from_fn(n, n, |_, _| normal(&mut rng));
    for mut row in g.row_iter_mut() {
        let norm = row.norm();
        row /= norm;
    }
    let mut z = &g * g.transpose();
    for i in 0..n {
        z[(i, i)] = T::one();
    }
    Point::new().with_vector("w", w).with_matrix("Z", symmetrize(&z))
}

fn blocks<T: Real>(p: &Point<T>) -> Result<(&DVector<T>, &DMatrix<T>), ShapeError> {
    if p.num_blocks() != 2 {
        return Err(ShapeError::new("blocks w, Z", format!("{:?}", p.shapes())));
    }
    Ok((p.vector("w")?, p.matrix("Z")?))
}

fn point<T: Real>(w: DVector<T>, z: DMatrix<T>) -> Point<T> {
    Point::new().with_vector("w", w).with_matrix("Z", z)
}

/// `{diag(Z) = 1, Z PSD}` on the `Z` block; `w` is unconstrained.
///
/// Successive projections start Dykstra from the previous call's diagonal
/// correction, which cuts the sweep count sharply along an optimizer run.
#[derive(Debug)]
pub struct FairProjector {
    pub settings: DykstraSettings,
    warm: Mutex<Vec<f64>>,
}

impl FairProjector {
    pub fn new(settings: DykstraSettings) -> Self {
        Self { settings, warm: Mutex::new(Vec::new()) }
    }
}

impl Default for FairProjector {
    fn default() -> Self {
        // Tighter than the audit tolerance so projected iterates keep a margin.
        Self::new(DykstraSettings::new(1e-9, 5000).with_anderson(5))
    }
}

impl Clone for FairProjector {
    fn clone(&self) -> Self {
        Self::new(self.settings)
    }
}

impl<T: Real> Projector<T> for FairProjector {
    fn project(&self, y: &Point<T>) -> Result<Point<T>, ProblemError> {
        let (w, z) = blocks(y)?;
        let all: Vec<usize> = (0..z.nrows()).collect();
        let mut warm = self.warm.lock().unwrap_or_else(|e| e.into_inner());
        let mut shift: Vec<T> = warm.iter().map(|&v| T::lit(v)).collect();
        let (z_next, _) = dykstra_psd_fixed_diagonal_warm(z, &all, &mut shift, self.settings).map_err(KernelError::from)?;
        *warm = shift.iter().map(|v| v.as_f64()).collect();
        Ok(point(w.clone(), z_next))
    }

    fn is_feasible(&self, x: &Point<T>, tol: T) -> Result<bool, ProblemError> {
        psd_block_feasible(blocks(x)?.1, &PinnedDiagonal::All, tol)
    }
}

/// Fair lasso as a constrained program with the `w` block soft-thresholded
/// inside the update.
#[derive(Clone, Debug)]
pub struct FairProgram<T: Real> {
    pub instance: Arc<FairLassoInstance<T>>,
    pub mode: FairMode,
    pub projector: FairProjector,
}

impl<T: Real> FairProgram<T> {
    pub fn new(instance: Arc<FairLassoInstance<T>>, mode: FairMode) -> Self {
        Self { instance, mode, projector: FairProjector::default() }
    }
}

impl<T: Real> Program<T> for FairProgram<T> {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        let (w, z) = blocks(x)?;
        fair_objective(w, z, &self.instance)
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        let (w, z) = blocks(x)?;
        let (gw, gz) = fair_grad(w, z, &self.instance)?;
        Ok(point(gw, gz))
    }

    fn update(&self, x: &Point<T>, grad: &Point<T>, alpha: T) -> Result<Point<T>, ProblemError> {
        let (w, z) = blocks(x)?;
        let (gw, gz) = blocks(grad)?;
        let (w_next, zbar) = fair_step_unprojected(w, z, gw, gz, alpha, &self.instance, self.mode)?;
        Ok(point(w_next, symmetrize(&zbar)))
    }

    fn projector(&self) -> Option<&dyn Projector<T>> {
        Some(&self.projector)
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        let (w, z) = blocks(x)?;
        self.instance.check(w, z)
    }
}

/// Smooth part of the objective (`lambda` ignored) as an [`Objective`].
#[derive(Clone, Debug)]
pub struct FairSmooth<T: Real>(pub Arc<FairLassoInstance<T>>);

impl<T: Real> Objective<T> for FairSmooth<T> {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        let (w, z) = blocks(x)?;
        let inst = FairLassoInstance { lambda: T::zero(), ..(*self.0).clone() };
        fair_objective(w, z, &inst)
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        let (w, z) = blocks(x)?;
        let (gw, gz) = fair_grad(w, z, &self.0)?;
        Ok(point(gw, gz))
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        let (w, z) = blocks(x)?;
        self.0.check(w, z)
    }
}

/// The kernel `eta` on points with blocks `w` and `Z`.
#[derive(Clone, Debug)]
pub struct FairGeometry<T: Real>(pub Arc<FairLassoInstance<T>>);

fn geometry_error(e: ProblemError) -> GeometryError {
    match e {
        ProblemError::Geometry(g) => g,
        ProblemError::Shape(s) => GeometryError::Shape(s),
        ProblemError::Kernel(k) => GeometryError::Kernel(k),
        other => GeometryError::Precondition(other.to_string()),
    }
}

impl<T: Real> Geometry<T> for FairGeometry<T> {
    fn name(&self) -> &'static str {
        "fair_arrow"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        let (w, z) = blocks(y)?;
        let (wb, zb) = blocks(x)?;
        let (dw, dz) = fair_eta(w, z, wb, zb, &self.0).map_err(geometry_error)?;
        Ok(point(dw, dz))
    }

    /// `w = w' + v_w`, `Z = Z' + M(w)^{-1} M(w') v_Z`.
    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        let (wb, zb) = blocks(x)?;
        let (vw, vz) = blocks(v)?;
        self.0.check(vw, vz)?;
        let w = wb + vw;
        let dz = self.0.arrow(&w).solve_mat(&self.0.arrow(wb).mul_mat(vz))?;
        Ok(point(w, zb + dz))
    }
}
