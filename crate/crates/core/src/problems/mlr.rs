//! Sparse mixed linear regression through a lifted invex program.
//!
//! Data follow `y_i = z*_i <X_i, b1*> + (1 - z*_i) <X_i, b2*> + e_i`. With
//! `s_i = [X_i; -y_i]` and `S_i = s_i s_i^T` the program is
//!
//! ```text
//! min  sum_i 1/2 <S_i, W + U> + 1/2 t_i <S_i, W - U> + l1 |vec W|_1 + l2 |vec U|_1
//! s.t. W, U PSD,  W_{d+1,d+1} = U_{d+1,d+1} = 1,  |t|_inf <= 1
//! ```
//!
//! and the invex kernel rescales the `t` block by
//! `tau_i = <S_i, W - U> / <S_i, W' - U'>`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sets::{project_psd_block, psd_block_feasible, PinnedDiagonal};
use super::{normal, rng};
use crate::error::{GeometryError, ProblemError, ShapeError};
use crate::geometry::Geometry;
use crate::kernels::{box_project_linf, soft_threshold_matrix, symmetrize, DykstraSettings};
use crate::optim::{Objective, Program, Projector};
use crate::point::Point;
use crate::scalar::Real;

/// Denominators of `tau` below this magnitude fall back to `tau_i = 1`.
pub const TAU_DEGENERACY: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlrParams {
    pub n: usize,
    pub d: usize,
    pub separation: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct MlrInstance<T: Real> {
    pub params: MlrParams,
    pub x: DMatrix<T>,
    pub y: DVector<T>,
    pub lambda1: T,
    pub lambda2: T,
    /// Row `i` holds `s_i^T = [X_i^T, -y_i]`, so `S_i = s_i s_i^T`.
    pub s: DMatrix<T>,
    pub beta1: DVector<T>,
    pub beta2: DVector<T>,
    pub z_star: Vec<bool>,
}

impl<T: Real> MlrInstance<T> {
    /// Builds an instance from data, caching the lifted rows.
    pub fn from_data(params: MlrParams, x: DMatrix<T>, y: DVector<T>) -> Result<Self, ProblemError> {
        if x.nrows() != y.len() {
            return Err(ShapeError::new(format!("{} responses", x.nrows()), format!("{}", y.len())).into());
        }
        let (n, d) = x.shape();
        let s = DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[(i, j)] } else { -y[i] });
        Ok(Self {
            params,
            x,
            y,
            lambda1: T::zero(),
            lambda2: T::zero(),
            s,
            beta1: DVector::zeros(d),
            beta2: DVector::zeros(d),
            z_star: vec![true; n],
        })
    }

    pub fn with_lambdas(mut self, lambda1: T, lambda2: T) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    /// Order `d + 1` of the lifted matrices.
    pub fn order(&self) -> usize {
        self.s.ncols()
    }

    /// `S_i` assembled densely.
    pub fn lifted(&self, i: usize) -> DMatrix<T> {
        let r = self.s.row(i);
        r.transpose() * r
    }

    /// `<S_i, A>` for every `i`.
    pub fn inner_all(&self, a: &DMatrix<T>) -> DVector<T> {
        let sa = &self.s * a;
        DVector::from_fn(self.n(), |i, _| sa.row(i).dot(&self.s.row(i)))
    }

    /// `sum_i c_i S_i`.
    pub fn weighted_sum(&self, c: &DVector<T>) -> DMatrix<T> {
        let mut scaled = self.s.clone();
        for (i, mut row) in scaled.row_iter_mut().enumerate() {
            row *= c[i];
        }
        symmetrize(&(self.s.transpose() * scaled))
    }

    /// Exact smoothness constant of the bilinear smooth part,
    /// `sqrt(2 lambda_max(G o G)) / 2` with `G = s s^T`.
    pub fn smoothness(&self) -> Result<T, ProblemError> {
        let g = &self.s * self.s.transpose();
        let vals = T::symmetric_eigenvalues(&g.component_mul(&g))?;
        Ok((T::lit(2.0) * vals[vals.len() - 1]).sqrt() * T::lit(0.5))
    }

    fn check(&self, t: &DVector<T>, w: &DMatrix<T>, u: &DMatrix<T>) -> Result<(), ShapeError> {
        let k = self.order();
        if t.len() != self.n() || w.shape() != (k, k) || u.shape() != (k, k) {
            return Err(ShapeError::new(
                format!("t[{}], W[{1}x{1}], U[{1}x{1}]", self.n(), k),
                format!("t[{}], W[{}x{}], U[{}x{}]", t.len(), w.nrows(), w.ncols(), u.nrows(), u.ncols()),
            ));
        }
        Ok(())
    }
}

/// Draws `X` standard normal, regressors with `|b1 - b2| >= separation`,
/// Bernoulli(1/2) labels and Gaussian noise.
pub fn mlr_generate<T: Real>(params: MlrParams) -> Result<MlrInstance<T>, ProblemError> {
    let MlrParams { n, d, separation, noise_sigma, seed } = params;
    if n == 0 || d == 0 {
        return Err(ProblemError::Invalid("n and d must be positive".into()));
    }
    if !(separation >= 0.0) || !(noise_sigma >= 0.0) {
        return Err(ProblemError::Invalid("separation and noise_sigma must be nonnegative".into()));
    }
    let mut rng = rng(seed);
    let x = DMatrix::<T>::from_fn(n, d, |_, _| normal(&mut rng));
    let beta1 = DVector::<T>::from_fn(d, |_, _| normal(&mut rng));
    let mut beta2 = DVector::<T>::from_fn(d, |_, _| normal(&mut rng));
    let sep = T::lit(separation);
    let gap = (&beta2 - &beta1).norm();
    if gap < sep {
        let dir = if gap > T::zero() { (&beta2 - &beta1) / gap } else { DVector::from_element(d, T::one() / T::lit(d as f64).sqrt()) };
        beta2 = &beta1 + dir * sep;
    }
    let z_star: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let x1 = &x * &beta1;
    let x2 = &x * &beta2;
    let sigma = T::lit(noise_sigma);
    let y = DVector::from_fn(n, |i, _| {
        let e = if noise_sigma > 0.0 { sigma * normal::<T>(&mut rng) } else { T::zero() };
        (if z_star[i] { x1[i] } else { x2[i] }) + e
    });
    let mut inst = MlrInstance::from_data(params, x, y)?;
    inst.beta1 = beta1;
    inst.beta2 = beta2;
    inst.z_star = z_star;
    Ok(inst)
}

fn l1<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc + v.abs())
}

/// Smooth part `sum_i 1/2 <S_i, W + U> + 1/2 t_i <S_i, W - U>`.
pub fn mlr_smooth<T: Real>(t: &DVector<T>, w: &DMatrix<T>, u: &DMatrix<T>, inst: &MlrInstance<T>) -> Result<T, ProblemError> {
    inst.check(t, w, u)?;
    let half = T::lit(0.5);
    let sum = inst.inner_all(&(w + u));
    let diff = inst.inner_all(&(w - u));
    Ok((0..inst.n()).fold(T::zero(), |acc, i| acc + half * sum[i] + half * t[i] * diff[i]))
}

pub fn mlr_objective<T: Real>(t: &DVector<T>, w: &DMatrix<T>, u: &DMatrix<T>, inst: &MlrInstance<T>) -> Result<T, ProblemError> {
    Ok(mlr_smooth(t, w, u, inst)? + inst.lambda1 * l1(w) + inst.lambda2 * l1(u))
}

/// Gradients `(grad_t, grad_W, grad_U)` of the smooth part.
pub fn mlr_gradients<T: Real>(
    t: &DVector<T>,
    w: &DMatrix<T>,
    u: &DMatrix<T>,
    inst: &MlrInstance<T>,
) -> Result<(DVector<T>, DMatrix<T>, DMatrix<T>), ProblemError> {
    inst.check(t, w, u)?;
    let half = T::lit(0.5);
    let gt = inst.inner_all(&(w - u)) * half;
    let gw = inst.weighted_sum(&t.map(|ti| (ti + T::one()) * half));
    let gu = inst.weighted_sum(&t.map(|ti| (T::one() - ti) * half));
    Ok((gt, gw, gu))
}

/// `tau_i = <S_i, W - U> / <S_i, W' - U'>`, or 1 where the denominator is
/// below [`TAU_DEGENERACY`] in magnitude.
pub fn mlr_tau<T: Real>(
    w: &DMatrix<T>,
    u: &DMatrix<T>,
    w_prev: &DMatrix<T>,
    u_prev: &DMatrix<T>,
    inst: &MlrInstance<T>,
) -> DVector<T> {
    let num = inst.inner_all(&(w - u));
    let den = inst.inner_all(&(w_prev - u_prev));
    let eps = T::lit(TAU_DEGENERACY);
    DVector::from_fn(inst.n(), |i, _| if den[i].abs() < eps { T::one() } else { num[i] / den[i] })
}

/// Kernel `(tau o (t - t'), W - W', U - U')` with `tau = tau(W, U, W', U')`.
pub fn mlr_eta<T: Real>(
    (t, w, u): (&DVector<T>, &DMatrix<T>, &DMatrix<T>),
    (tb, wb, ub): (&DVector<T>, &DMatrix<T>, &DMatrix<T>),
    inst: &MlrInstance<T>,
) -> Result<(DVector<T>, DMatrix<T>, DMatrix<T>), ProblemError> {
    inst.check(t, w, u)?;
    inst.check(tb, wb, ub)?;
    let tau = mlr_tau(w, u, wb, ub, inst);
    Ok(((t - tb).component_mul(&tau), w - wb, u - ub))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlrMode {
    /// `t` direction divided by `tau`.
    Invex,
    /// Plain projected gradient on every block.
    Euclidean,
}

/// `t - alpha g / tau`, sending zero `tau` to the box boundary the step
/// points at.
fn scaled_t_step<T: Real>(t: &DVector<T>, g: &DVector<T>, tau: &DVector<T>, alpha: T) -> DVector<T> {
    DVector::from_fn(t.len(), |i, _| {
        let step = alpha * g[i];
        if step == T::zero() {
            t[i]
        } else if tau[i] == T::zero() {
            let sign = if step > T::zero() { -T::one() } else { T::one() };
            sign * T::infinity()
        } else {
            t[i] - step / tau[i]
        }
    })
}

/// One step from a feasible iterate. `W` and `U` are soft-thresholded and
/// projected first; in invex mode `tau` is then taken between the new and
/// old matrices.
pub fn mlr_step<T: Real>(
    (t, w, u): (&DVector<T>, &DMatrix<T>, &DMatrix<T>),
    alpha: T,
    inst: &MlrInstance<T>,
    mode: MlrMode,
    settings: DykstraSettings,
) -> Result<(DVector<T>, DMatrix<T>, DMatrix<T>), ProblemError> {
    let (gt, gw, gu) = mlr_gradients(t, w, u, inst)?;
    mlr_update((t, w, u), (&gt, &gw, &gu), alpha, inst, mode, settings)
}

fn mlr_update<T: Real>(
    (t, w, u): (&DVector<T>, &DMatrix<T>, &DMatrix<T>),
    (gt, gw, gu): (&DVector<T>, &DMatrix<T>, &DMatrix<T>),
    alpha: T,
    inst: &MlrInstance<T>,
    mode: MlrMode,
    settings: DykstraSettings,
) -> Result<(DVector<T>, DMatrix<T>, DMatrix<T>), ProblemError> {
    inst.check(gt, gw, gu)?;
    let wbar = soft_threshold_matrix(&(w - gw * alpha), alpha * inst.lambda1);
    let ubar = soft_threshold_matrix(&(u - gu * alpha), alpha * inst.lambda2);
    let w_next = project_psd_block(&wbar, &PinnedDiagonal::Last, settings)?;
    let u_next = project_psd_block(&ubar, &PinnedDiagonal::Last, settings)?;
    let tau = match mode {
        MlrMode::Invex => mlr_tau(&w_next, &u_next, w, u, inst),
        MlrMode::Euclidean => DVector::from_element(inst.n(), T::one()),
    };
    let t_next = box_project_linf(&scaled_t_step(t, gt, &tau, alpha), T::one());
    Ok((t_next, w_next, u_next))
}

/// Feasible start: `t` uniform on `[-1, 1]`, `W` and `U` Gaussian Gram
/// matrices normalised to a unit corner entry.
pub fn mlr_initial_point<T: Real>(inst: &MlrInstance<T>, seed: u64) -> Point<T> {
    let mut rng = rng(seed);
    let k = inst.order();
    let t = DVector::from_fn(inst.n(), |_, _| T::lit(rng.random_range(-1.0..=1.0)));
    let mut gram = || {
        let g = DMatrix::<T>::from_fn(k, k, |_, _| normal(&mut rng));
        let m = symmetrize(&(&g * g.transpose()));
        let corner = m[(k - 1, k - 1)];
        let mut m = m / corner;
        m[(k - 1, k - 1)] = T::one();
        m
    };
    let w = gram();
    let u = gram();
    point(t, w, u)
}

fn blocks<T: Real>(p: &Point<T>) -> Result<(&DVector<T>, &DMatrix<T>, &DMatrix<T>), ShapeError> {
    if p.num_blocks() != 3 {
        return Err(ShapeError::new("blocks t, W, U", format!("{:?}", p.shapes())));
    }
    Ok((p.vector("t")?, p.matrix("W")?, p.matrix("U")?))
}

fn point<T: Real>(t: DVector<T>, w: DMatrix<T>, u: DMatrix<T>) -> Point<T> {
    Point::new().with_vector("t", t).with_matrix("W", w).with_matrix("U", u)
}

/// `|t|_inf <= 1` and `{PSD, corner = 1}` on `W` and `U`.
#[derive(Clone, Debug)]
pub struct MlrProjector {
    pub settings: DykstraSettings,
}

impl Default for MlrProjector {
    fn default() -> Self {
        Self { settings: DykstraSettings::new(1e-10, 5000) }
    }
}

impl<T: Real> Projector<T> for MlrProjector {
    fn project(&self, y: &Point<T>) -> Result<Point<T>, ProblemError> {
        let (t, w, u) = blocks(y)?;
        Ok(point(
            box_project_linf(t, T::one()),
            project_psd_block(w, &PinnedDiagonal::Last, self.settings)?,
            project_psd_block(u, &PinnedDiagonal::Last, self.settings)?,
        ))
    }

    fn is_feasible(&self, x: &Point<T>, tol: T) -> Result<bool, ProblemError> {
        let (t, w, u) = blocks(x)?;
        Ok(t.amax() <= T::one() + tol
            && psd_block_feasible(w, &PinnedDiagonal::Last, tol)?
            && psd_block_feasible(u, &PinnedDiagonal::Last, tol)?)
    }
}

/// Mixed linear regression as a constrained program. The update projects
/// `W` and `U` itself, since the `t` step depends on the projected matrices.
#[derive(Clone, Debug)]
pub struct MlrProgram<T: Real> {
    pub instance: Arc<MlrInstance<T>>,
    pub mode: MlrMode,
    pub projector: MlrProjector,
}

impl<T: Real> MlrProgram<T> {
    pub fn new(instance: Arc<MlrInstance<T>>, mode: MlrMode) -> Self {
        Self { instance, mode, projector: MlrProjector::default() }
    }
}

impl<T: Real> Program<T> for MlrProgram<T> {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        let (t, w, u) = blocks(x)?;
        mlr_objective(t, w, u, &self.instance)
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        let (t, w, u) = blocks(x)?;
        let (gt, gw, gu) = mlr_gradients(t, w, u, &self.instance)?;
        Ok(point(gt, gw, gu))
    }

    fn update(&self, x: &Point<T>, grad: &Point<T>, alpha: T) -> Result<Point<T>, ProblemError> {
        let (t, w, u) = mlr_update(blocks(x)?, blocks(grad)?, alpha, &self.instance, self.mode, self.projector.settings)?;
        Ok(point(t, w, u))
    }

    fn projector(&self) -> Option<&dyn Projector<T>> {
        Some(&self.projector)
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        let (t, w, u) = blocks(x)?;
        self.instance.check(t, w, u)
    }
}

/// Smooth part of the objective as an [`Objective`].
#[derive(Clone, Debug)]
pub struct MlrSmooth<T: Real>(pub Arc<MlrInstance<T>>);

impl<T: Real> Objective<T> for MlrSmooth<T> {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        let (t, w, u) = blocks(x)?;
        mlr_smooth(t, w, u, &self.0)
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        let (t, w, u) = blocks(x)?;
        let (gt, gw, gu) = mlr_gradients(t, w, u, &self.0)?;
        Ok(point(gt, gw, gu))
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        let (t, w, u) = blocks(x)?;
        self.0.check(t, w, u)
    }
}

/// The `tau`-scaled kernel on points with blocks `t`, `W`, `U`.
#[derive(Clone, Debug)]
pub struct MlrGeometry<T: Real>(pub Arc<MlrInstance<T>>);

impl<T: Real> Geometry<T> for MlrGeometry<T> {
    fn name(&self) -> &'static str {
        "mlr_tau"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        let (dt, dw, du) = mlr_eta(blocks(y)?, blocks(x)?, &self.0).map_err(|e| match e {
            ProblemError::Shape(s) => GeometryError::Shape(s),
            other => GeometryError::Precondition(other.to_string()),
        })?;
        Ok(point(dt, dw, du))
    }

    /// Matrices move by `v` directly; `t` moves by `v_t / tau`, which needs
    /// every `tau_i` nonzero where `v_t` is.
    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        let (t, w, u) = blocks(x)?;
        let (vt, vw, vu) = blocks(v)?;
        self.0.check(vt, vw, vu)?;
        let w_next = w + vw;
        let u_next = u + vu;
        let tau = mlr_tau(&w_next, &u_next, w, u, &self.0);
        if let Some(i) = (0..tau.len()).find(|&i| tau[i] == T::zero() && vt[i] != T::zero()) {
            return Err(GeometryError::Precondition(format!("tau vanishes at component {i}")));
        }
        let t_next = DVector::from_fn(t.len(), |i, _| if vt[i] == T::zero() { t[i] } else { t[i] + vt[i] / tau[i] });
        Ok(point(t_next, w_next, u_next))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(n: usize, d: usize, seed: u64) -> MlrInstance<f64> {
        mlr_generate(MlrParams { n, d, separation: 1.0, noise_sigma: 0.1, seed }).unwrap()
    }

    fn random_sym(rng: &mut rand_chacha::ChaCha8Rng, k: usize) -> DMatrix<f64> {
        symmetrize(&DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn smoothness_bounds_gradient_differences() {
        let m = Arc::new(inst(12, 3, 4));
        let l = m.smoothness().unwrap();
        let f = MlrSmooth(m.clone());
        let mut rng = super::rng(9);
        let mut worst: f64 = 0.0;
        for k in 0..300 {
            let a = mlr_initial_point(&m, 2 * k);
            let mut b = mlr_initial_point(&m, 2 * k + 1);
            if k % 2 == 0 {
                // Differences along the top singular direction come from matching t, W and U moves.
                let (t, w, u) = blocks(&a).unwrap();
                b = point(t.map(|v| v + rng.random_range(-0.1..0.1)), w + random_sym(&mut rng, 4) * 0.1, u.clone());
            }
            let dg = f.gradient(&a).unwrap().sub(&f.gradient(&b).unwrap()).unwrap().norm();
            let dx = a.sub(&b).unwrap().norm();
            worst = worst.max(dg / dx);
        }
        assert!(worst <= l * (1.0 + 1e-12), "{worst} > {l}");
        assert!(worst >= 0.05 * l, "{worst} far below {l}");
    }

    #[test]
    fn objective_reductions() {
        let m = inst(6, 2, 1).with_lambdas(0.3, 0.2);
        let p = mlr_initial_point(&m, 2);
        let (t, w, _) = blocks(&p).unwrap();
        let f = mlr_objective(t, w, w, &m).unwrap();
        let expect: f64 = (0..6).map(|i| (&m.lifted(i)).dot(w)).sum::<f64>() + 0.5 * l1(w);
        assert!((f - expect).abs() < 1e-10 * (1.0 + expect.abs()));
        let u = p.matrix("U").unwrap();
        let f0 = mlr_smooth(&DVector::zeros(6), w, u, &m).unwrap();
        let half: f64 = (0..6).map(|i| 0.5 * m.lifted(i).dot(&(w + u))).sum();
        assert!((f0 - half).abs() < 1e-10 * (1.0 + half.abs()));
    }

    #[test]
    fn objective_hand_instance() {
        // n = 3, d = 2 with explicit rows.
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 1.0, -1.0]);
        let y = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        let m = MlrInstance::<f64>::from_data(MlrParams { n: 3, d: 2, separation: 0.0, noise_sigma: 0.0, seed: 0 }, x, y).unwrap();
        let w = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let u = DMatrix::identity(3, 3);
        let t = DVector::from_vec(vec![0.5, -1.0, 0.0]);
        let mut expect = 0.0;
        let rows = [[1.0, 0.0, -1.0], [0.0, 2.0, 1.0], [1.0, -1.0, -0.5]];
        for (i, s) in rows.iter().enumerate() {
            let mut qw = 0.0;
            let mut qu = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    qw += s[a] * w[(a, b)] * s[b];
                    qu += s[a] * u[(a, b)] * s[b];
                }
            }
            expect += 0.5 * (qw + qu) + 0.5 * t[i] * (qw - qu);
        }
        assert!((mlr_smooth(&t, &w, &u, &m).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn tau_degenerate_cases() {
        let m = inst(5, 2, 3);
        let p = mlr_initial_point(&m, 4);
        let (_, w, u) = blocks(&p).unwrap();
        assert!(mlr_tau(w, u, w, u, &m).iter().all(|v| (*v - 1.0).abs() < 1e-12));
        assert!(mlr_tau(w, u, w, w, &m).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn invexity_identity_is_exact() {
        let m = inst(7, 3, 5);
        let mut r = rng(6);
        for _ in 0..200 {
            let t = DVector::from_fn(7, |_, _| r.random_range(-1.0..1.0));
            let tb = DVector::from_fn(7, |_, _| r.random_range(-1.0..1.0));
            let (w, u, wb, ub) = (random_sym(&mut r, 4), random_sym(&mut r, 4), random_sym(&mut r, 4), random_sym(&mut r, 4));
            let lhs = mlr_smooth(&t, &w, &u, &m).unwrap() - mlr_smooth(&tb, &wb, &ub, &m).unwrap();
            let (et, ew, eu) = mlr_eta((&t, &w, &u), (&tb, &wb, &ub), &m).unwrap();
            let (gt, gw, gu) = mlr_gradients(&tb, &wb, &ub, &m).unwrap();
            let rhs = et.dot(&gt) + ew.dot(&gw) + eu.dot(&gu);
            let f = mlr_smooth(&t, &w, &u, &m).unwrap();
            assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + f.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = inst(5, 2, 7);
        let p = mlr_initial_point(&m, 8);
        let obj = MlrSmooth(Arc::new(m));
        let g = obj.gradient(&p).unwrap().flatten();
        let flat = p.flatten();
        let h = 1e-6;
        for k in 0..flat.len() {
            let mut a = flat.clone();
            let mut b = flat.clone();
            a[k] += h;
            b[k] -= h;
            let fa = obj.value(&p.unflatten(&a).unwrap()).unwrap();
            let fb = obj.value(&p.unflatten(&b).unwrap()).unwrap();
            let fd = (fa - fb) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-5 * (1.0 + g[k].abs()), "coord {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let m = inst(6, 2, 9);
        let p = mlr_initial_point(&m, 10);
        let (t1, w1, u1) = mlr_step(blocks(&p).unwrap(), 0.0, &m, MlrMode::Invex, MlrProjector::default().settings).unwrap();
        let (t, w, u) = blocks(&p).unwrap();
        assert_eq!(&t1, t);
        assert!((w1 - w).norm() < 1e-9 && (u1 - u).norm() < 1e-9);
    }

    #[test]
    fn equal_matrices_give_plain_t_step() {
        let m = inst(6, 2, 11);
        let p = mlr_initial_point(&m, 12);
        let (t, w, _) = blocks(&p).unwrap();
        let s = MlrProjector::default().settings;
        let a = mlr_step((t, w, w), 0.01, &m, MlrMode::Invex, s).unwrap();
        let b = mlr_step((t, w, w), 0.01, &m, MlrMode::Euclidean, s).unwrap();
        assert!((a.0 - b.0).norm() < 1e-12);
    }

    #[test]
    fn iterates_stay_feasible() {
        let m = inst(8, 2, 13).with_lambdas(0.05, 0.05);
        let proj = MlrProjector::default();
        for mode in [MlrMode::Invex, MlrMode::Euclidean] {
            let mut p = mlr_initial_point(&m, 14);
            for _ in 0..200 {
                let (t, w, u) = mlr_step(blocks(&p).unwrap(), 0.01, &m, mode, proj.settings).unwrap();
                p = point(t, w, u);
                let (t, w, u) = blocks(&p).unwrap();
                assert!(t.amax() <= 1.0);
                for mat in [w, u] {
                    assert!((mat[(2, 2)] - 1.0).abs() <= 1e-8);
                    assert!(f64::symmetric_eigenvalues(mat).unwrap()[0] >= -1e-8);
                }
            }
        }
    }

    #[test]
    fn geometry_round_trip() {
        let m = Arc::new(inst(6, 2, 15));
        let geo = MlrGeometry(m.clone());
        let x = mlr_initial_point(&m, 16);
        let v = mlr_initial_point(&m, 17).scale(0.05);
        let y = geo.step(&x, &v).unwrap();
        assert!(geo.eta(&y, &x).unwrap().sub(&v).unwrap().norm() < 1e-10);
    }

    #[test]
    fn generator_properties() {
        let params = MlrParams { n: 20, d: 3, separation: 2.0, noise_sigma: 0.0, seed: 4 };
        let a = mlr_generate::<f64>(params).unwrap();
        assert!((&a.beta1 - &a.beta2).norm() >= 2.0 - 1e-12);
        for i in 0..20 {
            let beta = if a.z_star[i] { &a.beta1 } else { &a.beta2 };
            assert!((a.x.row(i).dot(&beta.transpose()) - a.y[i]).abs() < 1e-12);
            let s = a.lifted(i);
            assert_eq!(s, s.transpose());
            let vals = f64::symmetric_eigenvalues(&s).unwrap();
            assert!(vals[0] >= -1e-12 && vals[1].abs() < 1e-10);
        }
        let b = mlr_generate::<f64>(params).unwrap();
        assert_eq!(a.s, b.s);
    }
}
