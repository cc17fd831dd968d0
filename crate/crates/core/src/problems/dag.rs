//! Log-determinant acyclicity `h(W) = -log det(I - W o W)`.
//!
//! `h` is zero exactly on weighted adjacency matrices of DAGs inside the
//! domain `r(W o W) < 1`, and every stationary point there is a global
//! minimum. The invex kernel is
//!
//! `eta(U, W) = -1/2 ((I - W o W)(log(I - U o U) - log(I - W o W))) ⊘ W`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{normal, rng};
use crate::error::{GeometryError, KernelError, ProblemError, ShapeError};
use crate::geometry::Geometry;
use crate::kernels::{hadamard_div, hadamard_prod, matexp, matlog_near_identity, spectral_radius};
use crate::optim::Objective;
use crate::point::Point;
use crate::scalar::Real;

/// Inner iterations for the constrained entries of the step solve.
const FREE_ENTRY_ITERS: usize = 100;
const FREE_ENTRY_TOL: f64 = 1e-13;

fn square<T: Real>(w: &DMatrix<T>) -> DMatrix<T> {
    w.component_mul(w)
}

fn identity_minus_sq<T: Real>(w: &DMatrix<T>) -> Result<DMatrix<T>, ProblemError> {
    if !w.is_square() {
        return Err(KernelError::NotSquare { rows: w.nrows(), cols: w.ncols() }.into());
    }
    let n = w.nrows();
    Ok(DMatrix::identity(n, n) - square(w))
}

/// Spectral radius of `W o W`.
pub fn dag_radius<T: Real>(w: &DMatrix<T>) -> Result<T, ProblemError> {
    Ok(spectral_radius(&square(w))?)
}

fn check_domain<T: Real>(w: &DMatrix<T>) -> Result<(), ProblemError> {
    let r = dag_radius(w)?;
    if r < T::one() {
        Ok(())
    } else {
        Err(ProblemError::Domain(format!("r(W o W) = {r} is not below 1")))
    }
}

pub fn dag_objective<T: Real>(w: &DMatrix<T>) -> Result<T, ProblemError> {
    let n_mat = identity_minus_sq(w)?;
    check_domain(w)?;
    // r(W o W) < 1 already forces det > 0; the sign check guards roundoff.
    let lu = n_mat.lu();
    let u = lu.u();
    let mut logdet = T::zero();
    let mut sign: T = lu.p().determinant();
    for i in 0..u.nrows() {
        let p = u[(i, i)];
        if p == T::zero() {
            return Err(KernelError::Singular.into());
        }
        if p < T::zero() {
            sign = -sign;
        }
        logdet += p.abs().ln();
    }
    if sign < T::zero() {
        return Err(ProblemError::Domain("det(I - W o W) is negative".into()));
    }
    Ok(-logdet)
}

/// `grad h(W) = 2 (I - W o W)^{-T} o W`.
pub fn dag_gradient<T: Real>(w: &DMatrix<T>) -> Result<DMatrix<T>, ProblemError> {
    let n_mat = identity_minus_sq(w)?;
    let inv = n_mat.try_inverse().ok_or(KernelError::Singular)?;
    Ok(inv.transpose().component_mul(w) * T::lit(2.0))
}

pub fn dag_eta<T: Real>(u: &DMatrix<T>, w: &DMatrix<T>) -> Result<DMatrix<T>, ProblemError> {
    let nw = identity_minus_sq(w)?;
    let nu = identity_minus_sq(u)?;
    if nu.shape() != nw.shape() {
        return Err(ShapeError::new(format!("{0}x{0}", w.nrows()), format!("{0}x{0}", u.nrows())).into());
    }
    let diff = matlog_near_identity(&nu)? - matlog_near_identity(&nw)?;
    Ok(hadamard_div(&(&nw * diff), w)? * T::lit(-0.5))
}

/// Outcome of a step solve.
#[derive(Clone, Debug)]
pub struct DagStep<T: Real> {
    pub w: DMatrix<T>,
    /// Support entries whose recovered square `(I - M)_ij` was negative and
    /// were set to zero.
    pub pruned: usize,
    /// Iterations spent on the entries outside the support of `W`.
    pub inner_iterations: usize,
}

/// Solves `eta(U, W) = V` for `U`.
///
/// On the support of `W` the kernel pins `log(I - U o U)` to
/// `log N + N^{-1} X` with `N = I - W o W` and `X = -2 V o W`. Entries of `X`
/// off the support are free; they are chosen by fixed-point iteration so
/// that `M = exp(log N + N^{-1} X)` equals the identity there, which is what
/// `U_ij = 0` (including the zero diagonal) requires. `U` then takes the
/// sign pattern of `W` with magnitudes `sqrt(I - M)`; support entries with
/// `(I - M)_ij < 0`, which have no real solution, are pruned to zero.
pub fn dag_step_direction<T: Real>(w: &DMatrix<T>, v: &DMatrix<T>) -> Result<DagStep<T>, ProblemError> {
    let n_mat = identity_minus_sq(w)?;
    if v.shape() != w.shape() {
        return Err(ShapeError::new(format!("{0}x{0}", w.nrows()), format!("{}x{}", v.nrows(), v.ncols())).into());
    }
    check_domain(w)?;
    let d = w.nrows();
    let zero = T::zero();
    for i in 0..d {
        for j in 0..d {
            if w[(i, j)] == zero && v[(i, j)] != zero {
                return Err(GeometryError::Precondition(format!(
                    "direction is nonzero at ({i}, {j}) outside the support of W"
                ))
                .into());
            }
        }
    }
    let log_n = matlog_near_identity(&n_mat)?;
    let lu = n_mat.lu();
    let mut x = hadamard_prod(v, w)? * T::lit(-2.0);
    let free: Vec<(usize, usize)> =
        (0..d).flat_map(|j| (0..d).map(move |i| (i, j))).filter(|&(i, j)| w[(i, j)] == zero).collect();
    let solve = |x: &DMatrix<T>| -> Result<DMatrix<T>, ProblemError> {
        let nx = lu.solve(x).ok_or(KernelError::Singular)?;
        Ok(matexp(&(&log_n + nx))?)
    };
    let mut m = solve(&x)?;
    let tol = T::lit(FREE_ENTRY_TOL).max(T::eps() * T::lit(8.0));
    let mut inner = 0;
    loop {
        let residual = free.iter().fold(zero, |acc, &(i, j)| {
            let target = if i == j { T::one() } else { zero };
            acc.max((m[(i, j)] - target).abs())
        });
        if residual <= tol {
            break;
        }
        if inner == FREE_ENTRY_ITERS || !residual.is_finite_value() {
            return Err(GeometryError::StepSolveFailed { iterations: inner, residual: residual.as_f64() }.into());
        }
        for &(i, j) in &free {
            let target = if i == j { T::one() } else { zero };
            x[(i, j)] -= m[(i, j)] - target;
        }
        m = solve(&x)?;
        inner += 1;
    }
    let mut pruned = 0;
    let u = DMatrix::from_fn(d, d, |i, j| {
        let wij = w[(i, j)];
        if wij == zero {
            return zero;
        }
        let q = if i == j { T::one() - m[(i, j)] } else { -m[(i, j)] };
        if q < zero {
            pruned += 1;
            zero
        } else if wij > zero {
            q.sqrt()
        } else {
            -q.sqrt()
        }
    });
    let r = dag_radius(&u)?;
    if !(r < T::one()) {
        return Err(GeometryError::StepSolveFailed { iterations: inner, residual: r.as_f64() }.into());
    }
    Ok(DagStep { w: u, pruned, inner_iterations: inner })
}

/// One invex gradient step `eta(W_{k+1}, W_k) = -alpha grad h(W_k)`.
pub fn dag_step<T: Real>(w: &DMatrix<T>, alpha: T) -> Result<DagStep<T>, ProblemError> {
    let g = dag_gradient(w)?;
    dag_step_direction(w, &(g * -alpha))
}

/// `h` as an objective on a point with one matrix block named `W`.
#[derive(Clone, Copy, Debug)]
pub struct DagProblem<T: Real> {
    pub d: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Real> DagProblem<T> {
    pub fn new(d: usize) -> Self {
        Self { d, _marker: std::marker::PhantomData }
    }

    fn arg<'a>(&self, x: &'a Point<T>) -> Result<&'a DMatrix<T>, ShapeError> {
        let w = x.matrix("W")?;
        if w.nrows() != self.d || x.num_blocks() != 1 {
            return Err(ShapeError::new(format!("W:matrix[{0}x{0}]", self.d), format!("{:?}", x.shapes())));
        }
        Ok(w)
    }
}

impl<T: Real> Objective<T> for DagProblem<T> {
    fn value(&self, x: &Point<T>) -> Result<T, ProblemError> {
        dag_objective(self.arg(x)?)
    }

    fn gradient(&self, x: &Point<T>) -> Result<Point<T>, ProblemError> {
        Ok(Point::from_matrix(dag_gradient(self.arg(x)?)?))
    }

    fn check_shape(&self, x: &Point<T>) -> Result<(), ShapeError> {
        self.arg(x).map(|_| ())
    }
}

/// The log-determinant kernel as a geometry on the `W` block.
#[derive(Clone, Copy, Debug, Default)]
pub struct DagGeometry;

fn geometry_error(e: ProblemError) -> GeometryError {
    match e {
        ProblemError::Geometry(g) => g,
        ProblemError::Shape(s) => GeometryError::Shape(s),
        ProblemError::Kernel(k) => GeometryError::Kernel(k),
        other => GeometryError::Precondition(other.to_string()),
    }
}

impl<T: Real> Geometry<T> for DagGeometry {
    fn name(&self) -> &'static str {
        "dag_logdet"
    }

    fn eta(&self, y: &Point<T>, x: &Point<T>) -> Result<Point<T>, GeometryError> {
        let e = dag_eta(y.matrix("W")?, x.matrix("W")?).map_err(geometry_error)?;
        Ok(Point::from_matrix(e))
    }

    fn step(&self, x: &Point<T>, v: &Point<T>) -> Result<Point<T>, GeometryError> {
        let s = dag_step_direction(x.matrix("W")?, v.matrix("W")?).map_err(geometry_error)?;
        Ok(Point::from_matrix(s.w))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DagParams {
    pub d: usize,
    pub edge_prob: f64,
    pub weight_scale: f64,
    pub cyclic: bool,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct DagInstance<T: Real> {
    pub params: DagParams,
    pub w: DMatrix<T>,
}

/// Largest `r(W o W)` a generated instance may have.
pub const GENERATED_RADIUS: f64 = 0.9;

fn has_cycle<T: Real>(w: &DMatrix<T>) -> bool {
    let d = w.nrows();
    let mut indeg = vec![0usize; d];
    for i in 0..d {
        for j in 0..d {
            if w[(i, j)] != T::zero() {
                indeg[j] += 1;
            }
        }
    }
    let mut stack: Vec<usize> = (0..d).filter(|&i| indeg[i] == 0).collect();
    let mut visited = 0;
    while let Some(i) = stack.pop() {
        visited += 1;
        for j in 0..d {
            if w[(i, j)] != T::zero() {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    stack.push(j);
                }
            }
        }
    }
    visited < d
}

/// Random weighted digraph with Bernoulli support and uniform weights.
///
/// With `cyclic` set, a two-cycle is closed on an existing edge (or on nodes
/// 0 and 1) if the sampled support happens to be acyclic. The result is
/// rescaled so that `r(W o W) <= 0.9`.
pub fn dag_generate<T: Real>(params: DagParams) -> Result<DagInstance<T>, ProblemError> {
    let DagParams { d, edge_prob, weight_scale, cyclic, seed } = params;
    if d < 2 {
        return Err(ProblemError::Invalid(format!("need at least 2 nodes, got {d}")));
    }
    if !(0.0..=1.0).contains(&edge_prob) || !(weight_scale > 0.0) {
        return Err(ProblemError::Invalid("edge_prob must be in [0, 1] and weight_scale positive".into()));
    }
    let mut rng = rng(seed);
    let mut w = DMatrix::<T>::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            if i != j && rng.random_bool(edge_prob) {
                let mut v = 0.0;
                while v == 0.0 {
                    v = rng.random_range(-weight_scale..=weight_scale);
                }
                w[(i, j)] = T::lit(v);
            }
        }
    }
    if cyclic && !has_cycle(&w) {
        let mut weight = || {
            let mag = rng.random_range(0.5 * weight_scale..=weight_scale);
            T::lit(if rng.random_bool(0.5) { mag } else { -mag })
        };
        let edge = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).find(|&(i, j)| w[(i, j)] != T::zero());
        let (i, j) = edge.unwrap_or((0, 1));
        if w[(i, j)] == T::zero() {
            w[(i, j)] = weight();
        }
        w[(j, i)] = weight();
    }
    let r = dag_radius(&w)?;
    let limit = T::lit(GENERATED_RADIUS);
    if r > limit {
        w *= (limit / r).sqrt();
    }
    Ok(DagInstance { params, w })
}

/// Rescales `W` so that `r(W o W)` equals `radius` (no-op for `W o W` nilpotent).
pub fn scale_to_radius<T: Real>(w: &DMatrix<T>, radius: T) -> Result<DMatrix<T>, ProblemError> {
    let r = dag_radius(w)?;
    if r == T::zero() {
        return Ok(w.clone());
    }
    Ok(w * (radius / r).sqrt())
}

/// Dense standard-normal matrix with zero diagonal, scaled to `r(W o W) = radius`.
pub fn dense_normal_init<T: Real>(d: usize, radius: T, seed: u64) -> Result<DMatrix<T>, ProblemError> {
    let mut rng = rng(seed);
    let mut w = DMatrix::<T>::zeros(d, d);
    for j in 0..d {
        for i in 0..d {
            if i != j {
                w[(i, j)] = normal(&mut rng);
            }
        }
    }
    scale_to_radius(&w, radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_domain_matrix(rng: &mut rand_chacha::ChaCha8Rng, d: usize, radius: f64, zero_diag: bool) -> DMatrix<f64> {
        let w = DMatrix::from_fn(d, d, |i, j| if zero_diag && i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
        scale_to_radius(&w, radius).unwrap()
    }

    #[test]
    fn objective_examples() {
        assert_eq!(dag_objective(&DMatrix::<f64>::zeros(3, 3)).unwrap(), 0.0);
        let upper = DMatrix::<f64>::from_row_slice(3, 3, &[0.0, 0.7, -0.4, 0.0, 0.0, 0.9, 0.0, 0.0, 0.0]);
        let h = dag_objective(&upper).unwrap();
        assert!(h.abs() < 1e-15);
        let det = identity_minus_sq(&upper).unwrap().determinant();
        assert!((det - 1.0).abs() < 1e-15);
        let cyc = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        assert!((dag_objective(&cyc).unwrap() - -(1.0f64 - 0.0625).ln()).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_direct_determinant() {
        let mut r = rng(1);
        for _ in 0..20 {
            let w = random_domain_matrix(&mut r, 5, 0.7, false);
            let det = identity_minus_sq(&w).unwrap().determinant();
            assert!((dag_objective(&w).unwrap() + det.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn objective_rejects_outside_domain() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.2, 1.0, 0.0]);
        assert!(matches!(dag_objective(&w), Err(ProblemError::Domain(_))));
    }

    #[test]
    fn gradient_vanishes_at_zero() {
        assert_eq!(dag_gradient(&DMatrix::<f64>::zeros(3, 3)).unwrap(), DMatrix::zeros(3, 3));
    }

    #[test]
    fn eta_vanishes_on_diagonal() {
        let mut r = rng(2);
        let w = random_domain_matrix(&mut r, 4, 0.5, true);
        assert_eq!(dag_eta(&w, &w).unwrap().norm(), 0.0);
    }

    #[test]
    fn invexity_holds_with_equality_on_full_support() {
        let mut r = rng(3);
        for _ in 0..50 {
            let w = random_domain_matrix(&mut r, 4, 0.6, false);
            let u = random_domain_matrix(&mut r, 4, 0.6, false);
            let lhs = dag_objective(&u).unwrap() - dag_objective(&w).unwrap();
            let rhs = dag_eta(&u, &w).unwrap().dot(&dag_gradient(&w).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn step_at_stationary_point_is_identity() {
        let z = DMatrix::<f64>::zeros(4, 4);
        assert_eq!(dag_step(&z, 0.1).unwrap().w, z);
    }

    #[test]
    fn step_round_trip() {
        let mut r = rng(4);
        for _ in 0..30 {
            let w = random_domain_matrix(&mut r, 4, 0.5, true);
            let s = dag_step(&w, 0.05).unwrap();
            if s.pruned > 0 {
                continue;
            }
            let back = dag_eta(&s.w, &w).unwrap();
            let target = dag_gradient(&w).unwrap() * -0.05;
            assert!((back - &target).norm() <= 1e-6 * (1.0 + target.norm()));
            for i in 0..4 {
                assert_eq!(s.w[(i, i)], 0.0);
            }
        }
    }

    #[test]
    fn step_is_first_order_in_alpha() {
        let mut r = rng(5);
        let w = random_domain_matrix(&mut r, 4, 0.5, true);
        let d3 = (dag_step(&w, 1e-3).unwrap().w - &w).norm();
        let d4 = (dag_step(&w, 1e-4).unwrap().w - &w).norm();
        assert!((d3 / d4 - 10.0).abs() < 0.1, "ratio {}", d3 / d4);
    }

    #[test]
    fn generator_properties() {
        let p = DagParams { d: 6, edge_prob: 0.0, weight_scale: 1.0, cyclic: false, seed: 1 };
        assert_eq!(dag_generate::<f64>(p).unwrap().w, DMatrix::zeros(6, 6));
        let p = DagParams { d: 8, edge_prob: 0.4, weight_scale: 2.0, cyclic: true, seed: 9 };
        let a = dag_generate::<f64>(p).unwrap();
        let b = dag_generate::<f64>(p).unwrap();
        assert_eq!(a.w, b.w);
        assert!(has_cycle(&a.w));
        assert!(dag_objective(&a.w).unwrap() > 0.0);
        for seed in 0..100 {
            let p = DagParams { d: 7, edge_prob: 0.6, weight_scale: 3.0, cyclic: seed % 2 == 0, seed };
            let inst = dag_generate::<f64>(p).unwrap();
            assert!(dag_radius(&inst.w).unwrap() <= 0.9 + 1e-12);
            for i in 0..7 {
                assert_eq!(inst.w[(i, i)], 0.0);
            }
        }
    }

    #[test]
    fn acyclic_matrices_have_zero_objective() {
        let mut r = rng(6);
        for _ in 0..20 {
            let w = DMatrix::<f64>::from_fn(5, 5, |i, j| if i < j { r.random_range(-1.0..1.0) } else { 0.0 });
            // Relabel nodes with a random permutation.
            let mut perm: Vec<usize> = (0..5).collect();
            for i in (1..5).rev() {
                perm.swap(i, r.random_range(0..=i));
            }
            let pw = DMatrix::from_fn(5, 5, |i, j| w[(perm[i], perm[j])]);
            assert!(dag_objective(&pw).unwrap().abs() < 1e-14);
        }
    }
}
