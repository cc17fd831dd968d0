//! JSON instance documents with dense row-major arrays.
//!
//! Floats are written in shortest round-trip form, so reloading a document
//! reproduces every entry bit for bit.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dag::{DagInstance, DagParams};
use super::fair::{FairLassoInstance, FairParams};
use super::mlr::{MlrInstance, MlrParams};
use crate::error::ProblemError;
use crate::point::{Block, Point};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseArray {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub data: Vec<f64>,
}

impl DenseArray {
    pub fn from_matrix<T: Real>(m: &DMatrix<T>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)].as_f64())).collect();
        Self { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn from_vector<T: Real>(v: &DVector<T>) -> Self {
        Self { rows: v.len(), cols: 1, data: v.iter().map(|x| x.as_f64()).collect() }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<DMatrix<T>, ProblemError> {
        if self.data.len() != self.rows * self.cols {
            return Err(ProblemError::Invalid(format!(
                "array of {}x{} carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_iterator(self.rows, self.cols, self.data.iter().map(|&x| T::lit(x))))
    }

    pub fn to_vector<T: Real>(&self) -> Result<DVector<T>, ProblemError> {
        if self.cols != 1 {
            return Err(ProblemError::Invalid(format!("expected a column, found {} columns", self.cols)));
        }
        Ok(self.to_matrix::<T>()?.column(0).into_owned())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub problem: String,
    pub dims: Dims,
    pub seed: u64,
    pub params: serde_json::Value,
    pub arrays: BTreeMap<String, DenseArray>,
}

impl InstanceDocument {
    fn array(&self, name: &str) -> Result<&DenseArray, ProblemError> {
        self.arrays.get(name).ok_or_else(|| ProblemError::Invalid(format!("instance document lacks array `{name}`")))
    }

    fn expect(&self, problem: &str) -> Result<(), ProblemError> {
        if self.problem != problem {
            return Err(ProblemError::Invalid(format!("expected a {problem} document, found {}", self.problem)));
        }
        Ok(())
    }

    fn params<P: for<'de> Deserialize<'de>>(&self) -> Result<P, ProblemError> {
        serde_json::from_value(self.params.clone()).map_err(|e| ProblemError::Invalid(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, ProblemError> {
        serde_json::from_str(s).map_err(|e| ProblemError::Invalid(e.to_string()))
    }
}

fn scalar(x: f64) -> DenseArray {
    DenseArray { rows: 1, cols: 1, data: vec![x] }
}

fn read_scalar(doc: &InstanceDocument, name: &str) -> Result<f64, ProblemError> {
    let a = doc.array(name)?;
    a.data.first().copied().filter(|_| a.data.len() == 1).ok_or_else(|| ProblemError::Invalid(format!("`{name}` must be a scalar")))
}

fn params_value<P: Serialize>(p: &P) -> serde_json::Value {
    serde_json::to_value(p).expect("params serialise")
}

pub fn dag_document<T: Real>(inst: &DagInstance<T>) -> InstanceDocument {
    let mut arrays = BTreeMap::new();
    arrays.insert("W".into(), DenseArray::from_matrix(&inst.w));
    InstanceDocument {
        problem: "dag".into(),
        dims: Dims { n: inst.params.d, d: inst.params.d },
        seed: inst.params.seed,
        params: params_value(&inst.params),
        arrays,
    }
}

pub fn dag_from_document<T: Real>(doc: &InstanceDocument) -> Result<DagInstance<T>, ProblemError> {
    doc.expect("dag")?;
    let params: DagParams = doc.params()?;
    Ok(DagInstance { params, w: doc.array("W")?.to_matrix()? })
}

pub fn fair_document<T: Real>(inst: &FairLassoInstance<T>) -> InstanceDocument {
    let mut arrays = BTreeMap::new();
    arrays.insert("X".into(), DenseArray::from_matrix(&inst.x));
    arrays.insert("y".into(), DenseArray::from_vector(&inst.y));
    arrays.insert("w_star".into(), DenseArray::from_vector(&inst.w_star));
    arrays.insert("z_star".into(), DenseArray::from_vector(&inst.z_star));
    arrays.insert("gamma".into(), scalar(inst.gamma.as_f64()));
    arrays.insert("lambda".into(), scalar(inst.lambda.as_f64()));
    InstanceDocument {
        problem: "fair_lasso".into(),
        dims: Dims { n: inst.n(), d: inst.d() },
        seed: inst.params.seed,
        params: params_value(&inst.params),
        arrays,
    }
}

pub fn fair_from_document<T: Real>(doc: &InstanceDocument) -> Result<FairLassoInstance<T>, ProblemError> {
    doc.expect("fair_lasso")?;
    let params: FairParams = doc.params()?;
    Ok(FairLassoInstance {
        params,
        x: doc.array("X")?.to_matrix()?,
        y: doc.array("y")?.to_vector()?,
        gamma: T::lit(read_scalar(doc, "gamma")?),
        lambda: T::lit(read_scalar(doc, "lambda")?),
        w_star: doc.array("w_star")?.to_vector()?,
        z_star: doc.array("z_star")?.to_vector()?,
    })
}

pub fn mlr_document<T: Real>(inst: &MlrInstance<T>) -> InstanceDocument {
    let mut arrays = BTreeMap::new();
    arrays.insert("X".into(), DenseArray::from_matrix(&inst.x));
    arrays.insert("y".into(), DenseArray::from_vector(&inst.y));
    arrays.insert("beta1".into(), DenseArray::from_vector(&inst.beta1));
    arrays.insert("beta2".into(), DenseArray::from_vector(&inst.beta2));
    let z: Vec<f64> = inst.z_star.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    arrays.insert("z_star".into(), DenseArray { rows: z.len(), cols: 1, data: z });
    arrays.insert("lambda1".into(), scalar(inst.lambda1.as_f64()));
    arrays.insert("lambda2".into(), scalar(inst.lambda2.as_f64()));
    InstanceDocument {
        problem: "mlr".into(),
        dims: Dims { n: inst.n(), d: inst.order() - 1 },
        seed: inst.params.seed,
        params: params_value(&inst.params),
        arrays,
    }
}

pub fn mlr_from_document<T: Real>(doc: &InstanceDocument) -> Result<MlrInstance<T>, ProblemError> {
    doc.expect("mlr")?;
    let params: MlrParams = doc.params()?;
    let mut inst = MlrInstance::from_data(params, doc.array("X")?.to_matrix()?, doc.array("y")?.to_vector()?)?;
    inst.beta1 = doc.array("beta1")?.to_vector()?;
    inst.beta2 = doc.array("beta2")?.to_vector()?;
    inst.z_star = doc.array("z_star")?.data.iter().map(|&v| v != 0.0).collect();
    inst.lambda1 = T::lit(read_scalar(doc, "lambda1")?);
    inst.lambda2 = T::lit(read_scalar(doc, "lambda2")?);
    Ok(inst)
}

/// A point as named dense arrays; vectors are stored as columns.
pub fn point_arrays<T: Real>(p: &Point<T>) -> BTreeMap<String, DenseArray> {
    p.blocks()
        .map(|(name, b)| {
            let a = match b {
                Block::Vector(v) => DenseArray::from_vector(v),
                Block::Matrix(m) => DenseArray::from_matrix(m),
            };
            (name.to_string(), a)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{dag::dag_generate, fair::fair_generate, mlr::mlr_generate};

    #[test]
    fn dag_round_trip_is_bit_exact() {
        let inst = dag_generate::<f64>(DagParams { d: 6, edge_prob: 0.5, weight_scale: 1.0, cyclic: true, seed: 3 }).unwrap();
        let doc = InstanceDocument::from_json(&dag_document(&inst).to_json()).unwrap();
        let back: DagInstance<f64> = dag_from_document(&doc).unwrap();
        assert_eq!(back.params, inst.params);
        assert!(back.w.iter().zip(inst.w.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn fair_and_mlr_round_trip() {
        let f = fair_generate::<f64>(FairParams { n: 7, d: 3, gamma: 0.7, sparsity: 2, noise_sigma: 0.2, seed: 1 })
            .unwrap()
            .with_lambda(0.125);
        let back: FairLassoInstance<f64> = fair_from_document(&InstanceDocument::from_json(&fair_document(&f).to_json()).unwrap()).unwrap();
        assert_eq!(back.x, f.x);
        assert_eq!(back.y, f.y);
        assert_eq!(back.lambda, 0.125);
        let m = mlr_generate::<f64>(MlrParams { n: 9, d: 2, separation: 1.0, noise_sigma: 0.1, seed: 2 }).unwrap();
        let back: MlrInstance<f64> = mlr_from_document(&InstanceDocument::from_json(&mlr_document(&m).to_json()).unwrap()).unwrap();
        assert_eq!(back.s, m.s);
        assert_eq!(back.z_star, m.z_star);
        assert!(fair_from_document::<f64>(&mlr_document(&m)).is_err());
    }

    #[test]
    fn arrays_are_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let a = DenseArray::from_matrix(&m);
        assert_eq!(a.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(a.to_matrix::<f64>().unwrap(), m);
        assert!(DenseArray { rows: 2, cols: 2, data: vec![1.0] }.to_matrix::<f64>().is_err());
    }
}
