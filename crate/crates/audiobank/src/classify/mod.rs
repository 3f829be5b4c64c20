//! Classifiers: k-nearest neighbors and RBF-kernel SVMs trained by SMO.

mod knn;
mod svm;

pub use knn::knn_predict;
pub use svm::{
    max_kkt_violation, rbf_gram, rbf_gram_with, rbf_kernel, smo_solve, svm_predict, svm_train,
    RbfForm, SmoSolution, SvmConfig, SvmModel, SvmScheme,
};

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Feature rows with class labels.
#[derive(Debug, Clone)]
pub struct LabeledSet {
    features: Array2<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledSet {
    pub fn new(features: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyTrainingSet);
        }
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(LabeledSet {
            features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Training classifiers requires every class 0..n_classes present.
    pub fn require_all_classes(&self) -> Result<()> {
        for class in 0..self.n_classes {
            if !self.labels.contains(&class) {
                return Err(Error::ClassTooSmall {
                    class_id: class,
                    count: 0,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn labeled_set_validation() {
        assert!(matches!(
            LabeledSet::new(Array2::zeros((0, 3)), vec![]),
            Err(Error::EmptyTrainingSet)
        ));
        assert!(matches!(
            LabeledSet::new(array![[1.0], [2.0]], vec![0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let set = LabeledSet::new(array![[1.0], [2.0]], vec![0, 2]).unwrap();
        assert_eq!(set.n_classes(), 3);
        assert!(set.require_all_classes().is_err());
    }
}
