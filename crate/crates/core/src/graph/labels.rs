use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Per-node class labels. `None` marks a node whose label the server does not
/// hold (unlabeled, or held out for testing).
///
/// The clean labels are always present. The perturbed and propagated
/// variants are attached once they exist.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelStore {
    num_classes: usize,
    clean: Vec<Option<usize>>,
    perturbed: Option<Vec<Option<usize>>>,
    estimated: Option<Vec<Option<usize>>>,
}

impl LabelStore {
    pub fn new(num_classes: usize, clean: Vec<Option<usize>>) -> Result<Self> {
        check_labels(num_classes, &clean)?;
        Ok(Self {
            num_classes,
            clean,
            perturbed: None,
            estimated: None,
        })
    }

    pub fn with_perturbed(mut self, perturbed: Vec<Option<usize>>) -> Result<Self> {
        self.check_variant(&perturbed)?;
        self.perturbed = Some(perturbed);
        Ok(self)
    }

    pub fn with_estimated(mut self, estimated: Vec<Option<usize>>) -> Result<Self> {
        self.check_variant(&estimated)?;
        self.estimated = Some(estimated);
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_nodes(&self) -> usize {
        self.clean.len()
    }

    pub fn clean(&self) -> &[Option<usize>] {
        &self.clean
    }

    pub fn perturbed(&self) -> Option<&[Option<usize>]> {
        self.perturbed.as_deref()
    }

    pub fn estimated(&self) -> Option<&[Option<usize>]> {
        self.estimated.as_deref()
    }

    pub fn clean_one_hot(&self) -> Matrix {
        one_hot(&self.clean, self.num_classes)
    }

    fn check_variant(&self, labels: &[Option<usize>]) -> Result<()> {
        if labels.len() != self.clean.len() {
            return Err(Error::Shape(format!(
                "label variant covers {} nodes, store has {}",
                labels.len(),
                self.clean.len()
            )));
        }
        check_labels(self.num_classes, labels)
    }
}

fn check_labels(num_classes: usize, labels: &[Option<usize>]) -> Result<()> {
    if let Some((v, y)) = labels
        .iter()
        .enumerate()
        .find_map(|(v, y)| y.filter(|&y| y >= num_classes).map(|y| (v, y)))
    {
        return Err(Error::Argument(format!(
            "node {v} has label {y}, but there are only {num_classes} classes"
        )));
    }
    Ok(())
}

/// One-hot rows for labeled nodes and all-zero rows for unlabeled ones.
pub fn one_hot(labels: &[Option<usize>], num_classes: usize) -> Matrix {
    let mut out = Matrix::zeros(labels.len(), num_classes);
    for (v, y) in labels.iter().enumerate() {
        if let Some(y) = *y {
            out[(v, y)] = 1.0;
        }
    }
    out
}
