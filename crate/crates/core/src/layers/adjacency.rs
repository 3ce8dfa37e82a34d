use crate::autodiff::{sym_normalize, Tensor};
use crate::error::{Error, Result};
use crate::ingest::AdjacencyMode;

/// `D^{-1/2} Â D^{-1/2}` with `Â = A' + I`, where `A'` is `A` binarized
/// ([`AdjacencyMode::Binary`]) or taken as is ([`AdjacencyMode::Weighted`]).
pub fn normalize_adjacency(a: &Tensor, mode: AdjacencyMode) -> Result<Tensor> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Argument(format!(
            "adjacency must be square, got {}x{}",
            n,
            a.cols()
        )));
    }
    for i in 0..n {
        if a.get(i, i) != 0.0 {
            return Err(Error::Argument(format!("adjacency has self-loop at node {i}")));
        }
        for j in (i + 1)..n {
            if a.get(i, j) != a.get(j, i) {
                return Err(Error::Argument(format!(
                    "adjacency is not symmetric at ({i}, {j})"
                )));
            }
            if a.get(i, j) < 0.0 {
                return Err(Error::Argument(format!("negative adjacency at ({i}, {j})")));
            }
        }
    }
    let a = match mode {
        AdjacencyMode::Binary => a.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        AdjacencyMode::Weighted => a.clone(),
    };
    sym_normalize(&a)
}

/// Attention neighbourhoods: each node's neighbours plus itself.
#[derive(Clone, Debug, PartialEq)]
pub struct Neighborhood {
    /// `mask[i][j] = 1` iff `j` is in the neighbourhood of `i`.
    pub mask: Tensor,
    /// Neighbourhood sizes, self included.
    pub cardinality: Vec<f64>,
}

pub fn attention_neighborhood(a: &Tensor) -> Neighborhood {
    let n = a.rows();
    let mut mask = a.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
    for i in 0..n {
        mask.set(i, i, 1.0);
    }
    let cardinality = (0..n).map(|i| mask.row(i).iter().sum()).collect();
    Neighborhood { mask, cardinality }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isolated_node() {
        let out = normalize_adjacency(&Tensor::zeros(1, 1), AdjacencyMode::Binary).unwrap();
        assert_eq!(out, Tensor::scalar(1.0));
    }

    #[test]
    fn single_edge() {
        let a = Tensor::from_rows(&[[0.0, 3.0], [3.0, 0.0]]);
        let out = normalize_adjacency(&a, AdjacencyMode::Binary).unwrap();
        assert!(out.max_abs_diff(&Tensor::filled(2, 2, 0.5)) < 1e-15);
        // Weighted: degrees 4, 4 -> entries 1/4 and 3/4.
        let w = normalize_adjacency(&a, AdjacencyMode::Weighted).unwrap();
        assert!(w.max_abs_diff(&Tensor::from_rows(&[[0.25, 0.75], [0.75, 0.25]])) < 1e-15);
    }

    #[test]
    fn triangle() {
        let a = Tensor::from_rows(&[[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]]);
        let out = normalize_adjacency(&a, AdjacencyMode::Binary).unwrap();
        assert!(out.max_abs_diff(&Tensor::filled(3, 3, 1.0 / 3.0)) < 1e-15);
    }

    #[test]
    fn asymmetric_is_rejected() {
        let a = Tensor::from_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(
            normalize_adjacency(&a, AdjacencyMode::Binary),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn neighborhood_includes_self() {
        let a = Tensor::from_rows(&[[0.0, 2.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        let nb = attention_neighborhood(&a);
        assert_eq!(nb.cardinality, [2.0, 2.0, 1.0]);
        assert_eq!(nb.mask.row(2), &[0.0, 0.0, 1.0]);
    }
}
