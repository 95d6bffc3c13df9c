use nalgebra::DVector;

use crate::kernel::KernelFamily;

#[derive(Debug, Clone, PartialEq)]
pub struct Component<P> {
    pub weight: f64,
    pub params: P,
}

/// Weighted sum of kernels `sum_k w_k f_{theta_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModel<P> {
    components: Vec<Component<P>>,
}

impl<P> Default for MixtureModel<P> {
    fn default() -> Self {
        Self {
            components: Vec::new(),
        }
    }
}

impl<P: Clone> MixtureModel<P> {
    pub fn new(components: Vec<Component<P>>) -> Self {
        Self { components }
    }

    pub fn from_parts(weights: &[f64], params: &[P]) -> Self {
        Self {
            components: weights
                .iter()
                .zip(params)
                .map(|(&weight, p)| Component {
                    weight,
                    params: p.clone(),
                })
                .collect(),
        }
    }

    pub fn components(&self) -> &[Component<P>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<Component<P>> {
        self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn params(&self) -> Vec<P> {
        self.components.iter().map(|c| c.params.clone()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Predicted signal on the family's measurement points.
    pub fn predict<K: KernelFamily<Params = P>>(&self, family: &K) -> DVector<f64> {
        let mut out = DVector::zeros(family.len());
        for c in &self.components {
            out += family.eval(&c.params) * c.weight;
        }
        out
    }
}

/// Drops components whose weight is not strictly above `weight_floor`.
pub fn prune<P: Clone>(model: &MixtureModel<P>, weight_floor: f64) -> MixtureModel<P> {
    MixtureModel::new(
        model
            .components
            .iter()
            .filter(|c| c.weight > weight_floor)
            .cloned()
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prune_drops_exact_zeros() {
        let m = MixtureModel::from_parts(&[0.5, 0.0, 0.2], &[1, 2, 3]);
        let p = prune(&m, 0.0);
        assert_eq!(p.params(), vec![1, 3]);
        let z = MixtureModel::from_parts(&[0.0, 0.0], &[1, 2]);
        assert!(prune(&z, 0.0).is_empty());
    }
}
