//! Conditional expectations and martingale calculus on a scenario tree.

use crate::error::{Error, Result};
use crate::scalar::{max_abs, Scalar};

use super::{AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree, Trajectory};

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

impl<F: Scalar> ScenarioTree<F> {
    /// Probability-weighted average of leaf vectors over each stage-t atom, one entry per node.
    pub fn atom_means(&self, leaf_values: &[Vec<F>], t: usize) -> Result<Vec<Vec<F>>> {
        self.check_stage(t)?;
        if leaf_values.len() != self.num_leaves() {
            return Err(Error::Shape(format!(
                "{} leaf values for {} leaves",
                leaf_values.len(),
                self.num_leaves()
            )));
        }
        let dim = leaf_values.first().map_or(0, |v| v.len());
        Ok(self
            .nodes_at(t)
            .iter()
            .map(|&node| {
                let mut acc = vec![F::zero(); dim];
                for leaf in self.leaf_range(node) {
                    let w = self.leaf_prob(leaf).clone();
                    for (a, v) in acc.iter_mut().zip(&leaf_values[leaf]) {
                        *a = a.clone() + w.clone() * v.clone();
                    }
                }
                let mass = self.prob(node).clone();
                acc.into_iter().map(|a| a / mass.clone()).collect()
            })
            .collect())
    }

    /// E_t v, realized leafwise.
    pub fn conditional_expectation(
        &self,
        v: &RandomVariable<F>,
        t: usize,
    ) -> Result<RandomVariable<F>> {
        let means = self.atom_means(v.values(), t)?;
        let values = (0..self.num_leaves())
            .map(|l| means[self.atom_of(l, t)].clone())
            .collect();
        RandomVariable::new(self, v.dim(), values)
    }

    /// Expectation of a random variable.
    pub fn expectation(&self, v: &RandomVariable<F>) -> Vec<F> {
        let mut acc = vec![F::zero(); v.dim()];
        for (leaf, value) in v.values().iter().enumerate() {
            let w = self.leaf_prob(leaf).clone();
            for (a, x) in acc.iter_mut().zip(value) {
                *a = a.clone() + w.clone() * x.clone();
            }
        }
        acc
    }

    /// ap p = (E_t p_t)_t, stored node-indexed.
    pub fn adapted_projection(&self, p: &LeafProcess<F>) -> Result<AdaptedProcess<F>> {
        self.check_process_stages(p.dims().len())?;
        let values = (0..self.num_stages())
            .map(|t| self.atom_means(&p.values()[t], t))
            .collect::<Result<Vec<_>>>()?;
        AdaptedProcess::new(self, p.dims().to_vec(), values)
    }

    /// p − ap p, the component of p in the orthogonal complement of the adapted processes.
    pub fn orthogonal_part(&self, p: &LeafProcess<F>) -> Result<LeafProcess<F>> {
        let ap = self.adapted_projection(p)?.to_leaf_process(self);
        p.axpy(-F::one(), &ap)
    }

    /// Σ_t E[x_t · v_t].
    pub fn pairing<X: Trajectory<F>>(&self, x: &X, v: &LeafProcess<F>) -> Result<F> {
        if x.dims() != v.dims() {
            return Err(Error::Shape("pairing of processes with different dimensions".into()));
        }
        self.check_process_stages(v.dims().len())?;
        let mut total = F::zero();
        for leaf in 0..self.num_leaves() {
            let mut s = F::zero();
            for t in 0..self.num_stages() {
                s = s + dot(x.at_leaf(self, t, leaf), v.value(t, leaf));
            }
            total = total + self.leaf_prob(leaf).clone() * s;
        }
        Ok(total)
    }

    /// ‖E_t p_t‖_∞ for every stage.
    pub fn orthogonality_residuals(&self, p: &LeafProcess<F>) -> Result<Vec<F>> {
        let ap = self.adapted_projection(p)?;
        Ok((0..self.num_stages())
            .map(|t| max_abs(ap.stage_values(t).iter().flatten().cloned()))
            .collect())
    }

    pub fn in_orthogonal_complement(&self, p: &LeafProcess<F>, tol: &F) -> Result<bool> {
        Ok(self.orthogonality_residuals(p)?.iter().all(|r| r <= tol))
    }

    /// E_t y_{t+1} at every stage-t node.
    fn next_stage_means(&self, y: &AdaptedProcess<F>, t: usize) -> Vec<Vec<F>> {
        let dim = y.dims()[t + 1];
        self.nodes_at(t)
            .iter()
            .map(|&node| {
                let mut acc = vec![F::zero(); dim];
                for &c in self.children(node) {
                    let w = self.prob(c).clone();
                    for (a, v) in acc.iter_mut().zip(y.node_value(self, c)) {
                        *a = a.clone() + w.clone() * v.clone();
                    }
                }
                acc.into_iter().map(|a| a / self.prob(node).clone()).collect()
            })
            .collect()
    }

    fn check_uniform_dims(&self, y: &AdaptedProcess<F>) -> Result<()> {
        self.check_process_stages(y.dims().len())?;
        if y.dims().windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Shape("process must have the same dimension at every stage".into()));
        }
        Ok(())
    }

    fn check_process_stages(&self, stages: usize) -> Result<()> {
        if stages != self.num_stages() {
            return Err(Error::Shape(format!(
                "process has {stages} stages, tree has {}",
                self.num_stages()
            )));
        }
        Ok(())
    }

    /// y = m + a with m a martingale and a predictable, a_0 = 0.
    pub fn doob_decomposition(
        &self,
        y: &AdaptedProcess<F>,
    ) -> Result<(AdaptedProcess<F>, AdaptedProcess<F>)> {
        self.check_uniform_dims(y)?;
        let dims = y.dims().to_vec();
        let mut a: Vec<Vec<Vec<F>>> = vec![vec![vec![F::zero(); dims[0]]; self.nodes_at(0).len()]];
        for t in 1..self.num_stages() {
            let means = self.next_stage_means(y, t - 1);
            let stage = self
                .nodes_at(t)
                .iter()
                .map(|&node| {
                    let parent = self.parent(node).expect("stage t > 0 has a parent");
                    let k = self.index_in_stage(parent);
                    a[t - 1][k]
                        .iter()
                        .zip(&means[k])
                        .zip(y.value(t - 1, k))
                        .map(|((prev, mean), yp)| prev.clone() + mean.clone() - yp.clone())
                        .collect()
                })
                .collect();
            a.push(stage);
        }
        let m = (0..self.num_stages())
            .map(|t| {
                y.stage_values(t)
                    .iter()
                    .zip(&a[t])
                    .map(|(yv, av)| yv.iter().zip(av).map(|(u, v)| u.clone() - v.clone()).collect())
                    .collect()
            })
            .collect();
        Ok((AdaptedProcess::new(self, dims.clone(), m)?, AdaptedProcess::new(self, dims, a)?))
    }

    pub fn is_martingale(&self, y: &AdaptedProcess<F>, tol: &F) -> Result<bool> {
        self.check_uniform_dims(y)?;
        for t in 0..self.horizon() {
            let means = self.next_stage_means(y, t);
            for (k, mean) in means.iter().enumerate() {
                let drift = mean.iter().zip(y.value(t, k)).map(|(u, v)| u.clone() - v.clone());
                if max_abs(drift) > *tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}
