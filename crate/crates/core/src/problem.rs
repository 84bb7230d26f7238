//! The stochastic program (SP) on a scenario tree and its dual.
//!
//! Each leaf carries a convex integrand over (x-path, u), where the x-path
//! concatenates x_0, …, x_T along the leaf's scenario and u ∈ R^m is the
//! perturbation parameter, fixed at ū in the primal problem.

use crate::conic::{Lin, Model, Status, Tolerances};
use crate::convex::{domain_tol, ConvexFunction, Exactness, Fallback};
use crate::error::{Error, Result};
use crate::extreal::{ExtReal, NegInf};
use crate::tree::{AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct SPInstance {
    tree: ScenarioTree,
    dims: Vec<usize>,
    param_dim: usize,
    integrands: Vec<ConvexFunction>,
    ubar: RandomVariable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub p: LeafProcess,
    pub y: RandomVariable,
}

/// Everything `solve` and `verify` need to judge a primal/dual pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    pub primal: ExtReal,
    pub dual: ExtReal,
    pub gap: ExtReal,
    /// f(x, ū) + f*(p, y) − x·p − ū·y per leaf.
    pub fenchel_residuals: Vec<ExtReal>,
    /// ‖E_t p_t‖_∞ per stage.
    pub orth_residuals: Vec<f64>,
    pub primal_feasible: bool,
    pub dual_feasible: bool,
    /// Least exact way any conjugate value was obtained.
    pub exactness: Exactness,
}

impl PairEvaluation {
    pub fn max_fenchel_residual(&self) -> ExtReal {
        self.fenchel_residuals.iter().fold(ExtReal::ZERO, |m, r| m.max(*r))
    }

    pub fn max_orth_residual(&self) -> f64 {
        self.orth_residuals.iter().fold(0.0, |m, r| m.max(*r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityReport {
    pub is_linear: bool,
    /// Dimension of the largest linear subspace inside the recession cone.
    pub lineality_dim: usize,
    /// An adapted x with f^∞(x, 0) ≤ 0 whose negative is not in the cone.
    pub witness: Option<AdaptedProcess>,
}

const LP_TOL: f64 = 1e-7;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl DualPoint {
    pub fn zeros(inst: &SPInstance) -> DualPoint {
        DualPoint {
            p: LeafProcess::zeros(&inst.tree, inst.dims.clone()),
            y: RandomVariable::zeros(&inst.tree, inst.param_dim),
        }
    }
}

impl SPInstance {
    pub fn new(
        tree: ScenarioTree,
        dims: Vec<usize>,
        integrands: Vec<ConvexFunction>,
        ubar: RandomVariable,
    ) -> Result<SPInstance> {
        if dims.len() != tree.num_stages() {
            return Err(Error::Shape(format!(
                "{} stage dimensions for {} stages",
                dims.len(),
                tree.num_stages()
            )));
        }
        if integrands.len() != tree.num_leaves() {
            return Err(Error::Shape(format!(
                "{} integrands for {} leaves",
                integrands.len(),
                tree.num_leaves()
            )));
        }
        if ubar.num_leaves() != tree.num_leaves() {
            return Err(Error::Shape("parameter ū does not match the leaves".into()));
        }
        let joint = dims.iter().sum::<usize>() + ubar.dim();
        for (leaf, f) in integrands.iter().enumerate() {
            f.validate()?;
            if f.dim() != joint {
                return Err(Error::Shape(format!(
                    "integrand at leaf {leaf} has dimension {} but (x, u) has dimension {joint}",
                    f.dim()
                )));
            }
        }
        Ok(SPInstance { param_dim: ubar.dim(), tree, dims, integrands, ubar })
    }

    pub fn tree(&self) -> &ScenarioTree {
        &self.tree
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    /// Σ_t n_t.
    pub fn path_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    pub fn integrand(&self, leaf: usize) -> &ConvexFunction {
        &self.integrands[leaf]
    }

    pub fn integrands(&self) -> &[ConvexFunction] {
        &self.integrands
    }

    pub fn ubar(&self) -> &RandomVariable {
        &self.ubar
    }

    /// Offset of x_t inside a path vector.
    pub fn stage_offset(&self, t: usize) -> usize {
        self.dims[..t].iter().sum()
    }

    fn check_dims(&self, dims: &[usize]) -> Result<()> {
        if dims != self.dims.as_slice() {
            return Err(Error::Shape(format!("process dimensions {dims:?}, expected {:?}", self.dims)));
        }
        Ok(())
    }

    /// The argument (x-path, ū) of the integrand at `leaf`.
    pub fn leaf_point(&self, x: &impl Trajectory<f64>, leaf: usize) -> Vec<f64> {
        let mut z = self.path(x, leaf);
        z.extend_from_slice(self.ubar.value(leaf));
        z
    }

    pub fn path(&self, x: &impl Trajectory<f64>, leaf: usize) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.path_dim() + self.param_dim);
        for t in 0..self.tree.num_stages() {
            z.extend_from_slice(x.at_leaf(&self.tree, t, leaf));
        }
        z
    }

    /// E f(x, ū) under the extended-real sum convention.
    pub fn primal_objective(&self, x: &AdaptedProcess) -> Result<ExtReal> {
        self.primal_objective_tol(x, 0.0)
    }

    /// Primal objective with domain constraints relaxed by `tol`.
    pub fn primal_objective_tol(&self, x: &AdaptedProcess, tol: f64) -> Result<ExtReal> {
        self.check_dims(x.dims())?;
        Ok((0..self.tree.num_leaves())
            .map(|leaf| {
                let v = self.integrands[leaf].eval_tol(&self.leaf_point(x, leaf), tol);
                v.scale(*self.tree.leaf_prob(leaf))
            })
            .sum())
    }

    /// ⟨ū, y⟩ − E f*(p, y), or −∞ when p is not orthogonal to the adapted processes.
    pub fn dual_objective(&self, d: &DualPoint) -> Result<ExtReal> {
        self.check_dims(d.p.dims())?;
        if !self.tree.in_orthogonal_complement(&d.p, &1e-10)? {
            return Ok(NegInf);
        }
        let mut total = ExtReal::ZERO;
        for leaf in 0..self.tree.num_leaves() {
            let (v, uy) = self.dual_leaf_point(d, leaf);
            let c = self.integrands[leaf].conjugate_relaxed(&v, 0.0, Fallback::Allow)?.value;
            total = total + (ExtReal::Finite(uy) - c).scale(*self.tree.leaf_prob(leaf));
        }
        Ok(total)
    }

    /// ((p-path, y), ū·y) at `leaf`.
    fn dual_leaf_point(&self, d: &DualPoint, leaf: usize) -> (Vec<f64>, f64) {
        let mut v = d.p.path(leaf);
        v.extend_from_slice(d.y.value(leaf));
        (v, dot(self.ubar.value(leaf), d.y.value(leaf)))
    }

    /// Primal minus dual objective.
    pub fn weak_duality_gap(&self, x: &AdaptedProcess, d: &DualPoint) -> Result<ExtReal> {
        Ok(self.primal_objective(x)? - self.dual_objective(d)?)
    }

    /// Objectives, gap and scenariowise Fenchel residuals of a pair.
    ///
    /// Domains are relaxed by at most `min(tol, 1e-9)`. The result does not depend on
    /// how the pair was produced.
    pub fn evaluate_pair(&self, x: &AdaptedProcess, d: &DualPoint, tol: f64) -> Result<PairEvaluation> {
        self.check_dims(x.dims())?;
        self.check_dims(d.p.dims())?;
        if d.y.dim() != self.param_dim {
            return Err(Error::Dimension { expected: self.param_dim, got: d.y.dim() });
        }
        let eps = domain_tol(tol);
        let orth_residuals = self.tree.orthogonality_residuals(&d.p)?;
        let mut primal = ExtReal::ZERO;
        let mut dual = ExtReal::ZERO;
        let mut fenchel_residuals = Vec::with_capacity(self.tree.num_leaves());
        let mut conj_finite = true;
        let mut exactness = Exactness::ClosedForm;
        for leaf in 0..self.tree.num_leaves() {
            let prob = *self.tree.leaf_prob(leaf);
            let z = self.leaf_point(x, leaf);
            let (v, uy) = self.dual_leaf_point(d, leaf);
            let f = &self.integrands[leaf];
            let fx = f.eval_tol(&z, eps);
            let conj = f.conjugate_tight(&v, eps, Fallback::Allow)?;
            exactness = exactness.max(conj.exactness);
            let fc = conj.value;
            conj_finite &= fc.is_finite();
            primal = primal + fx.scale(prob);
            dual = dual + (ExtReal::Finite(uy) - fc).scale(prob);
            fenchel_residuals.push(fx + fc - dot(&z, &v));
        }
        let primal_feasible = primal.is_finite();
        let dual_feasible = conj_finite && orth_residuals.iter().all(|r| *r <= tol);
        Ok(PairEvaluation {
            primal,
            dual,
            gap: primal - dual,
            fenchel_residuals,
            orth_residuals,
            primal_feasible,
            dual_feasible,
            exactness,
        })
    }

    /// Adds one variable block per node and returns them indexed by node id.
    pub(crate) fn add_node_vars(&self, m: &mut Model) -> Vec<Vec<Lin>> {
        (0..self.tree.num_nodes())
            .map(|node| m.add_vars(self.dims[self.tree.stage(node)]))
            .collect()
    }

    pub(crate) fn path_exprs(&self, node_vars: &[Vec<Lin>], leaf: usize) -> Vec<Lin> {
        (0..self.tree.num_stages())
            .flat_map(|t| node_vars[self.tree.ancestor(leaf, t)].iter().cloned())
            .collect()
    }

    pub(crate) fn adapted_from_solution(&self, node_vars: &[Vec<Lin>], sol: &[f64]) -> AdaptedProcess {
        let values: Vec<Vec<f64>> = node_vars.iter().map(|v| v.iter().map(|e| e.eval(sol)).collect()).collect();
        AdaptedProcess::from_node_vectors(&self.tree, self.dims.clone(), &values)
            .expect("node blocks match stage dimensions")
    }

    /// Adds the recession cone {x adapted : f^∞(x-path, 0) ≤ 0 at every leaf}.
    fn add_recession_cone(&self, m: &mut Model, node_vars: &[Vec<Lin>]) {
        for leaf in 0..self.tree.num_leaves() {
            let mut d = self.path_exprs(node_vars, leaf);
            d.extend((0..self.param_dim).map(|_| Lin::zero()));
            let t = self.integrands[leaf].lower_recession(m, &d);
            m.le(t);
        }
    }

    /// Tests whether {x ∈ N : f^∞(x, 0) ≤ 0} is a linear space.
    ///
    /// A basis of the lineality space L = C ∩ −C is grown one LP at a time;
    /// the cone C is linear iff C ∩ L^⊥ ∩ box is {0}, which is settled by
    /// maximizing ±x_i over it.
    pub fn check_linearity_condition(&self) -> Result<LinearityReport> {
        let tol = Tolerances::default();
        let nvars: usize = (0..self.tree.num_nodes()).map(|n| self.dims[self.tree.stage(n)]).sum();
        let mut basis: Vec<Vec<f64>> = Vec::new();

        // maximize sign·x_i over the chosen cone ∩ basis^⊥ ∩ [−1, 1]^n
        let search = |both_sides: bool, basis: &[Vec<f64>], i: usize, sign: f64| -> Result<Option<Vec<f64>>> {
            let mut m = Model::new();
            let vars = self.add_node_vars(&mut m);
            self.add_recession_cone(&mut m, &vars);
            if both_sides {
                let neg: Vec<Vec<Lin>> = vars.iter().map(|b| b.iter().map(|e| -e.clone()).collect()).collect();
                self.add_recession_cone(&mut m, &neg);
            }
            let flat: Vec<Lin> = vars.iter().flatten().cloned().collect();
            for b in basis {
                m.eq(Lin::combine(b.iter().copied(), &flat));
            }
            for e in &flat {
                m.le(e.clone() + (-1.0));
                m.le(-e.clone() + (-1.0));
            }
            m.add_linear(&flat[i], -sign);
            let sol = m.solve(&tol)?;
            match sol.status {
                Status::Optimal if -sol.objective > LP_TOL => Ok(Some(flat.iter().map(|e| e.eval(&sol.x)).collect())),
                Status::Optimal => Ok(None),
                Status::Infeasible => Err(Error::Numerical("recession cone LP reported infeasible".into())),
                Status::Unbounded => Err(Error::Numerical("bounded recession cone LP reported unbounded".into())),
            }
        };

        'grow: loop {
            for i in 0..nvars {
                for sign in [1.0, -1.0] {
                    if let Some(v) = search(true, &basis, i, sign)? {
                        basis.push(orthonormalize(&basis, v));
                        continue 'grow;
                    }
                }
            }
            break;
        }
        let lineality_dim = basis.len();
        for i in 0..nvars {
            for sign in [1.0, -1.0] {
                if let Some(v) = search(false, &basis, i, sign)? {
                    let mut by_node = Vec::with_capacity(self.tree.num_nodes());
                    let mut k = 0;
                    for node in 0..self.tree.num_nodes() {
                        let d = self.dims[self.tree.stage(node)];
                        by_node.push(v[k..k + d].to_vec());
                        k += d;
                    }
                    let witness = AdaptedProcess::from_node_vectors(&self.tree, self.dims.clone(), &by_node)?;
                    return Ok(LinearityReport { is_linear: false, lineality_dim, witness: Some(witness) });
                }
            }
        }
        Ok(LinearityReport { is_linear: true, lineality_dim, witness: None })
    }

    /// Whether for every λ in {1 − eps, 1, 1 + eps} ∪ `lambdas` some y makes
    /// E f*(λp, y) finite. Searches y leaf by leaf through the conic dual of
    /// each integrand.
    pub fn check_dual_neighborhood(&self, p: &LeafProcess, eps: f64, lambdas: &[f64]) -> Result<bool> {
        self.check_dims(p.dims())?;
        let mut all: Vec<f64> = vec![1.0 - eps, 1.0, 1.0 + eps];
        all.extend_from_slice(lambdas);
        let tol = Tolerances::default();
        for leaf in 0..self.tree.num_leaves() {
            let f = &self.integrands[leaf];
            let mut m = Model::new();
            let z = m.add_vars(f.dim());
            f.lower_objective(&mut m, &z, 1.0);
            let exposed: Vec<usize> = (0..f.dim()).collect();
            let path = p.path(leaf);
            for &lam in &all {
                let fixed: Vec<f64> = path.iter().map(|v| lam * v).collect();
                match m.partial_conjugate_infimum(&exposed, &fixed, &tol)? {
                    Some((value, _)) if value < f64::INFINITY => {}
                    _ => return Ok(false),
                }
            }
        }
        Ok(true)
    }
}

fn orthonormalize(basis: &[Vec<f64>], mut v: Vec<f64>) -> Vec<f64> {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, &v);
            v.iter_mut().zip(b).for_each(|(a, x)| *a -= c * x);
        }
    }
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}
