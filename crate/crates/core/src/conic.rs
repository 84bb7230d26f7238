//! Small conic modelling layer over the Clarabel interior-point solver.
//!
//! A [`Model`] collects affine expressions over scalar variables, a convex
//! quadratic objective and membership constraints in the zero, nonnegative,
//! second-order and exponential cones.

use std::ops::{Add, Mul, Neg, Sub};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Affine expression `Σ coef·var + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lin {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Lin {
    pub fn var(i: usize) -> Lin {
        Lin { terms: vec![(i, 1.0)], constant: 0.0 }
    }

    pub fn constant(c: f64) -> Lin {
        Lin { terms: Vec::new(), constant: c }
    }

    pub fn zero() -> Lin {
        Lin::default()
    }

    /// `Σ coefs[i]·exprs[i]`.
    pub fn combine(coefs: impl IntoIterator<Item = f64>, exprs: &[Lin]) -> Lin {
        let mut out = Lin::zero();
        for (c, e) in coefs.into_iter().zip(exprs) {
            if c != 0.0 {
                out.add_scaled(e, c);
            }
        }
        out
    }

    pub fn add_scaled(&mut self, other: &Lin, factor: f64) {
        self.terms.extend(other.terms.iter().map(|&(i, c)| (i, c * factor)));
        self.constant += factor * other.constant;
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }

    /// Merges repeated variables and drops zero coefficients.
    pub fn compact(mut self) -> Lin {
        self.terms.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms {
            match merged.last_mut() {
                Some((j, d)) if *j == i => *d += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        Lin { terms: merged, constant: self.constant }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|&(_, c)| c == 0.0)
    }
}

impl Add for Lin {
    type Output = Lin;
    fn add(mut self, rhs: Lin) -> Lin {
        self.add_scaled(&rhs, 1.0);
        self
    }
}

impl Sub for Lin {
    type Output = Lin;
    fn sub(mut self, rhs: Lin) -> Lin {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Mul<f64> for Lin {
    type Output = Lin;
    fn mul(mut self, rhs: f64) -> Lin {
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for Lin {
    type Output = Lin;
    fn neg(self) -> Lin {
        self * -1.0
    }
}

impl Add<f64> for Lin {
    type Output = Lin;
    fn add(mut self, rhs: f64) -> Lin {
        self.constant += rhs;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub gap: f64,
    pub feas: f64,
    pub max_iter: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { gap: 1e-10, feas: 1e-10, max_iter: 400 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Optimal,
    Infeasible,
    /// The objective is unbounded below; `x` holds a improving ray.
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Multipliers λ of equality rows in the Lagrangian `objective + Σ λ·e`.
    pub eq_duals: Vec<f64>,
    /// Multipliers of `≤ 0` rows, in insertion order.
    pub le_duals: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Model {
    n: usize,
    // upper-triangular entries of P, duplicates summed
    p: Vec<(usize, usize, f64)>,
    q: Vec<f64>,
    r: f64,
    eq: Vec<Lin>,
    le: Vec<Lin>,
    soc: Vec<Vec<Lin>>,
    exp: Vec<[Lin; 3]>,
}

impl Model {
    pub fn new() -> Model {
        Model::default()
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn add_var(&mut self) -> Lin {
        self.q.push(0.0);
        self.n += 1;
        Lin::var(self.n - 1)
    }

    pub fn add_vars(&mut self, k: usize) -> Vec<Lin> {
        (0..k).map(|_| self.add_var()).collect()
    }

    pub fn add_linear(&mut self, e: &Lin, weight: f64) {
        for &(i, c) in &e.terms {
            self.q[i] += weight * c;
        }
        self.r += weight * e.constant;
    }

    /// Adds `½·weight·eᵀ Q e` for a vector of affine expressions `e`.
    pub fn add_quadratic(&mut self, e: &[Lin], q: &DMatrix<f64>, weight: f64) {
        let k = e.len();
        assert_eq!(q.nrows(), k);
        for a in 0..k {
            for b in 0..k {
                let w = weight * q[(a, b)];
                if w == 0.0 {
                    continue;
                }
                for &(i, ci) in &e[a].terms {
                    for &(j, cj) in &e[b].terms {
                        // the ordered pair (j, i) carries the same value by symmetry
                        if i <= j {
                            self.p.push((i, j, w * ci * cj));
                        }
                    }
                    self.q[i] += w * ci * e[b].constant;
                }
                self.r += 0.5 * w * e[a].constant * e[b].constant;
            }
        }
    }

    /// Adds `½·weight·e²`.
    pub fn add_square(&mut self, e: &Lin, weight: f64) {
        self.add_quadratic(std::slice::from_ref(e), &DMatrix::from_element(1, 1, 1.0), weight);
    }

    pub fn eq(&mut self, e: Lin) -> usize {
        self.eq.push(e);
        self.eq.len() - 1
    }

    /// Constraint `e ≤ 0`.
    pub fn le(&mut self, e: Lin) -> usize {
        self.le.push(e);
        self.le.len() - 1
    }

    /// `‖e[1..]‖₂ ≤ e[0]`.
    pub fn soc(&mut self, e: Vec<Lin>) {
        assert!(!e.is_empty());
        self.soc.push(e);
    }

    /// `y·exp(x/y) ≤ z`, y > 0 (closure).
    pub fn exp_cone(&mut self, x: Lin, y: Lin, z: Lin) {
        self.exp.push([x, y, z]);
    }

    pub fn has_exp_cones(&self) -> bool {
        !self.exp.is_empty()
    }

    pub fn is_equality_qp(&self) -> bool {
        self.le.is_empty() && self.soc.is_empty() && self.exp.is_empty()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        let mut v = self.r;
        for (i, qi) in self.q.iter().enumerate() {
            v += qi * x[i];
        }
        for &(i, j, pij) in &self.p {
            let m = if i == j { 0.5 } else { 1.0 };
            v += m * pij * x[i] * x[j];
        }
        v
    }

    /// Solves an equality-constrained QP through its KKT system. Returns
    /// `None` when the model has other constraints or the system is singular.
    pub fn solve_equality_qp(&self) -> Option<Vec<f64>> {
        if !self.is_equality_qp() {
            return None;
        }
        let n = self.n;
        let ne = self.eq.len();
        let mut k = DMatrix::<f64>::zeros(n + ne, n + ne);
        let mut rhs = nalgebra::DVector::<f64>::zeros(n + ne);
        for &(i, j, v) in &self.p {
            k[(i, j)] += v;
            if i != j {
                k[(j, i)] += v;
            }
        }
        for i in 0..n {
            rhs[i] = -self.q[i];
        }
        for (r, e) in self.eq.iter().enumerate() {
            for &(i, c) in &e.terms {
                k[(n + r, i)] += c;
                k[(i, n + r)] += c;
            }
            rhs[n + r] = -e.constant;
        }
        let sol = k.clone().lu().solve(&rhs)?;
        let resid = (&k * &sol - &rhs).amax();
        if !resid.is_finite() || resid > 1e-9 * (1.0 + rhs.amax()) {
            return None;
        }
        Some(sol.iter().take(n).copied().collect())
    }

    fn p_matrix(&self, n: usize) -> CscMatrix<f64> {
        let (mut rows, mut cols, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        for &(i, j, v) in &self.p {
            rows.push(i);
            cols.push(j);
            vals.push(v);
        }
        CscMatrix::new_from_triplets(n, n, rows, cols, vals)
    }

    /// Solves the model with Clarabel.
    pub fn solve(&self, tol: &Tolerances) -> Result<Solution> {
        let n = self.n;
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        // s = b − Aζ must lie in the cone. For `e = a·ζ + c`:
        // zero/nonneg rows use s = −e, cone rows use s = e.
        let mut push_row = |e: &Lin, sign: f64, rows: &mut Vec<usize>, b: &mut Vec<f64>| {
            let r = b.len();
            for &(i, c) in &e.terms {
                rows.push(r);
                cols.push(i);
                vals.push(-sign * c);
            }
            b.push(sign * e.constant);
        };
        for e in &self.eq {
            push_row(e, -1.0, &mut rows, &mut b);
        }
        if !self.eq.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.eq.len()));
        }
        for e in &self.le {
            push_row(e, -1.0, &mut rows, &mut b);
        }
        if !self.le.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.le.len()));
        }
        for block in &self.soc {
            for e in block {
                push_row(e, 1.0, &mut rows, &mut b);
            }
            if block.len() == 1 {
                cones.push(SupportedConeT::NonnegativeConeT(1));
            } else {
                cones.push(SupportedConeT::SecondOrderConeT(block.len()));
            }
        }
        for block in &self.exp {
            for e in block {
                push_row(e, 1.0, &mut rows, &mut b);
            }
            cones.push(SupportedConeT::ExponentialConeT());
        }
        let m = b.len();

        if n == 0 {
            // Nothing to optimize: only check the constant constraints.
            let feasible = self.eq.iter().all(|e| e.constant.abs() <= tol.feas)
                && self.le.iter().all(|e| e.constant <= tol.feas)
                && self.soc.iter().all(|blk| {
                    let head = blk[0].constant;
                    blk[1..].iter().map(|e| e.constant * e.constant).sum::<f64>().sqrt()
                        <= head + tol.feas
                })
                && self.exp.iter().all(|[x, y, z]| {
                    let (x, y, z) = (x.constant, y.constant, z.constant);
                    (y > 0.0 && y * (x / y).exp() <= z + tol.feas)
                        || (y.abs() <= tol.feas && x <= tol.feas && z >= -tol.feas)
                });
            return Ok(Solution {
                status: if feasible { Status::Optimal } else { Status::Infeasible },
                x: Vec::new(),
                eq_duals: vec![0.0; self.eq.len()],
                le_duals: vec![0.0; self.le.len()],
                objective: self.r,
            });
        }

        let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
        let p = self.p_matrix(n);
        let settings = DefaultSettings {
            verbose: false,
            max_iter: tol.max_iter,
            tol_gap_abs: tol.gap,
            tol_gap_rel: tol.gap,
            tol_feas: tol.feas,
            tol_ktratio: 1e-8,
            max_threads: 1,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &self.q, &a, &b, &cones, settings)
            .map_err(|e| Error::Numerical(format!("solver setup: {e}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => Status::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                Status::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
            SolverStatus::MaxIterations => return Err(Error::MaxIter),
            other => return Err(Error::Numerical(format!("interior point stopped: {other:?}"))),
        };
        let ne = self.eq.len();
        let nl = self.le.len();
        Ok(Solution {
            status,
            objective: self.objective_at(&sol.x),
            x: sol.x.clone(),
            eq_duals: sol.z[..ne].to_vec(),
            le_duals: sol.z[ne..ne + nl].to_vec(),
        })
    }

    /// Builds the conic dual used for partial infima of conjugates.
    ///
    /// The model is read as `F(ζ) = min-objective` over its constraints and
    /// `exposed` names the coordinates of ζ that form the argument of F. For
    /// `w = (fixed, free)` split along `exposed`, returns
    /// `inf_free F*(fixed, free)` with the minimizing `free`, or `None` when no
    /// `free` makes `F*` finite.
    pub fn partial_conjugate_infimum(
        &self,
        exposed: &[usize],
        fixed: &[f64],
        tol: &Tolerances,
    ) -> Result<Option<(f64, Vec<f64>)>> {
        let k_fixed = fixed.len();
        let k_free = exposed.len() - k_fixed;
        let n = self.n;
        let mut dual = Model::new();
        let zeta = dual.add_vars(n);
        let lam_eq = dual.add_vars(self.eq.len());
        let lam_le = dual.add_vars(self.le.len());
        let mu_soc: Vec<Vec<Lin>> = self.soc.iter().map(|blk| dual.add_vars(blk.len())).collect();
        let mu_exp: Vec<Vec<Lin>> = self.exp.iter().map(|_| dual.add_vars(3)).collect();
        let free = dual.add_vars(k_free);

        // Stationarity: Pζ + q − Eᵀw + Σλ a − Σ A_Bᵀμ = 0, one row per primal variable.
        let mut stat: Vec<Lin> = (0..n).map(|i| Lin::constant(self.q[i])).collect();
        for &(i, j, v) in &self.p {
            stat[i].add_scaled(&zeta[j], v);
            if i != j {
                stat[j].add_scaled(&zeta[i], v);
            }
        }
        for (pos, &i) in exposed.iter().enumerate() {
            if pos < k_fixed {
                stat[i].constant -= fixed[pos];
            } else {
                stat[i].add_scaled(&free[pos - k_fixed], -1.0);
            }
        }
        let mut objective = Lin::constant(-self.r);
        for (row, lam) in self.eq.iter().zip(&lam_eq).chain(self.le.iter().zip(&lam_le)) {
            for &(i, c) in &row.terms {
                stat[i].add_scaled(lam, c);
            }
            objective.add_scaled(lam, -row.constant);
        }
        let blocks = self
            .soc
            .iter()
            .zip(&mu_soc)
            .map(|(b, m)| (b.as_slice(), m))
            .chain(self.exp.iter().zip(&mu_exp).map(|(b, m)| (b.as_slice(), m)));
        for (block, mu) in blocks {
            for (row, m) in block.iter().zip(mu) {
                for &(i, c) in &row.terms {
                    stat[i].add_scaled(m, -c);
                }
                objective.add_scaled(m, row.constant);
            }
        }
        for e in stat {
            dual.eq(e);
        }
        for lam in &lam_le {
            dual.le(-lam.clone());
        }
        for mu in mu_soc {
            dual.soc(mu);
        }
        for mu in mu_exp {
            let e = std::f64::consts::E;
            dual.exp_cone(-mu[1].clone(), -mu[0].clone(), mu[2].clone() * e);
        }
        dual.add_linear(&objective, 1.0);
        for &(i, j, v) in &self.p {
            dual.p.push((i, j, v));
        }

        let sol = dual.solve(tol)?;
        match sol.status {
            Status::Optimal => {
                let y = free.iter().map(|f| f.eval(&sol.x)).collect();
                Ok(Some((sol.objective, y)))
            }
            Status::Infeasible => Ok(None),
            Status::Unbounded => Ok(Some((f64::NEG_INFINITY, vec![0.0; k_free]))),
        }
    }
}
