use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stochdual::{fixtures, AdaptedProcess, LeafProcess, RandomVariable, ScenarioTree};

use crate::util::{ensure, Ctx, Outcome};

type Q = BigRational;
type Tree = ScenarioTree<Q>;

const TREES: usize = 100;

fn q<R: Rng>(rng: &mut R) -> Q {
    Q::new(BigInt::from(rng.gen_range(-6..=6)), BigInt::from(rng.gen_range(1..=3)))
}

fn random_leaf_values<R: Rng>(rng: &mut R, tree: &Tree) -> Vec<Q> {
    (0..tree.num_leaves()).map(|_| q(rng)).collect()
}

/// E_t by grouping leaves with the same stage-t ancestor.
fn grouped_mean(tree: &Tree, v: &[Q], t: usize) -> Vec<Q> {
    (0..tree.num_leaves())
        .map(|l| {
            let atom = tree.ancestor(l, t);
            let (mut num, mut den) = (Q::zero(), Q::zero());
            for m in (0..tree.num_leaves()).filter(|&m| tree.ancestor(m, t) == atom) {
                num += tree.leaf_prob(m) * &v[m];
                den += tree.leaf_prob(m);
            }
            num / den
        })
        .collect()
}

fn mean(tree: &Tree, v: &[Q]) -> Q {
    (0..tree.num_leaves()).map(|l| tree.leaf_prob(l) * &v[l]).sum()
}

fn times(a: &[Q], b: &[Q]) -> Vec<Q> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn cond(tree: &Tree, v: &[Q], t: usize) -> Result<Vec<Q>, String> {
    let rv = RandomVariable::scalar(tree, v.to_vec()).ctx("random variable")?;
    Ok(tree.conditional_expectation(&rv, t).ctx("E_t")?.scalars())
}

fn check_tree<R: Rng>(rng: &mut R, tree: &Tree) -> Result<(), String> {
    let stages = tree.num_stages();
    let a = random_leaf_values(rng, tree);
    let b = random_leaf_values(rng, tree);
    for t in 0..stages {
        let ea = cond(tree, &a, t)?;
        ensure!(ea == grouped_mean(tree, &a, t), "E_{t} differs from the grouped mean");
        for s in 0..=t {
            ensure!(cond(tree, &ea, s)? == cond(tree, &a, s)?, "tower property fails for s = {s}, t = {t}");
        }
        let eb = cond(tree, &b, t)?;
        ensure!(mean(tree, &times(&ea, &b)) == mean(tree, &times(&a, &eb)), "E_{t} is not self-adjoint");

        // c is F_t-measurable
        let by_atom: Vec<Q> = tree.nodes_at(t).iter().map(|_| q(rng)).collect();
        let c: Vec<Q> = (0..tree.num_leaves()).map(|l| by_atom[tree.atom_of(l, t)].clone()).collect();
        ensure!(cond(tree, &times(&c, &a), t)? == times(&c, &ea), "pull-out fails at t = {t}");

        let convex: [(&str, fn(&Q) -> Q); 3] = [("|x|", |x| x.abs()), ("x⁺", |x| x.clone().max(Q::zero())), ("x²", |x| x * x)];
        for (name, phi) in convex {
            let lhs: Vec<Q> = ea.iter().map(phi).collect();
            let rhs = cond(tree, &a.iter().map(phi).collect::<Vec<_>>(), t)?;
            ensure!(lhs.iter().zip(&rhs).all(|(l, r)| l <= r), "Jensen fails for {name} at t = {t}");
        }
    }

    // p = q − E_t q is orthogonal to every adapted process
    let raw = (0..stages).map(|_| (0..tree.num_leaves()).map(|_| vec![q(rng)]).collect()).collect();
    let raw = LeafProcess::new(tree, vec![1; stages], raw).ctx("leaf process")?;
    let p = tree.orthogonal_part(&raw).ctx("orthogonal part")?;
    let nodes: Vec<Q> = (0..tree.num_nodes()).map(|_| q(rng)).collect();
    let x = AdaptedProcess::from_node_scalars(tree, &nodes).ctx("adapted process")?;
    ensure!(tree.pairing(&x, &p).ctx("pairing")?.is_zero(), "E Σ x_t p_t ≠ 0");
    ensure!(tree.orthogonality_residuals(&p).ctx("residuals")?.iter().all(Zero::is_zero), "E_t p_t ≠ 0");
    Ok(())
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nodes = 0;
    for k in 0..TREES {
        let stages = rng.gen_range(1..=4);
        let tree = fixtures::random_tree(&mut rng, stages, 3);
        nodes += tree.num_nodes();
        check_tree(&mut rng, &tree).map_err(|e| format!("tree {k}: {e}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(format!("{TREES} exact trees ({nodes} nodes in all), {secs:.2}s"))
}
