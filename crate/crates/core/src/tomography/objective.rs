//! Least-squares objective compiled into a prefix trie, with a forward sweep
//! for probabilities and a reverse adjoint sweep for Euclidean gradients.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::cis::{kraus_operators, state_density, CisSet, DimensionProfile, FactorId};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::simulator::Dataset;
use crate::tensor::{kron, partial_trace, partial_trace_rect, ComplexMatrix, SubsystemShape};

/// Loss `Σ (p̃ − p)²` split by prefix length.
#[derive(Clone, Debug, PartialEq)]
pub struct LossReport<T> {
    pub total: T,
    /// Entry `L − 1` holds the contribution of length-`L` records.
    pub by_length: Vec<T>,
    pub records: usize,
}

/// One Euclidean gradient per factor, in canonical factor order, with the
/// convention `G = 2 ∂F/∂X̄` (so `Re⟨G, ΔX⟩` is the directional derivative).
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle<T: Real> {
    pub factors: Vec<ComplexMatrix<T>>,
}

impl<T: Real> GradientBundle<T> {
    pub fn zeros(profile: &DimensionProfile) -> Self {
        Self { factors: profile.factor_shapes().into_iter().map(|(r, c)| ComplexMatrix::zeros(r, c)).collect() }
    }

    pub fn get(&self, profile: &DimensionProfile, id: FactorId) -> &ComplexMatrix<T> {
        &self.factors[profile.factor_index(id)]
    }

    pub fn max_abs(&self) -> T {
        self.factors.iter().map(ComplexMatrix::max_abs).fold(T::zero(), T::max)
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in self.factors.iter_mut().zip(&other.factors) {
            *a += b;
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    v: usize,
    x: usize,
    targets: Vec<f64>,
    children: Vec<Node>,
}

#[derive(Default)]
struct Builder {
    targets: Vec<f64>,
    children: BTreeMap<(usize, usize), Builder>,
}

fn freeze(children: BTreeMap<(usize, usize), Builder>) -> Vec<Node> {
    children
        .into_iter()
        .map(|((v, x), b)| Node { v, x, targets: b.targets, children: freeze(b.children) })
        .collect()
}

/// The dataset organised by shared prefixes, one tree per state.
#[derive(Clone, Debug)]
pub struct Objective {
    profile: DimensionProfile,
    roots: Vec<(usize, Vec<Node>)>,
    records: usize,
}

/// Per-slot, per-instrument, per-branch Kraus data of the current iterate.
struct Kraus<T: Real> {
    ops: Vec<ComplexMatrix<T>>,
    lifted: Vec<ComplexMatrix<T>>,
    effect: ComplexMatrix<T>,
    row_offset: usize,
    env: usize,
}

struct View<'a, T: Real> {
    cis: &'a CisSet<T>,
    branches: Vec<Vec<Vec<Kraus<T>>>>,
}

struct Acc<T: Real> {
    grads: GradientBundle<T>,
    by_length: Vec<T>,
}

impl Objective {
    pub fn new(profile: &DimensionProfile, data: &Dataset) -> Result<Self> {
        data.validate(profile)?;
        let mut trees: BTreeMap<usize, Builder> = BTreeMap::new();
        for r in &data.records {
            let mut node = trees.entry(r.sequence.u).or_default();
            for (&v, &x) in r.sequence.v.iter().zip(&r.sequence.x) {
                node = node.children.entry((v, x)).or_default();
            }
            node.targets.push(r.value);
        }
        let roots = trees.into_iter().map(|(u, b)| (u, freeze(b.children))).collect();
        Ok(Self { profile: profile.clone(), roots, records: data.len() })
    }

    pub fn profile(&self) -> &DimensionProfile {
        &self.profile
    }

    pub fn records(&self) -> usize {
        self.records
    }

    /// Loss and Euclidean gradient at `cis`.
    pub fn evaluate<T: Real>(&self, cis: &CisSet<T>) -> Result<(LossReport<T>, GradientBundle<T>)> {
        if cis.profile() != &self.profile {
            return Err(Error::Lookup("CIS set profile differs from the objective's profile".into()));
        }
        let view = self.view(cis)?;
        let partials: Vec<Acc<T>> = self
            .roots
            .par_iter()
            .map(|(u, children)| self.root(&view, *u, children))
            .collect::<Result<_>>()?;
        let n = self.profile.slots();
        let mut grads = GradientBundle::zeros(&self.profile);
        let mut by_length = vec![T::zero(); n];
        for p in &partials {
            grads.add(&p.grads);
            for (a, b) in by_length.iter_mut().zip(&p.by_length) {
                *a += *b;
            }
        }
        let total = by_length.iter().copied().fold(T::zero(), |a, b| a + b);
        if !total.is_finite() {
            return Err(Error::Numeric("loss is not finite".into()));
        }
        for (id, g) in self.profile.factor_ids().into_iter().zip(&grads.factors) {
            if !g.is_finite() {
                return Err(Error::Numeric(format!("gradient of factor {id:?} is not finite")));
            }
        }
        Ok((LossReport { total, by_length, records: self.records }, grads))
    }

    fn view<'a, T: Real>(&self, cis: &'a CisSet<T>) -> Result<View<'a, T>> {
        let p = &self.profile;
        let mut branches = Vec::with_capacity(p.slots());
        for t in 0..p.slots() {
            let id = ComplexMatrix::identity(p.d_anc()[t + 1]);
            let mut slot = Vec::with_capacity(p.n_instruments(t));
            for ins in &cis.instruments()[t] {
                let mut per_branch = Vec::with_capacity(ins.branch_count());
                for x in 0..ins.branch_count() {
                    let w = ins.branch(x);
                    let ops = kraus_operators(&w, ins.output_dim())?;
                    let lifted = ops.iter().map(|k| kron(k, &id)).collect();
                    per_branch.push(Kraus {
                        lifted,
                        effect: w.adjoint_mul(&w)?,
                        ops,
                        row_offset: ins.row_offset(x),
                        env: ins.env_dims()[x],
                    });
                }
                slot.push(per_branch);
            }
            branches.push(slot);
        }
        Ok(View { cis, branches })
    }

    fn root<T: Real>(&self, view: &View<T>, u: usize, children: &[Node]) -> Result<Acc<T>> {
        let p = &self.profile;
        let mut acc = Acc { grads: GradientBundle::zeros(p), by_length: vec![T::zero(); p.slots()] };
        let state = view.cis.state(u)?;
        let m = state.amplitude_matrix();
        let rho = state_density(state);
        let mut path = vec![(u, 0)];
        let lambda = self.node(view, 0, &rho, children, &mut path, &mut acc)?;
        let k = p.factor_index(FactorId::State(u));
        let gm = lambda.matmul(&m)?.scale(T::lit(2.0));
        for (g, d) in acc.grads.factors[k].data_mut().iter_mut().zip(gm.data()) {
            *g += d;
        }
        Ok(acc)
    }

    /// Pushes `eta` (on `i_t ⊗ a_t`) through comb slot `t` and the subtree;
    /// returns the adjoint with respect to `eta`.
    fn node<T: Real>(
        &self,
        view: &View<T>,
        t: usize,
        eta: &ComplexMatrix<T>,
        children: &[Node],
        path: &mut Vec<(usize, usize)>,
        acc: &mut Acc<T>,
    ) -> Result<ComplexMatrix<T>> {
        let p = &self.profile;
        let v = view.cis.comb().isometry(t).matrix();
        let (dout, da) = (p.d_out()[t], p.d_anc()[t + 1]);
        let xi = v.matmul(eta)?.mul_adjoint(v)?;
        let xi_shape = SubsystemShape::new(vec![dout, da])?;
        let xi_sys = partial_trace(&xi, &xi_shape, 1)?;
        let two = T::lit(2.0);

        let mut omega = ComplexMatrix::zeros(dout * da, dout * da);
        let mut omega_sys = ComplexMatrix::zeros(dout, dout);
        for child in children {
            let kr = &view.branches[t][child.v][child.x];
            let prob = kr.effect.matmul(&xi_sys)?.trace().re;
            if !prob.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite probability for state {} and path {:?}",
                    path[0].0,
                    path[1..].iter().chain(std::iter::once(&(child.v, child.x))).collect::<Vec<_>>()
                )));
            }
            let mut c = T::zero();
            for &target in &child.targets {
                let r = T::lit(target) - prob;
                acc.by_length[t] += r * r;
                c -= two * r;
            }
            let fid = p.factor_index(FactorId::Instrument { slot: t, index: child.v });
            let din_next = p.d_in()[t + 1];
            if child.children.is_empty() {
                if c != T::zero() {
                    omega_sys.axpy(c, &kr.effect);
                    for (e, k) in kr.ops.iter().enumerate() {
                        let g = k.matmul(&xi_sys)?.scale(two * c);
                        scatter(&mut acc.grads.factors[fid], &g, kr.row_offset, kr.env, e);
                    }
                }
                continue;
            }
            let mut eta_next = ComplexMatrix::zeros(din_next * da, din_next * da);
            for l in &kr.lifted {
                eta_next += &l.matmul(&xi)?.mul_adjoint(l)?;
            }
            path.push((child.v, child.x));
            let mut lambda = self.node(view, t + 1, &eta_next, &child.children, path, acc)?;
            path.pop();
            if c != T::zero() {
                for i in 0..lambda.rows() {
                    lambda[(i, i)].re += c;
                }
            }
            let out_shape = SubsystemShape::new(vec![din_next, da])?;
            for (e, l) in kr.lifted.iter().enumerate() {
                omega += &l.adjoint_mul(&lambda.matmul(l)?)?;
                let g_lifted = lambda.matmul(l)?.matmul(&xi)?;
                let g = partial_trace_rect(&g_lifted, &out_shape, &xi_shape, 1)?.scale(two);
                scatter(&mut acc.grads.factors[fid], &g, kr.row_offset, kr.env, e);
            }
        }
        if omega_sys.max_abs() != T::zero() {
            omega += &kron(&omega_sys, &ComplexMatrix::identity(da));
        }
        let vid = p.factor_index(FactorId::Comb(t));
        acc.grads.factors[vid] += &omega.matmul(v)?.matmul(eta)?.scale(two);
        v.adjoint_mul(&omega.matmul(v)?)
    }
}

/// Adds a Kraus-shaped gradient into the stacked dilation's gradient.
fn scatter<T: Real>(target: &mut ComplexMatrix<T>, g: &ComplexMatrix<T>, row_offset: usize, env: usize, e: usize) {
    for i in 0..g.rows() {
        let row = row_offset + i * env + e;
        for j in 0..g.cols() {
            target[(row, j)] += g[(i, j)];
        }
    }
}

/// Loss of `cis` against `data`.
pub fn loss<T: Real>(cis: &CisSet<T>, data: &Dataset) -> Result<LossReport<T>> {
    Ok(Objective::new(cis.profile(), data)?.evaluate(cis)?.0)
}

/// Euclidean gradient of the loss at `cis`.
pub fn euclidean_gradient<T: Real>(cis: &CisSet<T>, data: &Dataset) -> Result<GradientBundle<T>> {
    Ok(Objective::new(cis.profile(), data)?.evaluate(cis)?.1)
}
