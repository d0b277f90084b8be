//! Homology, cycle certification, filtrations and Koszulness verdicts.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::cobar::{build_cobar, check_d_squared, split_by_vertex_type, ChainComplex};
use crate::error::{Error, Result};
use crate::expansion::Operad;
use crate::lincomb::LinComb;
use crate::presentations::{quadratic_dual, wheeled_dual};
use crate::qlinalg::{echelon_of, rank, sparse_kernel_basis, SparseMatrix};
use crate::treealg::{GeneratorSet, Term};

/// (degree, dimension) pairs, ascending in degree.
pub type DegreeDims = Vec<(i64, usize)>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomologyReport {
    pub dims: DegreeDims,
    pub euler: i64,
    /// Per-component dims when the complex was split by vertex type.
    pub components: Vec<(Vec<usize>, DegreeDims)>,
}

impl HomologyReport {
    pub fn dim(&self, k: i64) -> usize {
        self.dims.iter().find(|x| x.0 == k).map_or(0, |x| x.1)
    }

    pub fn total(&self) -> usize {
        self.dims.iter().map(|x| x.1).sum()
    }

    pub fn nonzero(&self) -> Vec<(i64, usize)> {
        self.dims.iter().copied().filter(|x| x.1 > 0).collect()
    }
}

fn ranks(c: &ChainComplex) -> BTreeMap<i64, usize> {
    c.degrees.iter().map(|b| (b.degree, rank(&b.d))).collect()
}

pub fn homology_dims(c: &ChainComplex) -> Result<HomologyReport> {
    if !check_d_squared(c) {
        let k = c.degrees.windows(2).find(|w| !w[0].d.mul(&w[1].d).map(|m| m.is_zero()).unwrap_or(false));
        let (a, b) = k.map_or((0, 0), |w| (w[1].degree, w[0].degree - 1));
        return Err(Error::NotComplex(a, b));
    }
    let r = ranks(c);
    let dims = c
        .degrees
        .iter()
        .map(|b| {
            let up = r.get(&(b.degree + 1)).copied().unwrap_or(0);
            (b.degree, b.basis.len() - r[&b.degree] - up)
        })
        .collect::<Vec<_>>();
    let euler = dims.iter().map(|&(k, d)| if k % 2 == 0 { d as i64 } else { -(d as i64) }).sum();
    Ok(HomologyReport { dims, euler, components: Vec::new() })
}

/// Homology of each vertex-type component, summed into the total.
pub fn split_homology(c: &ChainComplex, gens: &GeneratorSet) -> Result<HomologyReport> {
    let mut total: BTreeMap<i64, usize> = c.degrees.iter().map(|b| (b.degree, 0)).collect();
    let mut components = Vec::new();
    for part in split_by_vertex_type(c, gens)? {
        let h = homology_dims(&part)?;
        for &(k, d) in &h.dims {
            *total.get_mut(&k).unwrap() += d;
        }
        components.push((part.component.clone().unwrap_or_default(), h.dims));
    }
    let dims: Vec<(i64, usize)> = total.into_iter().collect();
    let euler = dims.iter().map(|&(k, d)| if k % 2 == 0 { d as i64 } else { -(d as i64) }).sum();
    Ok(HomologyReport { dims, euler, components })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Certificate {
    pub is_cycle: bool,
    pub is_boundary: bool,
}

pub fn certify_cycle(c: &ChainComplex, x: &LinComb, k: i64) -> Result<Certificate> {
    let v = if x.is_empty() { Default::default() } else { c.coordinates(k, x)? };
    let is_cycle = c.d(k).apply(&v).is_empty();
    let image = c.block(k + 1).map(|b| b.d.column_vectors()).unwrap_or_default();
    let is_boundary = echelon_of(&image).contains(&v);
    Ok(Certificate { is_cycle, is_boundary })
}

/// First kernel vector of d_k (reduced echelon order) that is not a boundary.
pub fn nontrivial_cycle(c: &ChainComplex, k: i64) -> Option<LinComb> {
    let image = c.block(k + 1).map(|b| b.d.column_vectors()).unwrap_or_default();
    let img = echelon_of(&image);
    let d = c.block(k).map(|b| b.d.clone())?;
    let d = if d.rows() == 0 { SparseMatrix::zeros(0, d.cols()) } else { d };
    sparse_kernel_basis(&d).into_iter().find(|v| !img.contains(v)).map(|v| c.lincomb(k, &v))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub degree: i64,
    pub component: Option<Vec<usize>>,
    pub cycle: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArityCheck {
    pub arity: usize,
    pub wheeled: bool,
    pub expected_degree: i64,
    pub expected_dim: usize,
    pub homology: Vec<(i64, usize)>,
    pub pass: bool,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KoszulVerdict {
    pub presentation: String,
    pub max_arity: usize,
    pub wheeled: bool,
    pub sgn_twist: bool,
    pub checks: Vec<ArityCheck>,
    pub pass: bool,
}

impl KoszulVerdict {
    pub fn first_failure(&self) -> Option<&ArityCheck> {
        self.checks.iter().find(|c| !c.pass)
    }
}

fn check_arity(op: &Operad, dual: &Operad, n: usize, wheeled: bool, sgn_twist: bool) -> Result<ArityCheck> {
    let c = build_cobar(op, n, wheeled, sgn_twist)?;
    let expected_degree = if wheeled { n as i64 } else { n as i64 - 1 };
    let expected_dim = dual.dim(n, wheeled)?;
    let parts = if op.gens().types().len() > 1 { split_by_vertex_type(&c, op.gens())? } else { vec![c] };
    let mut total: BTreeMap<i64, usize> = BTreeMap::new();
    let mut witness = None;
    let mut reports = Vec::new();
    for part in &parts {
        let h = homology_dims(part)?;
        for &(k, d) in &h.dims {
            *total.entry(k).or_default() += d;
        }
        reports.push(h);
    }
    let homology: Vec<(i64, usize)> = total.into_iter().collect();
    let pass = homology.iter().all(|&(k, d)| if k == expected_degree { d == expected_dim } else { d == 0 });
    if !pass {
        let bad = homology.iter().find(|&&(k, d)| k != expected_degree && d > 0).map(|x| x.0);
        if let Some(k) = bad {
            for (part, h) in parts.iter().zip(&reports) {
                if h.dim(k) > 0 {
                    if let Some(cycle) = nontrivial_cycle(part, k) {
                        witness = Some(Witness { degree: k, component: part.component.clone(), cycle: cycle.to_string() });
                        break;
                    }
                }
            }
        }
    }
    Ok(ArityCheck { arity: n, wheeled, expected_degree, expected_dim, homology, pass, witness })
}

/// Compares cobar homology with the (wheeled) quadratic dual for n <= max_n.
pub fn koszul_report(op: &Operad, max_n: usize, wheeled: bool, sgn_twist: bool) -> Result<KoszulVerdict> {
    let p = &op.presentation;
    let dual = Operad::with_guards(if wheeled { wheeled_dual(p)? } else { quadratic_dual(p)? }, op.guards);
    let dual = &dual;
    let mut checks = Vec::new();
    for n in 1..=max_n {
        if n >= 2 {
            checks.push(check_arity(op, dual, n, false, sgn_twist)?);
        }
        if wheeled {
            checks.push(check_arity(op, dual, n, true, sgn_twist)?);
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(KoszulVerdict {
        presentation: op.presentation.name.clone(),
        max_arity: max_n,
        wheeled,
        sgn_twist,
        checks,
        pass,
    })
}

/// Level (1-based) of every basis element, per degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiltrationAssignment {
    pub levels: BTreeMap<i64, Vec<usize>>,
}

impl FiltrationAssignment {
    pub fn trivial(c: &ChainComplex) -> Self {
        FiltrationAssignment { levels: c.degrees.iter().map(|b| (b.degree, vec![1; b.basis.len()])).collect() }
    }

    pub fn max_level(&self) -> usize {
        self.levels.values().flatten().copied().max().unwrap_or(1)
    }
}

/// Level = 1 + number of leaves sitting directly on a vertex of the given
/// generator's swap orbit. With `c` on poiss this is the Lie-input filtration:
/// level 1 holds the trees whose leaves all enter brackets.
pub fn input_type_filtration(c: &ChainComplex, gens: &GeneratorSet, generator: &str) -> Result<FiltrationAssignment> {
    let ty = gens.type_of(generator).ok_or_else(|| Error::UnknownGenerator(generator.to_string()))?;
    fn count(t: &Term, gens: &GeneratorSet, ty: usize) -> usize {
        match t {
            Term::Node(d, cs) => {
                let own = if gens.type_of(d) == Some(ty) { cs.iter().filter(|c| matches!(c, Term::Leaf(_))).count() } else { 0 };
                own + cs.iter().map(|c| count(c, gens, ty)).sum::<usize>()
            }
            Term::Bubble(x) | Term::Dot(x) | Term::Group(x) => count(x, gens, ty),
            _ => 0,
        }
    }
    let mut levels = BTreeMap::new();
    for b in &c.degrees {
        let ls = b.basis.iter().map(|s| Ok(1 + count(&Term::parse(s)?, gens, ty))).collect::<Result<Vec<_>>>()?;
        levels.insert(b.degree, ls);
    }
    Ok(FiltrationAssignment { levels })
}

pub fn lie_input_filtration(c: &ChainComplex, gens: &GeneratorSet) -> Result<FiltrationAssignment> {
    input_type_filtration(c, gens, "c")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiltrationReport {
    /// Homology of F_i / F_{i-1}, per level i.
    pub levels: Vec<(usize, Vec<(i64, usize)>)>,
    /// Per degree: sum over levels.
    pub summed: Vec<(i64, usize)>,
    pub homology: Vec<(i64, usize)>,
    pub bound_holds: bool,
}

pub fn filtration_analysis(c: &ChainComplex, f: &FiltrationAssignment) -> Result<FiltrationReport> {
    let level = |k: i64, i: usize| f.levels.get(&k).and_then(|v| v.get(i)).copied();
    for b in &c.degrees {
        if f.levels.get(&b.degree).map(Vec::len) != Some(b.basis.len()) {
            return Err(Error::Dimension { expected: b.basis.len(), got: f.levels.get(&b.degree).map_or(0, Vec::len) });
        }
        for (r, col, _) in b.d.entries() {
            let (from, to) = (level(b.degree, col).unwrap(), level(b.degree - 1, r).unwrap());
            if to > from {
                return Err(Error::Filtration { degree: b.degree, row: r, col, from, to });
            }
        }
    }
    let mut levels = Vec::new();
    let mut summed: BTreeMap<i64, usize> = c.degrees.iter().map(|b| (b.degree, 0)).collect();
    for lv in 1..=f.max_level() {
        let mut degrees = Vec::new();
        let mut prev: Vec<Option<usize>> = Vec::new();
        for b in &c.degrees {
            let mut map = vec![None; b.basis.len()];
            let mut basis = Vec::new();
            for (j, s) in b.basis.iter().enumerate() {
                if level(b.degree, j) == Some(lv) {
                    map[j] = Some(basis.len());
                    basis.push(s.clone());
                }
            }
            let mut d = SparseMatrix::zeros(prev.iter().flatten().count(), basis.len());
            for (r, col, x) in b.d.entries() {
                if let (Some(rr), Some(cc)) = (prev.get(r).copied().flatten(), map[col]) {
                    d.set(rr, cc, x.clone());
                }
            }
            degrees.push(crate::cobar::DegreeBlock { degree: b.degree, basis, d });
            prev = map;
        }
        let quotient = ChainComplex { arity: c.arity, wheeled: c.wheeled, component: c.component.clone(), degrees };
        let h = homology_dims(&quotient)?;
        for &(k, d) in &h.dims {
            *summed.get_mut(&k).unwrap() += d;
        }
        levels.push((lv, h.dims));
    }
    let homology = homology_dims(c)?.dims;
    let summed: Vec<(i64, usize)> = summed.into_iter().collect();
    let bound_holds = summed.iter().zip(&homology).all(|(a, b)| a.1 >= b.1);
    Ok(FiltrationReport { levels, summed, homology, bound_holds })
}
