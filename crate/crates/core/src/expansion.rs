//! Ideals, quotient bases and structure constants of P = Q(E, R).

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_traits::One;

use crate::error::{Error, Result};
use crate::lincomb::LinComb;
use crate::presentations::Presentation;
use crate::qlinalg::{add_entry, axpy, int, Echelon, Rational, SparseVec};
use crate::treealg::{
    arity_items, canonicalize, contract_wheel, graft, rotate_wheel, set_partitions, two_block_splits, GeneratorSet, Item,
    ShapeEnumerator, Term,
};

pub const DEFAULT_MAX_PLAIN: usize = 6;
pub const DEFAULT_MAX_WHEELED: usize = 4;
pub const DEFAULT_MAX_DOUBLE: usize = 4;
pub const ARITY_ENV: &str = "OPERAD_FORGE_MAX_ARITY";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Guards {
    pub max_plain: usize,
    pub max_wheeled: usize,
    pub max_double: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Guards { max_plain: DEFAULT_MAX_PLAIN, max_wheeled: DEFAULT_MAX_WHEELED, max_double: DEFAULT_MAX_DOUBLE }
    }
}

impl Guards {
    /// Defaults, raised (never lowered) by `OPERAD_FORGE_MAX_ARITY`.
    pub fn from_env() -> Self {
        let mut g = Guards::default();
        if let Some(v) = std::env::var(ARITY_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
            g.max_plain = g.max_plain.max(v);
            g.max_wheeled = g.max_wheeled.max(v);
            g.max_double = g.max_double.max(v);
        }
        g
    }

    pub fn check(&self, n: usize, wheeled: bool) -> Result<()> {
        let (max, what) = if wheeled { (self.max_wheeled, "wheeled") } else { (self.max_plain, "plain") };
        if n > max {
            return Err(Error::Guard { what, n, max });
        }
        Ok(())
    }
}

/// A basis element of P(n) (`wheeled = false`) or P_w(n).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Deco {
    pub arity: usize,
    pub wheeled: bool,
    pub index: usize,
}

#[derive(Debug)]
pub struct ArityBasis {
    pub arity: usize,
    pub wheeled: bool,
    pub spanning: Vec<Term>,
    pub keys: Vec<String>,
    /// Echelon basis of the ideal, in spanning coordinates.
    pub ideal: Vec<SparseVec>,
    /// Spanning indices of the chosen representatives, ascending.
    pub representatives: Vec<usize>,
    reduction: Vec<SparseVec>,
}

impl ArityBasis {
    pub fn dim(&self) -> usize {
        self.representatives.len()
    }

    pub fn rep(&self, i: usize) -> &Term {
        &self.spanning[self.representatives[i]]
    }

    pub fn rep_key(&self, i: usize) -> &str {
        &self.keys[self.representatives[i]]
    }

    pub fn rep_keys(&self) -> Vec<String> {
        (0..self.dim()).map(|i| self.rep_key(i).to_string()).collect()
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.keys.binary_search_by(|k| k.as_str().cmp(key)).ok()
    }

    /// Reduction of the spanning element `key`.
    pub fn reduce_key(&self, key: &str) -> Result<&SparseVec> {
        let i = self.index_of(key).ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        Ok(&self.reduction[i])
    }

    pub fn reduce_vec(&self, x: &SparseVec) -> SparseVec {
        let mut out = SparseVec::new();
        for (&i, c) in x {
            axpy(&mut out, c, &self.reduction[i]);
        }
        out
    }

    pub fn reduce(&self, x: &LinComb) -> Result<LinComb> {
        let mut out = SparseVec::new();
        for (k, c) in x.iter() {
            axpy(&mut out, c, self.reduce_key(k)?);
        }
        Ok(self.to_lincomb(&out))
    }

    pub fn to_lincomb(&self, v: &SparseVec) -> LinComb {
        v.iter().map(|(&i, c)| (self.rep_key(i).to_string(), c.clone())).collect()
    }
}

/// Trees over `items` with exactly one ternary hole vertex `?`.
struct HoleEnumerator<'a, 'b> {
    shapes: &'b mut ShapeEnumerator<'a>,
    gens: &'a GeneratorSet,
    memo: HashMap<Vec<Item>, Vec<Term>>,
}

const HOLE: &str = "?";

impl HoleEnumerator<'_, '_> {
    fn trees(&mut self, items: &[Item]) -> Vec<Term> {
        if items.len() < 3 {
            return Vec::new();
        }
        if let Some(v) = self.memo.get(items) {
            return v.clone();
        }
        let mut out = Vec::new();
        for p in set_partitions(items).into_iter().filter(|p| p.len() == 3) {
            let blocks: Vec<Vec<Term>> = p.iter().map(|b| self.shapes.trees(b)).collect();
            for x in &blocks[0] {
                for y in &blocks[1] {
                    for z in &blocks[2] {
                        out.push(Term::Node(HOLE.into(), vec![x.clone(), y.clone(), z.clone()]));
                    }
                }
            }
        }
        for (a, b) in two_block_splits(items) {
            for (holed, plain, hole_first) in [(&a, &b, true), (&b, &a, false)] {
                let hs = self.trees(holed);
                if hs.is_empty() {
                    continue;
                }
                let ps = self.shapes.trees(plain);
                for h in &hs {
                    for t in &ps {
                        for g in self.gens.iter() {
                            let cs = if hole_first { vec![h.clone(), t.clone()] } else { vec![t.clone(), h.clone()] };
                            out.push(Term::Node(g.id.clone(), cs));
                        }
                    }
                }
            }
        }
        self.memo.insert(items.to_vec(), out.clone());
        out
    }
}

fn fill_hole(ctx: &Term, rel_term: &Term) -> Term {
    match ctx {
        Term::Node(d, cs) if d == HOLE => rel_term.substitute(&mut |l| cs[l as usize - 1].clone()),
        Term::Node(d, cs) => Term::Node(d.clone(), cs.iter().map(|c| fill_hole(c, rel_term)).collect()),
        _ => ctx.clone(),
    }
}

struct IdealBuilder<'a> {
    gens: &'a GeneratorSet,
    keys: &'a [String],
    echelon: Echelon,
    n_cols: usize,
}

impl IdealBuilder<'_> {
    fn col(&self, key: &str) -> Result<usize> {
        let i = self.keys.binary_search_by(|k| k.as_str().cmp(key)).map_err(|_| Error::UnknownKey(key.to_string()))?;
        Ok(self.n_cols - 1 - i)
    }

    fn push(&mut self, terms: &[(Rational, Term)]) -> Result<()> {
        let mut v = SparseVec::new();
        for (c, t) in terms {
            let (s, canon) = canonicalize(t, self.gens)?;
            add_entry(&mut v, self.col(&canon.to_string())?, c * int(s as i64));
        }
        if !v.is_empty() {
            self.echelon.insert(&v);
        }
        Ok(())
    }
}

fn parsed(rels: &[LinComb]) -> Result<Vec<Vec<(Rational, Term)>>> {
    rels.iter()
        .map(|r| r.iter().map(|(k, c)| Ok((c.clone(), Term::parse(k)?))).collect::<Result<Vec<_>>>())
        .collect()
}

/// Builds the quotient basis of P(n) or P_w(n).
pub fn operad_basis(p: &Presentation, n: usize, wheeled: bool) -> Result<ArityBasis> {
    let gens = &p.generators;
    let items = arity_items(n, wheeled);
    let mut shapes = ShapeEnumerator::new(gens);
    let spanning: Vec<Term> = if items.is_empty() || (items.len() < 2 && wheeled) || gens.is_empty() && items.len() > 1 {
        Vec::new()
    } else {
        shapes.trees(&items)
    };
    let keys: Vec<String> = spanning.iter().map(Term::to_string).collect();
    let n_cols = keys.len();
    let mut b = IdealBuilder { gens, keys: &keys, echelon: Echelon::new(), n_cols };

    let rels3 = parsed(&p.relations3)?;
    if !rels3.is_empty() && items.len() >= 3 {
        let contexts = HoleEnumerator { shapes: &mut shapes, gens, memo: HashMap::new() }.trees(&items);
        for ctx in &contexts {
            for rel in &rels3 {
                let filled: Vec<(Rational, Term)> = rel.iter().map(|(c, t)| (c.clone(), fill_hole(ctx, t))).collect();
                b.push(&filled)?;
            }
        }
    }
    if wheeled {
        let rels1 = parsed(&p.wheeled_relations1)?;
        if !rels1.is_empty() {
            let below = shapes.trees(&arity_items(n, false));
            for x in &below {
                for rel in &rels1 {
                    let filled: Vec<(Rational, Term)> =
                        rel.iter().map(|(c, t)| (c.clone(), t.substitute(&mut |_| x.clone()))).collect();
                    b.push(&filled)?;
                }
            }
        }
        for t in &spanning {
            if let Some(r) = rotate_wheel(t) {
                b.push(&[(Rational::one(), t.clone()), (-Rational::one(), r)])?;
            }
        }
    }

    let echelon = b.echelon;
    let mut representatives = Vec::new();
    for i in 0..n_cols {
        if !echelon.is_pivot(n_cols - 1 - i) {
            representatives.push(i);
        }
    }
    let rep_pos: HashMap<usize, usize> = representatives.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let mut reduction = Vec::with_capacity(n_cols);
    for i in 0..n_cols {
        let mut v = SparseVec::new();
        match rep_pos.get(&i) {
            Some(&k) => {
                v.insert(k, Rational::one());
            }
            None => {
                let row = echelon.row_for_pivot(n_cols - 1 - i).expect("pivot row");
                for (&c, x) in row {
                    let j = n_cols - 1 - c;
                    if j != i {
                        v.insert(rep_pos[&j], -x);
                    }
                }
            }
        }
        reduction.push(v);
    }
    let ideal = echelon
        .sorted_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|(c, x)| (n_cols - 1 - c, x)).collect())
        .collect();
    Ok(ArityBasis { arity: n, wheeled, spanning, keys, ideal, representatives, reduction })
}

pub fn ideal_subspace(p: &Presentation, n: usize, wheeled: bool) -> Result<Vec<SparseVec>> {
    Ok(operad_basis(p, n, wheeled)?.ideal)
}

type Memo<K> = Mutex<HashMap<K, Arc<SparseVec>>>;

/// A presentation together with cached bases and structure constants.
pub struct Operad {
    pub presentation: Presentation,
    pub guards: Guards,
    bases: Mutex<HashMap<(usize, bool), Arc<ArityBasis>>>,
    compositions: Memo<(Deco, usize, Deco)>,
    contractions: Memo<(Deco, usize)>,
    actions: Memo<(Deco, Vec<u32>)>,
}

impl Operad {
    pub fn new(presentation: Presentation) -> Self {
        Self::with_guards(presentation, Guards::from_env())
    }

    pub fn with_guards(presentation: Presentation, guards: Guards) -> Self {
        Operad {
            presentation,
            guards,
            bases: Mutex::new(HashMap::new()),
            compositions: Mutex::new(HashMap::new()),
            contractions: Mutex::new(HashMap::new()),
            actions: Mutex::new(HashMap::new()),
        }
    }

    pub fn gens(&self) -> &GeneratorSet {
        &self.presentation.generators
    }

    pub fn basis(&self, n: usize, wheeled: bool) -> Result<Arc<ArityBasis>> {
        self.guards.check(n, wheeled)?;
        if let Some(b) = self.bases.lock().unwrap().get(&(n, wheeled)) {
            return Ok(b.clone());
        }
        let b = Arc::new(operad_basis(&self.presentation, n, wheeled)?);
        self.bases.lock().unwrap().insert((n, wheeled), b.clone());
        Ok(b)
    }

    pub fn dim(&self, n: usize, wheeled: bool) -> Result<usize> {
        Ok(self.basis(n, wheeled)?.dim())
    }

    pub fn rep(&self, d: Deco) -> Result<Term> {
        Ok(self.basis(d.arity, d.wheeled)?.rep(d.index).clone())
    }

    /// Canonicalizes a raw generator tree and reduces it to basis coordinates.
    pub fn reduce_term(&self, t: &Term) -> Result<SparseVec> {
        let (s, c) = canonicalize(t, self.gens())?;
        let b = self.basis(c.arity(), c.is_wheeled())?;
        let mut out = SparseVec::new();
        axpy(&mut out, &int(s as i64), b.reduce_key(&c.to_string())?);
        Ok(out)
    }

    /// `u ∘_s l` in the basis of arity `u.arity + l.arity - 1`.
    pub fn compose(&self, u: Deco, s: usize, l: Deco) -> Result<Arc<SparseVec>> {
        if let Some(v) = self.compositions.lock().unwrap().get(&(u, s, l)) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.reduce_term(&graft(&self.rep(u)?, s, &self.rep(l)?)?)?);
        self.compositions.lock().unwrap().insert((u, s, l), v.clone());
        Ok(v)
    }

    /// `ξ_s(u)` in the wheeled basis of arity `u.arity - 1`.
    pub fn contract(&self, u: Deco, s: usize) -> Result<Arc<SparseVec>> {
        if let Some(v) = self.contractions.lock().unwrap().get(&(u, s)) {
            return Ok(v.clone());
        }
        let v = Arc::new(self.reduce_term(&contract_wheel(&self.rep(u)?, s)?)?);
        self.contractions.lock().unwrap().insert((u, s), v.clone());
        Ok(v)
    }

    /// Relabels leaf j of `u` to `sigma[j-1]`.
    pub fn act(&self, u: Deco, sigma: &[u32]) -> Result<Arc<SparseVec>> {
        let key = (u, sigma.to_vec());
        if let Some(v) = self.actions.lock().unwrap().get(&key) {
            return Ok(v.clone());
        }
        let t = self.rep(u)?;
        if sigma.len() != t.arity() {
            return Err(Error::Dimension { expected: t.arity(), got: sigma.len() });
        }
        let v = Arc::new(self.reduce_term(&t.relabel(&|l| sigma[l as usize - 1]))?);
        self.actions.lock().unwrap().insert(key, v.clone());
        Ok(v)
    }

    pub fn structure_table(&self, max_arity: usize) -> Result<StructureTable> {
        let mut t = StructureTable::default();
        for k in 2..=max_arity {
            for m in 2..=max_arity + 1 - k {
                for wheeled in [false, true] {
                    if wheeled && k + m - 1 > self.guards.max_wheeled {
                        continue;
                    }
                    let dk = self.dim(k, wheeled)?;
                    let dm = self.dim(m, false)?;
                    for i in 0..dk {
                        for j in 0..dm {
                            for s in 1..=k {
                                let u = Deco { arity: k, wheeled, index: i };
                                let l = Deco { arity: m, wheeled: false, index: j };
                                t.compose.insert((u, s, l), (*self.compose(u, s, l)?).clone());
                            }
                        }
                    }
                }
            }
            if k - 1 <= self.guards.max_wheeled {
                for i in 0..self.dim(k, false)? {
                    for s in 1..=k {
                        let u = Deco { arity: k, wheeled: false, index: i };
                        t.contract.insert((u, s), (*self.contract(u, s)?).clone());
                    }
                }
            }
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, Default)]
pub struct StructureTable {
    pub compose: HashMap<(Deco, usize, Deco), SparseVec>,
    pub contract: HashMap<(Deco, usize), SparseVec>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentations::{builtin, wheeled_dual};

    fn dims(name: &str, wheeled: bool, ns: std::ops::RangeInclusive<usize>) -> Vec<usize> {
        let op = Operad::new(builtin(name).unwrap());
        ns.map(|n| op.dim(n, wheeled).unwrap()).collect()
    }

    #[test]
    fn small_dims() {
        assert_eq!(dims("com", false, 2..=4), vec![1, 1, 1]);
        assert_eq!(dims("lie", false, 2..=4), vec![1, 2, 6]);
        assert_eq!(dims("ass", false, 2..=4), vec![2, 6, 24]);
        assert_eq!(dims("poiss", false, 2..=3), vec![2, 6]);
        assert_eq!(dims("poiss", true, 1..=3), vec![2, 4, 10]);
        assert_eq!(dims("ass", true, 1..=2), vec![2, 4]);
    }

    #[test]
    fn ideal_dims() {
        let p = builtin("com").unwrap();
        assert_eq!(ideal_subspace(&p, 3, false).unwrap().len(), 2);
        let p = builtin("lie").unwrap();
        assert_eq!(ideal_subspace(&p, 3, false).unwrap().len(), 1);
        let d = wheeled_dual(&builtin("poiss").unwrap()).unwrap();
        assert_eq!(Operad::new(d).dim(1, true).unwrap(), 0);
    }

    #[test]
    fn reduction_properties() {
        let op = Operad::new(builtin("poiss").unwrap());
        let b = op.basis(3, true).unwrap();
        for v in &b.ideal {
            assert!(b.reduce_vec(v).is_empty());
        }
        for i in 0..b.dim() {
            let v = b.reduce_key(b.rep_key(i)).unwrap();
            assert_eq!(v.len(), 1);
            assert!(v[&i].is_one());
        }
        let t = Term::parse("(c (l 1 2) @)").unwrap();
        assert!(op.reduce_term(&t).unwrap().is_empty());
    }

    #[test]
    fn guard() {
        let op = Operad::with_guards(builtin("com").unwrap(), Guards::default());
        assert!(matches!(op.basis(7, false), Err(Error::Guard { .. })));
        assert!(matches!(op.basis(5, true), Err(Error::Guard { .. })));
    }
}
