//! Cobar complexes of P-decorated bubble trees, in the homology direction
//! d* = ∘_T + ξ_T, plus the plain double cobar complex.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{Deco, Operad};
use crate::lincomb::LinComb;
use crate::qlinalg::{add_entry, format_rational, int, parse_rational, Rational, SparseMatrix, SparseVec};
use crate::treealg::{perm_sign, set_partitions, GeneratorSet, Item, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    Plain,
    Wheeled,
    Double,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Cell {
    Leaf(u32),
    /// Cobar-level wheel return.
    Loop,
    /// A bubble below; the flag marks an external edge (double cobar only).
    Child(Box<BubbleTree>, bool),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BubbleTree {
    pub deco: Deco,
    pub cells: Vec<Cell>,
}

impl BubbleTree {
    fn nodes(&self) -> Vec<&BubbleTree> {
        let mut out = vec![self];
        for c in &self.cells {
            if let Cell::Child(t, _) = c {
                out.extend(t.nodes());
            }
        }
        out
    }

    fn edges(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for c in &self.cells {
            match c {
                Cell::Child(t, ext) => {
                    out.push(*ext);
                    out.extend(t.edges());
                }
                Cell::Loop => out.push(false),
                Cell::Leaf(_) => {}
            }
        }
        out
    }

    pub fn degree(&self, kind: Kind) -> i64 {
        match kind {
            Kind::Double => self.edges().iter().filter(|e| !**e).count() as i64,
            _ => self.nodes().iter().filter(|n| !n.deco.wheeled).count() as i64,
        }
    }

    fn node_term(&self, op: &Operad) -> Result<Term> {
        let rep = op.rep(self.deco)?;
        let cells = self
            .cells
            .iter()
            .map(|c| match c {
                Cell::Leaf(l) => Ok(Term::Leaf(*l)),
                Cell::Loop => Ok(Term::Wheel),
                Cell::Child(t, ext) => {
                    let inner = t.node_term(op)?;
                    Ok(if *ext { Term::Group(Box::new(inner)) } else { inner })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let content = Box::new(rep.substitute(&mut |j| cells[j as usize - 1].clone()));
        Ok(if self.deco.wheeled { Term::Dot(content) } else { Term::Bubble(content) })
    }

    pub fn to_term(&self, op: &Operad, kind: Kind) -> Result<Term> {
        let t = self.node_term(op)?;
        Ok(if kind == Kind::Double { Term::Group(Box::new(t)) } else { t })
    }

    /// Generator-vertex counts per swap orbit of `gens`.
    pub fn vertex_counts(&self, op: &Operad) -> Result<Vec<usize>> {
        let types = op.gens().types();
        let mut counts = vec![0; types.len()];
        for n in self.nodes() {
            count_types(&op.rep(n.deco)?, op.gens(), &mut counts);
        }
        Ok(counts)
    }
}

fn count_types(t: &Term, gens: &GeneratorSet, counts: &mut [usize]) {
    match t {
        Term::Node(d, cs) => {
            if let Some(i) = gens.type_of(d) {
                counts[i] += 1;
            }
            cs.iter().for_each(|c| count_types(c, gens, counts));
        }
        Term::Bubble(t) | Term::Dot(t) | Term::Group(t) => count_types(t, gens, counts),
        _ => {}
    }
}

/// Generator-vertex counts of a bubble-level term string.
pub fn vertex_counts_of(key: &str, gens: &GeneratorSet) -> Result<Vec<usize>> {
    let mut counts = vec![0; gens.types().len()];
    count_types(&Term::parse(key)?, gens, &mut counts);
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Slot {
    Leaf(u32),
    Edge(usize),
}

#[derive(Clone, Debug)]
struct GNode {
    deco: Deco,
    inputs: Vec<Slot>,
}

#[derive(Clone, Debug, Default)]
struct Graph {
    nodes: Vec<Option<GNode>>,
    lower: Vec<usize>,
    external: Vec<bool>,
    alive: Vec<bool>,
    /// Orientation: internal edges in wedge order.
    word: Vec<usize>,
}

enum RawCell {
    Leaf(u32),
    Loop(usize),
    Child(usize, Box<Raw>),
}

struct Raw {
    node: usize,
    cells: Vec<RawCell>,
    sigma: Vec<u32>,
    key: u32,
    has_loop: bool,
}

impl RawCell {
    fn key(&self) -> u32 {
        match self {
            RawCell::Leaf(l) => *l,
            RawCell::Loop(_) => u32::MAX,
            RawCell::Child(_, r) => r.key,
        }
    }

    fn has_loop(&self) -> bool {
        match self {
            RawCell::Leaf(_) => false,
            RawCell::Loop(_) => true,
            RawCell::Child(_, r) => r.has_loop,
        }
    }
}

impl Graph {
    fn from_tree(t: &BubbleTree) -> Graph {
        let mut g = Graph::default();
        let has_loop = t.edges().len() > t.nodes().len() - 1;
        if has_loop {
            g.lower.push(0);
            g.external.push(false);
            g.alive.push(true);
        }
        g.nodes.push(None);
        let mut queue = VecDeque::from([(t, 0usize)]);
        while let Some((tree, id)) = queue.pop_front() {
            let mut inputs = Vec::new();
            for c in &tree.cells {
                inputs.push(match c {
                    Cell::Leaf(l) => Slot::Leaf(*l),
                    Cell::Loop => Slot::Edge(0),
                    Cell::Child(sub, ext) => {
                        let nid = g.nodes.len();
                        g.nodes.push(None);
                        let e = g.lower.len();
                        g.lower.push(nid);
                        g.external.push(*ext);
                        g.alive.push(true);
                        queue.push_back((sub, nid));
                        Slot::Edge(e)
                    }
                });
            }
            g.nodes[id] = Some(GNode { deco: tree.deco, inputs });
        }
        g.word = (0..g.lower.len()).filter(|&e| !g.external[e]).collect();
        g
    }

    fn node(&self, v: usize) -> &GNode {
        self.nodes[v].as_ref().expect("live node")
    }

    fn live(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&v| self.nodes[v].is_some())
    }

    fn upper(&self, e: usize) -> (usize, usize) {
        for v in self.live() {
            if let Some(p) = self.node(v).inputs.iter().position(|s| *s == Slot::Edge(e)) {
                return (v, p);
            }
        }
        panic!("dangling edge {e}");
    }

    fn output(&self, v: usize) -> Option<usize> {
        (0..self.lower.len()).find(|&e| self.alive[e] && self.lower[e] == v)
    }

    fn raw(&self, v: usize, root: usize) -> Raw {
        let mut cells: Vec<RawCell> = self
            .node(v)
            .inputs
            .iter()
            .map(|s| match s {
                Slot::Leaf(l) => RawCell::Leaf(*l),
                Slot::Edge(e) if self.lower[*e] == root => RawCell::Loop(*e),
                Slot::Edge(e) => RawCell::Child(*e, Box::new(self.raw(self.lower[*e], root))),
            })
            .collect();
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.sort_by_key(|&j| cells[j].key());
        let mut sigma = vec![0u32; cells.len()];
        for (new, &old) in order.iter().enumerate() {
            sigma[old] = new as u32 + 1;
        }
        let mut slots: Vec<Option<RawCell>> = cells.drain(..).map(Some).collect();
        let cells: Vec<RawCell> = order.iter().map(|&j| slots[j].take().unwrap()).collect();
        let key = cells.iter().map(RawCell::key).min().unwrap_or(u32::MAX);
        let has_loop = cells.iter().any(RawCell::has_loop);
        Raw { node: v, cells, sigma, key, has_loop }
    }

    /// Root of the canonical form: the dot, else the wheel vertex carrying
    /// leaf 1 off the wheel, else the vertex with a free output.
    fn canonical_raw(&self) -> Raw {
        if let Some(v) = self.live().find(|&v| self.node(v).deco.wheeled) {
            return self.raw(v, usize::MAX);
        }
        if let Some(v) = self.live().find(|&v| self.output(v).is_none()) {
            return self.raw(v, usize::MAX);
        }
        let mut v = self.live().next().unwrap();
        let mut seen = Vec::new();
        while !seen.contains(&v) {
            seen.push(v);
            v = self.upper(self.output(v).unwrap()).0;
        }
        let start = seen.iter().position(|&x| x == v).unwrap();
        for &c in &seen[start..] {
            let r = self.raw(c, c);
            if r.cells.iter().any(|cell| !cell.has_loop() && contains_label(cell, 1)) {
                return r;
            }
        }
        unreachable!("leaf 1 hangs off some wheel vertex")
    }
}

fn contains_label(c: &RawCell, l: u32) -> bool {
    match c {
        RawCell::Leaf(x) => *x == l,
        RawCell::Loop(_) => false,
        RawCell::Child(_, r) => r.cells.iter().any(|c| contains_label(c, l)),
    }
}

fn standard_edges(r: &Raw) -> Vec<usize> {
    fn find_loop(r: &Raw) -> Option<usize> {
        r.cells.iter().find_map(|c| match c {
            RawCell::Loop(e) => Some(*e),
            RawCell::Child(_, s) => find_loop(s),
            RawCell::Leaf(_) => None,
        })
    }
    let mut out: Vec<usize> = find_loop(r).into_iter().collect();
    let mut queue = VecDeque::from([r]);
    while let Some(x) = queue.pop_front() {
        for c in &x.cells {
            if let RawCell::Child(e, s) = c {
                out.push(*e);
                queue.push_back(s);
            }
        }
    }
    out
}

fn word_sign(word: &[usize], standard: &[usize]) -> i32 {
    let pos: HashMap<usize, u32> = word.iter().enumerate().map(|(i, &e)| (e, i as u32)).collect();
    let seq: Vec<u32> = standard.iter().filter_map(|e| pos.get(e).copied()).collect();
    debug_assert_eq!(seq.len(), word.len());
    perm_sign(&seq)
}

/// Cartesian product of independent linear combinations.
fn product<T: Clone>(factors: Vec<Vec<(T, Rational)>>) -> Vec<(Vec<T>, Rational)> {
    let mut acc: Vec<(Vec<T>, Rational)> = vec![(Vec::new(), Rational::one())];
    for f in factors {
        let mut next = Vec::with_capacity(acc.len() * f.len());
        for (xs, c) in &acc {
            for (y, d) in &f {
                let mut v = xs.clone();
                v.push(y.clone());
                next.push((v, c * d));
            }
        }
        acc = next;
    }
    acc
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeBlock {
    pub degree: i64,
    pub basis: Vec<String>,
    /// d: C_degree -> C_{degree-1}.
    pub d: SparseMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainComplex {
    pub arity: usize,
    pub wheeled: bool,
    /// Generator-vertex counts shared by every basis element, when split.
    pub component: Option<Vec<usize>>,
    /// Ascending, contiguous degrees.
    pub degrees: Vec<DegreeBlock>,
}

#[derive(Serialize, Deserialize)]
struct JsonDegree {
    degree: i64,
    basis: Vec<String>,
    dmatrix: Vec<(usize, usize, String)>,
}

#[derive(Serialize, Deserialize)]
struct JsonComplex {
    arity: usize,
    wheeled: bool,
    degrees: Vec<JsonDegree>,
}

impl ChainComplex {
    pub fn block(&self, k: i64) -> Option<&DegreeBlock> {
        self.degrees.iter().find(|b| b.degree == k)
    }

    pub fn dim(&self, k: i64) -> usize {
        self.block(k).map_or(0, |b| b.basis.len())
    }

    pub fn dims(&self) -> Vec<(i64, usize)> {
        self.degrees.iter().map(|b| (b.degree, b.basis.len())).collect()
    }

    /// The matrix of d_k, or a zero matrix of the right shape.
    pub fn d(&self, k: i64) -> SparseMatrix {
        match self.block(k) {
            Some(b) => b.d.clone(),
            None => SparseMatrix::zeros(self.dim(k - 1), 0),
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.degrees.iter().map(|b| if b.degree % 2 == 0 { 1 } else { -1 } * b.basis.len() as i64).sum()
    }

    pub fn index_of(&self, k: i64, key: &str) -> Option<usize> {
        self.block(k)?.basis.binary_search_by(|b| b.as_str().cmp(key)).ok()
    }

    /// Coordinates of `x` in the degree-k basis.
    pub fn coordinates(&self, k: i64, x: &LinComb) -> Result<SparseVec> {
        let mut v = SparseVec::new();
        for (key, c) in x.iter() {
            let i = self.index_of(k, key).ok_or_else(|| Error::UnknownKey(key.clone()))?;
            v.insert(i, c.clone());
        }
        Ok(v)
    }

    pub fn lincomb(&self, k: i64, v: &SparseVec) -> LinComb {
        let b = self.block(k).expect("degree present");
        v.iter().map(|(&i, c)| (b.basis[i].clone(), c.clone())).collect()
    }

    /// Degree of a basis key, if present.
    pub fn degree_of(&self, key: &str) -> Option<i64> {
        self.degrees.iter().find(|b| b.basis.binary_search_by(|x| x.as_str().cmp(key)).is_ok()).map(|b| b.degree)
    }

    pub fn to_json(&self) -> String {
        let j = JsonComplex {
            arity: self.arity,
            wheeled: self.wheeled,
            degrees: self
                .degrees
                .iter()
                .map(|b| JsonDegree {
                    degree: b.degree,
                    basis: b.basis.clone(),
                    dmatrix: b.d.entries().map(|(r, c, x)| (r, c, format_rational(x))).collect(),
                })
                .collect(),
        };
        serde_json::to_string(&j).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<ChainComplex> {
        let j: JsonComplex =
            serde_json::from_str(text).map_err(|e| Error::Parse { pos: e.column(), msg: e.to_string() })?;
        let mut degrees: Vec<DegreeBlock> = Vec::new();
        for (i, jd) in j.degrees.iter().enumerate() {
            let rows = if i > 0 { j.degrees[i - 1].basis.len() } else { 0 };
            if i > 0 && j.degrees[i - 1].degree + 1 != jd.degree {
                return Err(Error::Parse { pos: 0, msg: "degrees must be ascending and contiguous".into() });
            }
            let mut d = SparseMatrix::zeros(rows, jd.basis.len());
            for (r, c, x) in &jd.dmatrix {
                let q = parse_rational(x).ok_or_else(|| Error::Parse { pos: 0, msg: format!("bad entry `{x}`") })?;
                if *r >= rows || *c >= jd.basis.len() {
                    return Err(Error::Parse { pos: 0, msg: format!("entry ({r}, {c}) out of range") });
                }
                d.set(*r, *c, q);
            }
            let mut sorted = jd.basis.clone();
            sorted.sort();
            sorted.dedup();
            if sorted != jd.basis {
                return Err(Error::Parse { pos: 0, msg: format!("basis of degree {} is not sorted", jd.degree) });
            }
            degrees.push(DegreeBlock { degree: jd.degree, basis: jd.basis.clone(), d });
        }
        Ok(ChainComplex { arity: j.arity, wheeled: j.wheeled, component: None, degrees })
    }
}

pub fn check_d_squared(c: &ChainComplex) -> bool {
    c.degrees.windows(2).all(|w| w[0].d.mul(&w[1].d).map(|m| m.is_zero()).unwrap_or(false))
}

/// Splits `c` by generator-vertex counts; errors if d mixes components.
pub fn split_by_vertex_type(c: &ChainComplex, gens: &GeneratorSet) -> Result<Vec<ChainComplex>> {
    let mut keys: BTreeMap<Vec<usize>, ()> = BTreeMap::new();
    let mut key_of: Vec<Vec<Vec<usize>>> = Vec::new();
    for b in &c.degrees {
        let ks = b.basis.iter().map(|s| vertex_counts_of(s, gens)).collect::<Result<Vec<_>>>()?;
        for k in &ks {
            keys.insert(k.clone(), ());
        }
        key_of.push(ks);
    }
    for (i, b) in c.degrees.iter().enumerate() {
        for (r, col, _) in b.d.entries() {
            if key_of[i - 1][r] != key_of[i][col] {
                return Err(Error::InvalidTerm(format!(
                    "differential mixes vertex types: {} -> {}",
                    b.basis[col],
                    c.degrees[i - 1].basis[r]
                )));
            }
        }
    }
    let mut out = Vec::new();
    for key in keys.keys() {
        let mut degrees = Vec::new();
        let mut prev_map: Vec<Option<usize>> = Vec::new();
        for (i, b) in c.degrees.iter().enumerate() {
            let mut map = vec![None; b.basis.len()];
            let mut basis = Vec::new();
            for (j, s) in b.basis.iter().enumerate() {
                if key_of[i][j] == *key {
                    map[j] = Some(basis.len());
                    basis.push(s.clone());
                }
            }
            let rows = prev_map.iter().filter(|x| x.is_some()).count();
            let mut d = SparseMatrix::zeros(rows, basis.len());
            for (r, col, x) in b.d.entries() {
                if let (Some(rr), Some(cc)) = (prev_map[r], map[col]) {
                    d.set(rr, cc, x.clone());
                }
            }
            degrees.push(DegreeBlock { degree: b.degree, basis, d });
            prev_map = map;
        }
        out.push(ChainComplex { arity: c.arity, wheeled: c.wheeled, component: Some(key.clone()), degrees });
    }
    Ok(out)
}

/// The component of `c` with the given vertex counts.
pub fn component(c: &ChainComplex, gens: &GeneratorSet, counts: &[usize]) -> Result<ChainComplex> {
    split_by_vertex_type(c, gens)?
        .into_iter()
        .find(|x| x.component.as_deref() == Some(counts))
        .ok_or_else(|| Error::Usage(format!("no component with vertex counts {counts:?}")))
}

fn cell_shapes(items: &[Item]) -> Vec<Cell> {
    if items.len() == 1 {
        return vec![match items[0] {
            Item::Label(l) => Cell::Leaf(l),
            Item::Wheel => Cell::Loop,
        }];
    }
    let mut out = Vec::new();
    for p in set_partitions(items).into_iter().filter(|p| p.len() >= 2) {
        for t in node_shapes(&p, false) {
            out.push(Cell::Child(Box::new(t), false));
        }
    }
    out
}

fn node_shapes(blocks: &[Vec<Item>], wheeled: bool) -> Vec<BubbleTree> {
    let options: Vec<Vec<(Cell, Rational)>> =
        blocks.iter().map(|b| cell_shapes(b).into_iter().map(|c| (c, Rational::one())).collect()).collect();
    product(options)
        .into_iter()
        .map(|(cells, _)| BubbleTree { deco: Deco { arity: cells.len(), wheeled, index: 0 }, cells })
        .collect()
}

fn shapes(n: usize, kind: Kind) -> Vec<BubbleTree> {
    let labels: Vec<Item> = (1..=n as u32).map(Item::Label).collect();
    let mut out = Vec::new();
    match kind {
        Kind::Plain | Kind::Double => {
            for p in set_partitions(&labels).into_iter().filter(|p| p.len() >= 2) {
                out.extend(node_shapes(&p, false));
            }
        }
        Kind::Wheeled => {
            for p in set_partitions(&labels) {
                out.extend(node_shapes(&p, true));
            }
            let mut items = labels.clone();
            items.push(Item::Wheel);
            for p in set_partitions(&items).into_iter().filter(|p| p.len() >= 2) {
                let wheel_block = p.iter().find(|b| b.contains(&Item::Wheel)).unwrap();
                if !wheel_block.contains(&Item::Label(1)) {
                    out.extend(node_shapes(&p, false));
                }
            }
        }
    }
    if kind == Kind::Double {
        out = out.into_iter().flat_map(|t| colorings(&t)).collect();
    }
    out
}

fn colorings(t: &BubbleTree) -> Vec<BubbleTree> {
    let options: Vec<Vec<(Cell, Rational)>> = t
        .cells
        .iter()
        .map(|c| match c {
            Cell::Child(sub, _) => colorings(sub)
                .into_iter()
                .flat_map(|s| {
                    [(Cell::Child(Box::new(s.clone()), false), Rational::one()), (Cell::Child(Box::new(s), true), Rational::one())]
                })
                .collect(),
            other => vec![(other.clone(), Rational::one())],
        })
        .collect();
    product(options).into_iter().map(|(cells, _)| BubbleTree { deco: t.deco, cells }).collect()
}

/// The basis of a cobar-type complex plus the machinery to compute d on it.
pub struct CobarSpace<'a> {
    pub op: &'a Operad,
    pub arity: usize,
    pub kind: Kind,
    pub sgn_twist: bool,
    pub degrees: Vec<i64>,
    trees: BTreeMap<i64, Vec<(String, BubbleTree, i32)>>,
    index: HashMap<String, (i64, usize)>,
}

impl<'a> CobarSpace<'a> {
    pub fn new(op: &'a Operad, arity: usize, kind: Kind, sgn_twist: bool) -> Result<Self> {
        let degrees: Vec<i64> = match kind {
            Kind::Plain if arity >= 2 => (1..arity as i64).collect(),
            Kind::Double if arity >= 2 => (0..=arity as i64 - 2).collect(),
            Kind::Wheeled if arity >= 1 => (0..=arity as i64).collect(),
            _ => return Err(Error::Usage(format!("arity {arity} is too small for this complex"))),
        };
        match kind {
            Kind::Wheeled => {
                op.guards.check(arity, true)?;
                op.guards.check(arity + 1, false)?;
            }
            _ => op.guards.check(arity, false)?,
        }
        let mut trees: BTreeMap<i64, Vec<(String, BubbleTree, i32)>> = degrees.iter().map(|&d| (d, Vec::new())).collect();
        for shape in shapes(arity, kind) {
            for t in decorations(op, &shape)? {
                let term = t.to_term(op, kind)?;
                let eps = perm_sign(&term.leaves());
                trees.get_mut(&t.degree(kind)).expect("degree in range").push((term.to_string(), t, eps));
            }
        }
        let mut index = HashMap::new();
        for (&d, v) in trees.iter_mut() {
            v.sort_by(|a, b| a.0.cmp(&b.0));
            for (i, (s, _, _)) in v.iter().enumerate() {
                index.insert(s.clone(), (d, i));
            }
        }
        Ok(CobarSpace { op, arity, kind, sgn_twist, degrees, trees, index })
    }

    pub fn basis(&self, k: i64) -> Vec<String> {
        self.trees.get(&k).map(|v| v.iter().map(|x| x.0.clone()).collect()).unwrap_or_default()
    }

    pub fn tree(&self, k: i64, i: usize) -> &BubbleTree {
        &self.trees[&k][i].1
    }

    fn twist(&self, k: i64, i: usize) -> i32 {
        if self.sgn_twist { self.trees[&k][i].2 } else { 1 }
    }

    fn canonicalize(&self, g: &Graph, coeff: &Rational, out: &mut BTreeMap<(i64, usize), Rational>) -> Result<()> {
        let raw = self.canonical_raw_checked(g);
        let sign = word_sign(&g.word, &standard_edges(&raw).into_iter().filter(|&e| !g.external[e]).collect::<Vec<_>>());
        let coeff = coeff * int(sign as i64);
        for (t, c) in self.expand(g, &raw)? {
            let s = t.to_term(self.op, self.kind)?.to_string();
            let &(k, i) = self.index.get(&s).ok_or_else(|| Error::UnknownKey(s.clone()))?;
            let e = out.entry((k, i)).or_insert_with(Rational::zero);
            *e += &coeff * c * int(self.twist(k, i) as i64);
        }
        Ok(())
    }

    fn canonical_raw_checked(&self, g: &Graph) -> Raw {
        g.canonical_raw()
    }

    fn expand(&self, g: &Graph, r: &Raw) -> Result<Vec<(BubbleTree, Rational)>> {
        let deco = g.node(r.node).deco;
        let identity = r.sigma.iter().enumerate().all(|(i, &s)| s as usize == i + 1);
        let decos: Vec<(Deco, Rational)> = if identity {
            vec![(deco, Rational::one())]
        } else {
            self.op.act(deco, &r.sigma)?.iter().map(|(&i, c)| (Deco { index: i, ..deco }, c.clone())).collect()
        };
        let mut factors: Vec<Vec<(Cell, Rational)>> = Vec::new();
        for c in &r.cells {
            factors.push(match c {
                RawCell::Leaf(l) => vec![(Cell::Leaf(*l), Rational::one())],
                RawCell::Loop(_) => vec![(Cell::Loop, Rational::one())],
                RawCell::Child(e, sub) => self
                    .expand(g, sub)?
                    .into_iter()
                    .map(|(t, x)| (Cell::Child(Box::new(t), g.external[*e]), x))
                    .collect(),
            });
        }
        let mut out = Vec::new();
        for (cells, x) in product(factors) {
            for (d, y) in &decos {
                out.push((BubbleTree { deco: *d, cells: cells.clone() }, &x * y));
            }
        }
        Ok(out)
    }

    fn contract(&self, g: &Graph, e: usize) -> Result<Vec<(Graph, Rational)>> {
        let lo = g.lower[e];
        let (up, pos) = g.upper(e);
        let mut base = g.clone();
        base.alive[e] = false;
        base.word.retain(|&x| x != e);
        let mut out = Vec::new();
        if lo == up {
            let node = g.node(up);
            let mut inputs = node.inputs.clone();
            inputs.remove(pos);
            for (&i, c) in self.op.contract(node.deco, pos + 1)?.iter() {
                let mut h = base.clone();
                h.nodes[up] = Some(GNode { deco: Deco { arity: node.deco.arity - 1, wheeled: true, index: i }, inputs: inputs.clone() });
                out.push((h, c.clone()));
            }
        } else {
            let (u, l) = (g.node(up), g.node(lo));
            let mut inputs = u.inputs[..pos].to_vec();
            inputs.extend(l.inputs.iter().cloned());
            inputs.extend(u.inputs[pos + 1..].iter().cloned());
            let arity = u.deco.arity + l.deco.arity - 1;
            for (&i, c) in self.op.compose(u.deco, pos + 1, l.deco)?.iter() {
                let mut h = base.clone();
                h.nodes[lo] = None;
                h.nodes[up] = Some(GNode { deco: Deco { arity, wheeled: u.deco.wheeled, index: i }, inputs: inputs.clone() });
                out.push((h, c.clone()));
            }
        }
        Ok(out)
    }

    /// Columns of d* (contractions) and, for the double cobar, of d2
    /// (internal edges made external) on the degree-k basis.
    fn columns(&self, k: i64) -> Result<(Vec<SparseVec>, Vec<SparseVec>)> {
        let mut d1 = Vec::new();
        let mut d2 = Vec::new();
        for (i, (_, t, _)) in self.trees[&k].iter().enumerate() {
            let g = Graph::from_tree(t);
            let tw = int(self.twist(k, i) as i64);
            let mut acc1 = BTreeMap::new();
            let mut acc2 = BTreeMap::new();
            for (p, &e) in g.word.iter().enumerate() {
                let sign = if p % 2 == 0 { tw.clone() } else { -tw.clone() };
                for (h, c) in self.contract(&g, e)? {
                    self.canonicalize(&h, &(&sign * c), &mut acc1)?;
                }
                if self.kind == Kind::Double {
                    let mut h = g.clone();
                    h.external[e] = true;
                    h.word.retain(|&x| x != e);
                    self.canonicalize(&h, &sign, &mut acc2)?;
                }
            }
            d1.push(self.column(k, acc1)?);
            d2.push(self.column(k, acc2)?);
        }
        Ok((d1, d2))
    }

    fn column(&self, k: i64, acc: BTreeMap<(i64, usize), Rational>) -> Result<SparseVec> {
        let mut v = SparseVec::new();
        for ((deg, i), c) in acc {
            if deg != k - 1 {
                return Err(Error::InvalidTerm(format!("differential left degree {k} for degree {deg}")));
            }
            add_entry(&mut v, i, c);
        }
        Ok(v)
    }

    fn complex_from(&self, mats: impl Fn(i64) -> Result<SparseMatrix>) -> Result<ChainComplex> {
        let mut degrees = Vec::new();
        for &k in &self.degrees {
            degrees.push(DegreeBlock { degree: k, basis: self.basis(k), d: mats(k)? });
        }
        Ok(ChainComplex { arity: self.arity, wheeled: self.kind == Kind::Wheeled, component: None, degrees })
    }

    pub fn build(&self) -> Result<ChainComplex> {
        self.complex_from(|k| Ok(SparseMatrix::from_columns(self.basis(k - 1).len(), &self.columns(k)?.0)))
    }

    /// Parses a combination of bubble terms and expresses it in this basis.
    pub fn element(&self, text: &str) -> Result<(i64, LinComb)> {
        let parsed = LinComb::parse(text)?;
        let mut acc = BTreeMap::new();
        for (key, c) in parsed.iter() {
            for (g, x) in self.graphs_from_term(&Term::parse(key)?)? {
                self.canonicalize(&g, &(c * x), &mut acc)?;
            }
        }
        let mut degree = None;
        let mut out = LinComb::new();
        for ((k, i), c) in acc {
            if c.is_zero() {
                continue;
            }
            if degree.is_some_and(|d| d != k) {
                return Err(Error::InvalidTerm("element is not homogeneous".into()));
            }
            degree = Some(k);
            out.add(self.trees[&k][i].0.clone(), c);
        }
        let degree = match degree {
            Some(d) => d,
            None => parsed
                .keys()
                .next()
                .map(|k| Term::parse(k).map(|t| self.written_degree(&t)))
                .transpose()?
                .unwrap_or(0),
        };
        Ok((degree, out))
    }

    fn written_degree(&self, t: &Term) -> i64 {
        fn count(t: &Term, bubbles: &mut i64, groups: &mut i64) {
            match t {
                Term::Bubble(x) => {
                    *bubbles += 1;
                    count(x, bubbles, groups)
                }
                Term::Group(x) => {
                    *groups += 1;
                    count(x, bubbles, groups)
                }
                Term::Dot(x) => count(x, bubbles, groups),
                Term::Node(_, cs) => cs.iter().for_each(|c| count(c, bubbles, groups)),
                _ => {}
            }
        }
        let (mut bubbles, mut groups) = (0, 0);
        count(t, &mut bubbles, &mut groups);
        bubbles - groups
    }

    fn graphs_from_term(&self, t: &Term) -> Result<Vec<(Graph, Rational)>> {
        let root = match (self.kind, t) {
            (Kind::Double, Term::Group(inner)) => &**inner,
            (Kind::Double, _) => return Err(Error::InvalidTerm(format!("{t}: double cobar terms are `<...>`"))),
            _ => t,
        };
        let mut ls = t.leaves();
        ls.sort_unstable();
        if ls != (1..=self.arity as u32).collect::<Vec<_>>() {
            return Err(Error::InvalidTerm(format!("{t} does not have leaves 1..{}", self.arity)));
        }
        let has_loop = cobar_loop(root);
        if has_loop && self.kind != Kind::Wheeled {
            return Err(Error::InvalidTerm(format!("{t} has a wheel")));
        }
        let mut g = Graph::default();
        if has_loop {
            g.lower.push(0);
            g.external.push(false);
            g.alive.push(true);
        }
        let mut decos: Vec<Vec<(usize, Rational)>> = Vec::new();
        let mut deco_shape: Vec<(usize, bool)> = Vec::new();
        g.nodes.push(None);
        decos.push(Vec::new());
        deco_shape.push((0, false));
        let mut queue = VecDeque::from([(root, 0usize, true)]);
        while let Some((term, id, is_root)) = queue.pop_front() {
            let (content, wheeled) = match term {
                Term::Bubble(c) => (&**c, false),
                Term::Dot(c) if is_root && self.kind == Kind::Wheeled => (&**c, true),
                _ => return Err(Error::InvalidTerm(format!("{term} is not a bubble here"))),
            };
            let mut inputs = Vec::new();
            let mut children = Vec::new();
            let gen_term = split_cells(content, wheeled, &mut inputs, &mut children)?;
            if !matches!(gen_term, Term::Node(..)) {
                return Err(Error::InvalidTerm(format!("empty bubble {term}")));
            }
            let mut slots = Vec::new();
            let mut child_iter = children.into_iter();
            for s in inputs {
                slots.push(match s {
                    SplitCell::Leaf(l) => Slot::Leaf(l),
                    SplitCell::Loop => Slot::Edge(0),
                    SplitCell::Child => {
                        let (sub, ext) = child_iter.next().unwrap();
                        let nid = g.nodes.len();
                        g.nodes.push(None);
                        decos.push(Vec::new());
                        deco_shape.push((0, false));
                        let e = g.lower.len();
                        g.lower.push(nid);
                        g.external.push(ext);
                        g.alive.push(true);
                        queue.push_back((sub, nid, false));
                        Slot::Edge(e)
                    }
                });
            }
            let arity = slots.len();
            decos[id] = self.op.reduce_term(&gen_term)?.into_iter().collect();
            deco_shape[id] = (arity, wheeled);
            g.nodes[id] = Some(GNode { deco: Deco { arity, wheeled, index: 0 }, inputs: slots });
        }
        g.word = (0..g.lower.len()).filter(|&e| !g.external[e]).collect();
        let factors: Vec<Vec<(usize, Rational)>> = decos.into_iter().map(|d| d.into_iter().collect()).collect();
        let mut out = Vec::new();
        for (choice, c) in product(factors) {
            let mut h = g.clone();
            for (v, idx) in choice.into_iter().enumerate() {
                let (arity, wheeled) = deco_shape[v];
                h.nodes[v].as_mut().unwrap().deco = Deco { arity, wheeled, index: idx };
            }
            out.push((h, c));
        }
        Ok(out)
    }
}

enum SplitCell {
    Leaf(u32),
    Loop,
    Child,
}

fn cobar_loop(t: &Term) -> bool {
    match t {
        Term::Wheel => true,
        Term::Bubble(x) | Term::Group(x) => cobar_loop(x),
        Term::Node(_, cs) => cs.iter().any(cobar_loop),
        _ => false,
    }
}

/// Replaces the cells of a bubble's content by leaves 1..k in planar order.
fn split_cells<'t>(
    content: &'t Term,
    wheeled: bool,
    inputs: &mut Vec<SplitCell>,
    children: &mut Vec<(&'t Term, bool)>,
) -> Result<Term> {
    let next = |inputs: &mut Vec<SplitCell>, c: SplitCell| {
        inputs.push(c);
        Term::Leaf(inputs.len() as u32)
    };
    Ok(match content {
        Term::Leaf(l) => next(inputs, SplitCell::Leaf(*l)),
        Term::Wheel if wheeled => Term::Wheel,
        Term::Wheel => next(inputs, SplitCell::Loop),
        Term::Bubble(_) => {
            children.push((content, false));
            next(inputs, SplitCell::Child)
        }
        Term::Group(inner) if matches!(**inner, Term::Bubble(_)) => {
            children.push((&**inner, true));
            next(inputs, SplitCell::Child)
        }
        Term::Node(d, cs) => {
            let mut out = Vec::new();
            for c in cs {
                out.push(split_cells(c, wheeled, inputs, children)?);
            }
            Term::Node(d.clone(), out)
        }
        other => return Err(Error::InvalidTerm(format!("unexpected {other} inside a bubble"))),
    })
}

fn decorations(op: &Operad, shape: &BubbleTree) -> Result<Vec<BubbleTree>> {
    let dim = op.dim(shape.cells.len(), shape.deco.wheeled)?;
    let mut factors: Vec<Vec<(Cell, Rational)>> = Vec::new();
    for c in &shape.cells {
        factors.push(match c {
            Cell::Child(sub, ext) => decorations(op, sub)?
                .into_iter()
                .map(|t| (Cell::Child(Box::new(t), *ext), Rational::one()))
                .collect(),
            other => vec![(other.clone(), Rational::one())],
        });
    }
    let mut out = Vec::new();
    for (cells, _) in product(factors) {
        for index in 0..dim {
            out.push(BubbleTree { deco: Deco { index, ..shape.deco }, cells: cells.clone() });
        }
    }
    Ok(out)
}

pub fn build_cobar(op: &Operad, n: usize, wheeled: bool, sgn_twist: bool) -> Result<ChainComplex> {
    CobarSpace::new(op, n, if wheeled { Kind::Wheeled } else { Kind::Plain }, sgn_twist)?.build()
}

pub struct DoubleCobar {
    pub total: ChainComplex,
    /// Per degree k: d1* and d2 as maps C_k -> C_{k-1}.
    pub d1: BTreeMap<i64, SparseMatrix>,
    pub d2: BTreeMap<i64, SparseMatrix>,
}

impl DoubleCobar {
    /// d1* d2 + d2 d1* vanishes in every degree.
    pub fn anticommutes(&self) -> bool {
        self.d1.keys().all(|&k| match (self.d1.get(&(k - 1)), self.d2.get(&(k - 1))) {
            (Some(a1), Some(a2)) => {
                let x = a1.mul(&self.d2[&k]).and_then(|m| m.plus(&a2.mul(&self.d1[&k])?));
                x.map(|m| m.is_zero()).unwrap_or(false)
            }
            _ => true,
        })
    }
}

pub fn build_double_cobar(op: &Operad, n: usize) -> Result<DoubleCobar> {
    if n > op.guards.max_double {
        return Err(Error::Guard { what: "double cobar", n, max: op.guards.max_double });
    }
    let space = CobarSpace::new(op, n, Kind::Double, false)?;
    let mut d1 = BTreeMap::new();
    let mut d2 = BTreeMap::new();
    for &k in &space.degrees {
        let rows = space.basis(k - 1).len();
        let (c1, c2) = space.columns(k)?;
        d1.insert(k, SparseMatrix::from_columns(rows, &c1));
        d2.insert(k, SparseMatrix::from_columns(rows, &c2));
    }
    let total = space.complex_from(|k| d1[&k].plus(&d2[&k]))?;
    Ok(DoubleCobar { total, d1, d2 })
}
