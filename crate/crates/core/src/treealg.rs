//! Decorated (wheeled) trees: parsing, canonical form, grafting, contraction.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Leaf(u32),
    /// The wheel-return pseudo-leaf `@`.
    Wheel,
    Node(String, Vec<Term>),
    /// Operadic cobar bubble `{..}`.
    Bubble(Box<Term>),
    /// Wheeled (output-less) cobar bubble `[..]`.
    Dot(Box<Term>),
    /// Outer bubble `<..>` of the double cobar complex.
    Group(Box<Term>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Generator {
    pub id: String,
    pub swap_sign: i8,
    /// Image of this generator under the transposition (12); `None` means itself.
    pub partner: Option<String>,
}

impl Generator {
    pub fn new(id: &str, swap_sign: i8) -> Self {
        Generator { id: id.to_string(), swap_sign, partner: None }
    }

    pub fn paired(id: &str, partner: &str, swap_sign: i8) -> Self {
        Generator { id: id.to_string(), swap_sign, partner: Some(partner.to_string()) }
    }

    pub fn arity(&self) -> usize {
        2
    }

    pub fn partner_id(&self) -> &str {
        self.partner.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Clone, Debug, Default)]
pub struct GeneratorSet {
    gens: Vec<Generator>,
    index: HashMap<String, usize>,
}

impl GeneratorSet {
    pub fn new(gens: Vec<Generator>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, g) in gens.iter().enumerate() {
            if g.swap_sign != 1 && g.swap_sign != -1 {
                return Err(Error::InvalidTerm(format!("swap sign of `{}` must be +1 or -1", g.id)));
            }
            if !valid_id(&g.id) {
                return Err(Error::InvalidTerm(format!("bad generator id `{}`", g.id)));
            }
            if index.insert(g.id.clone(), i).is_some() {
                return Err(Error::InvalidTerm(format!("duplicate generator `{}`", g.id)));
            }
        }
        for g in &gens {
            let p = g.partner_id();
            let Some(&j) = index.get(p) else { return Err(Error::UnknownGenerator(p.to_string())) };
            let back = &gens[j];
            if back.partner_id() != g.id || back.swap_sign != g.swap_sign {
                return Err(Error::InvalidTerm(format!("swap partners `{}`/`{}` disagree", g.id, p)));
            }
        }
        Ok(GeneratorSet { gens, index })
    }

    pub fn get(&self, id: &str) -> Option<&Generator> {
        self.index.get(id).map(|&i| &self.gens[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Generator> {
        self.gens.iter()
    }

    pub fn len(&self) -> usize {
        self.gens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gens.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.gens.iter().map(|g| g.id.clone()).collect()
    }

    /// Swap orbits of generators, in order of first appearance.
    pub fn types(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        for g in &self.gens {
            if !out.iter().any(|t| t.contains(&g.id)) {
                let mut t = vec![g.id.clone()];
                if g.partner_id() != g.id {
                    t.push(g.partner_id().to_string());
                }
                out.push(t);
            }
        }
        out
    }

    pub fn type_of(&self, id: &str) -> Option<usize> {
        self.types().iter().position(|t| t.iter().any(|x| x == id))
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "_'^*".contains(c))
        && !id.chars().next().unwrap().is_ascii_digit()
}

impl Term {
    pub fn node(dec: &str, children: Vec<Term>) -> Term {
        Term::Node(dec.to_string(), children)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Term::Leaf(_) | Term::Wheel)
    }

    /// Number of numbered leaves, counting through bubbles.
    pub fn arity(&self) -> usize {
        match self {
            Term::Leaf(_) => 1,
            Term::Wheel => 0,
            Term::Node(_, cs) => cs.iter().map(Term::arity).sum(),
            Term::Bubble(t) | Term::Dot(t) | Term::Group(t) => t.arity(),
        }
    }

    pub fn wheel_count(&self) -> usize {
        match self {
            Term::Leaf(_) => 0,
            Term::Wheel => 1,
            Term::Node(_, cs) => cs.iter().map(Term::wheel_count).sum(),
            Term::Bubble(t) | Term::Dot(t) | Term::Group(t) => t.wheel_count(),
        }
    }

    pub fn is_wheeled(&self) -> bool {
        self.wheel_count() > 0
    }

    pub fn leaves(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<u32>) {
        match self {
            Term::Leaf(l) => out.push(*l),
            Term::Wheel => {}
            Term::Node(_, cs) => cs.iter().for_each(|c| c.collect_leaves(out)),
            Term::Bubble(t) | Term::Dot(t) | Term::Group(t) => t.collect_leaves(out),
        }
    }

    pub fn min_leaf(&self) -> u32 {
        self.leaves().into_iter().min().unwrap_or(u32::MAX)
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            Term::Leaf(_) | Term::Wheel => 0,
            Term::Node(_, cs) => 1 + cs.iter().map(Term::vertex_count).sum::<usize>(),
            Term::Bubble(t) | Term::Dot(t) | Term::Group(t) => t.vertex_count(),
        }
    }

    /// Replaces every numbered leaf `l` by `f(l)`.
    pub fn substitute(&self, f: &mut dyn FnMut(u32) -> Term) -> Term {
        match self {
            Term::Leaf(l) => f(*l),
            Term::Wheel => Term::Wheel,
            Term::Node(d, cs) => Term::Node(d.clone(), cs.iter().map(|c| c.substitute(f)).collect()),
            Term::Bubble(t) => Term::Bubble(Box::new(t.substitute(f))),
            Term::Dot(t) => Term::Dot(Box::new(t.substitute(f))),
            Term::Group(t) => Term::Group(Box::new(t.substitute(f))),
        }
    }

    pub fn relabel(&self, f: &dyn Fn(u32) -> u32) -> Term {
        self.substitute(&mut |l| Term::Leaf(f(l)))
    }

    pub fn replace_wheel(&self, with: &Term) -> Term {
        match self {
            Term::Wheel => with.clone(),
            Term::Leaf(_) => self.clone(),
            Term::Node(d, cs) => Term::Node(d.clone(), cs.iter().map(|c| c.replace_wheel(with)).collect()),
            Term::Bubble(t) => Term::Bubble(Box::new(t.replace_wheel(with))),
            Term::Dot(t) => Term::Dot(Box::new(t.replace_wheel(with))),
            Term::Group(t) => Term::Group(Box::new(t.replace_wheel(with))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn walk(t: &Term, top: bool) -> Result<()> {
            match t {
                Term::Leaf(0) => Err(Error::InvalidTerm("leaf label 0".into())),
                Term::Leaf(_) | Term::Wheel => Ok(()),
                Term::Node(d, cs) => {
                    if cs.len() < 2 {
                        return Err(Error::InvalidTerm(format!("vertex `{d}` has fewer than two children")));
                    }
                    cs.iter().try_for_each(|c| walk(c, false))
                }
                Term::Bubble(t) | Term::Group(t) => walk(t, false),
                Term::Dot(t) if top => walk(t, false),
                Term::Dot(_) => Err(Error::InvalidTerm("a wheeled bubble has no output".into())),
            }
        }
        walk(self, true)?;
        let mut ls = self.leaves();
        ls.sort_unstable();
        if ls.iter().enumerate().any(|(i, &l)| l as usize != i + 1) {
            return Err(Error::InvalidTerm(format!("leaf labels of {self} are not 1..{}", ls.len())));
        }
        Ok(())
    }

    pub fn parse(s: &str) -> Result<Term> {
        let mut p = Parser { s: s.as_bytes(), pos: 0 };
        p.skip_ws();
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("trailing input"));
        }
        Ok(t)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Leaf(l) => write!(f, "{l}"),
            Term::Wheel => write!(f, "@"),
            Term::Node(d, cs) => {
                write!(f, "({d}")?;
                for c in cs {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
            Term::Bubble(t) => write!(f, "{{{t}}}"),
            Term::Dot(t) => write!(f, "[{t}]"),
            Term::Group(t) => write!(f, "<{t}>"),
        }
    }
}

pub fn canonical_string(t: &Term) -> Result<String> {
    t.validate()?;
    if t.wheel_count() > 1 {
        return Err(Error::InvalidTerm(format!("{t} has more than one wheel")));
    }
    Ok(t.to_string())
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn term(&mut self) -> Result<Term> {
        match self.peek() {
            Some(b'@') => {
                self.pos += 1;
                Ok(Term::Wheel)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                let l: u32 = text.parse().map_err(|_| Error::Parse { pos: start, msg: "bad label".into() })?;
                if l == 0 {
                    return Err(Error::Parse { pos: start, msg: "leaf labels start at 1".into() });
                }
                Ok(Term::Leaf(l))
            }
            Some(open @ (b'{' | b'[' | b'<')) => {
                self.pos += 1;
                self.skip_ws();
                let inner = Box::new(self.term()?);
                self.skip_ws();
                match open {
                    b'{' => self.expect(b'}').map(|_| Term::Bubble(inner)),
                    b'[' => self.expect(b']').map(|_| Term::Dot(inner)),
                    _ => self.expect(b'>').map(|_| Term::Group(inner)),
                }
            }
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                let start = self.pos;
                while self.peek().is_some_and(|c| !c.is_ascii_whitespace() && !b"(){}[]<>".contains(&c)) {
                    self.pos += 1;
                }
                let dec = std::str::from_utf8(&self.s[start..self.pos]).unwrap().to_string();
                if !valid_id(&dec) {
                    return Err(Error::Parse { pos: start, msg: format!("bad decoration `{dec}`") });
                }
                let mut children = Vec::new();
                loop {
                    self.skip_ws();
                    if self.peek() == Some(b')') {
                        self.pos += 1;
                        break;
                    }
                    if self.peek().is_none() {
                        return Err(self.err("unclosed `(`"));
                    }
                    children.push(self.term()?);
                }
                if children.len() < 2 {
                    return Err(self.err("a vertex needs at least two children"));
                }
                Ok(Term::Node(dec, children))
            }
            _ => Err(self.err("expected a term")),
        }
    }
}

/// Order of siblings in canonical form: numbered leaves by label, then `@`,
/// then subtrees by their string.
fn sibling_cmp(a: &(Term, String), b: &(Term, String)) -> Ordering {
    fn rank(t: &Term) -> u8 {
        match t {
            Term::Leaf(_) => 0,
            Term::Wheel => 1,
            _ => 2,
        }
    }
    match (&a.0, &b.0) {
        (Term::Leaf(x), Term::Leaf(y)) => x.cmp(y),
        _ => rank(&a.0).cmp(&rank(&b.0)).then_with(|| a.1.cmp(&b.1)),
    }
}

/// Sorts the children of every generator vertex, accumulating swap signs.
pub fn canonicalize(t: &Term, gens: &GeneratorSet) -> Result<(i32, Term)> {
    match t {
        Term::Leaf(_) | Term::Wheel => Ok((1, t.clone())),
        Term::Node(d, cs) => {
            let g = gens.get(d).ok_or_else(|| Error::UnknownGenerator(d.clone()))?;
            if cs.len() != 2 {
                return Err(Error::InvalidTerm(format!("generator `{d}` is binary")));
            }
            let (s0, c0) = canonicalize(&cs[0], gens)?;
            let (s1, c1) = canonicalize(&cs[1], gens)?;
            let a = (c0.clone(), c0.to_string());
            let b = (c1.clone(), c1.to_string());
            let mut sign = s0 * s1;
            if sibling_cmp(&a, &b) == Ordering::Greater {
                sign *= g.swap_sign as i32;
                Ok((sign, Term::Node(g.partner_id().to_string(), vec![c1, c0])))
            } else {
                Ok((sign, Term::Node(d.clone(), vec![c0, c1])))
            }
        }
        _ => Err(Error::InvalidTerm(format!("{t} is not a generator tree"))),
    }
}

/// `parent ∘_i child`: child's leaves occupy positions i..i+m-1.
pub fn graft(parent: &Term, i: usize, child: &Term) -> Result<Term> {
    let n = parent.arity();
    let m = child.arity();
    if i == 0 || i > n {
        return Err(Error::Slot { slot: i, arity: n });
    }
    if child.is_wheeled() {
        return Err(Error::InvalidTerm("cannot graft a wheeled term".into()));
    }
    let i = i as u32;
    let shifted = child.relabel(&|l| l + i - 1);
    Ok(parent.substitute(&mut |l| match l.cmp(&i) {
        Ordering::Less => Term::Leaf(l),
        Ordering::Equal => shifted.clone(),
        Ordering::Greater => Term::Leaf(l + m as u32 - 1),
    }))
}

/// `ξ_i`: leaf i becomes the wheel return.
pub fn contract_wheel(t: &Term, i: usize) -> Result<Term> {
    let n = t.arity();
    if t.is_wheeled() {
        return Err(Error::InvalidTerm(format!("{t} is already wheeled")));
    }
    if i == 0 || i > n {
        return Err(Error::Slot { slot: i, arity: n });
    }
    let i = i as u32;
    Ok(t.substitute(&mut |l| match l.cmp(&i) {
        Ordering::Less => Term::Leaf(l),
        Ordering::Equal => Term::Wheel,
        Ordering::Greater => Term::Leaf(l - 1),
    }))
}

pub fn perm_sign(p: &[u32]) -> i32 {
    let mut sign = 1;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// `sigma[j-1]` is the new label of leaf j.
pub fn apply_leaf_permutation(t: &Term, sigma: &[u32], gens: &GeneratorSet, sgn_twist: bool) -> Result<(i32, Term)> {
    let n = t.arity();
    if sigma.len() != n {
        return Err(Error::Dimension { expected: n, got: sigma.len() });
    }
    let mut seen = vec![false; n];
    for &s in sigma {
        if s == 0 || s as usize > n || std::mem::replace(&mut seen[s as usize - 1], true) {
            return Err(Error::InvalidTerm(format!("{sigma:?} is not a permutation")));
        }
    }
    let (sign, c) = canonicalize(&t.relabel(&|l| sigma[l as usize - 1]), gens)?;
    let twist = if sgn_twist { perm_sign(sigma) } else { 1 };
    Ok((sign * twist, c))
}

pub fn permutations(n: usize) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n as u32);
            out.push(q);
        }
    }
    out.sort();
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Item {
    Label(u32),
    Wheel,
}

impl Item {
    pub fn term(self) -> Term {
        match self {
            Item::Label(l) => Term::Leaf(l),
            Item::Wheel => Term::Wheel,
        }
    }
}

/// Splits of `items` into two nonempty blocks, the first containing `items[0]`.
pub fn two_block_splits<T: Copy>(items: &[T]) -> Vec<(Vec<T>, Vec<T>)> {
    let rest = &items[1..];
    let mut out = Vec::new();
    for mask in 0..(1u64 << rest.len()) {
        if mask == (1u64 << rest.len()) - 1 {
            continue;
        }
        let mut a = vec![items[0]];
        let mut b = Vec::new();
        for (k, &x) in rest.iter().enumerate() {
            if mask >> k & 1 == 1 {
                a.push(x);
            } else {
                b.push(x);
            }
        }
        out.push((a, b));
    }
    out
}

/// All unordered set partitions of `items`, blocks in order of their first element.
pub fn set_partitions<T: Copy>(items: &[T]) -> Vec<Vec<Vec<T>>> {
    let Some((&first, rest)) = items.split_first() else { return vec![vec![]] };
    let mut out = Vec::new();
    for p in set_partitions(rest) {
        let mut q = p.clone();
        q.insert(0, vec![first]);
        out.push(q);
        for k in 0..p.len() {
            let mut q = p.clone();
            let mut b = q.remove(k);
            b.insert(0, first);
            q.insert(0, b);
            out.push(q);
        }
    }
    out
}

pub struct ShapeEnumerator<'a> {
    gens: &'a GeneratorSet,
    memo: HashMap<Vec<Item>, Vec<Term>>,
}

impl<'a> ShapeEnumerator<'a> {
    pub fn new(gens: &'a GeneratorSet) -> Self {
        ShapeEnumerator { gens, memo: HashMap::new() }
    }

    /// Canonical generator trees whose leaves are exactly `items`, sorted by string.
    pub fn trees(&mut self, items: &[Item]) -> Vec<Term> {
        let mut key = items.to_vec();
        key.sort();
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let out = if key.len() == 1 {
            vec![key[0].term()]
        } else {
            let mut found = BTreeMap::new();
            for (a, b) in two_block_splits(&key) {
                let ta = self.trees(&a);
                let tb = self.trees(&b);
                for x in &ta {
                    for y in &tb {
                        for g in self.gens.iter() {
                            let raw = Term::Node(g.id.clone(), vec![x.clone(), y.clone()]);
                            let (_, c) = canonicalize(&raw, self.gens).expect("generator trees");
                            found.insert(c.to_string(), c);
                        }
                    }
                }
            }
            found.into_values().collect()
        };
        self.memo.insert(key, out.clone());
        out
    }
}

pub fn arity_items(n: usize, wheeled: bool) -> Vec<Item> {
    let mut items: Vec<Item> = (1..=n as u32).map(Item::Label).collect();
    if wheeled {
        items.push(Item::Wheel);
    }
    items
}

/// Spanning set of Free(E)(n), or of the wheeled part Free_w(E)(n).
pub fn enumerate_shapes(n: usize, wheeled: bool, gens: &GeneratorSet) -> Vec<Term> {
    let items = arity_items(n, wheeled);
    if items.len() < 2 || gens.is_empty() {
        return Vec::new();
    }
    ShapeEnumerator::new(gens).trees(&items)
}

/// Moves the root of a wheeled tree one step along the wheel. Leaf labels
/// are kept; returns `None` for a one-vertex wheel.
pub fn rotate_wheel(t: &Term) -> Option<Term> {
    let Term::Node(d, cs) = t else { return None };
    let k = cs.iter().position(Term::is_wheeled)?;
    if cs[k] == Term::Wheel {
        return None;
    }
    let mut top = cs.clone();
    let below = std::mem::replace(&mut top[k], Term::Wheel);
    Some(below.replace_wheel(&Term::Node(d.clone(), top)))
}
