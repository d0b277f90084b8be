//! Quadratic presentations Q(E, R), the built-in examples and quadratic duals.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lincomb::LinComb;
use crate::qlinalg::{echelon_of, int, sparse_kernel_basis, Rational, SparseMatrix, SparseVec};
use crate::treealg::{apply_leaf_permutation, canonicalize, enumerate_shapes, perm_sign, permutations, Generator, GeneratorSet, Term};

#[derive(Clone, Debug)]
pub struct Presentation {
    pub name: String,
    pub generators: GeneratorSet,
    pub relations3: Vec<LinComb>,
    pub wheeled_relations1: Vec<LinComb>,
}

/// Rewrites every key of `l` into canonical form.
pub fn canonical_lincomb(l: &LinComb, gens: &GeneratorSet) -> Result<LinComb> {
    let mut out = LinComb::new();
    for (k, v) in l.iter() {
        let (s, t) = canonicalize(&Term::parse(k)?, gens)?;
        out.add(t.to_string(), v * int(s as i64));
    }
    Ok(out)
}

/// Coordinates of `l` in the basis `keys` (sorted).
pub fn coordinates(l: &LinComb, keys: &[String]) -> Result<SparseVec> {
    let mut v = SparseVec::new();
    for (k, x) in l.iter() {
        let i = keys.binary_search(k).map_err(|_| Error::UnknownKey(k.clone()))?;
        v.insert(i, x.clone());
    }
    Ok(v)
}

pub fn from_coordinates(v: &SparseVec, keys: &[String]) -> LinComb {
    v.iter().map(|(&i, x)| (keys[i].clone(), x.clone())).collect()
}

/// Reduced echelon basis of the span of `ls` inside the space with basis `keys`.
pub fn span_basis(ls: &[LinComb], keys: &[String]) -> Result<Vec<LinComb>> {
    let vs = ls.iter().map(|l| coordinates(l, keys)).collect::<Result<Vec<_>>>()?;
    Ok(echelon_of(&vs).sorted_rows().iter().map(|r| from_coordinates(r, keys)).collect())
}

pub fn span_dim(ls: &[LinComb], keys: &[String]) -> Result<usize> {
    let vs = ls.iter().map(|l| coordinates(l, keys)).collect::<Result<Vec<_>>>()?;
    Ok(echelon_of(&vs).rank())
}

fn shape_keys(n: usize, wheeled: bool, gens: &GeneratorSet) -> Vec<String> {
    enumerate_shapes(n, wheeled, gens).iter().map(Term::to_string).collect()
}

fn act(l: &LinComb, sigma: &[u32], gens: &GeneratorSet) -> Result<LinComb> {
    let mut out = LinComb::new();
    for (k, v) in l.iter() {
        let (s, t) = apply_leaf_permutation(&Term::parse(k)?, sigma, gens, false)?;
        out.add(t.to_string(), v * int(s as i64));
    }
    Ok(out)
}

fn s3_orbit(ls: &[LinComb], gens: &GeneratorSet) -> Result<Vec<LinComb>> {
    let mut out = Vec::new();
    for l in ls {
        for sigma in permutations(3) {
            out.push(act(l, &sigma, gens)?);
        }
    }
    Ok(out)
}

impl Presentation {
    pub fn new(name: &str, generators: GeneratorSet, relations3: &[LinComb], wheeled_relations1: &[LinComb]) -> Result<Self> {
        let keys3 = shape_keys(3, false, &generators);
        let keys1 = shape_keys(1, true, &generators);
        let canon = |ls: &[LinComb], n: usize, wheeled: bool| -> Result<Vec<LinComb>> {
            ls.iter()
                .map(|l| {
                    for k in l.keys() {
                        let t = Term::parse(k)?;
                        t.validate()?;
                        if t.arity() != n || t.wheel_count() != wheeled as usize {
                            return Err(Error::InvalidTerm(format!(
                                "relation term {k} must have arity {n}{}",
                                if wheeled { " and one wheel" } else { " and no wheel" }
                            )));
                        }
                    }
                    canonical_lincomb(l, &generators)
                })
                .collect()
        };
        let r3 = canon(relations3, 3, false)?;
        let r1 = canon(wheeled_relations1, 1, true)?;
        let basis3 = span_basis(&r3, &keys3)?;
        let orbit = s3_orbit(&basis3, &generators)?;
        if span_dim(&orbit, &keys3)? != basis3.len() {
            return Err(Error::NotStable(name.to_string()));
        }
        let basis1 = span_basis(&r1, &keys1)?;
        Ok(Presentation { name: name.to_string(), generators, relations3: basis3, wheeled_relations1: basis1 })
    }

    pub fn free_dim3(&self) -> usize {
        shape_keys(3, false, &self.generators).len()
    }

    /// Parses the config format:
    ///
    /// ```text
    /// name = poiss
    /// [generators]
    /// c +1
    /// l -1
    /// [relations3]
    /// 1*(c (c 1 2) 3) - 1*(c 1 (c 2 3))
    /// [wheeled_relations1]
    /// ```
    ///
    /// A generator line may name a swap partner as a third field.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut name = "custom".to_string();
        let mut section = "";
        let mut gens = Vec::new();
        let mut r3 = Vec::new();
        let mut r1 = Vec::new();
        let mut offset = 0usize;
        for line in text.split_inclusive('\n') {
            let here = offset;
            offset += line.len();
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = match &line[1..line.len() - 1] {
                    "generators" => "g",
                    "relations3" => "r3",
                    "wheeled_relations1" => "r1",
                    other => return Err(Error::Parse { pos: here, msg: format!("unknown section `{other}`") }),
                };
                continue;
            }
            let lift = |e: Error| match e {
                Error::Parse { pos, msg } => Error::Parse { pos: pos + here, msg },
                e => e,
            };
            match section {
                "" => match line.split_once('=') {
                    Some(("name", v)) | Some(("name ", v)) => name = v.trim().to_string(),
                    _ => return Err(Error::Parse { pos: here, msg: "expected `name = ...` or a section".into() }),
                },
                "g" => {
                    let f: Vec<&str> = line.split_whitespace().collect();
                    let sign = match f.get(1).copied() {
                        Some("+1" | "1" | "+") => 1,
                        Some("-1" | "-") => -1,
                        _ => return Err(Error::Parse { pos: here, msg: "generator line is `id +1|-1 [partner]`".into() }),
                    };
                    gens.push(match f.get(2) {
                        Some(p) => Generator::paired(f[0], p, sign),
                        None => Generator::new(f[0], sign),
                    });
                }
                "r3" => r3.push(LinComb::parse(line).map_err(lift)?),
                _ => r1.push(LinComb::parse(line).map_err(lift)?),
            }
        }
        Presentation::new(&name, GeneratorSet::new(gens)?, &r3, &r1)
    }

    pub fn to_config(&self) -> String {
        let mut s = format!("name = {}\n[generators]\n", self.name);
        for g in self.generators.iter() {
            let sign = if g.swap_sign > 0 { "+1" } else { "-1" };
            match &g.partner {
                Some(p) => writeln!(s, "{} {} {}", g.id, sign, p).unwrap(),
                None => writeln!(s, "{} {}", g.id, sign).unwrap(),
            }
        }
        s.push_str("[relations3]\n");
        for r in &self.relations3 {
            writeln!(s, "{r}").unwrap();
        }
        s.push_str("[wheeled_relations1]\n");
        for r in &self.wheeled_relations1 {
            writeln!(s, "{r}").unwrap();
        }
        s
    }
}

pub fn builtin(name: &str) -> Result<Presentation> {
    let (gens, rels): (Vec<Generator>, Vec<&str>) = match name {
        "com" => (vec![Generator::new("c", 1)], vec!["(c (c 1 2) 3) - (c 1 (c 2 3))"]),
        "lie" => (vec![Generator::new("l", -1)], vec!["(l 1 (l 2 3)) + (l 2 (l 3 1)) + (l 3 (l 1 2))"]),
        "ass" => (
            vec![Generator::paired("a", "b", 1), Generator::paired("b", "a", 1)],
            vec!["(a (a 1 2) 3) - (a 1 (a 2 3))"],
        ),
        "poiss" => (
            vec![Generator::new("c", 1), Generator::new("l", -1)],
            vec![
                "(c (c 1 2) 3) - (c 1 (c 2 3))",
                "(l 1 (l 2 3)) + (l 2 (l 3 1)) + (l 3 (l 1 2))",
                "(l 1 (c 2 3)) - (c 2 (l 1 3)) - (c (l 1 2) 3)",
            ],
        ),
        _ => return Err(Error::UnknownOperad(name.to_string())),
    };
    let gens = GeneratorSet::new(gens)?;
    let rels = rels.iter().map(|r| LinComb::parse(r)).collect::<Result<Vec<_>>>()?;
    let orbit = s3_orbit(&rels.iter().map(|r| canonical_lincomb(r, &gens)).collect::<Result<Vec<_>>>()?, &gens)?;
    Presentation::new(name, gens, &orbit, &[])
}

pub const BUILTINS: [&str; 4] = ["ass", "com", "lie", "poiss"];

pub fn dual_id(id: &str) -> String {
    match id.strip_suffix('\'') {
        Some(base) => base.to_string(),
        None => format!("{id}'"),
    }
}

fn dual_generators(gens: &GeneratorSet) -> Result<GeneratorSet> {
    GeneratorSet::new(
        gens.iter()
            .map(|g| Generator {
                id: dual_id(&g.id),
                swap_sign: -g.swap_sign,
                partner: g.partner.as_deref().map(dual_id),
            })
            .collect(),
    )
}

fn strip_decorations(t: &Term, map: &dyn Fn(&str) -> String) -> Term {
    match t {
        Term::Node(d, cs) => Term::Node(map(d), cs.iter().map(|c| strip_decorations(c, map)).collect()),
        _ => t.clone(),
    }
}

/// Pairing of a canonical tree over E^∨ with one over E of the same layout.
pub fn pairing(dual_term: &Term, term: &Term) -> i32 {
    if strip_decorations(dual_term, &dual_id) != *term {
        return 0;
    }
    let Term::Node(_, cs) = term else { return 0 };
    if term.is_wheeled() {
        return if cs[1] == Term::Wheel { 1 } else if cs[0] == Term::Wheel { -1 } else { 0 };
    }
    let shape = if matches!(cs[0], Term::Node(..)) { 1 } else { -1 };
    shape * perm_sign(&term.leaves())
}

fn annihilator(rels: &[LinComb], dual_keys: &[String]) -> Result<Vec<LinComb>> {
    let dual_terms = dual_keys.iter().map(|k| Term::parse(k)).collect::<Result<Vec<_>>>()?;
    let mut m = SparseMatrix::zeros(rels.len(), dual_keys.len());
    for (r, rel) in rels.iter().enumerate() {
        for (k, x) in rel.iter() {
            let t = Term::parse(k)?;
            for (i, s) in dual_terms.iter().enumerate() {
                let p = pairing(s, &t);
                if p != 0 {
                    m.add(r, i, &(x * int(p as i64)));
                }
            }
        }
    }
    let ker = sparse_kernel_basis(&m);
    let rows: Vec<SparseVec> = echelon_of(&ker).sorted_rows();
    Ok(rows.iter().map(|v| from_coordinates(v, dual_keys)).collect())
}

fn dual_name(name: &str) -> String {
    match name.strip_suffix('!') {
        Some(base) => base.to_string(),
        None => format!("{name}!"),
    }
}

/// `P^! = Q(E^∨, Ann(R))`; the wheeled block of the result is empty.
pub fn quadratic_dual(p: &Presentation) -> Result<Presentation> {
    let gens = dual_generators(&p.generators)?;
    let ann = annihilator(&p.relations3, &shape_keys(3, false, &gens))?;
    Presentation::new(&dual_name(&p.name), gens, &ann, &[])
}

/// Wheeled quadratic dual: the wheeled block is the annihilator of `R_w`.
pub fn wheeled_dual(p: &Presentation) -> Result<Presentation> {
    let gens = dual_generators(&p.generators)?;
    let ann3 = annihilator(&p.relations3, &shape_keys(3, false, &gens))?;
    let ann1 = annihilator(&p.wheeled_relations1, &shape_keys(1, true, &gens))?;
    Presentation::new(&dual_name(&p.name), gens, &ann3, &ann1)
}

/// Generator map `id -> (sign, image id)`.
pub type Identification = HashMap<String, (i32, String)>;

pub fn map_lincomb(l: &LinComb, phi: &Identification, target: &GeneratorSet) -> Result<LinComb> {
    fn map_term(t: &Term, phi: &Identification, sign: &mut i32) -> Result<Term> {
        match t {
            Term::Node(d, cs) => {
                let (s, img) = phi.get(d).ok_or_else(|| Error::UnknownGenerator(d.clone()))?;
                *sign *= s;
                Ok(Term::Node(img.clone(), cs.iter().map(|c| map_term(c, phi, sign)).collect::<Result<_>>()?))
            }
            _ => Ok(t.clone()),
        }
    }
    let mut out = LinComb::new();
    for (k, x) in l.iter() {
        let mut sign = 1;
        let t = map_term(&Term::parse(k)?, phi, &mut sign)?;
        let (s, c) = canonicalize(&t, target)?;
        out.add(c.to_string(), x * int((sign * s) as i64));
    }
    Ok(out)
}

fn same_span(a: &[LinComb], b: &[LinComb], keys: &[String]) -> Result<bool> {
    let da = span_dim(a, keys)?;
    let db = span_dim(b, keys)?;
    let both: Vec<LinComb> = a.iter().chain(b).cloned().collect();
    Ok(da == db && span_dim(&both, keys)? == da)
}

/// Searches for a signed bijection of generators that intertwines the swap
/// actions and carries the relation spans of `p` onto those of `q`.
pub fn find_identification(p: &Presentation, q: &Presentation, wheeled: bool) -> Result<Option<Identification>> {
    let pg: Vec<&Generator> = p.generators.iter().collect();
    let qg: Vec<&Generator> = q.generators.iter().collect();
    if pg.len() != qg.len() || pg.len() > 6 {
        return Ok(None);
    }
    let n = pg.len();
    let keys3 = shape_keys(3, false, &q.generators);
    let keys1 = shape_keys(1, true, &q.generators);
    for perm in permutations(n) {
        for signs in 0..(1u32 << n) {
            let phi: Identification = (0..n)
                .map(|i| {
                    let s = if signs >> i & 1 == 1 { -1 } else { 1 };
                    (pg[i].id.clone(), (s, qg[perm[i] as usize - 1].id.clone()))
                })
                .collect();
            let equivariant = pg.iter().all(|g| {
                let swapped = LinComb::single(format!("({} 2 1)", g.id), Rational::one());
                let lhs = canonical_lincomb(&swapped, &p.generators).and_then(|l| map_lincomb(&l, &phi, &q.generators));
                let rhs = map_lincomb(&swapped, &phi, &q.generators);
                matches!((lhs, rhs), (Ok(a), Ok(b)) if a == b)
            });
            if !equivariant {
                continue;
            }
            let mapped3 = p.relations3.iter().map(|r| map_lincomb(r, &phi, &q.generators)).collect::<Result<Vec<_>>>()?;
            if !same_span(&mapped3, &q.relations3, &keys3)? {
                continue;
            }
            if wheeled {
                let mapped1 =
                    p.wheeled_relations1.iter().map(|r| map_lincomb(r, &phi, &q.generators)).collect::<Result<Vec<_>>>()?;
                if !same_span(&mapped1, &q.wheeled_relations1, &keys1)? {
                    continue;
                }
            }
            return Ok(Some(phi));
        }
    }
    Ok(None)
}

pub fn is_zero_lincomb(l: &LinComb) -> bool {
    l.iter().all(|(_, x)| x.is_zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_relation_dims() {
        assert_eq!(builtin("com").unwrap().relations3.len(), 2);
        assert_eq!(builtin("lie").unwrap().relations3.len(), 1);
        assert_eq!(builtin("ass").unwrap().relations3.len(), 6);
        let p = builtin("poiss").unwrap();
        assert_eq!(p.relations3.len(), 6);
        let mixed = p.relations3.iter().filter(|r| r.keys().any(|k| k.contains('c') && k.contains('l'))).count();
        assert_eq!(mixed, 3);
        assert!(builtin("foo").is_err());
    }

    #[test]
    fn com_dual_is_lie() {
        let d = quadratic_dual(&builtin("com").unwrap()).unwrap();
        assert_eq!(d.generators.get("c'").unwrap().swap_sign, -1);
        assert!(find_identification(&d, &builtin("lie").unwrap(), false).unwrap().is_some());
        assert!(find_identification(&d, &builtin("com").unwrap(), false).unwrap().is_none());
    }

    #[test]
    fn ass_dual() {
        let a = builtin("ass").unwrap();
        assert_eq!(a.free_dim3(), 12);
        let d = quadratic_dual(&a).unwrap();
        assert_eq!(d.relations3.len(), 6);
        let phi = find_identification(&d, &a, false).unwrap().unwrap();
        assert_eq!(phi["a'"].0 * phi["b'"].0, -1);
    }

    #[test]
    fn wheeled_duals() {
        let c = wheeled_dual(&builtin("com").unwrap()).unwrap();
        assert_eq!(c.wheeled_relations1.len(), 1);
        let p = wheeled_dual(&builtin("poiss").unwrap()).unwrap();
        let keys: Vec<String> = p.wheeled_relations1.iter().flat_map(|r| r.keys().cloned()).collect();
        assert_eq!(keys, vec!["(c' 1 @)", "(l' 1 @)"]);
        let back = wheeled_dual(&p).unwrap();
        assert!(back.wheeled_relations1.is_empty());
    }

    #[test]
    fn config_round_trip() {
        let p = builtin("poiss").unwrap();
        let q = Presentation::from_config(&p.to_config()).unwrap();
        assert_eq!(q.relations3, p.relations3);
        assert_eq!(q.name, "poiss");
        let bad = "[generators]\nc +1\n[relations3]\n(c (c 1 2) 3) - (c 1 (c 2 3))\n";
        assert!(matches!(Presentation::from_config(bad), Err(Error::NotStable(_))));
        assert!(Presentation::from_config("[generators]\nc 7\n").is_err());
    }
}
