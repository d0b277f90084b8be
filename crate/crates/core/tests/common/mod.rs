#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use num_traits::Zero;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use operad_forge::cobar::{build_cobar, check_d_squared, ChainComplex};
use operad_forge::expansion::{Deco, Operad};
use operad_forge::homology::homology_dims;
use operad_forge::lincomb::LinComb;
use operad_forge::presentations::{builtin, quadratic_dual, wheeled_dual, Presentation, BUILTINS};
use operad_forge::qlinalg::{add_entry, axpy, Rational, SparseVec};
use operad_forge::treealg::{apply_leaf_permutation, canonicalize, contract_wheel, graft, rotate_wheel, Term};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn op(name: &str) -> &'static Operad {
    static OPS: OnceLock<Vec<(&'static str, Operad)>> = OnceLock::new();
    let ops = OPS.get_or_init(|| BUILTINS.iter().map(|&n| (n, Operad::new(builtin(n).unwrap()))).collect());
    &ops.iter().find(|(n, _)| *n == name).expect("builtin").1
}

/// Random binary tree over the operad's generators with leaves 1..n in
/// shuffled order; with `wheel`, one leaf becomes the wheel.
pub fn random_term(p: &Presentation, n: usize, wheel: bool, choices: &[u16]) -> Term {
    let ids = p.generators.ids();
    let mut it = choices.iter().copied().cycle();
    fn shape(n: usize, ids: &[String], it: &mut impl Iterator<Item = u16>) -> Term {
        if n == 1 {
            return Term::Leaf(0);
        }
        let k = 1 + it.next().unwrap() as usize % (n - 1);
        let g = ids[it.next().unwrap() as usize % ids.len()].clone();
        Term::Node(g, vec![shape(k, ids, it), shape(n - k, ids, it)])
    }
    let t = shape(n, &ids, &mut it);
    let mut labels: Vec<u32> = (1..=n as u32).collect();
    for i in (1..n).rev() {
        labels.swap(i, it.next().unwrap() as usize % (i + 1));
    }
    let wheel_at = if wheel { Some(it.next().unwrap() as u32 % n as u32 + 1) } else { None };
    let mut next = 0;
    t.substitute(&mut |_| {
        let l = labels[next];
        next += 1;
        match wheel_at {
            Some(w) if l == w => Term::Wheel,
            Some(w) if l > w => Term::Leaf(l - 1),
            _ => Term::Leaf(l),
        }
    })
}

pub fn random_perm(n: usize, choices: &[u16]) -> Vec<u32> {
    let mut p: Vec<u32> = (1..=n as u32).collect();
    for i in (1..n).rev() {
        p.swap(i, choices[i % choices.len()] as usize % (i + 1));
    }
    p
}

/// `(tau ∘ sigma)[j-1] = tau[sigma[j-1]-1]`.
pub fn compose_perms(tau: &[u32], sigma: &[u32]) -> Vec<u32> {
    sigma.iter().map(|&s| tau[s as usize - 1]).collect()
}

pub fn op_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(BUILTINS.to_vec())
}

pub fn choices() -> impl Strategy<Value = Vec<u16>> {
    prop::collection::vec(any::<u16>(), 24)
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn ok<T>(r: operad_forge::Result<T>) -> Result<T, TestCaseError> {
    r.map_err(|e| TestCaseError::fail(e.to_string()))
}

pub fn prop_canonical_idempotent(name: &str, n: usize, wheel: bool, ch: &[u16]) -> Result<(), TestCaseError> {
    let p = &op(name).presentation;
    let t = random_term(p, n, wheel, ch);
    let (s, c) = ok(canonicalize(&t, &p.generators))?;
    let (s2, c2) = ok(canonicalize(&c, &p.generators))?;
    check(s2 == 1 && c2 == c, || format!("{t}: {c} re-canonicalizes to {s2}*{c2}"))?;
    check(s == 1 || s == -1, || format!("{t}: sign {s}"))?;
    let parsed = ok(Term::parse(&c.to_string()))?;
    check(parsed == c, || format!("{c} does not re-parse"))?;
    let sigma = random_perm(t.arity(), &ch[3..]);
    let (_, d) = ok(apply_leaf_permutation(&t, &sigma, &p.generators, false))?;
    let back: Vec<u32> = (1..=sigma.len() as u32).map(|j| sigma.iter().position(|&x| x == j).unwrap() as u32 + 1).collect();
    let (_, e) = ok(apply_leaf_permutation(&d, &back, &p.generators, false))?;
    check(e == c, || format!("{t}: permuting back gives {e}, expected {c}"))
}

pub fn prop_group_action(name: &str, n: usize, wheel: bool, twist: bool, ch: &[u16]) -> Result<(), TestCaseError> {
    let o = op(name);
    let p = &o.presentation;
    let t = random_term(p, n, wheel, ch);
    let k = t.arity();
    let sigma = random_perm(k, &ch[5..]);
    let tau = random_perm(k, &ch[11..]);
    let (s1, a) = ok(apply_leaf_permutation(&t, &sigma, &p.generators, twist))?;
    let (s2, b) = ok(apply_leaf_permutation(&a, &tau, &p.generators, twist))?;
    let (s0, t0) = ok(canonicalize(&t, &p.generators))?;
    let (s3, c) = ok(apply_leaf_permutation(&t0, &compose_perms(&tau, &sigma), &p.generators, twist))?;
    check(b == c && s1 * s2 == s0 * s3, || format!("{t} under {sigma:?} then {tau:?}: {}*{b} vs {}*{c}", s1 * s2, s0 * s3))?;
    if twist {
        return Ok(());
    }
    // equivariance of the quotient: reduce(σ·t) = Σ x_i σ·e_i
    let x = ok(o.reduce_term(&t))?;
    let direct = ok(o.reduce_term(&t.relabel(&|l| sigma[l as usize - 1])))?;
    let mut via = SparseVec::new();
    for (&i, xi) in &x {
        let v = ok(o.act(Deco { arity: k, wheeled: t.is_wheeled(), index: i }, &sigma))?;
        axpy(&mut via, xi, &v);
    }
    check(direct == via, || format!("{name}: action on {t} not equivariant"))
}

/// Linear extension of ∘_i to coordinate vectors.
fn compose_vecs(o: &Operad, (a, wa): (usize, bool), x: &SparseVec, i: usize, b: usize, y: &SparseVec) -> Result<SparseVec, TestCaseError> {
    let mut out = SparseVec::new();
    for (&u, xu) in x {
        for (&v, yv) in y {
            let c = ok(o.compose(Deco { arity: a, wheeled: wa, index: u }, i, Deco { arity: b, wheeled: false, index: v }))?;
            axpy(&mut out, &(xu * yv), &c);
        }
    }
    Ok(out)
}

pub fn prop_graft_associative(name: &str, a: usize, b: usize, c: usize, wheel: bool, ch: &[u16]) -> Result<(), TestCaseError> {
    let o = op(name);
    let p = &o.presentation;
    let u = random_term(p, a + usize::from(wheel), wheel, ch);
    let v = random_term(p, b, false, &ch[4..]);
    let w = random_term(p, c, false, &ch[9..]);
    let i = ch[1] as usize % a + 1;
    let j = ch[2] as usize % b + 1;
    let left = ok(graft(&ok(graft(&u, i, &v))?, i + j - 1, &w))?;
    let right = ok(graft(&u, i, &ok(graft(&v, j, &w))?))?;
    check(left == right, || format!("sequential: {left} != {right}"))?;
    let xu = ok(o.reduce_term(&u))?;
    let xv = ok(o.reduce_term(&v))?;
    let composed = ok(o.reduce_term(&ok(graft(&u, i, &v))?))?;
    let linear = compose_vecs(o, (a, wheel), &xu, i, b, &xv)?;
    check(composed == linear, || format!("{name}: ∘_{i} is not well defined on {u}, {v}"))?;
    if a >= 2 {
        let k = ch[3] as usize % a + 1;
        if k != i {
            let (lo, hi, tl, th) = if i < k { (i, k, &v, &w) } else { (k, i, &w, &v) };
            let x = ok(graft(&ok(graft(&u, hi, th))?, lo, tl))?;
            let y = ok(graft(&ok(graft(&u, lo, tl))?, hi + tl.arity() - 1, th))?;
            check(ok(o.reduce_term(&x))? == ok(o.reduce_term(&y))?, || format!("parallel: {x} vs {y}"))?;
        }
    }
    Ok(())
}

pub fn prop_cyclic_trace(name: &str, n: usize, ch: &[u16]) -> Result<(), TestCaseError> {
    let o = op(name);
    let p = &o.presentation;
    let t = random_term(p, n + 1, true, ch);
    let x = ok(o.reduce_term(&t))?;
    let mut r = t.clone();
    for _ in 0..8 {
        let Some(next) = rotate_wheel(&r) else { break };
        check(ok(o.reduce_term(&next))? == x, || format!("{name}: {t} and its rotation {next} differ"))?;
        r = next;
        if r == t {
            break;
        }
    }
    // ξ_s is well defined on the quotient
    let u = random_term(p, n + 1, false, &ch[7..]);
    let s = ch[2] as usize % (n + 1) + 1;
    let direct = ok(o.reduce_term(&ok(contract_wheel(&u, s))?))?;
    let mut via = SparseVec::new();
    for (&i, xi) in &ok(o.reduce_term(&u))? {
        axpy(&mut via, xi, &*ok(o.contract(Deco { arity: n + 1, wheeled: false, index: i }, s))?);
    }
    check(direct == via, || format!("{name}: ξ_{s} not well defined on {u}"))
}

pub fn prop_sgn_twist_invariance(name: &str, n: usize, wheeled: bool) -> Result<(), TestCaseError> {
    let o = op(name);
    let a = ok(build_cobar(o, n, wheeled, false))?;
    let b = ok(build_cobar(o, n, wheeled, true))?;
    check(a.dims() == b.dims(), || "dims differ".into())?;
    check(check_d_squared(&a) && check_d_squared(&b), || "d^2 != 0".into())?;
    let (ha, hb) = (ok(homology_dims(&a))?, ok(homology_dims(&b))?);
    check(ha.dims == hb.dims, || format!("{name} n={n}: homology {:?} vs {:?}", ha.dims, hb.dims))
}

fn random_rational(a: u16, b: u16) -> Rational {
    Rational::new((a as i64 % 13 - 6).into(), (b as i64 % 5 + 1).into())
}

pub fn prop_round_trips(name: &str, n: usize, wheeled: bool, ch: &[u16]) -> Result<(), TestCaseError> {
    let o = op(name);
    let p = &o.presentation;
    let mut l = LinComb::new();
    for k in 0..3 {
        let t = random_term(p, n, wheeled && k != 1, &ch[k * 3..]);
        l.add(t.to_string(), random_rational(ch[k], ch[k + 5]));
    }
    let text = l.to_string();
    let back = ok(LinComb::parse(&text))?;
    check(back == l && back.to_string() == text, || format!("lincomb round trip: {text} -> {back}"))?;
    let cfg = p.to_config();
    let again = ok(Presentation::from_config(&cfg))?;
    check(again.to_config() == cfg, || format!("{name}: config round trip"))?;
    let d = ok(if wheeled { wheeled_dual(p) } else { quadratic_dual(p) })?;
    check(ok(Presentation::from_config(&d.to_config()))?.to_config() == d.to_config(), || "dual config round trip".into())?;
    let cn = if wheeled { n.min(2) } else { n.clamp(2, 3) };
    let c = ok(build_cobar(o, cn, wheeled, ch[0] & 1 == 0))?;
    let json = c.to_json();
    let r = ok(ChainComplex::from_json(&json))?;
    check(r == c && r.to_json() == json, || format!("{name} n={cn}: complex json round trip"))?;
    // a cycle written in basis coordinates re-imports unchanged
    let k = c.degrees[ch[6] as usize % c.degrees.len()].degree;
    let dim = c.dim(k);
    if dim > 0 {
        let mut v = SparseVec::new();
        for s in 0..3 {
            let q = random_rational(ch[s + 10], ch[s + 13]);
            if !q.is_zero() {
                add_entry(&mut v, ch[s + 16] as usize % dim, q);
            }
        }
        let x = c.lincomb(k, &v);
        check(ok(c.coordinates(k, &ok(LinComb::parse(&x.to_string()))?))? == v, || format!("cycle round trip {x}"))?;
    }
    Ok(())
}

/// Strategy inputs for each property, bounded so cases stay fast.
pub fn canonical_case() -> impl Strategy<Value = (&'static str, usize, bool, Vec<u16>)> {
    (op_name(), 2usize..=6, any::<bool>(), choices())
}

pub fn action_case() -> impl Strategy<Value = (&'static str, usize, bool, bool, Vec<u16>)> {
    (op_name(), 2usize..=4, any::<bool>(), any::<bool>(), choices()).prop_map(|(o, n, w, t, c)| (o, if w { n.min(3) } else { n }, w, t, c))
}

pub fn graft_case() -> impl Strategy<Value = (&'static str, usize, usize, usize, bool, Vec<u16>)> {
    (op_name(), 1usize..=3, 2usize..=3, 2usize..=3, any::<bool>(), choices())
        .prop_filter("arity within guards", |(_, a, b, c, w, _)| if *w { a + b + c - 2 <= 4 } else { a + b + c - 2 <= 5 && *a >= 2 })
}

pub fn trace_case() -> impl Strategy<Value = (&'static str, usize, Vec<u16>)> {
    (op_name(), 1usize..=3, choices())
}

pub fn twist_case() -> impl Strategy<Value = (&'static str, usize, bool)> {
    (op_name(), 1usize..=4, any::<bool>()).prop_map(|(o, n, w)| if w { (o, n.min(3), true) } else { (o, n.max(2), false) })
}

pub fn round_trip_case() -> impl Strategy<Value = (&'static str, usize, bool, Vec<u16>)> {
    (op_name(), 2usize..=4, any::<bool>(), choices())
}
