use operad_forge::cobar::*;
use operad_forge::expansion::Operad;
use operad_forge::homology::homology_dims;
use operad_forge::presentations::builtin;

fn op(name: &str) -> Operad {
    Operad::new(builtin(name).unwrap())
}

#[test]
fn wheeled_poisson_census() {
    let o = op("poiss");
    let c = build_cobar(&o, 3, true, false).unwrap();
    assert_eq!(c.dims(), vec![(0, 10), (1, 60), (2, 108), (3, 64)]);
    assert!(check_d_squared(&c));
    let parts = split_by_vertex_type(&c, o.gens()).unwrap();
    let keys: Vec<Vec<usize>> = parts.iter().map(|p| p.component.clone().unwrap()).collect();
    assert_eq!(keys, vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
    for k in 0..=3 {
        assert_eq!(parts.iter().map(|p| p.dim(k)).sum::<usize>(), c.dim(k));
    }
}

#[test]
fn small_plain_complexes() {
    let c = build_cobar(&op("ass"), 3, false, false).unwrap();
    assert_eq!(c.dims(), vec![(1, 6), (2, 12)]);
    let c = build_cobar(&op("com"), 2, false, false).unwrap();
    assert_eq!(c.dims(), vec![(1, 1)]);
    assert!(c.d(1).is_zero());
    assert!(check_d_squared(&c));
    let o = op("com");
    assert_eq!(split_by_vertex_type(&build_cobar(&o, 4, false, false).unwrap(), o.gens()).unwrap().len(), 1);
}

#[test]
fn d_squared_vanishes_on_builtins() {
    for name in ["ass", "com", "lie", "poiss"] {
        let o = op(name);
        for n in 2..=4 {
            assert!(check_d_squared(&build_cobar(&o, n, false, false).unwrap()), "{name} {n}");
        }
        for n in 1..=3 {
            assert!(check_d_squared(&build_cobar(&o, n, true, false).unwrap()), "{name} wheeled {n}");
        }
    }
}

#[test]
fn flipped_sign_is_caught() {
    let mut c = build_cobar(&op("poiss"), 3, true, false).unwrap();
    let b = c.degrees.iter_mut().find(|b| b.degree == 2).unwrap();
    let (r, col, x) = b.d.entries().next().map(|(r, c, x)| (r, c, x.clone())).unwrap();
    b.d.set(r, col, -x);
    assert!(!check_d_squared(&c));
}

#[test]
fn double_cobar() {
    let o = op("com");
    let d = build_double_cobar(&o, 2).unwrap();
    assert_eq!(homology_dims(&d.total).unwrap().total(), 1);
    let d = build_double_cobar(&o, 3).unwrap();
    assert!(d.anticommutes());
    assert!(check_d_squared(&d.total));
    assert!(build_double_cobar(&o, 5).is_err());
}

#[test]
fn elements_and_json() {
    let o = op("poiss");
    let space = CobarSpace::new(&o, 3, Kind::Wheeled, false).unwrap();
    let (k, x) = space.element("{(c 1 (l 2 {(l 3 @)}))}").unwrap();
    assert_eq!(k, 2);
    assert_eq!(x.len(), 1);
    let (k, x) = space.element("[(c 1 (l 2 (l 3 @)))]").unwrap();
    assert_eq!((k, x.len()), (0, 1));
    assert!(space.element("{(c 1 2)}").is_err());
    let c = space.build().unwrap();
    let j = c.to_json();
    assert_eq!(ChainComplex::from_json(&j).unwrap(), c);
    assert!(ChainComplex::from_json("{\"arity\": 1}").is_err());
}
