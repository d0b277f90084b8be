mod common;

use std::time::Instant;

use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use common::*;
use operad_forge::cli::{self, EXIT_NOT_KOSZUL};
use operad_forge::cobar::{build_cobar, build_double_cobar, check_d_squared, component, CobarSpace, Kind};
use operad_forge::expansion::{Guards, Operad};
use operad_forge::homology::{certify_cycle, filtration_analysis, homology_dims, koszul_report, lie_input_filtration};
use operad_forge::presentations::{builtin, find_identification, quadratic_dual, wheeled_dual, BUILTINS};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn expect<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, want {want:?}"))
    }
}

fn e(x: impl std::fmt::Display) -> String {
    x.to_string()
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

fn dims(op: &Operad, wheeled: bool, ns: std::ops::RangeInclusive<usize>) -> Result<Vec<usize>, String> {
    ns.map(|n| op.dim(n, wheeled).map_err(e)).collect()
}

fn dimension_tables() -> Outcome {
    let g = Guards { max_plain: 6, ..Guards::default() };
    let ass = Operad::with_guards(builtin("ass").map_err(e)?, g);
    let com = Operad::with_guards(builtin("com").map_err(e)?, g);
    let lie = Operad::with_guards(builtin("lie").map_err(e)?, g);
    let poiss = Operad::with_guards(builtin("poiss").map_err(e)?, g);
    expect("Ass", dims(&ass, false, 1..=5)?, (1..=5).map(factorial).collect())?;
    expect("Com", dims(&com, false, 1..=6)?, vec![1; 6])?;
    expect("Lie", dims(&lie, false, 1..=5)?, (1..=5).map(|n| factorial(n - 1)).collect())?;
    expect("Poiss", dims(&poiss, false, 1..=4)?, (1..=4).map(factorial).collect())?;
    Ok("Ass 1..5, Com 1..6, Lie 1..5, Poiss 1..4".into())
}

fn ass_wheeled_formula(n: usize) -> usize {
    let f = |k: isize| if k < 0 { 1 } else { factorial(k as usize) };
    let binom = |n: usize, i: usize| factorial(n) / (factorial(i) * factorial(n - i));
    (0..=n).map(|i| binom(n, i) * f(i as isize - 1) * f(n as isize - i as isize - 1)).sum()
}

fn wheeled_tables() -> Outcome {
    let g = Guards { max_wheeled: 5, ..Guards::default() };
    let load = |n: &str| builtin(n).map(|p| Operad::with_guards(p, g)).map_err(e);
    expect("Com_w", dims(&load("com")?, true, 1..=5)?, vec![1; 5])?;
    expect("Lie_w", dims(&load("lie")?, true, 1..=4)?, (1..=4).map(|n| factorial(n - 1)).collect())?;
    expect("Ass_w", dims(&load("ass")?, true, 1..=4)?, (1..=4).map(ass_wheeled_formula).collect())?;
    expect("Poiss_w", dims(&load("poiss")?, true, 1..=3)?, vec![2, 4, 10])?;
    let dual = Operad::new(wheeled_dual(&builtin("poiss").map_err(e)?).map_err(e)?);
    expect("Poiss!_w", dims(&dual, true, 1..=3)?, vec![0, 2, 7])?;
    Ok(format!("Ass_w 1..4 = {:?}, Poiss_w = (2,4,10), Poiss!_w = (0,2,7)", (1..=4).map(ass_wheeled_formula).collect::<Vec<_>>()))
}

fn duality() -> Outcome {
    let ass = builtin("ass").map_err(e)?;
    expect("dim Free(E_Ass)(3)", ass.free_dim3(), 12)?;
    let ass_dual = quadratic_dual(&ass).map_err(e)?;
    expect("dim Ann(R_Ass)", ass_dual.relations3.len(), 6)?;
    for (p, q) in [("ass", "ass"), ("com", "lie"), ("lie", "com"), ("poiss", "poiss")] {
        let d = quadratic_dual(&builtin(p).map_err(e)?).map_err(e)?;
        let found = find_identification(&d, &builtin(q).map_err(e)?, false).map_err(e)?;
        if found.is_none() {
            return Err(format!("{p}^! is not identified with {q}"));
        }
    }
    Ok("Ass^!=Ass, Com^!=Lie, Lie^!=Com, Poiss^!=Poiss; 12 and 6".into())
}

fn sign_machinery() -> Outcome {
    let mut count = 0;
    for name in BUILTINS {
        let p = builtin(name).map_err(e)?;
        let ops = [Operad::new(p.clone()), Operad::new(quadratic_dual(&p).map_err(e)?)];
        for op in &ops {
            for twist in [false, true] {
                for n in 2..=4 {
                    let c = build_cobar(op, n, false, twist).map_err(e)?;
                    if !check_d_squared(&c) {
                        return Err(format!("d^2 != 0 on {} plain n={n}", op.presentation.name));
                    }
                    count += 1;
                }
                for n in 1..=3 {
                    let c = build_cobar(op, n, true, twist).map_err(e)?;
                    if !check_d_squared(&c) {
                        return Err(format!("d^2 != 0 on {} wheeled n={n}", op.presentation.name));
                    }
                    count += 1;
                }
            }
            for n in 2..=3 {
                let d = build_double_cobar(op, n).map_err(e)?;
                if !check_d_squared(&d.total) || !d.anticommutes() {
                    return Err(format!("double cobar of {} n={n}: d1 d2 + d2 d1 != 0", op.presentation.name));
                }
                count += 1;
            }
        }
    }
    Ok(format!("{count} complexes, d^2 = 0 and d1 d2 = -d2 d1"))
}

fn koszulness() -> Outcome {
    let mut runs = Vec::new();
    for (name, max, wheeled) in [
        ("ass", 4, false),
        ("com", 4, false),
        ("lie", 4, false),
        ("poiss", 3, false),
        ("ass", 3, true),
        ("com", 3, true),
        ("lie", 3, true),
        ("poiss", 2, true),
    ] {
        let op = Operad::new(builtin(name).map_err(e)?);
        let v = koszul_report(&op, max, wheeled, false).map_err(e)?;
        if !v.pass {
            let f = v.first_failure().unwrap();
            return Err(format!("{name} n={} wheeled={wheeled}: {:?}", f.arity, f.homology));
        }
        runs.push(format!("{name}{}<={max}", if wheeled { "_w" } else { "" }));
    }
    Ok(runs.join(" "))
}

fn double_cobar() -> Outcome {
    for name in ["com", "lie"] {
        let op = Operad::new(builtin(name).map_err(e)?);
        for n in 2..=3 {
            let h = homology_dims(&build_double_cobar(&op, n).map_err(e)?.total).map_err(e)?;
            expect(&format!("{name} n={n} total homology"), h.total(), op.dim(n, false).map_err(e)?)?;
        }
    }
    Ok("H(Cob(Cob(P)))(n) = P(n) for Com, Lie, n <= 3".into())
}

fn obstruction() -> Outcome {
    let op = Operad::new(builtin("poiss").map_err(e)?);
    let space = CobarSpace::new(&op, 3, Kind::Wheeled, false).map_err(e)?;
    let full = space.build().map_err(e)?;
    let comp = component(&full, op.gens(), &[1, 2]).map_err(e)?;
    let text = std::fs::read_to_string(fixture("obstruction_cycle.txt")).map_err(e)?;
    let (k, x) = space.element(&cli::read_cycle(&text)).map_err(e)?;
    expect("terms in cycle", x.len(), 6)?;
    let cert = certify_cycle(&comp, &x, k).map_err(e)?;
    expect("(cycle, boundary)", (cert.is_cycle, cert.is_boundary), (true, false))?;
    let top = *space.degrees.last().unwrap();
    if k >= top {
        return Err(format!("cycle degree {k} is not below top degree {top}"));
    }
    expect("component H_3", homology_dims(&comp).map_err(e)?.dim(3), 2)?;
    let (code, out) = cli::run(["koszul", "--operad", "poiss", "--wheeled", "--max-arity", "3"]);
    expect("koszul exit code", code, EXIT_NOT_KOSZUL)?;
    if !out.contains("verdict: FAIL") || !out.contains("witness (degree 2, component 1,2)") {
        return Err(format!("unexpected report:\n{out}"));
    }
    Ok(format!("cycle in degree {k} < {top}, not a boundary; H_3 = 2; exit {code}"))
}

fn filtration() -> Outcome {
    let op = Operad::new(builtin("poiss").map_err(e)?);
    let full = build_cobar(&op, 3, true, false).map_err(e)?;
    let comp = component(&full, op.gens(), &[1, 2]).map_err(e)?;
    let f = lie_input_filtration(&comp, op.gens()).map_err(e)?;
    let r = filtration_analysis(&comp, &f).map_err(e)?;
    expect("summed level homology", r.summed.iter().map(|x| x.1).collect::<Vec<_>>(), vec![0, 2, 4, 3])?;
    if !r.bound_holds {
        return Err(format!("bound fails: {:?} vs {:?}", r.summed, r.homology));
    }
    Ok(format!("bounds (0,2,4,3) >= homology {:?}", r.homology.iter().map(|x| x.1).collect::<Vec<_>>()))
}

fn run_property<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(e)?;
    Ok(cases)
}

fn properties() -> Outcome {
    let n = 200;
    let mut total = 0;
    let mut names = Vec::new();
    let mut record = |name: &str, r: Result<u32, String>| -> Result<(), String> {
        total += r.map_err(|m| format!("{name}: {m}"))?;
        names.push(name.to_string());
        Ok(())
    };
    record("canonicalization", run_property(n, canonical_case(), |(o, k, w, ch)| prop_canonical_idempotent(o, k, w, &ch)))?;
    record("group action", run_property(n, action_case(), |(o, k, w, t, ch)| prop_group_action(o, k, w, t, &ch)))?;
    record("graft", run_property(n, graft_case(), |(o, a, b, c, w, ch)| prop_graft_associative(o, a, b, c, w, &ch)))?;
    record("trace", run_property(n, trace_case(), |(o, k, ch)| prop_cyclic_trace(o, k, &ch)))?;
    record("sgn twist", run_property(n, twist_case(), |(o, k, w)| prop_sgn_twist_invariance(o, k, w)))?;
    record("round trips", run_property(n, round_trip_case(), |(o, k, w, ch)| prop_round_trips(o, k, w, &ch)))?;
    Ok(format!("{total} cases over {}", names.join(", ")))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("dimension tables", dimension_tables),
        ("wheeled dimension tables", wheeled_tables),
        ("quadratic duality at arity 3", duality),
        ("sign machinery", sign_machinery),
        ("Koszulness of the builtins", koszulness),
        ("double cobar homology", double_cobar),
        ("wheeled Poisson obstruction", obstruction),
        ("Lie-input filtration bounds", filtration),
        ("property suites", properties),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let r = f();
        let ms = t.elapsed().as_millis();
        match r {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail} ({ms} ms)", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} ({ms} ms)", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 9 criteria pass");
}
