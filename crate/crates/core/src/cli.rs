//! Command-line front end. `run` returns the exit code and the text that
//! would go to stdout, so it can be driven from tests.

use std::fmt::Write;

use clap::{Parser, ValueEnum};
use serde_json::{json, Value};

use crate::cobar::{build_double_cobar, component, split_by_vertex_type, vertex_counts_of, ChainComplex, CobarSpace, Kind};
use crate::error::{Error, Result};
use crate::expansion::{Guards, Operad};
use crate::homology::{certify_cycle, filtration_analysis, homology_dims, input_type_filtration, koszul_report, split_homology};
use crate::lincomb::LinComb;
use crate::presentations::{builtin, quadratic_dual, wheeled_dual, Presentation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_KOSZUL: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    Dims,
    Dual,
    Cobar,
    Homology,
    Koszul,
    Certify,
    Export,
}

#[derive(Debug, Parser)]
#[command(name = "operad-forge", about = "Quadratic operads, wheeled completions, cobar complexes and Koszulness checks over Q")]
pub struct Command {
    #[arg(value_enum)]
    pub verb: Verb,
    /// Builtin (ass, com, lie, poiss) or a presentation config file.
    #[arg(long, default_value = "com")]
    pub operad: String,
    #[arg(long)]
    pub arity: Option<usize>,
    #[arg(long)]
    pub max_arity: Option<usize>,
    #[arg(long)]
    pub wheeled: bool,
    #[arg(long)]
    pub sgn_twist: bool,
    /// Split complexes by generator vertex counts.
    #[arg(long)]
    pub split: bool,
    /// Double cobar Cob(Cob(P)).
    #[arg(long)]
    pub double: bool,
    #[arg(long)]
    pub json: bool,
    /// Restrict to one vertex-count component, e.g. `1,2`.
    #[arg(long, value_delimiter = ',')]
    pub component: Option<Vec<usize>>,
    /// Input file for certify / export.
    #[arg(long)]
    pub file: Option<String>,
    /// Level = 1 + leaves entering vertices of this generator (`c` gives the Lie-input filtration).
    #[arg(long)]
    pub filtration: Option<String>,
    /// Plain arity guard [default: 6].
    #[arg(long)]
    pub max_plain_arity: Option<usize>,
    /// Wheeled arity guard [default: 4].
    #[arg(long)]
    pub max_wheeled_arity: Option<usize>,
    /// Double cobar arity guard [default: 4].
    #[arg(long)]
    pub max_double_arity: Option<usize>,
}

impl Command {
    fn guards(&self) -> Guards {
        let mut g = Guards::from_env();
        if let Some(m) = self.max_plain_arity {
            g.max_plain = m;
        }
        if let Some(m) = self.max_wheeled_arity {
            g.max_wheeled = m;
        }
        if let Some(m) = self.max_double_arity {
            g.max_double = m;
        }
        g
    }

    fn validate(&self) -> Result<()> {
        if self.double && self.wheeled {
            return Err(Error::Usage("--double and --wheeled are exclusive".into()));
        }
        if self.double && self.sgn_twist {
            return Err(Error::Usage("--sgn-twist does not apply to --double".into()));
        }
        Ok(())
    }

    fn arity(&self) -> Result<usize> {
        self.arity.ok_or_else(|| Error::Usage("--arity is required".into()))
    }

    fn kind(&self) -> Kind {
        if self.double {
            Kind::Double
        } else if self.wheeled {
            Kind::Wheeled
        } else {
            Kind::Plain
        }
    }
}

pub fn load_presentation(selector: &str) -> Result<Presentation> {
    match builtin(selector) {
        Ok(p) => Ok(p),
        Err(e) => match std::fs::read_to_string(selector) {
            Ok(text) => Presentation::from_config(&text),
            Err(_) => Err(e),
        },
    }
}

fn read_file(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path}: {e}")))
}

/// Parses `args` (without the program name) and executes the command.
pub fn run<I, S>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("operad-forge")).chain(args.into_iter().map(Into::into));
    let cmd = match Command::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            return (code, e.to_string());
        }
    };
    match execute(&cmd) {
        Ok(x) => x,
        Err(e) => (EXIT_ERROR, format!("error: {e}\n")),
    }
}

pub fn execute(cmd: &Command) -> Result<(i32, String)> {
    cmd.validate()?;
    let p = load_presentation(&cmd.operad)?;
    let op = Operad::with_guards(p, cmd.guards());
    match cmd.verb {
        Verb::Dims => dims(cmd, &op),
        Verb::Dual => dual(cmd, &op),
        Verb::Cobar => cobar(cmd, &op),
        Verb::Homology => homology(cmd, &op),
        Verb::Koszul => koszul(cmd, &op),
        Verb::Certify => certify(cmd, &op),
        Verb::Export => export(cmd, &op),
    }
}

fn ok(s: String) -> Result<(i32, String)> {
    Ok((EXIT_OK, s))
}

fn dims(cmd: &Command, op: &Operad) -> Result<(i32, String)> {
    let ns: Vec<usize> = match (cmd.arity, cmd.max_arity) {
        (Some(n), _) => vec![n],
        (None, Some(m)) => (1..=m).collect(),
        (None, None) => return Err(Error::Usage("dims needs --arity or --max-arity".into())),
    };
    let rows = ns.iter().map(|&n| Ok((n, op.dim(n, cmd.wheeled)?))).collect::<Result<Vec<_>>>()?;
    if cmd.json {
        let v: Vec<Value> = rows.iter().map(|&(n, d)| json!({"arity": n, "dim": d})).collect();
        return ok(json!({"operad": op.presentation.name, "wheeled": cmd.wheeled, "dims": v}).to_string() + "\n");
    }
    if cmd.arity.is_some() {
        return ok(format!("{}\n", rows[0].1));
    }
    let mut s = String::new();
    for (n, d) in rows {
        writeln!(s, "{n} {d}").unwrap();
    }
    ok(s)
}

fn dual(cmd: &Command, op: &Operad) -> Result<(i32, String)> {
    let d = if cmd.wheeled { wheeled_dual(&op.presentation)? } else { quadratic_dual(&op.presentation)? };
    if cmd.json {
        let gens: Vec<Value> = d
            .generators
            .iter()
            .map(|g| json!({"id": g.id, "swap_sign": g.swap_sign, "partner": g.partner}))
            .collect();
        let rel = |v: &[LinComb]| v.iter().map(|r| r.to_string()).collect::<Vec<_>>();
        let v = json!({
            "name": d.name,
            "generators": gens,
            "relations3": rel(&d.relations3),
            "wheeled_relations1": rel(&d.wheeled_relations1),
        });
        return ok(v.to_string() + "\n");
    }
    ok(d.to_config())
}

fn build(cmd: &Command, op: &Operad) -> Result<ChainComplex> {
    let n = cmd.arity()?;
    let c = if cmd.double {
        build_double_cobar(op, n)?.total
    } else {
        CobarSpace::new(op, n, cmd.kind(), cmd.sgn_twist)?.build()?
    };
    match &cmd.component {
        Some(counts) => component(&c, op.gens(), counts),
        None => Ok(c),
    }
}

fn parts(cmd: &Command, op: &Operad, c: ChainComplex) -> Result<Vec<ChainComplex>> {
    if cmd.split && c.component.is_none() {
        split_by_vertex_type(&c, op.gens())
    } else {
        Ok(vec![c])
    }
}

fn fmt_counts(c: &Option<Vec<usize>>) -> String {
    match c {
        Some(v) => v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
        None => "all".into(),
    }
}

fn fmt_dims(d: &[(i64, usize)]) -> String {
    d.iter().map(|(k, x)| format!("{k}:{x}")).collect::<Vec<_>>().join(" ")
}

fn cobar(cmd: &Command, op: &Operad) -> Result<(i32, String)> {
    let c = build(cmd, op)?;
    let ps = parts(cmd, op, c)?;
    if cmd.json {
        let v: Vec<Value> = ps
            .iter()
            .map(|p| serde_json::from_str::<Value>(&p.to_json()).map(|mut j| {
                j["component"] = json!(p.component);
                j
            }))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Io(e.to_string()))?;
        return ok(Value::Array(v).to_string() + "\n");
    }
    let mut s = String::new();
    for p in &ps {
        writeln!(s, "component {} dims {} euler {}", fmt_counts(&p.component), fmt_dims(&p.dims()), p.euler_characteristic()).unwrap();
        for b in &p.degrees {
            writeln!(s, "degree {} ({} elements, {} nonzero entries in d)", b.degree, b.basis.len(), b.d.nnz()).unwrap();
            for x in &b.basis {
                writeln!(s, "  {x}").unwrap();
            }
        }
    }
    ok(s)
}

fn homology(cmd: &Command, op: &Operad) -> Result<(i32, String)> {
    let c = build(cmd, op)?;
    if let Some(gen) = &cmd.filtration {
        let f = input_type_filtration(&c, op.gens(), gen)?;
        let r = filtration_analysis(&c, &f)?;
        if cmd.json {
            return ok(serde_json::to_string(&r).unwrap() + "\n");
        }
        let mut s = String::new();
        for (lv, d) in &r.levels {
            writeln!(s, "level {lv}: {}", fmt_dims(d)).unwrap();
        }
        writeln!(s, "summed: {}", fmt_dims(&r.summed)).unwrap();
        writeln!(s, "homology: {}", fmt_dims(&r.homology)).unwrap();
        writeln!(s, "bound holds: {}", if r.bound_holds { "yes" } else { "no" }).unwrap();
        return ok(s);
    }
    let report = if cmd.split && c.component.is_none() { split_homology(&c, op.gens())? } else { homology_dims(&c)? };
    if cmd.json {
        return ok(serde_json::to_string(&report).unwrap() + "\n");
    }
    let mut s = String::new();
    writeln!(s, "H: {}", fmt_dims(&report.dims)).unwrap();
    writeln!(s, "euler: {}", report.euler).unwrap();
    for (counts, d) in &report.components {
        writeln!(s, "component {}: {}", fmt_counts(&Some(counts.clone())), fmt_dims(d)).unwrap();
    }
    ok(s)
}

fn koszul(cmd: &Command, op: &Operad) -> Result<(i32, String)> {
    let m = cmd.max_arity.or(cmd.arity).ok_or_else(|| Error::Usage("koszul needs --max-arity".into()))?;
    let v = koszul_report(op, m, cmd.wheeled, cmd.sgn_twist)?;
    let code = if v.pass { EXIT_OK } else { EXIT_NOT_KOSZUL };
    if cmd.json {
        return Ok((code, serde_json::to_string(&v).unwrap() + "\n"));
    }
    let mut s = String::new();
    for c in &v.checks {
        writeln!(
            s,
            "n={} {} expected {} in degree {} got {} {}",
            c.arity,
            if c.wheeled { "wheeled" } else { "plain" },
            c.expected_dim,
            c.expected_degree,
            fmt_dims(&c.homology),
            if c.pass { "ok" } else { "FAIL" }
        )
        .unwrap();
        if let Some(w) = &c.witness {
            writeln!(s, "  witness (degree {}, component {}): {}", w.degree, fmt_counts(&w.component), w.cycle).unwrap();
        }
    }
    writeln!(
        s,
        "verdict: {} ({}, n <= {}, sgn twist {})",
        if v.pass { "PASS" } else { "FAIL" },
        v.presentation,
        v.max_arity,
        if v.sgn_twist { "on" } else { "off" }
    )
    .unwrap();
    Ok((code, s))
}

/// Reads a cycle file: `#` comments and line breaks are ignored.
pub fn read_cycle(text: &str) -> String {
    let body: Vec<&str> = text.lines().map(|l| l.split('#').next().unwrap().trim()).filter(|l| !l.is_empty()).collect();
    let joined = body.join(" ");
    if joined.is_empty() {
        "0".into()
    } else {
        joined
    }
}

fn certify(cmd: &Command, op: &Operad) -> Result<(i32, String)> {
    let path = cmd.file.as_deref().ok_or_else(|| Error::Usage("certify needs --file".into()))?;
    let text = read_cycle(&read_file(path)?);
    let n = cmd.arity()?;
    let space = CobarSpace::new(op, n, cmd.kind(), cmd.sgn_twist)?;
    let (k, x) = space.element(&text)?;
    let mut counts: Option<Vec<usize>> = cmd.component.clone();
    for key in x.keys() {
        let c = vertex_counts_of(key, op.gens())?;
        if counts.get_or_insert_with(|| c.clone()) != &c {
            counts = None;
            break;
        }
    }
    let full = space.build()?;
    let c = match &counts {
        Some(v) => component(&full, op.gens(), v)?,
        None => full,
    };
    let cert = certify_cycle(&c, &x, k)?;
    let yn = |b: bool| if b { "yes" } else { "no" };
    if cmd.json {
        let v = json!({"degree": k, "component": counts, "is_cycle": cert.is_cycle, "is_boundary": cert.is_boundary, "element": x.to_string()});
        return ok(v.to_string() + "\n");
    }
    let mut s = String::new();
    writeln!(s, "degree: {k}").unwrap();
    writeln!(s, "component: {}", fmt_counts(&counts)).unwrap();
    writeln!(s, "cycle: {}, boundary: {}", yn(cert.is_cycle), yn(cert.is_boundary)).unwrap();
    ok(s)
}

fn export(cmd: &Command, op: &Operad) -> Result<(i32, String)> {
    match &cmd.file {
        Some(path) => {
            let text = read_file(path)?;
            if text.trim_start().starts_with('{') {
                return ok(ChainComplex::from_json(&text)?.to_json() + "\n");
            }
            let space = CobarSpace::new(op, cmd.arity()?, cmd.kind(), cmd.sgn_twist)?;
            let (_, x) = space.element(&read_cycle(&text))?;
            ok(if x.is_empty() { "0\n".into() } else { format!("{x}\n") })
        }
        None => ok(build(cmd, op)?.to_json() + "\n"),
    }
}
