//! Plain-text file formats: models, schemes, systems, witness families.

use crate::logic::{Structure, Vocabulary};
use crate::scheme::{ConstantRule, InductiveScheme, StageRule, TimingFunction};
use crate::symmetry::witness::{Strength, WitnessFamily};
use crate::symmetry::{ElemSet, FamilyKind, KSystem, MapFamily, PartialInj, SupportFamily};
use crate::logic::parse::parse_formula;
use crate::logic::Dialect;
use crate::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Non-comment lines with their 1-based line numbers.
fn meaningful(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn header<'a>(line: usize, text: &'a str, keyword: &str) -> Result<&'a str> {
    let rest = text
        .strip_prefix(keyword)
        .ok_or_else(|| perr(line, format!("expected `{keyword} <name>`")))?;
    let name = rest.trim();
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(perr(line, format!("expected `{keyword} <name>`")));
    }
    Ok(name)
}

/// Parses the model format:
///
/// ```text
/// model five_cycle
/// elements v0 v1 v2 v3 v4
/// rel R: (v0 v1) (v1 v0) ...
/// rel S/2:
/// fun f: v0->v1
/// con c = v0
/// ```
pub fn parse_model(text: &str) -> Result<Structure> {
    let mut lines = meaningful(text);
    let (ln, first) = lines.next().ok_or_else(|| perr(1, "empty model file"))?;
    let name = header(ln, first, "model")?.to_string();

    let mut elements: Vec<String> = Vec::new();
    let mut ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut rels: BTreeMap<String, (usize, BTreeSet<Vec<usize>>)> = BTreeMap::new();
    let mut funs: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    let mut cons: BTreeMap<String, usize> = BTreeMap::new();

    let lookup = |ids: &BTreeMap<String, usize>, ln: usize, tok: &str| -> Result<usize> {
        ids.get(tok)
            .copied()
            .ok_or_else(|| perr(ln, format!("unknown element `{tok}`")))
    };

    for (ln, line) in lines {
        if let Some(rest) = line.strip_prefix("elements") {
            if !elements.is_empty() {
                return Err(perr(ln, "elements declared twice"));
            }
            for tok in rest.split_whitespace() {
                if ids.insert(tok.to_string(), elements.len()).is_some() {
                    return Err(perr(ln, format!("duplicate element `{tok}`")));
                }
                elements.push(tok.to_string());
            }
            if elements.is_empty() {
                return Err(perr(ln, "a model needs at least one element"));
            }
        } else if let Some(rest) = line.strip_prefix("rel ") {
            let (head, body) = rest
                .split_once(':')
                .ok_or_else(|| perr(ln, "expected `rel R: (tuples)` or `rel R/arity:`"))?;
            let (rname, declared) = match head.trim().split_once('/') {
                Some((r, ar)) => {
                    let ar: usize = ar
                        .trim()
                        .parse()
                        .map_err(|_| perr(ln, format!("bad arity annotation `{ar}`")))?;
                    (r.trim().to_string(), Some(ar))
                }
                None => (head.trim().to_string(), None),
            };
            if rels.contains_key(&rname) {
                return Err(perr(ln, format!("relation `{rname}` declared twice")));
            }
            let mut tuples = BTreeSet::new();
            let mut arity = declared;
            for group in body.split(')') {
                let group = group.trim();
                if group.is_empty() {
                    continue;
                }
                let inner = group
                    .strip_prefix('(')
                    .ok_or_else(|| perr(ln, "tuples must be parenthesized"))?;
                let tuple: Vec<usize> = inner
                    .split_whitespace()
                    .map(|tok| lookup(&ids, ln, tok))
                    .collect::<Result<_>>()?;
                match arity {
                    None => arity = Some(tuple.len()),
                    Some(ar) if ar != tuple.len() => {
                        return Err(perr(
                            ln,
                            format!("tuple of length {} in relation of arity {ar}", tuple.len()),
                        ));
                    }
                    _ => {}
                }
                tuples.insert(tuple);
            }
            let arity = arity.ok_or_else(|| {
                perr(ln, format!("empty relation `{rname}` needs an arity annotation"))
            })?;
            rels.insert(rname, (arity, tuples));
        } else if let Some(rest) = line.strip_prefix("fun ") {
            let (fname, body) = rest
                .split_once(':')
                .ok_or_else(|| perr(ln, "expected `fun f: a->b ...`"))?;
            let fname = fname.trim().to_string();
            if funs.contains_key(&fname) {
                return Err(perr(ln, format!("function `{fname}` declared twice")));
            }
            let mut graph = BTreeMap::new();
            for pair in body.split_whitespace() {
                let (a, b) = pair
                    .split_once("->")
                    .ok_or_else(|| perr(ln, format!("bad pair `{pair}`")))?;
                let a = lookup(&ids, ln, a)?;
                let b = lookup(&ids, ln, b)?;
                if graph.insert(a, b).is_some() {
                    return Err(perr(ln, format!("function `{fname}` maps an element twice")));
                }
            }
            funs.insert(fname, graph);
        } else if let Some(rest) = line.strip_prefix("con ") {
            let (cname, val) = rest
                .split_once('=')
                .ok_or_else(|| perr(ln, "expected `con c = a`"))?;
            let cname = cname.trim().to_string();
            if cons.contains_key(&cname) {
                return Err(perr(ln, format!("constant `{cname}` declared twice")));
            }
            let val = lookup(&ids, ln, val.trim())?;
            cons.insert(cname, val);
        } else {
            return Err(perr(ln, format!("unrecognized line `{line}`")));
        }
    }

    let vocab = Vocabulary {
        rels: rels.iter().map(|(r, (ar, _))| (r.clone(), *ar)).collect(),
        funs: funs.keys().map(|f| (f.clone(), 1)).collect(),
        cons: cons.keys().cloned().collect(),
    };
    let m = Structure {
        name,
        vocab,
        elements,
        rels: rels.into_iter().map(|(r, (_, ts))| (r, ts)).collect(),
        funs,
        cons,
    };
    m.validate()?;
    Ok(m)
}

pub fn model_to_string(m: &Structure) -> String {
    let mut out = format!("model {}\n", m.name);
    out.push_str("elements");
    for e in &m.elements {
        out.push(' ');
        out.push_str(e);
    }
    out.push('\n');
    for (r, tuples) in &m.rels {
        if tuples.is_empty() {
            out.push_str(&format!("rel {r}/{}:\n", m.vocab.rels[r]));
            continue;
        }
        out.push_str(&format!("rel {r}:"));
        for t in tuples {
            let names: Vec<&str> = t.iter().map(|&i| m.elements[i].as_str()).collect();
            out.push_str(&format!(" ({})", names.join(" ")));
        }
        out.push('\n');
    }
    for (f, graph) in &m.funs {
        out.push_str(&format!("fun {f}:"));
        for (&a, &b) in graph {
            out.push_str(&format!(" {}->{}", m.elements[a], m.elements[b]));
        }
        out.push('\n');
    }
    for (c, &a) in &m.cons {
        out.push_str(&format!("con {c} = {}\n", m.elements[a]));
    }
    out
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Structure> {
    parse_model(&std::fs::read_to_string(path)?)
}

/// Parses the scheme format:
///
/// ```text
/// scheme clock
/// dialect fo
/// standard yes
/// psi(x; y0) := x = y0
/// phi(x) := DP0(x)
/// ```
pub fn parse_scheme(text: &str, vocab: &Vocabulary) -> Result<InductiveScheme> {
    let mut lines = meaningful(text);
    let (ln, first) = lines.next().ok_or_else(|| perr(1, "empty scheme file"))?;
    let name = header(ln, first, "scheme")?.to_string();

    let mut dialect = Dialect::Fo;
    let mut standard = false;
    let mut rules: Vec<(usize, bool, String, Vec<String>, String)> = Vec::new();
    for (ln, line) in lines {
        if let Some(rest) = line.strip_prefix("dialect") {
            dialect = Dialect::parse(rest.trim()).map_err(|e| perr(ln, e.to_string()))?;
        } else if let Some(rest) = line.strip_prefix("standard") {
            standard = match rest.trim() {
                "yes" => true,
                "no" => false,
                other => return Err(perr(ln, format!("expected yes or no, got `{other}`"))),
            };
        } else if line.starts_with("psi(") || line.starts_with("phi(") {
            let is_psi = line.starts_with("psi(");
            let rest = &line[4..];
            let close = rest
                .find(')')
                .ok_or_else(|| perr(ln, "unclosed rule head"))?;
            let head_spec = &rest[..close];
            let after = rest[close + 1..].trim_start();
            let body = after
                .strip_prefix(":=")
                .ok_or_else(|| perr(ln, "expected `:=` after the rule head"))?
                .trim()
                .to_string();
            let (head, params) = match head_spec.split_once(';') {
                Some((h, ps)) => {
                    if !is_psi {
                        return Err(perr(ln, "constant rules take no parameters"));
                    }
                    let params: Vec<String> = ps
                        .split(',')
                        .map(|p| p.trim().to_string())
                        .filter(|p| !p.is_empty())
                        .collect();
                    (h.trim().to_string(), params)
                }
                None => (head_spec.trim().to_string(), Vec::new()),
            };
            if head.is_empty() || head.contains(char::is_whitespace) {
                return Err(perr(ln, "bad head variable"));
            }
            rules.push((ln, is_psi, head, params, body));
        } else {
            return Err(perr(ln, format!("unrecognized line `{line}`")));
        }
    }

    let mut psi = Vec::new();
    let mut phi = Vec::new();
    for (ln, is_psi, head, params, body) in rules {
        let body = parse_formula(&body, vocab, dialect).map_err(|e| match e {
            Error::Parse { msg, .. } => perr(ln, msg),
            other => other,
        })?;
        if is_psi {
            psi.push(StageRule { head, params, body });
        } else {
            phi.push(ConstantRule { head, body });
        }
    }
    if psi.is_empty() {
        return Err(Error::invalid(format!("scheme `{name}` has no stage rules")));
    }
    let scheme = InductiveScheme {
        name,
        dialect,
        standard,
        psi,
        phi,
    };
    scheme.validate(vocab)?;
    Ok(scheme)
}

pub fn load_scheme(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<InductiveScheme> {
    parse_scheme(&std::fs::read_to_string(path)?, vocab)
}

fn parse_map_line(
    ln: usize,
    body: &str,
    m1: &Structure,
    m2: &Structure,
) -> Result<PartialInj> {
    let mut pairs = Vec::new();
    for pair in body.split_whitespace() {
        let (a, b) = pair
            .split_once("->")
            .ok_or_else(|| perr(ln, format!("bad pair `{pair}`")))?;
        let a = m1
            .elem_id(a)
            .ok_or_else(|| perr(ln, format!("unknown element `{a}`")))?;
        let b = m2
            .elem_id(b)
            .ok_or_else(|| perr(ln, format!("unknown element `{b}`")))?;
        pairs.push((a, b));
    }
    PartialInj::new(pairs).map_err(|e| perr(ln, e.to_string()))
}

fn parse_max_dom(ln: usize, rest: &str) -> Result<usize> {
    rest.trim()
        .strip_prefix("max-dom<=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| perr(ln, "expected `max-dom<=<d>`"))
}

enum Section {
    None,
    Supports,
    Maps,
}

/// Loads the system format; the model path is resolved against the system
/// file's directory:
///
/// ```text
/// system five_cycle_q1k3
/// model five_cycle.model
/// I: size<=1
/// F: all-partial-autos max-dom<=3
/// k=3
/// s=1
/// timing poly 1
/// ```
///
/// Explicit families list their members on `support:` and `map:` lines
/// following `I: explicit` and `F: explicit`; the lines are read literally,
/// with no closure applied.
pub fn load_system(path: impl AsRef<Path>) -> Result<KSystem> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut lines = meaningful(&text);
    let (ln, first) = lines.next().ok_or_else(|| perr(1, "empty system file"))?;
    let name = header(ln, first, "system")?.to_string();

    let mut model: Option<Structure> = None;
    let mut i_spec: Option<(usize, Option<usize>)> = None;
    let mut supports: Vec<ElemSet> = Vec::new();
    let mut f_spec: Option<(usize, Option<usize>)> = None;
    let mut maps: Vec<PartialInj> = Vec::new();
    let mut k = None;
    let mut s = None;
    let mut timing = None;
    let mut section = Section::None;

    for (ln, line) in lines {
        if let Some(rest) = line.strip_prefix("model") {
            model = Some(load_model(dir.join(rest.trim()))?);
            continue;
        }
        let m = || {
            model
                .as_ref()
                .ok_or_else(|| perr(ln, "the model line must come first"))
        };
        if let Some(rest) = line.strip_prefix("I:") {
            section = Section::None;
            let rest = rest.trim();
            if rest == "explicit" {
                i_spec = Some((ln, None));
                section = Section::Supports;
            } else if let Some(q) = rest.strip_prefix("size<=") {
                let q: usize = q
                    .trim()
                    .parse()
                    .map_err(|_| perr(ln, format!("bad bound `{q}`")))?;
                i_spec = Some((ln, Some(q)));
            } else {
                return Err(perr(ln, "expected `I: size<=<q>` or `I: explicit`"));
            }
        } else if let Some(rest) = line.strip_prefix("support:") {
            if !matches!(section, Section::Supports) {
                return Err(perr(ln, "support lines belong after `I: explicit`"));
            }
            let m = m()?;
            let set: ElemSet = rest
                .split_whitespace()
                .map(|tok| {
                    m.elem_id(tok)
                        .ok_or_else(|| perr(ln, format!("unknown element `{tok}`")))
                })
                .collect::<Result<_>>()?;
            supports.push(set);
        } else if let Some(rest) = line.strip_prefix("F:") {
            section = Section::None;
            let rest = rest.trim();
            if rest == "explicit" {
                f_spec = Some((ln, None));
                section = Section::Maps;
            } else if let Some(d) = rest.strip_prefix("all-partial-autos") {
                f_spec = Some((ln, Some(parse_max_dom(ln, d)?)));
            } else {
                return Err(perr(
                    ln,
                    "expected `F: all-partial-autos max-dom<=<d>` or `F: explicit`",
                ));
            }
        } else if let Some(rest) = line.strip_prefix("map:") {
            if !matches!(section, Section::Maps) {
                return Err(perr(ln, "map lines belong after `F: explicit`"));
            }
            let m = m()?;
            maps.push(parse_map_line(ln, rest, m, m)?);
        } else if let Some(rest) = line.strip_prefix("timing") {
            timing = Some(TimingFunction::parse(rest.trim()).map_err(|e| perr(ln, e.to_string()))?);
        } else if let Some((key, val)) = line.split_once('=') {
            let val = val.trim();
            match key.trim() {
                "k" => k = Some(val.parse().map_err(|_| perr(ln, format!("bad k `{val}`")))?),
                "s" => s = Some(val.parse().map_err(|_| perr(ln, format!("bad s `{val}`")))?),
                other => return Err(perr(ln, format!("unrecognized key `{other}`"))),
            }
        } else {
            return Err(perr(ln, format!("unrecognized line `{line}`")));
        }
    }

    let m = model.ok_or_else(|| Error::invalid("system file declares no model"))?;
    let (iln, iq) = i_spec.ok_or_else(|| Error::invalid("system file declares no I"))?;
    let i = match iq {
        Some(q) => SupportFamily::size_at_most(m.n(), q),
        None => SupportFamily::explicit(m.n(), supports).map_err(|e| perr(iln, e.to_string()))?,
    };
    let (fln, fd) = f_spec.ok_or_else(|| Error::invalid("system file declares no F"))?;
    let f = match fd {
        Some(d) => MapFamily::all_partial_autos(&m, d)?,
        None => MapFamily::from_maps(FamilyKind::Explicit, maps)
            .map_err(|e| perr(fln, e.to_string()))?,
    };
    Ok(KSystem {
        name,
        m,
        i,
        f,
        k: k.ok_or_else(|| Error::invalid("system file declares no k"))?,
        s: s.ok_or_else(|| Error::invalid("system file declares no s"))?,
        t_fun: timing.ok_or_else(|| Error::invalid("system file declares no timing"))?,
    })
}

/// Loads the witness format; system paths are resolved against the witness
/// file's directory:
///
/// ```text
/// witness paley_pair
/// system1 a.system
/// system2 b.system
/// H: all-partial-embeddings max-dom<=3
/// strength ks
/// ```
pub fn load_witness(path: impl AsRef<Path>) -> Result<(WitnessFamily, KSystem, KSystem)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));

    let mut lines = meaningful(&text);
    let (ln, first) = lines.next().ok_or_else(|| perr(1, "empty witness file"))?;
    let name = header(ln, first, "witness")?.to_string();

    let mut y1: Option<KSystem> = None;
    let mut y2: Option<KSystem> = None;
    let mut h_spec: Option<(usize, Option<usize>)> = None;
    let mut maps: Vec<PartialInj> = Vec::new();
    let mut strength = None;
    let mut in_maps = false;

    for (ln, line) in lines {
        if let Some(rest) = line.strip_prefix("system1") {
            y1 = Some(load_system(dir.join(rest.trim()))?);
        } else if let Some(rest) = line.strip_prefix("system2") {
            y2 = Some(load_system(dir.join(rest.trim()))?);
        } else if let Some(rest) = line.strip_prefix("H:") {
            in_maps = false;
            let rest = rest.trim();
            if rest == "explicit" {
                h_spec = Some((ln, None));
                in_maps = true;
            } else if let Some(d) = rest.strip_prefix("all-partial-embeddings") {
                h_spec = Some((ln, Some(parse_max_dom(ln, d)?)));
            } else {
                return Err(perr(
                    ln,
                    "expected `H: all-partial-embeddings max-dom<=<d>` or `H: explicit`",
                ));
            }
        } else if let Some(rest) = line.strip_prefix("map:") {
            if !in_maps {
                return Err(perr(ln, "map lines belong after `H: explicit`"));
            }
            let (m1, m2) = match (&y1, &y2) {
                (Some(a), Some(b)) => (&a.m, &b.m),
                _ => return Err(perr(ln, "both system lines must come before the maps")),
            };
            maps.push(parse_map_line(ln, rest, m1, m2)?);
        } else if let Some(rest) = line.strip_prefix("strength") {
            strength = Some(Strength::parse(rest.trim()).map_err(|e| perr(ln, e.to_string()))?);
        } else {
            return Err(perr(ln, format!("unrecognized line `{line}`")));
        }
    }

    let y1 = y1.ok_or_else(|| Error::invalid("witness file declares no system1"))?;
    let y2 = y2.ok_or_else(|| Error::invalid("witness file declares no system2"))?;
    let (hln, hd) = h_spec.ok_or_else(|| Error::invalid("witness file declares no H"))?;
    let h = match hd {
        Some(d) => MapFamily::all_partial_embeddings(&y1.m, &y2.m, d)?,
        None => MapFamily::from_maps(FamilyKind::Explicit, maps)
            .map_err(|e| perr(hln, e.to_string()))?,
    };
    let w = WitnessFamily {
        name,
        h,
        strength: strength.ok_or_else(|| Error::invalid("witness file declares no strength"))?,
    };
    Ok((w, y1, y2))
}
