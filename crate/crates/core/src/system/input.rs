//! Line-oriented text input format.
//!
//! Sections are introduced by `[name]` headers; `#` starts a comment. See
//! `docs/input-format.md` for the grammar. Numbers are written back with
//! Rust's shortest round-trip formatting so `parse(to_text(s)) == s`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::system::{
    BasisFunction, BasisKind, CartesianShape, Geometry, MolecularSystem, NonlocalChannel, Nucleus, Orbital, OrbitalSet,
    Primitive, RadialChannel, RadialTerm, SemilocalEcp, SystemError,
};
use crate::wavefunction::{Csf, Determinant, DeterminantExpansion, JastrowParams, PadeTerm, ThreeBodyMonomial, ThreeBodyTerm};
use crate::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InputError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Semantic { line: Option<usize>, message: String },
}

impl From<SystemError> for InputError {
    fn from(e: SystemError) -> Self {
        InputError::Semantic { line: None, message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

impl<'a> Token<'a> {
    fn err(&self, message: impl Into<String>) -> InputError {
        InputError::Syntax { line: self.line, column: self.column, message: message.into() }
    }

    fn parse<T: FromStr>(&self, what: &str) -> Result<T, InputError> {
        self.text.parse().map_err(|_| self.err(format!("expected {what}, found '{}'", self.text)))
    }

    fn number(&self) -> Result<f64, InputError> {
        let v: f64 = self.parse("a number")?;
        if !v.is_finite() {
            return Err(self.err("number must be finite"));
        }
        Ok(v)
    }
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
    end_column: usize,
}

impl<'a> Line<'a> {
    fn get(&self, i: usize, what: &str) -> Result<Token<'a>, InputError> {
        self.tokens.get(i).copied().ok_or_else(|| InputError::Syntax {
            line: self.number,
            column: self.end_column,
            message: format!("missing {what}"),
        })
    }

    fn expect_len(&self, n: usize, usage: &str) -> Result<(), InputError> {
        if self.tokens.len() > n {
            return Err(self.tokens[n].err(format!("unexpected token; usage: {usage}")));
        }
        if self.tokens.len() < n {
            return Err(InputError::Syntax {
                line: self.number,
                column: self.end_column,
                message: format!("too few fields; usage: {usage}"),
            });
        }
        Ok(())
    }

    /// `key=value` options from token `start` on.
    fn options(&self, start: usize, allowed: &[&str]) -> Result<BTreeMap<&'a str, Token<'a>>, InputError> {
        let mut out = BTreeMap::new();
        for t in &self.tokens[start.min(self.tokens.len())..] {
            let Some((k, v)) = t.text.split_once('=') else {
                return Err(t.err(format!("expected key=value, found '{}'", t.text)));
            };
            if !allowed.contains(&k) {
                return Err(t.err(format!("unknown option '{k}' (allowed: {})", allowed.join(", "))));
            }
            if out.contains_key(k) {
                return Err(t.err(format!("option '{k}' given twice")));
            }
            let value = Token { text: v, line: t.line, column: t.column + k.len() + 1 };
            out.insert(k, value);
        }
        Ok(out)
    }
}

fn tokenize(number: usize, raw: &str) -> Line<'_> {
    let content = raw.split('#').next().unwrap_or("");
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in content.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token { text: &content[s..i], line: number, column: content[..s].chars().count() + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push(Token { text: &content[s..], line: number, column: content[..s].chars().count() + 1 });
    }
    Line { number, tokens, end_column: content.trim_end().chars().count() + 1 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Geometry,
    Orbitals,
    Ecp,
    Determinants,
    Jastrow,
    Run,
}

fn semantic(line: usize, message: impl Into<String>) -> InputError {
    InputError::Semantic { line: Some(line), message: message.into() }
}

fn parse_pade(line: &Line<'_>, start: usize) -> Result<PadeTerm, InputError> {
    let opts = line.options(start, &["b1", "b2", "cutoff", "poly"])?;
    let b1 = opts.get("b1").map(|t| t.number()).transpose()?.unwrap_or(0.0);
    let b2 = opts.get("b2").map(|t| t.number()).transpose()?.unwrap_or(1.0);
    let cutoff = opts.get("cutoff").map(|t| t.number()).transpose()?.unwrap_or(0.0);
    let poly = match opts.get("poly") {
        Some(t) => t
            .text
            .split(',')
            .map(|p| {
                p.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| t.err(format!("bad polynomial coefficient '{p}'")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    Ok(PadeTerm { b1, b2, poly, cutoff })
}

/// Orbital reference by 0-based index or orbital label.
fn orbital_ref(t: &Token<'_>, labels: &[String]) -> Result<usize, InputError> {
    if let Ok(i) = t.text.parse::<usize>() {
        return Ok(i);
    }
    labels.iter().position(|l| l == t.text).ok_or_else(|| semantic(t.line, format!("unknown orbital '{}'", t.text)))
}

/// Parses `up <refs...> down <refs...>` starting at token `start`.
fn occupations(line: &Line<'_>, start: usize, labels: &[String]) -> Result<(Vec<usize>, Vec<usize>), InputError> {
    let up_kw = line.get(start, "'up'")?;
    if up_kw.text != "up" {
        return Err(up_kw.err("expected 'up'"));
    }
    let mut up = Vec::new();
    let mut down = Vec::new();
    let mut seen_down = false;
    for t in &line.tokens[start + 1..] {
        if t.text == "down" {
            if seen_down {
                return Err(t.err("'down' given twice"));
            }
            seen_down = true;
            continue;
        }
        let idx = orbital_ref(t, labels)?;
        if seen_down {
            down.push(idx);
        } else {
            up.push(idx);
        }
    }
    if !seen_down {
        return Err(InputError::Syntax { line: line.number, column: line.end_column, message: "missing 'down'".into() });
    }
    Ok((up, down))
}

struct PendingCsf {
    line: usize,
    label: String,
    coefficient: f64,
    determinants: Vec<Determinant>,
}

/// An `orbital` line awaiting basis resolution: line number, name, terms.
type PendingOrbital<'a> = (usize, String, Vec<(Token<'a>, f64)>);

/// Parses and validates a system description.
pub fn parse_system(text: &str) -> Result<MolecularSystem, InputError> {
    let mut section: Option<Section> = None;
    let mut electrons: Option<(usize, usize, usize)> = None;
    let mut nuclei: Vec<(usize, Nucleus)> = Vec::new();
    let mut basis: Vec<(usize, BasisFunction)> = Vec::new();
    let mut orbitals: Vec<(usize, Orbital)> = Vec::new();
    let mut pending_orbital_terms: Vec<PendingOrbital<'_>> = Vec::new();
    let mut ecps: Vec<(usize, SemilocalEcp)> = Vec::new();
    let mut csf_lines: Vec<(usize, Line<'_>)> = Vec::new();
    let mut reference: Option<Token<'_>> = None;
    let mut jastrow = JastrowParams::default();
    let mut seen_jastrow_keys: Vec<String> = Vec::new();
    let mut run = BTreeMap::new();
    let mut seen_sections: Vec<Section> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let line = tokenize(number, raw);
        let Some(head) = line.tokens.first().copied() else { continue };

        if head.text.starts_with('[') {
            line.expect_len(1, "[section]")?;
            let name = head
                .text
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| head.err("malformed section header"))?;
            let s = match name {
                "geometry" => Section::Geometry,
                "orbitals" => Section::Orbitals,
                "ecp" => Section::Ecp,
                "determinants" => Section::Determinants,
                "jastrow" => Section::Jastrow,
                "run" => Section::Run,
                other => return Err(head.err(format!("unknown section '{other}'"))),
            };
            if seen_sections.contains(&s) {
                return Err(head.err(format!("section [{name}] repeated")));
            }
            seen_sections.push(s);
            section = Some(s);
            continue;
        }

        let Some(current) = section else {
            return Err(head.err("content before the first section header"));
        };
        match current {
            Section::Geometry => match head.text {
                "electrons" => {
                    line.expect_len(3, "electrons <n_up> <n_down>")?;
                    if electrons.is_some() {
                        return Err(head.err("electrons given twice"));
                    }
                    let up = line.tokens[1].parse("an electron count")?;
                    let down = line.tokens[2].parse("an electron count")?;
                    electrons = Some((up, down, number));
                }
                "atom" => {
                    let usage = "atom <label> <charge> <x> <y> <z> [ecp=<name>]";
                    if line.tokens.len() < 6 {
                        line.expect_len(6, usage)?;
                    }
                    let label = line.tokens[1].text.to_string();
                    let charge = line.tokens[2].number()?;
                    let pos = Vec3::new(line.tokens[3].number()?, line.tokens[4].number()?, line.tokens[5].number()?);
                    let opts = line.options(6, &["ecp"])?;
                    let mut n = Nucleus::new(label, charge, pos);
                    if let Some(e) = opts.get("ecp") {
                        n = n.with_ecp(e.text);
                    }
                    nuclei.push((number, n));
                }
                _ => return Err(head.err(format!("unknown [geometry] entry '{}'", head.text))),
            },
            Section::Orbitals => match head.text {
                "slater" => {
                    line.expect_len(4, "slater <label> <center> <zeta>")?;
                    basis.push((
                        number,
                        BasisFunction {
                            label: line.tokens[1].text.into(),
                            center: line.tokens[2].parse("a center index")?,
                            kind: BasisKind::Slater { zeta: line.tokens[3].number()? },
                        },
                    ));
                }
                "gaussian" => {
                    line.expect_len(4, "gaussian <label> <center> <shape>")?;
                    let shape: CartesianShape = line.tokens[3].parse("a shape (s, px, py, pz, dxx, ...)")?;
                    basis.push((
                        number,
                        BasisFunction {
                            label: line.tokens[1].text.into(),
                            center: line.tokens[2].parse("a center index")?,
                            kind: BasisKind::Gaussian { shape, primitives: Vec::new() },
                        },
                    ));
                }
                "prim" => {
                    line.expect_len(3, "prim <exponent> <coefficient>")?;
                    let p = Primitive { exponent: line.tokens[1].number()?, coefficient: line.tokens[2].number()? };
                    match basis.last_mut() {
                        Some((_, BasisFunction { kind: BasisKind::Gaussian { primitives, .. }, .. })) => primitives.push(p),
                        _ => return Err(head.err("'prim' must follow a 'gaussian' line")),
                    }
                }
                "orbital" => {
                    if line.tokens.len() < 4 || !line.tokens.len().is_multiple_of(2) {
                        return Err(InputError::Syntax {
                            line: number,
                            column: line.end_column,
                            message: "usage: orbital <label> <basis> <coef> [<basis> <coef> ...]".into(),
                        });
                    }
                    let mut terms = Vec::new();
                    for pair in line.tokens[2..].chunks(2) {
                        terms.push((pair[0], pair[1].number()?));
                    }
                    pending_orbital_terms.push((number, line.tokens[1].text.into(), terms));
                }
                _ => return Err(head.err(format!("unknown [orbitals] entry '{}'", head.text))),
            },
            Section::Ecp => match head.text {
                "ecp" => {
                    line.expect_len(4, "ecp <name> <z_full> <z_core>")?;
                    ecps.push((
                        number,
                        SemilocalEcp {
                            name: line.tokens[1].text.into(),
                            z_full: line.tokens[2].number()?,
                            z_core: line.tokens[3].number()?,
                            local: RadialChannel::default(),
                            nonlocal: Vec::new(),
                        },
                    ));
                }
                "local" | "channel" => {
                    let (usage, offset) =
                        if head.text == "local" { ("local <n> <alpha> <c>", 1) } else { ("channel <l> <n> <alpha> <c>", 2) };
                    line.expect_len(3 + offset, usage)?;
                    let term = RadialTerm {
                        power: line.tokens[offset].parse("an integer power")?,
                        exponent: line.tokens[offset + 1].number()?,
                        coefficient: line.tokens[offset + 2].number()?,
                    };
                    let Some((_, ecp)) = ecps.last_mut() else {
                        return Err(head.err(format!("'{}' must follow an 'ecp' line", head.text)));
                    };
                    if offset == 1 {
                        ecp.local.terms.push(term);
                    } else {
                        let l: u32 = line.tokens[1].parse("an angular momentum")?;
                        match ecp.nonlocal.iter_mut().find(|c| c.l == l) {
                            Some(c) => c.radial.terms.push(term),
                            None => ecp.nonlocal.push(NonlocalChannel { l, radial: RadialChannel::new(vec![term]) }),
                        }
                    }
                }
                _ => return Err(head.err(format!("unknown [ecp] entry '{}'", head.text))),
            },
            Section::Determinants => match head.text {
                "reference" => {
                    line.expect_len(2, "reference <csf-label>")?;
                    reference = Some(line.tokens[1]);
                }
                "csf" | "det" => csf_lines.push((number, line)),
                _ => return Err(head.err(format!("unknown [determinants] entry '{}'", head.text))),
            },
            Section::Jastrow => {
                let key = match head.text {
                    "cusp" => {
                        line.expect_len(2, "cusp on|off")?;
                        jastrow.cusp = match line.tokens[1].text {
                            "on" => true,
                            "off" => false,
                            _ => return Err(line.tokens[1].err("expected 'on' or 'off'")),
                        };
                        "cusp".to_string()
                    }
                    "ee" => {
                        let spin = line.get(1, "'anti' or 'para'")?;
                        let term = parse_pade(&line, 2)?;
                        match spin.text {
                            "anti" => jastrow.ee_anti = Some(term),
                            "para" => jastrow.ee_para = Some(term),
                            _ => return Err(spin.err("expected 'anti' or 'para'")),
                        }
                        format!("ee {}", spin.text)
                    }
                    "en" => {
                        let species = line.get(1, "a species label")?;
                        jastrow.en.push((species.text.into(), parse_pade(&line, 2)?));
                        format!("en {}", species.text)
                    }
                    "een" => {
                        let species = line.get(1, "a species label")?;
                        let opts = line.options(2, &["cutoff"])?;
                        let cutoff = opts.get("cutoff").ok_or_else(|| head.err("een needs cutoff=<radius>"))?.number()?;
                        jastrow.een.push(ThreeBodyTerm { species: species.text.into(), cutoff, monomials: Vec::new() });
                        format!("een {}", species.text)
                    }
                    "term" => {
                        line.expect_len(5, "term <l> <m> <n> <coef>")?;
                        let mono = ThreeBodyMonomial {
                            l: line.tokens[1].parse("a power")?,
                            m: line.tokens[2].parse("a power")?,
                            n: line.tokens[3].parse("a power")?,
                            coefficient: line.tokens[4].number()?,
                        };
                        let Some(t) = jastrow.een.last_mut() else {
                            return Err(head.err("'term' must follow an 'een' line"));
                        };
                        t.monomials.push(mono);
                        continue;
                    }
                    _ => return Err(head.err(format!("unknown [jastrow] entry '{}'", head.text))),
                };
                if seen_jastrow_keys.contains(&key) {
                    return Err(head.err(format!("'{key}' given twice")));
                }
                seen_jastrow_keys.push(key);
            }
            Section::Run => {
                let content = raw.split('#').next().unwrap_or("");
                let Some((k, v)) = content.split_once('=') else {
                    return Err(head.err("expected key = value"));
                };
                let (k, v) = (k.trim(), v.trim());
                if k.is_empty() || k.contains(char::is_whitespace) {
                    return Err(head.err("run keys are single words"));
                }
                if run.insert(k.to_string(), v.to_string()).is_some() {
                    return Err(head.err(format!("run key '{k}' given twice")));
                }
            }
        }
    }

    // Geometry.
    let (n_up, n_down, electrons_line) = electrons
        .ok_or(InputError::Semantic { line: None, message: "[geometry] needs an 'electrons <n_up> <n_down>' line".into() })?;
    let nucleus_lines: Vec<usize> = nuclei.iter().map(|(l, _)| *l).collect();
    let geometry = Geometry::new(nuclei.into_iter().map(|(_, n)| n).collect(), n_up, n_down).map_err(|e| {
        let line = match &e {
            SystemError::NonPositiveCharge { nucleus, .. } => nucleus_lines.get(*nucleus).copied(),
            SystemError::CoincidentNuclei(_, b) => nucleus_lines.get(*b).copied(),
            _ => Some(electrons_line),
        };
        InputError::Semantic { line, message: e.to_string() }
    })?;
    if geometry.nuclei().is_empty() {
        return Err(InputError::Semantic { line: None, message: "[geometry] has no atoms".into() });
    }

    // Orbitals.
    for (line, b) in &basis {
        b.validate(geometry.nuclei().len()).map_err(|e| semantic(*line, e.to_string()))?;
        if basis.iter().filter(|(_, o)| o.label == b.label).count() > 1 {
            return Err(semantic(*line, format!("duplicate basis label '{}'", b.label)));
        }
    }
    let basis_labels: Vec<String> = basis.iter().map(|(_, b)| b.label.clone()).collect();
    for (line, label, terms) in pending_orbital_terms {
        let mut resolved = Vec::new();
        for (t, c) in terms {
            let i = basis_labels
                .iter()
                .position(|l| l == t.text)
                .ok_or_else(|| semantic(line, format!("orbital '{label}' uses unknown basis function '{}'", t.text)))?;
            resolved.push((i, c));
        }
        orbitals.push((line, Orbital { label, terms: resolved }));
    }
    let basis: Vec<BasisFunction> = basis.into_iter().map(|(_, b)| b).collect();
    let orbital_set = if orbitals.is_empty() {
        OrbitalSet::from_basis(basis)
    } else {
        OrbitalSet::new(basis, orbitals.into_iter().map(|(_, o)| o).collect())
    };
    if orbital_set.is_empty() {
        return Err(InputError::Semantic { line: None, message: "[orbitals] defines no orbitals".into() });
    }
    for (spin, count) in [("spin-up", n_up), ("spin-down", n_down)] {
        if count > orbital_set.len() {
            return Err(semantic(
                electrons_line,
                SystemError::TooFewOrbitals { spin, electrons: count, orbitals: orbital_set.len() }.to_string(),
            ));
        }
    }

    // ECPs.
    for (line, e) in &ecps {
        e.validate().map_err(|err| semantic(*line, err.to_string()))?;
    }
    for (i, n) in geometry.nuclei().iter().enumerate() {
        if let Some(name) = &n.ecp {
            let Some((_, e)) = ecps.iter().find(|(_, e)| &e.name == name) else {
                return Err(semantic(nucleus_lines[i], format!("unknown ecp '{name}'")));
            };
            if (e.effective_charge() - n.charge).abs() > 1e-12 {
                return Err(semantic(
                    nucleus_lines[i],
                    format!("atom charge {} must equal z_full − z_core = {} for ecp '{name}'", n.charge, e.effective_charge()),
                ));
            }
        }
    }

    // Determinants.
    let orbital_labels: Vec<String> = orbital_set.orbitals.iter().map(|o| o.label.clone()).collect();
    let mut csfs: Vec<PendingCsf> = Vec::new();
    for (number, line) in &csf_lines {
        let head = line.tokens[0];
        if head.text == "csf" {
            let label = line.get(1, "a CSF label")?;
            let coefficient = line.get(2, "a coefficient")?.number()?;
            let determinants = if line.tokens.len() > 3 {
                let (up, down) = occupations(line, 3, &orbital_labels)?;
                vec![Determinant { weight: 1.0, up, down }]
            } else {
                Vec::new()
            };
            if csfs.iter().any(|c| c.label == label.text) {
                return Err(semantic(*number, format!("duplicate CSF label '{}'", label.text)));
            }
            csfs.push(PendingCsf { line: *number, label: label.text.into(), coefficient, determinants });
        } else {
            let weight = line.get(1, "a determinant weight")?.number()?;
            let (up, down) = occupations(line, 2, &orbital_labels)?;
            let Some(c) = csfs.last_mut() else {
                return Err(head.err("'det' must follow a 'csf' line"));
            };
            c.determinants.push(Determinant { weight, up, down });
        }
    }
    let expansion = if csfs.is_empty() {
        if reference.is_some() {
            return Err(InputError::Semantic { line: None, message: "'reference' given without CSFs".into() });
        }
        DeterminantExpansion::single(n_up, n_down)
    } else {
        let reference_index = match reference {
            Some(t) => csfs
                .iter()
                .position(|c| c.label == t.text)
                .ok_or_else(|| semantic(t.line, format!("unknown reference CSF '{}'", t.text)))?,
            None => 0,
        };
        for c in &csfs {
            if c.determinants.is_empty() {
                return Err(semantic(c.line, format!("CSF '{}' has no determinants", c.label)));
            }
            for d in &c.determinants {
                if d.up.len() != n_up || d.down.len() != n_down {
                    return Err(semantic(
                        c.line,
                        format!(
                            "CSF '{}' occupies {}↑/{}↓ orbitals for {n_up}↑/{n_down}↓ electrons",
                            c.label,
                            d.up.len(),
                            d.down.len()
                        ),
                    ));
                }
            }
        }
        let lines: Vec<usize> = csfs.iter().map(|c| c.line).collect();
        let built: Vec<Csf> =
            csfs.into_iter().map(|c| Csf { label: c.label, coefficient: c.coefficient, determinants: c.determinants }).collect();
        let e = DeterminantExpansion::new(built, reference_index)
            .map_err(|e| InputError::Semantic { line: lines.first().copied(), message: e.to_string() })?;
        e.validate_against(n_up, n_down, orbital_set.len())
            .map_err(|err| InputError::Semantic { line: None, message: err.to_string() })?;
        e
    };

    for (s, _) in &jastrow.en {
        if !geometry.nuclei().iter().any(|n| &n.label == s) {
            return Err(InputError::Semantic { line: None, message: format!("jastrow 'en' term for unknown species '{s}'") });
        }
    }
    for t in &jastrow.een {
        if !geometry.nuclei().iter().any(|n| n.label == t.species) {
            return Err(InputError::Semantic {
                line: None,
                message: format!("jastrow 'een' term for unknown species '{}'", t.species),
            });
        }
    }

    let system = MolecularSystem {
        geometry,
        orbitals: orbital_set,
        ecps: ecps.into_iter().map(|(_, e)| e).collect(),
        expansion,
        jastrow,
        run,
    };
    system.validate()?;
    Ok(system)
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn pade_text(t: &PadeTerm) -> String {
    let mut s = format!("b1={} b2={}", num(t.b1), num(t.b2));
    if !t.poly.is_empty() || t.cutoff != 0.0 {
        let _ = write!(s, " cutoff={}", num(t.cutoff));
    }
    if !t.poly.is_empty() {
        let p: Vec<String> = t.poly.iter().map(|v| num(*v)).collect();
        let _ = write!(s, " poly={}", p.join(","));
    }
    s
}

fn occ_text(d: &Determinant) -> String {
    let up: Vec<String> = d.up.iter().map(|i| i.to_string()).collect();
    let down: Vec<String> = d.down.iter().map(|i| i.to_string()).collect();
    format!("up {} down {}", up.join(" "), down.join(" ")).replace("  ", " ")
}

/// Serialises a system in the input format.
pub(crate) fn to_text(s: &MolecularSystem) -> String {
    let mut out = String::new();
    let g = &s.geometry;
    let _ = writeln!(out, "[geometry]");
    let _ = writeln!(out, "electrons {} {}", g.n_up(), g.n_down());
    for n in g.nuclei() {
        let _ =
            write!(out, "atom {} {} {} {} {}", n.label, num(n.charge), num(n.position.x), num(n.position.y), num(n.position.z));
        if let Some(e) = &n.ecp {
            let _ = write!(out, " ecp={e}");
        }
        out.push('\n');
    }

    let _ = writeln!(out, "\n[orbitals]");
    for b in &s.orbitals.basis {
        match &b.kind {
            BasisKind::Slater { zeta } => {
                let _ = writeln!(out, "slater {} {} {}", b.label, b.center, num(*zeta));
            }
            BasisKind::Gaussian { shape, primitives } => {
                let _ = writeln!(out, "gaussian {} {} {}", b.label, b.center, shape);
                for p in primitives {
                    let _ = writeln!(out, "prim {} {}", num(p.exponent), num(p.coefficient));
                }
            }
        }
    }
    for o in &s.orbitals.orbitals {
        let _ = write!(out, "orbital {}", o.label);
        for (i, c) in &o.terms {
            let _ = write!(out, " {} {}", s.orbitals.basis[*i].label, num(*c));
        }
        out.push('\n');
    }

    if !s.ecps.is_empty() {
        let _ = writeln!(out, "\n[ecp]");
        for e in &s.ecps {
            let _ = writeln!(out, "ecp {} {} {}", e.name, num(e.z_full), num(e.z_core));
            for t in &e.local.terms {
                let _ = writeln!(out, "local {} {} {}", t.power, num(t.exponent), num(t.coefficient));
            }
            for c in &e.nonlocal {
                for t in &c.radial.terms {
                    let _ = writeln!(out, "channel {} {} {} {}", c.l, t.power, num(t.exponent), num(t.coefficient));
                }
            }
        }
    }

    let _ = writeln!(out, "\n[determinants]");
    let ex = &s.expansion;
    let _ = writeln!(out, "reference {}", ex.csfs()[ex.reference()].label);
    for c in ex.csfs() {
        match c.determinants.as_slice() {
            [d] if d.weight == 1.0 => {
                let _ = writeln!(out, "csf {} {} {}", c.label, num(c.coefficient), occ_text(d));
            }
            dets => {
                let _ = writeln!(out, "csf {} {}", c.label, num(c.coefficient));
                for d in dets {
                    let _ = writeln!(out, "det {} {}", num(d.weight), occ_text(d));
                }
            }
        }
    }

    let j = &s.jastrow;
    let _ = writeln!(out, "\n[jastrow]");
    let _ = writeln!(out, "cusp {}", if j.cusp { "on" } else { "off" });
    if let Some(t) = &j.ee_anti {
        let _ = writeln!(out, "ee anti {}", pade_text(t));
    }
    if let Some(t) = &j.ee_para {
        let _ = writeln!(out, "ee para {}", pade_text(t));
    }
    for (sp, t) in &j.en {
        let _ = writeln!(out, "en {sp} {}", pade_text(t));
    }
    for t in &j.een {
        let _ = writeln!(out, "een {} cutoff={}", t.species, num(t.cutoff));
        for m in &t.monomials {
            let _ = writeln!(out, "term {} {} {} {}", m.l, m.m, m.n, num(m.coefficient));
        }
    }

    if !s.run.is_empty() {
        let _ = writeln!(out, "\n[run]");
        for (k, v) in &s.run {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    out
}
