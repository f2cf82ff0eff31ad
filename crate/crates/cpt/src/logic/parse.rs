//! Recursive-descent parser for the ASCII formula grammar.
//!
//! Precedence, tightest first: `!`, `&`, `|`, `->` (right associative).
//! Quantifiers take a parenthesized body: `exists x (...)`; the prefix may
//! itself be parenthesized: `(exists x)(...)`. Cardinality atoms are
//! `card{x : phi} = k` with `<=` and `>=` as derived syntax.

use super::{is_dp_name, Dialect, Formula, Term, Vocabulary};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Number(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Eq,
    Neq,
    Le,
    Ge,
    Amp,
    Pipe,
    Bang,
    Arrow,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '(' => {
                out.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push((i, Tok::RParen));
                i += 1;
            }
            '{' => {
                out.push((i, Tok::LBrace));
                i += 1;
            }
            '}' => {
                out.push((i, Tok::RBrace));
                i += 1;
            }
            ':' => {
                out.push((i, Tok::Colon));
                i += 1;
            }
            ',' => {
                out.push((i, Tok::Comma));
                i += 1;
            }
            '=' => {
                out.push((i, Tok::Eq));
                i += 1;
            }
            '&' => {
                out.push((i, Tok::Amp));
                i += 1;
            }
            '|' => {
                out.push((i, Tok::Pipe));
                i += 1;
            }
            '!' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((i, Tok::Neq));
                    i += 2;
                } else {
                    out.push((i, Tok::Bang));
                    i += 1;
                }
            }
            '<' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((i, Tok::Le));
                    i += 2;
                } else {
                    return Err(syntax(i, "expected `<=`"));
                }
            }
            '>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push((i, Tok::Ge));
                    i += 2;
                } else {
                    return Err(syntax(i, "expected `>=`"));
                }
            }
            '-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    out.push((i, Tok::Arrow));
                    i += 2;
                } else {
                    return Err(syntax(i, "expected `->`"));
                }
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                    i += 1;
                }
                let n: u64 = text[start..i]
                    .parse()
                    .map_err(|_| syntax(start, "number too large"))?;
                out.push((start, Tok::Number(n)));
            }
            _ => return Err(syntax(i, &format!("unexpected character `{c}`"))),
        }
    }
    Ok(out)
}

fn syntax(pos: usize, msg: &str) -> Error {
    Error::invalid(format!("syntax error at offset {pos}: {msg}"))
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    vocab: &'a Vocabulary,
    end: usize,
}

pub fn parse_formula(text: &str, vocab: &Vocabulary, dialect: Dialect) -> Result<Formula> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        vocab,
        end: text.len(),
    };
    let f = p.implies()?;
    if p.pos < p.toks.len() {
        return Err(syntax(p.toks[p.pos].0, "trailing input"));
    }
    f.check_dialect(dialect)?;
    Ok(f)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let at = self.here();
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => Err(syntax(at, &format!("expected {what}"))),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        let at = self.here();
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            _ => Err(syntax(at, &format!("expected {what}"))),
        }
    }

    fn implies(&mut self) -> Result<Formula> {
        let lhs = self.disj()?;
        if self.peek() == Some(&Tok::Arrow) {
            self.next();
            let rhs = self.implies()?;
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<Formula> {
        let mut f = self.conj()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.next();
            f = f.or(self.conj()?);
        }
        Ok(f)
    }

    fn conj(&mut self) -> Result<Formula> {
        let mut f = self.unary()?;
        while self.peek() == Some(&Tok::Amp) {
            self.next();
            f = f.and(self.unary()?);
        }
        Ok(f)
    }

    fn unary(&mut self) -> Result<Formula> {
        if self.peek() == Some(&Tok::Bang) {
            self.next();
            return Ok(self.unary()?.not());
        }
        self.primary()
    }

    fn quantifier_kind(t: &Tok) -> Option<&'static str> {
        match t {
            Tok::Ident(s) if s == "forall" => Some("forall"),
            Tok::Ident(s) if s == "exists" => Some("exists"),
            Tok::Ident(s) if s == "Qt" => Some("Qt"),
            _ => None,
        }
    }

    fn quantified(&mut self, kind: &str) -> Result<Formula> {
        let var = self.var_name()?;
        Ok(self.finish_quantifier(kind, var)?)
    }

    fn finish_quantifier(&mut self, kind: &str, var: String) -> Result<Formula> {
        self.expect(Tok::LParen, "`(` before quantifier body")?;
        let body = Box::new(self.implies()?);
        self.expect(Tok::RParen, "`)` after quantifier body")?;
        Ok(match kind {
            "forall" => Formula::Forall(var, body),
            "exists" => Formula::Exists(var, body),
            _ => Formula::CountAbove(var, body),
        })
    }

    fn var_name(&mut self) -> Result<String> {
        let at = self.here();
        let name = self.ident("variable name")?;
        if Self::quantifier_kind(&Tok::Ident(name.clone())).is_some()
            || super::KEYWORDS.contains(&name.as_str())
            || is_dp_name(&name)
            || self.vocab.rels.contains_key(&name)
            || self.vocab.funs.contains_key(&name)
            || self.vocab.cons.contains(&name)
        {
            return Err(syntax(at, &format!("`{name}` cannot be a variable")));
        }
        Ok(name)
    }

    fn primary(&mut self) -> Result<Formula> {
        let at = self.here();
        match self.peek() {
            None => Err(syntax(at, "unexpected end of formula")),
            Some(Tok::Ident(s)) if s == "true" => {
                self.next();
                Ok(Formula::True)
            }
            Some(Tok::Ident(s)) if s == "false" => {
                self.next();
                Ok(Formula::False)
            }
            Some(t) if Self::quantifier_kind(t).is_some() => {
                let kind = Self::quantifier_kind(t).unwrap();
                self.next();
                self.quantified(kind)
            }
            Some(Tok::Ident(s)) if s == "card" => {
                self.next();
                self.card_atom()
            }
            Some(Tok::LParen) => {
                let prefix_form = self.peek2().and_then(Self::quantifier_kind).is_some()
                    && matches!(self.toks.get(self.pos + 2), Some((_, Tok::Ident(_))))
                    && matches!(self.toks.get(self.pos + 3), Some((_, Tok::RParen)));
                if prefix_form {
                    self.next();
                    let kind = Self::quantifier_kind(self.peek().unwrap()).unwrap();
                    self.next();
                    let var = self.var_name()?;
                    self.expect(Tok::RParen, "`)` after quantifier prefix")?;
                    return self.finish_quantifier(kind, var);
                }
                self.next();
                let f = self.implies()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(_)) => self.atom(),
            Some(_) => Err(syntax(at, "expected a formula")),
        }
    }

    fn card_atom(&mut self) -> Result<Formula> {
        self.expect(Tok::LBrace, "`{` after card")?;
        let var = self.var_name()?;
        self.expect(Tok::Colon, "`:` in card atom")?;
        let body = self.implies()?;
        self.expect(Tok::RBrace, "`}` closing card atom")?;
        let at = self.here();
        let op = self
            .next()
            .ok_or_else(|| syntax(at, "expected `=`, `<=`, or `>=`"))?;
        let at = self.here();
        let k = match self.next() {
            Some(Tok::Number(k)) => k,
            _ => return Err(syntax(at, "expected a count")),
        };
        let exact = |i: u64| Formula::Card(var.clone(), Box::new(body.clone()), i);
        match op {
            Tok::Eq => Ok(exact(k)),
            Tok::Le => Ok((0..=k).map(exact).reduce(Formula::or).unwrap()),
            Tok::Ge => {
                if k == 0 {
                    Ok(Formula::True)
                } else {
                    Ok((0..k).map(exact).reduce(Formula::or).unwrap().not())
                }
            }
            _ => Err(syntax(at, "expected `=`, `<=`, or `>=`")),
        }
    }

    /// An atom starting with an identifier: relation or dynamic-predicate
    /// application, or a term comparison (`t = s`, `t != s`, `t in s`).
    fn atom(&mut self) -> Result<Formula> {
        let at = self.here();
        let name = self.ident("identifier")?;
        let applied = self.peek() == Some(&Tok::LParen)
            && (is_dp_name(&name)
                || self.vocab.rels.contains_key(&name)
                || self.vocab.funs.contains_key(&name));
        if applied {
            self.next();
            let mut args = vec![self.term()?];
            while self.peek() == Some(&Tok::Comma) {
                self.next();
                args.push(self.term()?);
            }
            self.expect(Tok::RParen, "`)` after arguments")?;
            if let Some(rest) = name.strip_prefix("DP").filter(|_| is_dp_name(&name)) {
                if args.len() != 1 {
                    return Err(syntax(at, "dynamic predicates are unary"));
                }
                let ix: usize = rest
                    .parse()
                    .map_err(|_| syntax(at, "dynamic predicate index too large"))?;
                return Ok(Formula::Dyn(ix, args.pop().unwrap()));
            }
            if let Some(&ar) = self.vocab.rels.get(&name) {
                if args.len() != ar {
                    return Err(syntax(
                        at,
                        &format!("relation `{name}` expects {ar} arguments"),
                    ));
                }
                return Ok(Formula::Pred(name, args));
            }
            if args.len() != 1 {
                return Err(syntax(at, &format!("function `{name}` is unary")));
            }
            let lhs = Term::App(name, Box::new(args.pop().unwrap()));
            return self.comparison(lhs);
        }
        let lhs = if self.vocab.cons.contains(&name) {
            Term::Const(name)
        } else {
            if super::KEYWORDS.contains(&name.as_str())
                || self.vocab.rels.contains_key(&name)
                || self.vocab.funs.contains_key(&name)
            {
                return Err(syntax(at, &format!("`{name}` cannot start a term")));
            }
            Term::Var(name)
        };
        self.comparison(lhs)
    }

    fn comparison(&mut self, lhs: Term) -> Result<Formula> {
        let at = self.here();
        match self.next() {
            Some(Tok::Eq) => Ok(Formula::Eq(lhs, self.term()?)),
            Some(Tok::Neq) => Ok(Formula::Eq(lhs, self.term()?).not()),
            Some(Tok::Ident(s)) if s == "in" => Ok(Formula::Mem(lhs, self.term()?)),
            _ => Err(syntax(at, "expected `=`, `!=`, or `in`")),
        }
    }

    fn term(&mut self) -> Result<Term> {
        let at = self.here();
        let name = self.ident("term")?;
        if super::KEYWORDS.contains(&name.as_str()) {
            return Err(syntax(at, &format!("`{name}` cannot start a term")));
        }
        if self.peek() == Some(&Tok::LParen) {
            if !self.vocab.funs.contains_key(&name) {
                return Err(syntax(at, &format!("`{name}` is not a function")));
            }
            self.next();
            let inner = self.term()?;
            self.expect(Tok::RParen, "`)` after function argument")?;
            return Ok(Term::App(name, Box::new(inner)));
        }
        if self.vocab.cons.contains(&name) {
            Ok(Term::Const(name))
        } else if self.vocab.rels.contains_key(&name)
            || self.vocab.funs.contains_key(&name)
            || is_dp_name(&name)
        {
            Err(syntax(at, &format!("`{name}` is not a term")))
        } else {
            Ok(Term::Var(name))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocabulary {
        let mut v = Vocabulary::default();
        v.rels.insert("P".into(), 1);
        v.rels.insert("R".into(), 2);
        v.funs.insert("f".into(), 1);
        v.cons.insert("c".into());
        v
    }

    fn p(text: &str) -> Formula {
        parse_formula(text, &vocab(), Dialect::CardT).unwrap()
    }

    #[test]
    fn atoms_and_connectives() {
        assert_eq!(
            p("P(x) & R(x,y) | x = y"),
            p("(P(x) & R(x,y)) | (x = y)")
        );
        assert_eq!(p("P(x) -> P(x) -> P(x)"), p("P(x) -> (P(x) -> P(x))"));
        assert_eq!(p("!x = y"), p("!(x = y)"));
        assert_eq!(p("x != y"), p("!(x = y)"));
    }

    #[test]
    fn quantifier_forms() {
        assert_eq!(p("(exists y)(x in y)"), p("exists y (x in y)"));
        let f = p("forall x (exists y (R(x,y)))");
        assert_eq!(f.quantifier_depth(), 2);
    }

    #[test]
    fn terms() {
        let f = p("f(x) = c");
        assert_eq!(
            f,
            Formula::Eq(
                Term::App("f".into(), Box::new(Term::Var("x".into()))),
                Term::Const("c".into())
            )
        );
        assert!(parse_formula("g(x) = c", &vocab(), Dialect::Fo).is_err());
    }

    #[test]
    fn dynamic_predicates() {
        assert_eq!(
            p("DP0(x)"),
            Formula::Dyn(0, Term::Var("x".into()))
        );
        assert_eq!(p("DP12(f(x))").max_dyn_index(), Some(12));
    }

    #[test]
    fn card_sugar() {
        assert_eq!(
            p("card{x : P(x)} <= 1"),
            p("card{x : P(x)} = 0 | card{x : P(x)} = 1")
        );
        assert_eq!(
            p("card{x : P(x)} >= 2"),
            p("!(card{x : P(x)} = 0 | card{x : P(x)} = 1)")
        );
        assert_eq!(p("card{x : P(x)} >= 0"), Formula::True);
    }

    #[test]
    fn dialect_gate() {
        assert!(parse_formula("card{x : P(x)} = 2", &vocab(), Dialect::Card).is_ok());
        assert!(parse_formula("card{x : P(x)} = 2", &vocab(), Dialect::Fo).is_err());
        assert!(parse_formula("Qt x (P(x))", &vocab(), Dialect::Card).is_err());
        assert!(parse_formula("Qt x (P(x))", &vocab(), Dialect::CardT).is_ok());
    }

    #[test]
    fn round_trip() {
        for text in [
            "P(x) & !R(x,y) -> (exists z (z in y | f(z) = c))",
            "card{x : Qt y (R(x,y))} = 3",
            "forall v (DP1(v) -> v != c)",
            "true & !false",
        ] {
            let f = p(text);
            assert_eq!(p(&f.to_string()), f, "round trip of `{text}`");
        }
    }

    #[test]
    fn rejects_garbage() {
        for text in ["P(x", "x =", "exists P (true)", "card{x : P(x)} = x", "x ** y"] {
            assert!(
                parse_formula(text, &vocab(), Dialect::CardT).is_err(),
                "`{text}` should fail"
            );
        }
    }
}
