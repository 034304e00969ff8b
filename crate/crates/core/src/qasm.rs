//! Reader and writer for the OpenQASM 2.0 subset used by this crate.
//!
//! Accepted statements: the `OPENQASM 2.0;` header, `include "qelib1.inc";`,
//! a single `qreg`, at most one `creg`, the gates `h x rx rz rzz cx cp swap`
//! and `measure q[i] -> c[j];`. Angle arguments may be arithmetic
//! expressions over numbers and `pi`. Anything else is rejected with a
//! line/column diagnostic.

use std::fmt::Write as _;

use thiserror::Error;

use crate::circuit::{Circuit, Gate, GateKind};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        col,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (li, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            let (l, c) = (li + 1, i + 1);
            if ch.is_whitespace() {
                i += 1;
            } else if ch == '/' && chars.get(i + 1) == Some(&'/') {
                break;
            } else if ch.is_ascii_alphabetic() || ch == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                out.push(Token {
                    tok: Tok::Ident(word),
                    line: l,
                    col: c,
                });
            } else if ch.is_ascii_digit() || ch == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text
                    .parse()
                    .map_err(|_| err(l, c, format!("malformed number '{text}'")))?;
                out.push(Token {
                    tok: Tok::Num(v),
                    line: l,
                    col: c,
                });
            } else if ch == '"' {
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(err(l, c, "unterminated string"));
                }
                let s: String = chars[start..i].iter().collect();
                i += 1;
                out.push(Token {
                    tok: Tok::Str(s),
                    line: l,
                    col: c,
                });
            } else if ch == '-' && chars.get(i + 1) == Some(&'>') {
                out.push(Token {
                    tok: Tok::Arrow,
                    line: l,
                    col: c,
                });
                i += 2;
            } else if "[](),;+-*/".contains(ch) {
                out.push(Token {
                    tok: Tok::Sym(ch),
                    line: l,
                    col: c,
                });
                i += 1;
            } else {
                return Err(err(l, c, format!("unexpected character '{ch}'")));
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    eof: (usize, usize),
    qreg: Option<(String, usize)>,
    creg: Option<(String, usize)>,
    gates: Vec<Gate>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map_or(self.eof, |t| (t.line, t.col))
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| err(self.eof.0, self.eof.1, "unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_sym(&mut self, s: char) -> Result<(), ParseError> {
        let t = self.next()?;
        match t.tok {
            Tok::Sym(c) if c == s => Ok(()),
            other => Err(err(t.line, t.col, format!("expected '{s}', found {other:?}"))),
        }
    }

    fn expect_ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        let t = self.next()?;
        match t.tok {
            Tok::Ident(s) => Ok((s, t.line, t.col)),
            other => Err(err(t.line, t.col, format!("expected identifier, found {other:?}"))),
        }
    }

    fn expect_uint(&mut self) -> Result<usize, ParseError> {
        let t = self.next()?;
        match t.tok {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            other => Err(err(t.line, t.col, format!("expected integer, found {other:?}"))),
        }
    }

    fn eat_sym(&mut self, s: char) -> bool {
        if matches!(self.peek(), Some(Token { tok: Tok::Sym(c), .. }) if *c == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<f64, ParseError> {
        let mut v = self.term()?;
        loop {
            if self.eat_sym('+') {
                v += self.term()?;
            } else if self.eat_sym('-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    // term := factor (('*'|'/') factor)*
    fn term(&mut self) -> Result<f64, ParseError> {
        let mut v = self.factor()?;
        loop {
            if self.eat_sym('*') {
                v *= self.factor()?;
            } else if self.eat_sym('/') {
                v /= self.factor()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn factor(&mut self) -> Result<f64, ParseError> {
        if self.eat_sym('-') {
            return Ok(-self.factor()?);
        }
        if self.eat_sym('(') {
            let v = self.expr()?;
            self.expect_sym(')')?;
            return Ok(v);
        }
        let t = self.next()?;
        match t.tok {
            Tok::Num(v) => Ok(v),
            Tok::Ident(ref s) if s == "pi" => Ok(std::f64::consts::PI),
            other => Err(err(t.line, t.col, format!("expected angle expression, found {other:?}"))),
        }
    }

    fn qubit_ref(&mut self) -> Result<usize, ParseError> {
        let (name, l, c) = self.expect_ident()?;
        let (reg, size) = self
            .qreg
            .clone()
            .ok_or_else(|| err(l, c, "qubit used before qreg declaration"))?;
        if name != reg {
            return Err(err(l, c, format!("unknown quantum register '{name}'")));
        }
        self.expect_sym('[')?;
        let (il, ic) = self.here();
        let idx = self.expect_uint()?;
        self.expect_sym(']')?;
        if idx >= size {
            return Err(err(il, ic, format!("index {idx} out of range for {reg}[{size}]")));
        }
        Ok(idx)
    }

    fn statement(&mut self) -> Result<(), ParseError> {
        let (word, l, c) = self.expect_ident()?;
        match word.as_str() {
            "OPENQASM" => {
                let t = self.next()?;
                if t.tok != Tok::Num(2.0) {
                    return Err(err(t.line, t.col, "only OPENQASM 2.0 is supported"));
                }
            }
            "include" => {
                let t = self.next()?;
                if t.tok != Tok::Str("qelib1.inc".into()) {
                    return Err(err(t.line, t.col, "only qelib1.inc may be included"));
                }
            }
            "qreg" | "creg" => {
                let (name, _, _) = self.expect_ident()?;
                self.expect_sym('[')?;
                let size = self.expect_uint()?;
                self.expect_sym(']')?;
                let slot = if word == "qreg" {
                    &mut self.qreg
                } else {
                    &mut self.creg
                };
                if slot.is_some() {
                    return Err(err(l, c, format!("only one {word} declaration is supported")));
                }
                if word == "qreg" && size == 0 {
                    return Err(err(l, c, "qreg must have at least one qubit"));
                }
                *slot = Some((name, size));
            }
            "measure" => {
                let q = self.qubit_ref()?;
                let t = self.next()?;
                if t.tok != Tok::Arrow {
                    return Err(err(t.line, t.col, "expected '->' in measure"));
                }
                let (name, cl, cc) = self.expect_ident()?;
                let (reg, size) = self
                    .creg
                    .clone()
                    .ok_or_else(|| err(cl, cc, "measure target used before creg declaration"))?;
                if name != reg {
                    return Err(err(cl, cc, format!("unknown classical register '{name}'")));
                }
                self.expect_sym('[')?;
                let (il, ic) = self.here();
                let idx = self.expect_uint()?;
                self.expect_sym(']')?;
                if idx >= size {
                    return Err(err(il, ic, format!("index {idx} out of range for {reg}[{size}]")));
                }
                self.gates.push(Gate::measure(q));
            }
            "h" | "x" | "rx" | "rz" | "rzz" | "cx" | "cp" | "swap" => {
                let angle = if matches!(word.as_str(), "rx" | "rz" | "rzz" | "cp") {
                    self.expect_sym('(')?;
                    let v = self.expr()?;
                    self.expect_sym(')')?;
                    Some(v)
                } else {
                    None
                };
                let mut qs = vec![self.qubit_ref()?];
                while self.eat_sym(',') {
                    qs.push(self.qubit_ref()?);
                }
                let kind = match (word.as_str(), angle) {
                    ("h", _) => GateKind::H,
                    ("x", _) => GateKind::X,
                    ("rx", Some(t)) => GateKind::Rx(t),
                    ("rz", Some(t)) => GateKind::Rz(t),
                    ("rzz", Some(t)) => GateKind::Rzz(t),
                    ("cx", _) => GateKind::Cnot,
                    ("cp", Some(t)) => GateKind::Cphase(t),
                    ("swap", _) => GateKind::Swap,
                    _ => unreachable!(),
                };
                let g = Gate::new(kind, &qs).map_err(|e| err(l, c, e.to_string()))?;
                self.gates.push(g);
            }
            other => return Err(err(l, c, format!("unsupported statement or gate '{other}'"))),
        }
        self.expect_sym(';')
    }
}

/// Parses OpenQASM-subset source text into a circuit.
pub fn parse_circuit(src: &str) -> Result<Circuit, ParseError> {
    let toks = lex(src)?;
    let eof = (src.lines().count().max(1), 1);
    let mut p = Parser {
        toks,
        pos: 0,
        eof,
        qreg: None,
        creg: None,
        gates: Vec::new(),
    };
    while p.peek().is_some() {
        p.statement()?;
    }
    let (_, n) = p
        .qreg
        .ok_or_else(|| err(eof.0, eof.1, "missing qreg declaration"))?;
    Circuit::from_gates(n, p.gates).map_err(|e| err(eof.0, eof.1, e.to_string()))
}

/// Serializes a circuit. Angles use Rust's shortest round-trip float
/// formatting, so `parse_circuit(&to_qasm(c)) == c`.
pub fn to_qasm(circuit: &Circuit) -> String {
    let n = circuit.n_qubits();
    let mut s = String::new();
    s.push_str("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{n}];");
    if circuit.has_measurement() {
        let _ = writeln!(s, "creg c[{n}];");
    }
    for g in circuit.gates() {
        if g.kind() == GateKind::Measure {
            let q = g.qubits()[0];
            let _ = writeln!(s, "measure q[{q}] -> c[{q}];");
        } else {
            let _ = writeln!(s, "{g};");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_subset() {
        let src = r#"OPENQASM 2.0;
include "qelib1.inc";
// comment
qreg q[3];
creg c[3];
h q[0];
x q[1];
rx(pi/2) q[2];
rz(-0.25*pi) q[0];
rzz(0.4) q[0],q[1];
cx q[1],q[2];
cp(pi/(2*2)) q[2],q[0];
swap q[0],q[2];
measure q[1] -> c[1];
"#;
        let c = parse_circuit(src).unwrap();
        assert_eq!(c.n_qubits(), 3);
        assert_eq!(c.len(), 9);
        assert_eq!(c.gates()[2].kind(), GateKind::Rx(std::f64::consts::FRAC_PI_2));
        assert_eq!(c.gates()[3].kind(), GateKind::Rz(-0.25 * std::f64::consts::PI));
        assert_eq!(c.gates()[6].kind(), GateKind::Cphase(std::f64::consts::FRAC_PI_4));
        assert_eq!(c.gates()[8], Gate::measure(1));
    }

    #[test]
    fn unknown_gate_named_with_location() {
        let src = "OPENQASM 2.0;\nqreg q[3];\nccx q[0],q[1],q[2];\n";
        let e = parse_circuit(src).unwrap_err();
        assert_eq!((e.line, e.col), (3, 1));
        assert!(e.message.contains("ccx"), "{e}");
    }

    #[test]
    fn index_out_of_range() {
        let e = parse_circuit("qreg q[2];\nh q[2];\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 5));
    }

    #[test]
    fn rejects_missing_semicolon_and_bad_char() {
        assert!(parse_circuit("qreg q[2];\nh q[0]\n").is_err());
        let e = parse_circuit("qreg q[2];\nh q[0]; @\n").unwrap_err();
        assert_eq!((e.line, e.col), (2, 9));
        assert!(parse_circuit("qreg q[2];\nqreg r[2];\n").is_err());
        assert!(parse_circuit("h q[0];").is_err());
        assert!(parse_circuit("qreg q[2];\ncx q[0],q[0];").is_err());
        assert!(parse_circuit("qreg q[2];\ncreg c[1];\nmeasure q[1] -> c[1];").is_err());
    }

    #[test]
    fn round_trip() {
        let c = Circuit::from_gates(
            3,
            vec![
                Gate::rz(0.1 + 0.2, 0),
                Gate::cphase(std::f64::consts::PI / 1024.0, 1, 2),
                Gate::measure(2),
            ],
        )
        .unwrap();
        assert_eq!(parse_circuit(&to_qasm(&c)).unwrap(), c);
        let empty = Circuit::new(4).unwrap();
        assert_eq!(parse_circuit(&to_qasm(&empty)).unwrap(), empty);
    }
}
