//! Line-oriented text form of a [`Circuit`], used for debugging and golden
//! files.
//!
//! ```text
//! circuit qubits=<n> params=<n> clbits=<n>
//! ry q<t> p<k>
//! cry q<c> q<t> p<k>
//! cx q<c> q<t>
//! x q<t>
//! pry q<t> p<k> [q<a>,q<b>,...] [q<c>,...]    # Ry if every register != 0
//! measure q<q> c<s>
//! reset q<q>
//! if <pred> {
//!   <gate lines>
//! }
//! ```
//!
//! `<pred>` is `c<s>==0`, `c<s>==1`, `any(c<a>,c<b>,...)` or
//! `and(<pred>,<pred>)`, written without spaces. Body lines are indented by
//! two spaces per nesting level; `#` starts a comment.

use std::fmt::Write as _;

use super::{Circuit, CircuitError, Gate, Predicate};

pub fn to_text(c: &Circuit) -> String {
    let mut out = format!(
        "circuit qubits={} params={} clbits={}\n",
        c.n_qubits, c.n_params, c.n_classical
    );
    write_gates(&mut out, &c.gates, 0);
    out
}

fn write_gates(out: &mut String, gates: &[Gate], indent: usize) {
    let pad = "  ".repeat(indent);
    for g in gates {
        out.push_str(&pad);
        match g {
            Gate::Ry { target, param } => writeln!(out, "ry q{target} p{param}"),
            Gate::ControlledRy {
                control,
                target,
                param,
            } => writeln!(out, "cry q{control} q{target} p{param}"),
            Gate::Cnot { control, target } => writeln!(out, "cx q{control} q{target}"),
            Gate::X { target } => writeln!(out, "x q{target}"),
            Gate::PresenceRy {
                registers,
                target,
                param,
            } => {
                let regs: Vec<String> = registers
                    .iter()
                    .map(|r| {
                        let qs: Vec<String> = r.iter().map(|q| format!("q{q}")).collect();
                        format!("[{}]", qs.join(","))
                    })
                    .collect();
                writeln!(out, "pry q{target} p{param} {}", regs.join(" "))
            }
            Gate::Measure { qubit, slot } => writeln!(out, "measure q{qubit} c{slot}"),
            Gate::Reset { qubit } => writeln!(out, "reset q{qubit}"),
            Gate::Conditioned { predicate, body } => {
                writeln!(out, "if {} {{", predicate_to_text(predicate)).unwrap();
                write_gates(out, body, indent + 1);
                writeln!(out, "{pad}}}")
            }
        }
        .unwrap();
    }
}

pub fn predicate_to_text(p: &Predicate) -> String {
    match p {
        Predicate::SlotEquals { slot, bit } => format!("c{slot}=={}", u8::from(*bit)),
        Predicate::AnyNonZero { slots } => {
            let s: Vec<String> = slots.iter().map(|s| format!("c{s}")).collect();
            format!("any({})", s.join(","))
        }
        Predicate::And(a, b) => format!("and({},{})", predicate_to_text(a), predicate_to_text(b)),
    }
}

pub fn from_text(src: &str) -> Result<Circuit, CircuitError> {
    let mut lines = src
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or(CircuitError::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let mut circuit = parse_header(line, header)?;
    let mut stack: Vec<(Predicate, Vec<Gate>)> = Vec::new();
    let mut top: Vec<Gate> = Vec::new();
    for (line, text) in lines {
        let err = |message: String| CircuitError::Parse { line, message };
        let toks: Vec<&str> = text.split_whitespace().collect();
        let gate = match toks.as_slice() {
            ["}"] => {
                let (predicate, body) = stack.pop().ok_or_else(|| err("unmatched '}'".into()))?;
                Gate::Conditioned { predicate, body }
            }
            ["if", pred, "{"] => {
                let p = parse_predicate(pred).map_err(err)?;
                stack.push((p, Vec::new()));
                continue;
            }
            ["ry", t, p] => Gate::Ry {
                target: index(t, 'q').map_err(err)?,
                param: index(p, 'p').map_err(err)?,
            },
            ["cry", c, t, p] => Gate::ControlledRy {
                control: index(c, 'q').map_err(err)?,
                target: index(t, 'q').map_err(err)?,
                param: index(p, 'p').map_err(err)?,
            },
            ["cx", c, t] => Gate::Cnot {
                control: index(c, 'q').map_err(err)?,
                target: index(t, 'q').map_err(err)?,
            },
            ["x", t] => Gate::X {
                target: index(t, 'q').map_err(err)?,
            },
            ["pry", t, p, regs @ ..] => {
                let mut registers = Vec::new();
                for r in regs {
                    let inner = r
                        .strip_prefix('[')
                        .and_then(|r| r.strip_suffix(']'))
                        .ok_or_else(|| err(format!("bad register {r:?}")))?;
                    let qs = inner
                        .split(',')
                        .map(|q| index(q, 'q'))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(err)?;
                    registers.push(qs);
                }
                Gate::PresenceRy {
                    registers,
                    target: index(t, 'q').map_err(err)?,
                    param: index(p, 'p').map_err(err)?,
                }
            }
            ["measure", q, s] => Gate::Measure {
                qubit: index(q, 'q').map_err(err)?,
                slot: index(s, 'c').map_err(err)?,
            },
            ["reset", q] => Gate::Reset {
                qubit: index(q, 'q').map_err(err)?,
            },
            _ => return Err(err(format!("unrecognized line {text:?}"))),
        };
        match stack.last_mut() {
            Some((_, body)) => body.push(gate),
            None => top.push(gate),
        }
    }
    if !stack.is_empty() {
        return Err(CircuitError::Parse {
            line: src.lines().count(),
            message: "unterminated 'if' block".into(),
        });
    }
    circuit.gates = top;
    Ok(circuit)
}

fn parse_header(line: usize, header: &str) -> Result<Circuit, CircuitError> {
    let err = |message: String| CircuitError::Parse { line, message };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.first() != Some(&"circuit") || toks.len() != 4 {
        return Err(err(format!("expected circuit header, got {header:?}")));
    }
    let mut vals = [0usize; 3];
    for (slot, key) in vals.iter_mut().zip(["qubits=", "params=", "clbits="]) {
        let tok = toks
            .iter()
            .find_map(|t| t.strip_prefix(key))
            .ok_or_else(|| err(format!("missing {key}")))?;
        *slot = tok.parse().map_err(|_| err(format!("bad count {tok:?}")))?;
    }
    Ok(Circuit::new(vals[0], vals[1], vals[2]))
}

fn index(tok: &str, prefix: char) -> Result<usize, String> {
    tok.strip_prefix(prefix)
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| format!("expected {prefix}<index>, got {tok:?}"))
}

fn parse_predicate(s: &str) -> Result<Predicate, String> {
    if let Some(inner) = s.strip_prefix("and(").and_then(|r| r.strip_suffix(')')) {
        // split at the top-level comma
        let mut depth = 0i32;
        for (i, ch) in inner.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    return Ok(Predicate::and(
                        parse_predicate(&inner[..i])?,
                        parse_predicate(&inner[i + 1..])?,
                    ))
                }
                _ => {}
            }
        }
        return Err(format!("and() needs two operands: {s:?}"));
    }
    if let Some(inner) = s.strip_prefix("any(").and_then(|r| r.strip_suffix(')')) {
        let slots = inner
            .split(',')
            .map(|t| index(t, 'c'))
            .collect::<Result<Vec<_>, _>>()?;
        return Ok(Predicate::AnyNonZero { slots });
    }
    if let Some((slot, bit)) = s.split_once("==") {
        let bit = match bit {
            "0" => false,
            "1" => true,
            _ => return Err(format!("bad bit in {s:?}")),
        };
        return Ok(Predicate::SlotEquals {
            slot: index(slot, 'c')?,
            bit,
        });
    }
    Err(format!("bad predicate {s:?}"))
}
