//! CPLEX LP text output, for cross-checking instances with external solvers.

use std::fmt::Write as _;

use super::{LinearProgram, Relation, Sense};

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.,[]()".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.chars().next().is_none_or(|c| c.is_ascii_digit() || c == '.') {
        out.insert(0, '_');
    }
    out
}

fn write_expr(out: &mut String, coeffs: &[f64], names: &[String]) {
    let mut first = true;
    for (a, name) in coeffs.iter().zip(names) {
        if *a == 0.0 {
            continue;
        }
        let sign = if *a < 0.0 { "-" } else { "+" };
        if first {
            if *a < 0.0 {
                out.push_str("- ");
            }
            first = false;
        } else {
            let _ = write!(out, " {sign} ");
        }
        let _ = write!(out, "{:e} {}", a.abs(), name);
    }
    if first {
        out.push_str("0 ");
        out.push_str(names.first().map(String::as_str).unwrap_or("x0"));
    }
}

/// Renders `lp` in CPLEX LP format.
pub fn write_lp_format(lp: &LinearProgram) -> String {
    let names: Vec<String> = lp.var_names.iter().map(|n| sanitize(n)).collect();
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    write_expr(&mut out, &lp.objective, &names);
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        let label = if c.name.is_empty() {
            format!("c{i}")
        } else {
            sanitize(&c.name)
        };
        let _ = write!(out, " {label}: ");
        write_expr(&mut out, &c.coeffs, &names);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {:e}", c.rhs);
    }
    out.push_str("Bounds\n");
    for ((lo, hi), name) in lp.lower.iter().zip(&lp.upper).zip(&names) {
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if lo == hi => {
                let _ = writeln!(out, " {name} = {lo:e}");
            }
            (true, true) => {
                let _ = writeln!(out, " {lo:e} <= {name} <= {hi:e}");
            }
            (true, false) => {
                // zero lower bound is the format default
                if *lo != 0.0 {
                    let _ = writeln!(out, " {name} >= {lo:e}");
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {hi:e}");
            }
        }
    }
    out.push_str("End\n");
    out
}
