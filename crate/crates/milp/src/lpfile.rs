//! CPLEX-style LP text writer.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::MilpError;
use crate::model::{MilpModel, ObjSense, VarKind};

fn lp_name(s: &str) -> String {
    let ok = |c: char| c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c);
    let mut out: String = s.chars().map(|c| if ok(c) { c } else { '_' }).collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
        out.insert(0, '_');
    }
    out
}

fn push_terms(out: &mut String, names: &[String], terms: &[(crate::model::VarId, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names[0]);
        return;
    }
    for (k, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < 0.0 { "-" } else if k == 0 { "" } else { "+" };
        let _ = write!(out, " {sign} {} {}", c.abs(), names[v.0]);
    }
}

/// Render the model in LP text format. Variable and row names are the
/// model's own descriptive names (sanitized; index-suffixed if clashing).
pub fn to_lp_string(model: &MilpModel, header: &str) -> String {
    let mut seen = std::collections::HashSet::new();
    let mut uniq = |s: &str, idx: usize| {
        let mut n = lp_name(s);
        if !seen.insert(n.clone()) {
            n = format!("{n}_{idx}");
            seen.insert(n.clone());
        }
        n
    };
    let names: Vec<String> = model.vars.iter().enumerate().map(|(j, v)| uniq(&v.name, j)).collect();
    let rnames: Vec<String> = model.rows.iter().enumerate().map(|(i, r)| uniq(&r.name, i)).collect();

    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "\\ {line}");
    }
    out.push_str(match model.sense {
        ObjSense::Maximize => "Maximize\n",
        ObjSense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    if names.is_empty() {
        out.push_str(" 0");
    } else {
        push_terms(&mut out, &names, &model.objective);
    }
    out.push_str("\nSubject To\n");
    for (i, r) in model.rows.iter().enumerate() {
        let _ = write!(out, " {}:", rnames[i]);
        push_terms(&mut out, &names, &r.terms);
        let _ = writeln!(out, " {} {}", r.sense.symbol(), r.rhs);
    }
    out.push_str("Bounds\n");
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        let n = &names[j];
        match (v.lower, v.upper) {
            (l, u) if l == u => {
                let _ = writeln!(out, " {n} = {l}");
            }
            (l, u) if l == f64::NEG_INFINITY && u == f64::INFINITY => {
                let _ = writeln!(out, " {n} free");
            }
            (l, u) => {
                let lo = if l == f64::NEG_INFINITY { "-inf".to_string() } else { l.to_string() };
                let up = if u == f64::INFINITY { "+inf".to_string() } else { u.to_string() };
                let _ = writeln!(out, " {lo} <= {n} <= {up}");
            }
        }
    }
    let bins: Vec<&String> = model.vars.iter().enumerate().filter(|(_, v)| v.kind == VarKind::Binary).map(|(j, _)| &names[j]).collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &MilpModel, header: &str, path: impl AsRef<Path>) -> Result<(), MilpError> {
    std::fs::write(path, to_lp_string(model, header))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinExpr, Sense};

    #[test]
    fn writes_sections() {
        let mut m = MilpModel::new("t", ObjSense::Maximize);
        let x = m.add_continuous("q[1]", 0.0, 2.0);
        let b = m.add_binary("u 1");
        let mut e = LinExpr::var(x);
        e.add_term(b, -3.0);
        m.add_row("gate", &e, Sense::Le, 0.0, "");
        m.set_objective(&LinExpr::var(x), ObjSense::Maximize);
        let s = to_lp_string(&m, "units: grams");
        assert!(s.starts_with("\\ units: grams\nMaximize\n obj:  1 q_1_\n"));
        assert!(s.contains(" gate:  1 q_1_ - 3 u_1 <= 0\n"));
        assert!(s.contains(" 0 <= q_1_ <= 2\n"));
        assert!(s.contains("Binaries\n u_1\nEnd\n"));
    }
}
