//! Fixed-format MPS.
//!
//! Export renames columns `C0000001…` and rows `R0000001…` so every name fits
//! the 8-character fields; [`provenance_csv`] maps them back to the
//! descriptive names. Numbers are written in at most 12 characters and the
//! formatting is canonical, so export → import → export is byte-stable.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::MilpError;
use crate::model::{Constraint, MilpModel, ObjSense, Sense, VarId, VarKind, Variable};

pub fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

pub fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}

fn exact_repr(v: f64) -> Option<String> {
    let v = if v == 0.0 { 0.0 } else { v };
    let plain = format!("{v}");
    let exp = format!("{v:e}");
    let best = if exp.len() < plain.len() { exp } else { plain };
    (best.len() <= 12).then_some(best)
}

/// Canonical number text of at most 12 characters.
pub fn format_number(v: f64) -> String {
    if let Some(s) = exact_repr(v) {
        return s;
    }
    // too many digits: round to the most precise representation that fits
    let mut best: Option<(f64, String)> = None;
    for p in (0..=11).rev() {
        for cand in [format!("{v:.p$}"), format!("{v:.p$e}")] {
            if cand.len() > 12 {
                continue;
            }
            let parsed: f64 = cand.parse().unwrap();
            let err = (parsed - v).abs();
            if best.as_ref().map_or(true, |(e, _)| err < *e) {
                best = Some((err, cand));
            }
        }
    }
    let (_, cand) = best.expect("some representation fits 12 characters");
    let parsed: f64 = cand.parse().unwrap();
    exact_repr(parsed).unwrap_or(cand)
}

fn fixed_line(f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) -> String {
    let mut s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}");
    if !f5.is_empty() {
        let _ = write!(s, "   {f5:<8}  {f6:<12}");
    }
    s.truncate(s.trim_end().len());
    s
}

/// Render the model as fixed-format MPS text.
pub fn to_mps_string(model: &MilpModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", sanitize(&model.name));
    if model.sense == ObjSense::Maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }
    out.push_str("ROWS\n");
    out.push_str(&fixed_line("N", "OBJ", "", "", "", ""));
    out.push('\n');
    for (i, r) in model.rows.iter().enumerate() {
        let t = match r.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        out.push_str(&fixed_line(t, &row_name(i), "", "", "", ""));
        out.push('\n');
    }

    // column-major entries
    let n = model.num_vars();
    let mut cols: Vec<Vec<(String, f64)>> = vec![Vec::new(); n];
    for &(v, c) in &model.objective {
        if c != 0.0 {
            cols[v.0].push(("OBJ".to_string(), c));
        }
    }
    for (i, r) in model.rows.iter().enumerate() {
        for &(v, c) in &r.terms {
            cols[v.0].push((row_name(i), c));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, entries) in cols.iter().enumerate() {
        let is_bin = model.vars[j].kind == VarKind::Binary;
        if is_bin != in_int {
            let tag = if is_bin { "'INTORG'" } else { "'INTEND'" };
            out.push_str(&fixed_line("", &format!("M{marker:07}"), "'MARKER'", "", tag, ""));
            out.push('\n');
            marker += 1;
            in_int = is_bin;
        }
        let name = col_name(j);
        if entries.is_empty() {
            // keep the column declared even if it has no coefficients
            out.push_str(&fixed_line("", &name, "OBJ", "0", "", ""));
            out.push('\n');
        }
        for pair in entries.chunks(2) {
            let (r1, c1) = &pair[0];
            let (f5, f6) = match pair.get(1) {
                Some((r2, c2)) => (r2.clone(), format_number(*c2)),
                None => (String::new(), String::new()),
            };
            out.push_str(&fixed_line("", &name, r1, &format_number(*c1), &f5, &f6));
            out.push('\n');
        }
    }
    if in_int {
        out.push_str(&fixed_line("", &format!("M{marker:07}"), "'MARKER'", "", "'INTEND'", ""));
        out.push('\n');
    }

    out.push_str("RHS\n");
    let rhs: Vec<(String, f64)> = model.rows.iter().enumerate().filter(|(_, r)| r.rhs != 0.0).map(|(i, r)| (row_name(i), r.rhs)).collect();
    for pair in rhs.chunks(2) {
        let (f5, f6) = match pair.get(1) {
            Some((r2, c2)) => (r2.clone(), format_number(*c2)),
            None => (String::new(), String::new()),
        };
        out.push_str(&fixed_line("", "RHS", &pair[0].0, &format_number(pair[0].1), &f5, &f6));
        out.push('\n');
    }

    out.push_str("BOUNDS\n");
    for (j, v) in model.vars.iter().enumerate() {
        let name = col_name(j);
        let mut line = |t: &str, val: Option<f64>| {
            let num = val.map(format_number).unwrap_or_default();
            out.push_str(&fixed_line(t, "BND", &name, &num, "", ""));
            out.push('\n');
        };
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            line("BV", None);
            continue;
        }
        let (l, u) = (v.lower, v.upper);
        if l == u {
            line("FX", Some(l));
        } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
            line("FR", None);
        } else {
            if l == f64::NEG_INFINITY {
                line("MI", None);
            } else if l != 0.0 {
                line("LO", Some(l));
            }
            if u != f64::INFINITY {
                line("UP", Some(u));
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

fn sanitize(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect();
    if s.is_empty() {
        "MODEL".into()
    } else {
        s
    }
}

pub fn export_mps(model: &MilpModel, path: impl AsRef<Path>) -> Result<(), MilpError> {
    std::fs::write(path, to_mps_string(model))?;
    Ok(())
}

pub fn import_mps(path: impl AsRef<Path>) -> Result<MilpModel, MilpError> {
    let text = std::fs::read_to_string(path)?;
    parse_mps(&text)
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

/// Parse MPS text. Fields are split on whitespace, so both fixed and free
/// layouts are accepted as long as names contain no spaces.
pub fn parse_mps(text: &str) -> Result<MilpModel, MilpError> {
    use std::collections::HashMap;
    let err = |line: usize, msg: String| MilpError::Parse { line, msg };
    let num = |line: usize, s: &str| -> Result<f64, MilpError> { s.parse::<f64>().map_err(|_| MilpError::Parse { line, msg: format!("bad number '{s}'") }) };

    let mut model = MilpModel::new("", ObjSense::Minimize);
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut in_int = false;

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match f[0] {
                "NAME" => {
                    model.name = f.get(1).map(|s| s.to_string()).unwrap_or_default();
                    Section::None
                }
                "OBJSENSE" => {
                    if let Some(s) = f.get(1) {
                        model.sense = parse_sense(ln, s)?;
                        Section::None
                    } else {
                        Section::ObjSense
                    }
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "RANGES" => return Err(err(ln, "RANGES section is not supported".into())),
                "ENDATA" => Section::End,
                other => return Err(err(ln, format!("unknown section '{other}'"))),
            };
            continue;
        }
        match section {
            Section::ObjSense => {
                model.sense = parse_sense(ln, f[0])?;
            }
            Section::Rows => {
                if f.len() != 2 {
                    return Err(err(ln, "ROWS entry needs type and name".into()));
                }
                let sense = match f[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(f[1].to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    t => return Err(err(ln, format!("unknown row type '{t}'"))),
                };
                row_index.insert(f[1].to_string(), model.rows.len());
                model.rows.push(Constraint { name: f[1].to_string(), terms: Vec::new(), sense, rhs: 0.0, tag: String::new() });
            }
            Section::Columns => {
                if f.len() >= 3 && f[1] == "'MARKER'" {
                    match f[2] {
                        "'INTORG'" => in_int = true,
                        "'INTEND'" => in_int = false,
                        m => return Err(err(ln, format!("unknown marker {m}"))),
                    }
                    continue;
                }
                if f.len() != 3 && f.len() != 5 {
                    return Err(err(ln, "COLUMNS entry needs 3 or 5 fields".into()));
                }
                let j = match col_index.get(f[0]) {
                    Some(&j) => j,
                    None => {
                        let j = model.vars.len();
                        col_index.insert(f[0].to_string(), j);
                        let (kind, upper) = if in_int { (VarKind::Binary, 1.0) } else { (VarKind::Continuous, f64::INFINITY) };
                        model.vars.push(Variable { name: f[0].to_string(), kind, lower: 0.0, upper });
                        j
                    }
                };
                for pair in f[1..].chunks(2) {
                    let val = num(ln, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        if val != 0.0 {
                            model.objective.push((VarId(j), val));
                        }
                    } else {
                        let &i = row_index.get(pair[0]).ok_or_else(|| err(ln, format!("unknown row '{}'", pair[0])))?;
                        model.rows[i].terms.push((VarId(j), val));
                    }
                }
            }
            Section::Rhs => {
                if f.len() != 3 && f.len() != 5 {
                    return Err(err(ln, "RHS entry needs 3 or 5 fields".into()));
                }
                for pair in f[1..].chunks(2) {
                    let val = num(ln, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue;
                    }
                    let &i = row_index.get(pair[0]).ok_or_else(|| err(ln, format!("unknown row '{}'", pair[0])))?;
                    model.rows[i].rhs = val;
                }
            }
            Section::Bounds => {
                if f.len() < 3 {
                    return Err(err(ln, "BOUNDS entry needs at least 3 fields".into()));
                }
                let &j = col_index.get(f[2]).ok_or_else(|| err(ln, format!("unknown column '{}'", f[2])))?;
                let val = if f.len() >= 4 { Some(num(ln, f[3])?) } else { None };
                let need = |v: Option<f64>| v.ok_or_else(|| err(ln, format!("bound type {} needs a value", f[0])));
                let var = &mut model.vars[j];
                match f[0] {
                    "UP" => {
                        let u = need(val)?;
                        var.upper = u;
                        if u < 0.0 && var.lower == 0.0 {
                            var.lower = f64::NEG_INFINITY;
                        }
                    }
                    "LO" => var.lower = need(val)?,
                    "FX" => {
                        let v = need(val)?;
                        var.lower = v;
                        var.upper = v;
                    }
                    "FR" => {
                        var.lower = f64::NEG_INFINITY;
                        var.upper = f64::INFINITY;
                        var.kind = VarKind::Continuous;
                    }
                    "MI" => var.lower = f64::NEG_INFINITY,
                    "PL" => var.upper = f64::INFINITY,
                    "BV" => {
                        var.kind = VarKind::Binary;
                        var.lower = 0.0;
                        var.upper = 1.0;
                    }
                    t => return Err(err(ln, format!("unknown bound type '{t}'"))),
                }
                if var.kind == VarKind::Binary && (var.lower < 0.0 || var.upper > 1.0) {
                    return Err(err(ln, format!("integer column '{}' has bounds outside [0, 1]", f[2])));
                }
            }
            Section::None => return Err(err(ln, "data line outside any section".into())),
            Section::End => return Err(err(ln, "data after ENDATA".into())),
        }
    }
    if section != Section::End {
        return Err(err(text.lines().count(), "missing ENDATA".into()));
    }
    Ok(model)
}

fn parse_sense(line: usize, s: &str) -> Result<ObjSense, MilpError> {
    match s.to_ascii_uppercase().as_str() {
        "MAX" | "MAXIMIZE" => Ok(ObjSense::Maximize),
        "MIN" | "MINIMIZE" => Ok(ObjSense::Minimize),
        other => Err(MilpError::Parse { line, msg: format!("unknown objective sense '{other}'") }),
    }
}

/// CSV mapping exported row/column names back to descriptive names and the
/// formulation family that produced each row.
pub fn provenance_csv(model: &MilpModel) -> String {
    let mut out = String::from("kind,mps_name,name,family\n");
    for (i, r) in model.rows.iter().enumerate() {
        let _ = writeln!(out, "row,{},{},{}", row_name(i), r.name, r.tag);
    }
    for (j, v) in model.vars.iter().enumerate() {
        let kind = if v.kind == VarKind::Binary { "binary" } else { "continuous" };
        let _ = writeln!(out, "column,{},{},{}", col_name(j), v.name, kind);
    }
    out
}
