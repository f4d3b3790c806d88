use std::fmt::Write;

use super::{LpModel, Sense};

fn term(out: &mut String, first: bool, c: f64, name: &str) {
    if c < 0.0 {
        let _ = write!(out, " - {} {}", -c, name);
    } else if first {
        let _ = write!(out, " {} {}", c, name);
    } else {
        let _ = write!(out, " + {} {}", c, name);
    }
}

fn var_name(model: &LpModel, j: usize) -> String {
    let n = &model.col_names[j];
    if n.is_empty() {
        format!("x{j}")
    } else {
        n.replace([' ', ':', '[', ']'], "_")
    }
}

pub(crate) fn write_lp(model: &LpModel) -> String {
    let mut out = String::from("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in model.obj.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, &var_name(model, j));
            first = false;
        }
    }
    if first {
        out.push_str(" 0");
    }
    out.push_str("\nSubject To\n");
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_rows()];
    for (j, col) in model.cols.iter().enumerate() {
        for &(r, v) in col {
            rows[r].push((j, v));
        }
    }
    for (r, entries) in rows.iter().enumerate() {
        let name = if model.row_names[r].is_empty() { format!("r{r}") } else { model.row_names[r].replace(' ', "_") };
        let _ = write!(out, " {name}:");
        let mut first = true;
        for &(j, v) in entries {
            term(&mut out, first, v, &var_name(model, j));
            first = false;
        }
        if first {
            out.push_str(" 0 x0");
        }
        let op = match model.sense[r] {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", model.rhs[r]);
    }
    out.push_str("Bounds\n");
    for j in 0..model.num_vars() {
        let name = var_name(model, j);
        let (l, u) = (model.lower[j], model.upper[j]);
        match (l.is_finite(), u.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, true) if l == u => {
                let _ = writeln!(out, " {name} = {l}");
            }
            (true, true) => {
                let _ = writeln!(out, " {l} <= {name} <= {u}");
            }
            (true, false) => {
                if l != 0.0 {
                    let _ = writeln!(out, " {name} >= {l}");
                }
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {u}");
            }
        }
    }
    out.push_str("End\n");
    out
}
