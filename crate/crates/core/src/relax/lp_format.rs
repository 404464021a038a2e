//! CPLEX LP text export for cross-checking with external solvers.

use std::io::{self, Write};

use super::program::RelaxationProgram;
use super::simplex::Sense;

fn term(out: &mut String, coef: f64, name: &str, first: bool) {
    if coef < 0.0 {
        out.push_str(" - ");
    } else if !first {
        out.push_str(" + ");
    } else {
        out.push(' ');
    }
    let a = coef.abs();
    if a != 1.0 {
        out.push_str(&format!("{a} "));
    }
    out.push_str(name);
}

/// Writes `program` in LP format. The constant offset is emitted as a comment since
/// not every reader accepts objective constants.
pub fn write_lp<W: Write>(program: &RelaxationProgram, mut w: W) -> io::Result<()> {
    let lp = program.linear_program();
    writeln!(w, "\\ {} relaxation; constant offset {}", program.kind(), program.constant_offset())?;
    writeln!(w, "Maximize")?;
    let mut line = String::from(" obj:");
    let mut first = true;
    for (j, &c) in lp.objective().iter().enumerate() {
        if c != 0.0 {
            term(&mut line, c, &program.variable_name(j), first);
            first = false;
        }
    }
    if first {
        line.push_str(" 0 ");
        line.push_str(&program.variable_name(0));
    }
    writeln!(w, "{line}")?;
    writeln!(w, "Subject To")?;
    for i in 0..lp.num_rows() {
        let (cols, vals) = lp.row(i);
        let mut line = format!(" {}:", program.row_name(i));
        for (k, (&j, &a)) in cols.iter().zip(vals).enumerate() {
            term(&mut line, a, &program.variable_name(j), k == 0);
        }
        let op = match lp.sense(i) {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(w, "{line} {op} {}", lp.rhs(i))?;
    }
    writeln!(w, "Bounds")?;
    for j in 0..lp.num_vars() {
        writeln!(w, " {} <= {} <= {}", lp.lower()[j], program.variable_name(j), lp.upper()[j])?;
    }
    writeln!(w, "End")
}
