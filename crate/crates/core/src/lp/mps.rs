use std::io::{self, Write};

use super::LinearProgram;
use crate::fmt::format_g17;

/// Writes `lp` as free-format MPS. Rows are named `R0000001…` in order, the
/// objective row is `COST`, columns keep their own names and free columns get
/// an `FR` bound. Output is byte-identical for identical inputs.
pub fn write_mps<W: Write>(lp: &LinearProgram, name: &str, sink: &mut W) -> io::Result<()> {
    let mut out = io::BufWriter::new(sink);
    writeln!(out, "NAME {name}")?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N COST")?;
    for i in 0..lp.nrows() {
        writeln!(out, " E {}", row_name(i))?;
    }
    writeln!(out, "COLUMNS")?;
    for col in lp.columns() {
        if col.cost != 0.0 || col.entries.is_empty() {
            writeln!(out, " {} COST {}", col.name, format_g17(col.cost))?;
        }
        for &(r, v) in &col.entries {
            writeln!(out, " {} {} {}", col.name, row_name(r), format_g17(v))?;
        }
    }
    writeln!(out, "RHS")?;
    for (i, &b) in lp.rhs().iter().enumerate() {
        if b != 0.0 {
            writeln!(out, " RHS {} {}", row_name(i), format_g17(b))?;
        }
    }
    writeln!(out, "BOUNDS")?;
    for col in lp.columns().iter().filter(|c| c.free) {
        writeln!(out, " FR BND {}", col.name)?;
    }
    writeln!(out, "ENDATA")?;
    out.flush()
}

fn row_name(i: usize) -> String {
    format!("R{:07}", i + 1)
}
