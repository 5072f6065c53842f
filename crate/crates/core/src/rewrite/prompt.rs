use std::fmt::Write;

use super::RewriteCandidate;
use crate::text::{print_irsb, print_statement};

/// Output contract sent as the system message of every request.
pub const SYSTEM_MESSAGE: &str = "You rewrite single statements of VEX-style IR super-blocks. \
Reply with exactly one statement line in the same textual IR syntax as the input, \
or the literal line NoOp if the statement can be removed. \
Do not add explanations, markdown, or additional lines.";

/// Builds the user prompt for one candidate. The text depends only on the
/// candidate, so identical candidates always produce identical prompts.
pub fn build_prompt(c: &RewriteCandidate<'_>) -> String {
    let mut p = String::new();
    let _ = writeln!(
        p,
        "The following IR super-block is executed by a symbolic execution engine."
    );
    let _ = writeln!(p);
    p.push_str(&print_irsb(c.block));
    let _ = writeln!(p);
    let _ = writeln!(p, "Target statement (index {:02}):", c.stmt_index);
    let _ = writeln!(p, "{}", print_statement(c.original));
    let _ = writeln!(p);
    let _ = writeln!(
        p,
        "Produce a replacement for the target statement that computes exactly the same \
observable effect (temp value, guest register write, memory store or exit) for every \
machine state, and is cheaper or simpler to execute symbolically."
    );
    let _ = writeln!(p, "Rules:");
    let _ = writeln!(
        p,
        "- Keep the same destination: the same temp, the same PUT offset, a STOREle, or an exit with the same target."
    );
    let _ = writeln!(
        p,
        "- Read only temps defined before index {:02}.",
        c.stmt_index
    );
    let _ = writeln!(
        p,
        "- Answer with exactly one statement line in the syntax above, or the literal line NoOp, and no commentary."
    );
    p
}
