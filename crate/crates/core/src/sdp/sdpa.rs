//! SDPA sparse (`.dat-s`) writer.
//!
//! SDPA solves `max F₀•Y s.t. F_i•Y = c_i, Y ⪰ 0` in its dual form, so the
//! constraints map to `F_i` unchanged and the objective is written negated
//! as matrix 0.

use std::fmt::Write;

use super::SdpProblem;

fn num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

/// Render `problem` in SDPA sparse format.
///
/// Layout: constraint count, block count, block sizes, right-hand sides, then
/// one `matno blkno i j value` line per upper-triangle entry, 1-based.
pub fn export_sdpa(problem: &SdpProblem) -> String {
    let mut out = String::new();
    let join = |it: Vec<String>| it.join(" ");
    writeln!(out, "{}", problem.constraints.len()).unwrap();
    writeln!(out, "{}", problem.blocks.len()).unwrap();
    writeln!(out, "{}", join(problem.blocks.iter().map(|b| b.to_string()).collect())).unwrap();
    writeln!(
        out,
        "{}",
        join(problem.constraints.iter().map(|c| num(c.rhs)).collect())
    )
    .unwrap();
    let mut objective = problem.objective.clone();
    objective.normalize();
    for &(b, i, j, v) in objective.entries() {
        writeln!(out, "0 {} {} {} {}", b + 1, i + 1, j + 1, num(-v)).unwrap();
    }
    for (k, c) in problem.constraints.iter().enumerate() {
        let mut a = c.a.clone();
        a.normalize();
        for &(b, i, j, v) in a.entries() {
            writeln!(out, "{} {} {} {} {}", k + 1, b + 1, i + 1, j + 1, num(v)).unwrap();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::SparseSym;
    use super::*;

    /// Minimal reader used as an oracle for the writer.
    fn read_sdpa(text: &str) -> SdpProblem {
        let mut lines = text.lines();
        let m: usize = lines.next().unwrap().trim().parse().unwrap();
        let nb: usize = lines.next().unwrap().trim().parse().unwrap();
        let blocks: Vec<usize> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(blocks.len(), nb);
        let b: Vec<f64> = lines
            .next()
            .unwrap()
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        let mut mats = vec![SparseSym::new(); m + 1];
        for line in lines {
            let t: Vec<&str> = line.split_whitespace().collect();
            let (k, blk, i, j): (usize, usize, usize, usize) = (
                t[0].parse().unwrap(),
                t[1].parse().unwrap(),
                t[2].parse().unwrap(),
                t[3].parse().unwrap(),
            );
            let v: f64 = t[4].parse().unwrap();
            mats[k].add(blk - 1, i - 1, j - 1, if k == 0 { -v } else { v });
        }
        let mut p = SdpProblem::new(blocks);
        let mut it = mats.into_iter();
        p.objective = it.next().unwrap();
        p.objective.normalize();
        for (a, rhs) in it.zip(b) {
            p.add_constraint(a, rhs);
        }
        p
    }

    #[test]
    fn single_scalar_template() {
        let mut p = SdpProblem::new(vec![1]);
        let mut a = SparseSym::new();
        a.add(0, 0, 0, 1.0);
        p.add_constraint(a, 1.0);
        assert_eq!(export_sdpa(&p), "1\n1\n1\n1\n1 1 1 1 1\n");
    }

    #[test]
    fn roundtrip_through_reader() {
        let mut p = SdpProblem::new(vec![2, 1]);
        let mut a = SparseSym::new();
        a.add(0, 1, 0, 0.125);
        a.add(1, 0, 0, -3.0);
        p.add_constraint(a, 0.1);
        let mut c = SparseSym::new();
        c.add_identity(0, 2, 1.0);
        p.add_constraint(c, 1e-20);
        p.objective.add(0, 0, 1, 2.5);
        p.objective.add(1, 0, 0, 1.0);
        p.objective.normalize();
        let back = read_sdpa(&export_sdpa(&p));
        assert_eq!(back, p);
    }
}
