use crate::report::{to_json, Verdict, SCHEMA};
use crate::Usage;
use s6holo::ledger::{bundle_ledger, BundleLedger, GateVerdict};
use serde::Serialize;

#[derive(Serialize)]
struct LedgerJson<'a> {
    schema: u32,
    command: &'static str,
    genus: u32,
    degree: u32,
    ledger: &'a BundleLedger,
    verdicts: Vec<Verdict>,
}

fn consistency(l: &BundleLedger) -> Vec<Verdict> {
    let mut out = Vec::new();
    if let Some(c) = &l.chern {
        let s = c.c1_lt + c.c1_ln + c.c1_lb;
        out.push(Verdict::new(9, "c1_sum_zero", s == 0, format!("c1 sum = {s}")));
    }
    if let Some(s) = &l.sections {
        if s.valid && l.spectral.m1.is_exact() {
            let twice = 2 * (s.h0_ln + s.h0_lbdual);
            let m1 = l.spectral.m1.value();
            out.push(Verdict::new(
                9,
                "m1_equals_section_count",
                twice == m1 && m1 == 4 * l.topology.d as i64,
                format!("2(h0(L_N) + h0(L_B*)) = {twice}, m1 = {m1}, 4d = {}", 4 * l.topology.d),
            ));
        } else {
            out.push(Verdict::skipped(9, "m1_equals_section_count", "Riemann-Roch counts not determined"));
        }
    }
    out
}

fn print_text(l: &BundleLedger, verdicts: &[Verdict]) {
    let t = &l.topology;
    println!("genus {}, degree {} (chi = {}, area = {} pi)", t.g, t.d, t.chi, 4 * t.d);
    match &l.gate {
        GateVerdict::Admissible => println!("gate: admissible"),
        GateVerdict::Inadmissible(why) => println!("gate: inadmissible ({why})"),
        GateVerdict::Unknown => println!("gate: unknown (no known obstruction or construction)"),
    }
    if let Some(c) = &l.chern {
        println!("c1(L_T, L_N, L_B) = ({}, {}, {})", c.c1_lt, c.c1_ln, c.c1_lb);
        println!("zeros of the section L_T -> L_B: {}", c.phi2_zeros);
    }
    if let Some(s) = &l.sections {
        let tag = if s.valid { "exact" } else { "h0(L_B*) is a lower bound" };
        println!("h0(L_N) = {}, h0(L_B*) = {} ({tag})", s.h0_ln, s.h0_lbdual);
    }
    let p = &l.spectral;
    let kind = if p.m1.is_exact() { "exact" } else { "lower bound" };
    println!("lambda1 = {}, m1 = {} ({kind})", p.lambda1, p.m1);
    println!("nullity >= {}", p.nullity_lower);
    if let Some(b) = l.index_bound_display {
        println!("genus-0 index bound (display only): {b}");
    }
    for n in &l.notes {
        println!("note: {n}");
    }
    for v in verdicts {
        println!("{}", v.line());
    }
}

pub fn run(g: u32, d: u32, json: bool) -> anyhow::Result<i32> {
    let l = bundle_ledger(g, d).map_err(|e| Usage(e.to_string()))?;
    let verdicts = consistency(&l);
    if json {
        let out = LedgerJson { schema: SCHEMA, command: "ledger", genus: g, degree: d, ledger: &l, verdicts };
        print!("{}", to_json(&out)?);
    } else {
        print_text(&l, &verdicts);
    }
    Ok(0)
}
