//! Result tables, training curves and their CSV forms.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::run::Block;
use super::stats::{improvement, mean, sd, SignTest};
use super::ExperimentError;
use crate::hybrid::TokenSummary;

/// Set name of the per-block average rows.
pub const AVERAGE: &str = "(average)";

/// TEU/h of one method on one instance in one repetition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub block: Block,
    pub set: String,
    pub repetition: usize,
    pub seed: u64,
    pub teu_per_hour: f64,
    /// Size of the learned expression; empty for fixed rules.
    pub tokens: Option<usize>,
}

/// Mean over repetitions for one method on one set, or over the whole block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub block: Block,
    pub set: String,
    pub runs: usize,
    pub mean: f64,
    pub sd: f64,
    /// Relative change against the manual heuristic, when it was run.
    pub improvement: Option<f64>,
}

impl SummaryRow {
    pub fn is_average(&self) -> bool {
        self.set == AVERAGE
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTestRow {
    pub a: String,
    pub b: String,
    pub block: Block,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    pub p_value: f64,
}

impl SignTestRow {
    pub fn new(a: &str, b: &str, block: Block, t: SignTest) -> Self {
        Self { a: a.into(), b: b.into(), block, wins: t.wins, losses: t.losses, ties: t.ties, p_value: t.p_value }
    }
}

/// Best fitness of one run after one generation (or sampled batch).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub seed: u64,
    pub generation: usize,
    pub best_fitness: f64,
}

/// Per-set and per-block means, in order of first appearance of each method.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let mut groups: BTreeMap<(usize, Block, String), Vec<f64>> = BTreeMap::new();
    let mut set_order: Vec<(Block, &str)> = Vec::new();
    for r in rows {
        let m = methods.iter().position(|m| *m == r.method).expect("method listed");
        groups.entry((m, r.block, r.set.clone())).or_default().push(r.teu_per_hour);
        if !set_order.contains(&(r.block, r.set.as_str())) {
            set_order.push((r.block, &r.set));
        }
    }
    set_order.sort_by_key(|(b, _)| *b);
    let mut out = Vec::new();
    for (mi, method) in methods.iter().enumerate() {
        for block in [Block::Train, Block::Test] {
            let mut all = Vec::new();
            for &(b, set) in set_order.iter().filter(|(b, _)| *b == block) {
                if let Some(xs) = groups.get(&(mi, b, set.to_string())) {
                    all.extend_from_slice(xs);
                    out.push(SummaryRow {
                        method: method.to_string(),
                        block,
                        set: set.to_string(),
                        runs: xs.len(),
                        mean: mean(xs),
                        sd: sd(xs),
                        improvement: None,
                    });
                }
            }
            if !all.is_empty() {
                out.push(SummaryRow {
                    method: method.to_string(),
                    block,
                    set: AVERAGE.into(),
                    runs: all.len(),
                    mean: mean(&all),
                    sd: sd(&all),
                    improvement: None,
                });
            }
        }
    }
    let manual: BTreeMap<(Block, String), f64> =
        out.iter().filter(|r| r.method == "manual").map(|r| ((r.block, r.set.clone()), r.mean)).collect();
    for r in &mut out {
        r.improvement = manual.get(&(r.block, r.set.clone())).map(|&m| improvement(r.mean, m));
    }
    out
}

/// Mean best fitness per (method, generation) over all runs, long format.
pub fn emit_training_curves<W: Write>(out: W, points: &[CurvePoint]) -> Result<(), ExperimentError> {
    #[derive(Serialize)]
    struct Row<'a> {
        method: &'a str,
        generation: usize,
        best_fitness: f64,
    }
    let mut methods: Vec<&str> = Vec::new();
    let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for p in points {
        let m = match methods.iter().position(|m| *m == p.method) {
            Some(i) => i,
            None => {
                methods.push(&p.method);
                methods.len() - 1
            }
        };
        let e = acc.entry((m, p.generation)).or_insert((0.0, 0));
        e.0 += p.best_fitness;
        e.1 += 1;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["method", "generation", "best_fitness"])?;
    for ((m, generation), (sum, n)) in acc {
        w.serialize(Row { method: methods[m], generation, best_fitness: sum / n as f64 })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the long-format curve CSV back as (method, generation, best_fitness).
pub fn read_training_curves<R: Read>(input: R) -> Result<Vec<(String, usize, f64)>, ExperimentError> {
    read_csv(input)
}

/// Best-fitness gain over the last third of a run's generations.
pub fn late_improvement(curve: &[CurvePoint]) -> f64 {
    let Some(last) = curve.iter().max_by_key(|p| p.generation) else { return 0.0 };
    let cut = last.generation - last.generation / 3;
    let before = curve.iter().filter(|p| p.generation <= cut).max_by_key(|p| p.generation).expect("cut point");
    last.best_fitness - before.best_fitness
}

pub fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T], header: &[&str]) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(out);
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read, T: serde::de::DeserializeOwned>(input: R) -> Result<Vec<T>, ExperimentError> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub const RESULT_HEADER: [&str; 7] = ["method", "block", "set", "repetition", "seed", "teu_per_hour", "tokens"];
pub const SUMMARY_HEADER: [&str; 7] = ["method", "block", "set", "runs", "mean", "sd", "improvement"];
pub const SIGN_HEADER: [&str; 7] = ["a", "b", "block", "wins", "losses", "ties", "p_value"];
pub const TOKEN_HEADER: [&str; 4] = ["method", "runs", "mean_tokens", "sd_tokens"];

/// Plain-text train, test, sign-test and token tables.
pub fn format_report(summary: &[SummaryRow], sign_tests: &[SignTestRow], tokens: &[TokenSummary]) -> String {
    let mut s = String::new();
    for block in [Block::Train, Block::Test] {
        let rows: Vec<&SummaryRow> = summary.iter().filter(|r| r.block == block).collect();
        if rows.is_empty() {
            continue;
        }
        let _ = writeln!(s, "[{}]", block.name());
        let _ = writeln!(s, "{:<24} {:<16} {:>5} {:>10} {:>9} {:>9}", "method", "set", "runs", "TEU/h", "sd", "imp.");
        for r in rows {
            let imp = r.improvement.map_or_else(|| "-".into(), |x| format!("{:.2}%", 100.0 * x));
            let _ = writeln!(s, "{:<24} {:<16} {:>5} {:>10.2} {:>9.2} {:>9}", r.method, r.set, r.runs, r.mean, r.sd, imp);
        }
        s.push('\n');
    }
    if !sign_tests.is_empty() {
        let _ = writeln!(s, "[sign tests]");
        for t in sign_tests {
            let _ = writeln!(
                s,
                "{} vs {} ({}): {} wins, {} losses, {} ties, p = {:.4}",
                t.a,
                t.b,
                t.block.name(),
                t.wins,
                t.losses,
                t.ties,
                t.p_value
            );
        }
        s.push('\n');
    }
    if !tokens.is_empty() {
        let _ = writeln!(s, "[tokens]");
        for t in tokens {
            let _ = writeln!(s, "{:<24} runs {:>3}  mean {:>8.2}  sd {:>8.2}", t.method, t.runs, t.mean_tokens, t.sd_tokens);
        }
    }
    s
}
