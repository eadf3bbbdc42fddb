//! Text exports of a compiled MDP: GraphViz digraph, transitions CSV and a
//! key=value statistics report.

use super::CompiledMdp;
use crate::rat::format_rational;
use std::fmt::Write;

/// GraphViz digraph: box nodes for states (valuation plus active leaf
/// features), point nodes for choices, probability-labeled edges.
pub fn export_dot(mdp: &CompiledMdp) -> String {
    let mut out = String::new();
    out.push_str("digraph mdp {\n");
    out.push_str("    node [shape=box];\n");
    for s in 0..mdp.num_states() {
        let label = mdp.display_state(s).replace('|', "\\n");
        let marker = if s == mdp.initial { ", penwidth=2" } else { "" };
        let _ = writeln!(out, "    s{s} [label=\"{label}\"{marker}];");
    }
    for (s, choices) in mdp.choices.iter().enumerate() {
        for (c, choice) in choices.iter().enumerate() {
            let _ = writeln!(out, "    s{s}c{c} [shape=point];");
            let action = mdp.action_name(choice.action);
            let _ = writeln!(out, "    s{s} -> s{s}c{c} [label=\"{action}\"];");
            for (target, prob) in &choice.branches {
                let _ = writeln!(out, "    s{s}c{c} -> s{target} [label=\"{}\"];", format_rational(prob));
            }
        }
    }
    out.push_str("}\n");
    out
}

/// CSV rows `source,choice,action,target,probability`, sorted by
/// (source, choice, target); probabilities exact (`1`, `59/100`).
pub fn export_transitions_csv(mdp: &CompiledMdp) -> String {
    let mut out = String::from("source,choice,action,target,probability\n");
    for (s, choices) in mdp.choices.iter().enumerate() {
        for (c, choice) in choices.iter().enumerate() {
            let action = mdp.action_name(choice.action);
            for (target, prob) in &choice.branches {
                let _ = writeln!(out, "{s},{c},{action},{target},{}", format_rational(prob));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MdpStats {
    pub states: usize,
    pub choices: usize,
    pub transitions: usize,
    pub label_counts: Vec<(String, usize)>,
}

impl MdpStats {
    pub fn of(mdp: &CompiledMdp) -> Self {
        MdpStats {
            states: mdp.num_states(),
            choices: mdp.num_choices(),
            transitions: mdp.num_transitions(),
            label_counts: mdp
                .labels
                .iter()
                .map(|(name, set)| (name.clone(), set.iter().filter(|b| **b).count()))
                .collect(),
        }
    }
}

/// `key=value` lines: state/choice/transition counts and per-label state
/// counts.
pub fn stats_report(mdp: &CompiledMdp) -> String {
    let stats = MdpStats::of(mdp);
    let mut out = String::new();
    let _ = writeln!(out, "states={}", stats.states);
    let _ = writeln!(out, "choices={}", stats.choices);
    let _ = writeln!(out, "transitions={}", stats.transitions);
    for (name, count) in &stats.label_counts {
        let _ = writeln!(out, "label.{name}={count}");
    }
    out
}
