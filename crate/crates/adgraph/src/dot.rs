//! Graphviz rendering of a graph's structure.
//!
//! Nodes carry the same `v`-numbering as trace tables so a drawing and
//! a trace can be read side by side. Edges point in dataflow direction
//! (operand to consumer), one edge per operand position, so an
//! operation that reads the same value twice shows two parallel edges.
//! Output nodes get a double border, and when a [`NameMap`] is given,
//! assigned names are appended to the labels of the nodes they name.

use crate::graph::Graph;
use crate::op::OpKind;
use crate::parser::NameMap;
use crate::trace::node_labels;

/// Renders `dot` source for the graph. Deterministic: nodes in id
/// order, edges in (consumer, operand) order.
pub fn to_dot(graph: &Graph, names: Option<&NameMap>) -> String {
    let labels = node_labels(graph);
    let mut out = String::from("digraph adgraph {\n");
    for (i, node) in graph.nodes().iter().enumerate() {
        let desc = match &node.op {
            OpKind::Var(name) => name.clone(),
            OpKind::Const(value) => value.to_string(),
            op => op.symbol().to_string(),
        };
        let mut label = format!("{} = {desc}", labels[i]);
        if let Some(names) = names {
            for (name, node_id) in names.targets() {
                if node_id.index() == i {
                    label.push_str(&format!(" [{name}]"));
                }
            }
        }
        let outline = if graph.outputs().iter().any(|o| o.index() == i) {
            ", peripheries=2"
        } else {
            ""
        };
        out.push_str(&format!("  n{i} [label=\"{label}\"{outline}];\n"));
    }
    for (i, node) in graph.nodes().iter().enumerate() {
        for input in &node.inputs {
            out.push_str(&format!("  n{} -> n{i};\n", input.index()));
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::compile;

    #[test]
    fn example_renders_exactly() {
        let (g, names) = compile("y := ln(x1) + x1*x2 - sin(x2)").unwrap();
        let expected = "\
digraph adgraph {
  n0 [label=\"v-1 = x1\"];
  n1 [label=\"v1 = ln\"];
  n2 [label=\"v0 = x2\"];
  n3 [label=\"v2 = *\"];
  n4 [label=\"v3 = +\"];
  n5 [label=\"v4 = sin\"];
  n6 [label=\"v5 = - [y]\", peripheries=2];
  n0 -> n1;
  n0 -> n3;
  n2 -> n3;
  n1 -> n4;
  n3 -> n4;
  n2 -> n5;
  n4 -> n6;
  n5 -> n6;
}
";
        assert_eq!(to_dot(&g, Some(&names)), expected);
    }

    #[test]
    fn fan_out_draws_parallel_edges() {
        let (g, _) = compile("y := x * x").unwrap();
        let rendered = to_dot(&g, None);
        assert_eq!(rendered.matches("n0 -> n1;").count(), 2);
    }

    #[test]
    fn constants_show_their_value() {
        let (g, _) = compile("y := x + 4").unwrap();
        let rendered = to_dot(&g, None);
        assert!(rendered.contains("label=\"v1 = 4\""));
    }

    #[test]
    fn every_output_is_outlined() {
        let (g, names) = compile("a := x + 1\nb := a * a").unwrap();
        let rendered = to_dot(&g, Some(&names));
        assert_eq!(rendered.matches("peripheries=2").count(), 2);
        assert!(rendered.contains("[a]"));
        assert!(rendered.contains("[b]"));
    }
}
