//! Parsers for the small string languages accepted on the command line.

use std::fs;
use std::path::Path;

use spreaddetect::graph::{GraphFamily, NetworkGraph};
use spreaddetect::simulate::SpreadModel;

use crate::error::{invalid, read_failed, CliResult};

/// Resolves a graph spec:
///
/// ```text
/// file:<path>            edge list ("p <count>" then "u v" lines)
/// path:<p>
/// cycle:<p>
/// grid:<d>x<p1>[:open]   p1^d nodes, wrapped unless ":open"
/// tree:<p>
/// er:<p>:<prob>:<seed>
/// ```
pub fn parse_graph(spec: &str) -> CliResult<NetworkGraph> {
    if let Some(path) = spec.strip_prefix("file:") {
        let path = Path::new(path);
        let text = fs::read_to_string(path).map_err(|e| read_failed(path, e))?;
        return NetworkGraph::parse_edge_list(&text)
            .map_err(|e| invalid("--graph", format!("{}: {e}", path.display())));
    }
    parse_family(spec)?
        .generate()
        .map_err(|e| invalid("--graph", format!("`{spec}`: {e}")))
}

pub fn parse_family(spec: &str) -> CliResult<GraphFamily> {
    let bad = |why: &str| invalid("--graph", format!("`{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("expected a node count"));
    match parts.as_slice() {
        ["path", p] => Ok(GraphFamily::Path { p: num(p)? }),
        ["cycle", p] => Ok(GraphFamily::Cycle { p: num(p)? }),
        ["tree", p] => Ok(GraphFamily::BinaryTree { p: num(p)? }),
        ["grid", shape] | ["grid", shape, _] => {
            let wrapped = match parts.get(2) {
                None => true,
                Some(&"open") => false,
                Some(_) => return Err(bad("grid suffix must be `open`")),
            };
            let (d, side) = shape
                .split_once('x')
                .ok_or_else(|| bad("grid shape must look like <d>x<p1>"))?;
            let (dim, side) = (num(d)?, num(side)?);
            if dim == 0 || side == 0 {
                return Err(bad("grid dimensions must be positive"));
            }
            Ok(GraphFamily::Grid { dim, side, wrapped })
        }
        ["er", p, prob, seed] => Ok(GraphFamily::ErdosRenyi {
            p: num(p)?,
            prob: prob
                .trim()
                .parse()
                .map_err(|_| bad("edge probability is not a number"))?,
            seed: seed.trim().parse().map_err(|_| bad("seed is not an integer"))?,
        }),
        _ => Err(bad(
            "expected file:<path>, path:<p>, cycle:<p>, grid:<d>x<p1>[:open], tree:<p> or er:<p>:<prob>:<seed>",
        )),
    }
}

/// A family spec without the node count, for `bench` rows that carry `p`:
/// `path`, `cycle`, `tree`, `grid:<d>[:open]`, `er:<prob>:<seed>`.
pub fn family_with_p(spec: &str, p: usize) -> CliResult<GraphFamily> {
    let bad = |why: &str| invalid("--family", format!("`{spec}`: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["path"] => Ok(GraphFamily::Path { p }),
        ["cycle"] => Ok(GraphFamily::Cycle { p }),
        ["tree"] => Ok(GraphFamily::BinaryTree { p }),
        ["grid", d] | ["grid", d, "open"] => {
            let dim = d.parse().map_err(|_| bad("grid dimension is not an integer"))?;
            GraphFamily::grid_with_nodes(dim, p, parts.len() == 2)
                .map_err(|e| invalid("--family", e))
        }
        ["er", prob, seed] => Ok(GraphFamily::ErdosRenyi {
            p,
            prob: prob.parse().map_err(|_| bad("edge probability is not a number"))?,
            seed: seed.parse().map_err(|_| bad("seed is not an integer"))?,
        }),
        _ => Err(bad("expected path, cycle, tree, grid:<d>[:open] or er:<prob>:<seed>")),
    }
}

/// `det` or `stoch:<q>`.
pub fn parse_model(spec: &str) -> CliResult<SpreadModel> {
    if spec == "det" {
        return Ok(SpreadModel::Deterministic);
    }
    let q = spec
        .strip_prefix("stoch:")
        .and_then(|q| q.parse::<f64>().ok())
        .ok_or_else(|| invalid("--model", format!("`{spec}`: expected det or stoch:<q>")))?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid("--model", format!("q = {q} is not in (0, 1]")));
    }
    Ok(SpreadModel::Stochastic { q })
}

/// `start:stop:step` (inclusive) or a comma-separated list of rates.
pub fn parse_rate_grid(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |why: String| invalid("--rate-grid", format!("`{spec}`: {why}"));
    let number = |s: &str| {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("`{s}` is not a number")))
    };
    let grid = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad("expected start:stop:step".into()));
        };
        let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
        if step <= 0.0 || stop < start {
            return Err(bad("need step > 0 and stop >= start".into()));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect()
    } else {
        spec.split(',').map(number).collect::<CliResult<Vec<_>>>()?
    };
    if let Some(q) = grid.iter().find(|&&q| !(q > 0.0 && q <= 1.0)) {
        return Err(bad(format!("rate {q} is not in (0, 1]")));
    }
    Ok(grid)
}

/// Comma-separated integers or reals, used by the `bench` row flags.
pub fn parse_row(flag: &str, spec: &str, fields: usize) -> CliResult<Vec<f64>> {
    let values = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| invalid(flag, format!("`{spec}` has a non-numeric field")))?;
    if values.len() != fields {
        return Err(invalid(
            flag,
            format!("`{spec}` has {} fields, expected {fields}", values.len()),
        ));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_specs() {
        assert_eq!(parse_graph("cycle:5").unwrap().edge_count(), 5);
        assert_eq!(parse_graph("path:5").unwrap().edge_count(), 4);
        assert_eq!(parse_graph("tree:7").unwrap().edge_count(), 6);
        assert_eq!(parse_graph("grid:2x4").unwrap().edge_count(), 32);
        assert_eq!(parse_graph("grid:2x4:open").unwrap().edge_count(), 24);
        assert_eq!(parse_graph("er:30:0.3:7").unwrap().p(), 30);
        for bad in ["cycle", "cycle:x", "grid:2", "grid:2x4:closed", "star:5", "er:10:0.5", "cycle:2"] {
            assert_eq!(parse_graph(bad).unwrap_err().exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn rate_grids() {
        let g = parse_rate_grid("0.1:0.9:0.1").unwrap();
        assert_eq!(g, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]);
        assert_eq!(parse_rate_grid("0.5, 1").unwrap(), vec![0.5, 1.0]);
        assert!(parse_rate_grid("0:1:0.5").is_err());
        assert!(parse_rate_grid("0.1:0.9").is_err());
        assert!(parse_rate_grid("0.5:0.1:0.1").is_err());
    }

    #[test]
    fn models() {
        assert_eq!(parse_model("det").unwrap(), SpreadModel::Deterministic);
        assert_eq!(parse_model("stoch:0.5").unwrap(), SpreadModel::Stochastic { q: 0.5 });
        assert!(parse_model("stoch:0").is_err());
        assert!(parse_model("stoch").is_err());
    }

    #[test]
    fn bench_families() {
        assert_eq!(family_with_p("cycle", 9).unwrap(), GraphFamily::Cycle { p: 9 });
        assert_eq!(
            family_with_p("grid:2:open", 9).unwrap(),
            GraphFamily::Grid { dim: 2, side: 3, wrapped: false }
        );
        assert!(family_with_p("grid:2", 10).is_err());
    }
}
