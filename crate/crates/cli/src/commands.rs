use std::collections::HashSet;
use std::fs::{self, File};
use std::path::Path;

use chrono::NaiveDate;
use serde::Serialize;
use spreaddetect::detect::{
    estimate_with_distances, quadratic_stat_matrix, rate_search_with_distances, scaled_distance,
    stat_matrix, test_threshold, test_with_distances, StatKind,
};
use spreaddetect::graph::{
    all_pairs_distances, identifiability_count, identifiability_count_over_sources, NetworkGraph,
};
use spreaddetect::cusum::cusum_transform;
use spreaddetect::preprocess::{assemble_matrix, preprocess_units, read_weekly_csv, SeasonalBaseline};
use spreaddetect::simulate::{
    data_from_schedule, monte_carlo, replication_rng, spread_schedule, Method, MonteCarloConfig,
    SpreadModel, SpreadSpec, BENCHMARK_COLUMNS,
};

use crate::error::{invalid, read_failed, CliResult};
use crate::io::{read_data, with_output, write_json, write_matrix};
use crate::spec::{family_with_p, parse_graph, parse_model, parse_rate_grid, parse_row};
use crate::{BenchArgs, DetectArgs, MgArgs, PreprocessArgs, SimulateArgs, StatArg, TestArgs, SCHEMA_VERSION};

fn check_nodes(graph: &NetworkGraph, p: usize) -> CliResult<()> {
    if graph.p() != p {
        return Err(invalid(
            "--data",
            format!("{p} rows but the graph has {} nodes", graph.p()),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct DetectOutput {
    schema_version: u32,
    stat: StatKind,
    p: usize,
    n: usize,
    j_hat: usize,
    z_hat: usize,
    stat_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    j_hat_label: Option<String>,
}

pub fn detect(args: DetectArgs) -> CliResult<()> {
    let kind = match args.stat {
        StatArg::Quad => StatKind::Quadratic,
        StatArg::Linear => StatKind::Linear,
    };
    let grid = match &args.rate_grid {
        Some(spec) if kind == StatKind::Linear => {
            return Err(invalid("--rate-grid", format!("`{spec}` only applies to --stat quad")))
        }
        Some(spec) => Some(parse_rate_grid(spec)?),
        None => None,
    };
    let graph = parse_graph(&args.graph)?;
    let input = read_data(&args.data)?;
    let x = &input.data;
    check_nodes(&graph, x.p())?;
    let dist = all_pairs_distances(&graph);

    let result = match &grid {
        Some(grid) => rate_search_with_distances(x, &dist, grid)?,
        None => estimate_with_distances(x, &dist, kind)?,
    };
    if let Some(path) = &args.emit_stat_matrix {
        let cusum = cusum_transform(x);
        let stats = match result.q_hat {
            Some(q) => quadratic_stat_matrix(&cusum, &scaled_distance(&dist, q)?)?,
            None => stat_matrix(&cusum, &dist, kind)?,
        };
        with_output(Some(path), |w| stats.write_csv(w))?;
    }
    write_json(
        args.output.as_deref(),
        &DetectOutput {
            schema_version: SCHEMA_VERSION,
            stat: kind,
            p: x.p(),
            n: x.n(),
            j_hat: result.j_hat,
            z_hat: result.z_hat,
            stat_value: result.stat_value,
            q_hat: result.q_hat,
            j_hat_label: input.row_labels.map(|l| l[result.j_hat - 1].clone()),
        },
    )
}

#[derive(Serialize)]
struct TestOutput {
    schema_version: u32,
    p: usize,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    lambda: f64,
    max_stat: f64,
    reject: bool,
}

pub fn test(args: TestArgs) -> CliResult<()> {
    if let Some(d) = args.delta {
        if !(d > 0.0 && d < 1.0) {
            return Err(invalid("--delta", format!("{d} is not in (0, 1)")));
        }
    }
    if let Some(l) = args.lambda {
        if !l.is_finite() {
            return Err(invalid("--lambda", "must be finite"));
        }
    }
    let graph = parse_graph(&args.graph)?;
    let x = read_data(&args.data)?.data;
    check_nodes(&graph, x.p())?;
    let lambda = match (args.delta, args.lambda) {
        (Some(d), None) => test_threshold(x.p(), x.n(), d)?,
        (None, Some(l)) => l,
        _ => return Err(invalid("--delta/--lambda", "give exactly one")),
    };
    let outcome = test_with_distances(&x, &all_pairs_distances(&graph), lambda)?;
    write_json(
        args.output.as_deref(),
        &TestOutput {
            schema_version: SCHEMA_VERSION,
            p: x.p(),
            n: x.n(),
            delta: args.delta,
            lambda: outcome.lambda,
            max_stat: outcome.max_stat,
            reject: outcome.reject,
        },
    )
}

#[derive(Serialize)]
struct Truth<'a> {
    schema_version: u32,
    graph: &'a str,
    p: usize,
    n: usize,
    z_star: usize,
    j_star: usize,
    signal: f64,
    model: SpreadModel,
    seed: u64,
    rep: usize,
    noiseless: bool,
    spread_time: &'a [Option<usize>],
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let model = parse_model(&args.model)?;
    if !args.signal.is_finite() {
        return Err(invalid("--signal", "must be finite"));
    }
    let graph = parse_graph(&args.graph)?;
    let spec = SpreadSpec::uniform(graph.p(), args.n, args.z_star, args.j_star, args.signal, model);
    spec.validate(graph.p())?;
    let mut rng = replication_rng(args.seed, args.rep);
    let schedule = spread_schedule(&graph, &spec, &mut rng)?;
    let x = data_from_schedule(&spec, &schedule, &mut rng, args.noiseless)?;

    with_output(Some(&args.output), |w| write_matrix(w, &x, None, None))?;
    write_json(
        Some(&args.truth),
        &Truth {
            schema_version: SCHEMA_VERSION,
            graph: &args.graph,
            p: graph.p(),
            n: args.n,
            z_star: args.z_star,
            j_star: args.j_star,
            signal: args.signal,
            model,
            seed: args.seed,
            rep: args.rep,
            noiseless: args.noiseless,
            spread_time: &schedule.spread_time,
        },
    )
}

fn parse_methods(spec: Option<&str>, default: &[Method]) -> CliResult<Vec<Method>> {
    let Some(spec) = spec else {
        return Ok(default.to_vec());
    };
    let mut seen = HashSet::new();
    let mut methods = Vec::new();
    for name in spec.split(',').map(str::trim) {
        let m = Method::parse(name).ok_or_else(|| {
            invalid("--methods", format!("unknown method `{name}` (SD, rSD, SD-linear, coordwise)"))
        })?;
        if seen.insert(m) {
            methods.push(m);
        }
    }
    Ok(methods)
}

fn as_count(flag: &str, v: f64) -> CliResult<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(invalid(flag, format!("{v} is not a non-negative integer")))
    }
}

pub fn bench(args: BenchArgs) -> CliResult<()> {
    if args.reps == 0 {
        return Err(invalid("--reps", "must be at least 1"));
    }
    let q_grid = parse_rate_grid(&args.rate_grid)?;
    let override_model = args.model.as_deref().map(parse_model).transpose()?;
    if !(args.q > 0.0 && args.q <= 1.0) {
        return Err(invalid("--q", format!("{} is not in (0, 1]", args.q)));
    }

    let mut configs = Vec::new();
    for row in &args.table1_row {
        let v = parse_row("--table1-row", row, 4)?;
        let (n, p, z) = (
            as_count("--table1-row", v[0])?,
            as_count("--table1-row", v[1])?,
            as_count("--table1-row", v[2])?,
        );
        let mut c = MonteCarloConfig::new(family_with_p(&args.family, p)?, n, z, (p / 2).max(1), v[3]);
        c.model = override_model.unwrap_or(SpreadModel::Deterministic);
        c.methods = parse_methods(args.methods.as_deref(), &[Method::SpreadDetect, Method::Coordinatewise])?;
        configs.push(c);
    }
    for row in &args.table2_row {
        let v = parse_row("--table2-row", row, 5)?;
        let (n, p, z, j) = (
            as_count("--table2-row", v[0])?,
            as_count("--table2-row", v[1])?,
            as_count("--table2-row", v[2])?,
            as_count("--table2-row", v[3])?,
        );
        let mut c = MonteCarloConfig::new(family_with_p(&args.family, p)?, n, z, j, v[4]);
        c.model = override_model.unwrap_or(SpreadModel::Stochastic { q: args.q });
        c.methods = parse_methods(
            args.methods.as_deref(),
            &[Method::SpreadDetect, Method::RateSearch, Method::Coordinatewise],
        )?;
        configs.push(c);
    }

    let mut tables = Vec::with_capacity(configs.len());
    for mut c in configs {
        c.q_grid = q_grid.clone();
        tables.push(monte_carlo(&c, args.reps, args.seed)?);
    }
    with_output(args.output.as_deref(), |w| {
        writeln!(w, "{}", BENCHMARK_COLUMNS.join(","))?;
        for t in &tables {
            t.write_csv(&mut *w, false)?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct UnitBaseline<'a> {
    node: usize,
    #[serde(flatten)]
    baseline: &'a SeasonalBaseline,
}

#[derive(Serialize)]
struct PreprocessSidecar<'a> {
    schema_version: u32,
    train_end: NaiveDate,
    bandwidth: f64,
    p: usize,
    n: usize,
    dates: &'a [NaiveDate],
    units: Vec<UnitBaseline<'a>>,
}

fn parse_units(spec: &str) -> CliResult<Vec<String>> {
    let text = match spec.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| read_failed(Path::new(path), e))?,
        None => spec.replace(',', "\n"),
    };
    let units: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let mut seen = HashSet::new();
    if let Some(dup) = units.iter().find(|u| !seen.insert(u.as_str())) {
        return Err(invalid("--units", format!("`{dup}` is listed twice")));
    }
    Ok(units)
}

pub fn preprocess(args: PreprocessArgs) -> CliResult<()> {
    if !(args.bandwidth > 0.0 && args.bandwidth.is_finite()) {
        return Err(invalid("--bandwidth", format!("{} is not positive", args.bandwidth)));
    }
    let graph = parse_graph(&args.graph)?;
    let units = parse_units(&args.units)?;
    if units.len() != graph.p() {
        return Err(invalid(
            "--units",
            format!("{} units for a graph with {} nodes", units.len(), graph.p()),
        ));
    }
    let file = File::open(&args.input).map_err(|e| read_failed(&args.input, e))?;
    let all = read_weekly_csv(file).map_err(|e| invalid("--input", e))?;
    let series: Vec<_> = all.into_iter().filter(|s| units.contains(&s.unit_id)).collect();
    if let Some(missing) = units.iter().find(|u| !series.iter().any(|s| &s.unit_id == *u)) {
        return Err(invalid("--units", format!("no data for unit `{missing}`")));
    }

    let (baselines, rows) = preprocess_units(&series, args.train_end, args.bandwidth)?;
    let x = assemble_matrix(&rows, &graph, &units)?;
    let dates = &rows[0].dates;

    let mut header = vec!["unit".to_string()];
    header.extend(dates.iter().map(|d| d.to_string()));
    with_output(Some(&args.output), |w| write_matrix(w, &x, Some(&header), Some(&units)))?;

    let by_node = units
        .iter()
        .enumerate()
        .map(|(i, u)| UnitBaseline {
            node: i + 1,
            baseline: baselines
                .iter()
                .find(|b| &b.unit_id == u)
                .expect("every unit was fitted"),
        })
        .collect();
    write_json(
        Some(&args.sidecar),
        &PreprocessSidecar {
            schema_version: SCHEMA_VERSION,
            train_end: args.train_end,
            bandwidth: args.bandwidth,
            p: x.p(),
            n: x.n(),
            dates,
            units: by_node,
        },
    )
}

#[derive(Serialize)]
struct MgOutput<'a> {
    schema_version: u32,
    graph: &'a str,
    p: usize,
    #[serde(rename = "C1")]
    c1: f64,
    n: usize,
    z_star: usize,
    j_star: Option<usize>,
    minimize_over_source: bool,
    m: usize,
    m_over_p: f64,
}

pub fn mg(args: MgArgs) -> CliResult<()> {
    if !(args.c1 > 0.0 && args.c1 < 1.0) {
        return Err(invalid("--c1", format!("{} is not in (0, 1)", args.c1)));
    }
    let mut results = Vec::with_capacity(args.graph.len());
    for spec in &args.graph {
        let graph = parse_graph(spec)?;
        let p = graph.p();
        let n = args.n.unwrap_or(4 * p);
        let z_star = args.z_star.unwrap_or(n / 2);
        let dist = all_pairs_distances(&graph);
        let (j_star, m) = if args.minimize_over_source {
            (None, identifiability_count_over_sources(&dist, args.c1, z_star, n))
        } else {
            let j = args.j_star.unwrap_or((p / 2).max(1));
            (Some(j), identifiability_count(&dist, args.c1, z_star, j, n))
        };
        let m = m.map_err(|e| invalid("--n/--z-star/--j-star", format!("{spec}: {e}")))?;
        results.push(MgOutput {
            schema_version: SCHEMA_VERSION,
            graph: spec,
            p,
            c1: args.c1,
            n,
            z_star,
            j_star,
            minimize_over_source: args.minimize_over_source,
            m,
            m_over_p: m as f64 / p as f64,
        });
    }
    match results.as_slice() {
        [single] => write_json(args.output.as_deref(), single),
        many => write_json(args.output.as_deref(), many),
    }
}
