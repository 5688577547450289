use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use fgdyn::model::RobotModel;
use fgdyn::transcribe::{close_loops, prepare, solve_prepared, Designation, JointState, ProblemSpec, Scheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{emit, invalid, load_model, parse_planar, BenchArgs, CliError, CliResult, ProblemType};

/// Orderings must agree this closely on every trial before timings count.
pub const AGREEMENT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub ordering: String,
    pub mean_us: f64,
    pub median_us: f64,
    pub edge_count: usize,
    pub fill_in: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<BenchRow>,
    /// Largest disagreement between orderings over all trials.
    pub max_disagreement: f64,
}

pub fn default_orderings(kind: ProblemType) -> Vec<Scheme> {
    match kind {
        ProblemType::Inverse => vec![Scheme::Rnea, Scheme::MinDegree, Scheme::NestedDissection],
        ProblemType::Forward => vec![Scheme::Crba, Scheme::Aba, Scheme::MinDegree, Scheme::NestedDissection],
        ProblemType::Hybrid => vec![Scheme::MinDegree, Scheme::NestedDissection],
    }
}

fn random_state(model: &RobotModel, rng: &mut ChaCha8Rng) -> CliResult<JointState> {
    let movable = model.movable_joints();
    let n = movable.len();
    if !model.has_loops() {
        return Ok(JointState::new(
            (0..n).map(|_| rng.random_range(-PI..PI)).collect(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        ));
    }
    // closed chains only assemble near their reference configuration
    let driven: Vec<usize> = (0..n).filter(|i| model.joints()[movable[*i]].actuated).collect();
    let mut s = JointState::zeros(model);
    for &i in &driven {
        s.angles[i] = rng.random_range(-0.3..0.3);
        s.rates[i] = rng.random_range(-1.0..1.0);
    }
    Ok(close_loops(model, &s, &driven)?)
}

/// Inverse: random accelerations. Forward: random torques. Hybrid: the first
/// actuated joint has a given acceleration, the rest given torques.
fn random_spec(kind: ProblemType, actuated: usize, rng: &mut ChaCha8Rng) -> ProblemSpec {
    let v: Vec<f64> = (0..actuated).map(|_| rng.random_range(-1.0..1.0)).collect();
    match kind {
        ProblemType::Inverse => ProblemSpec::inverse(&v),
        ProblemType::Forward => ProblemSpec::forward(&v),
        ProblemType::Hybrid => ProblemSpec {
            joints: v
                .iter()
                .enumerate()
                .map(|(i, x)| if i == 0 { Designation::Accel(*x) } else { Designation::Torque(*x) })
                .collect(),
            ..ProblemSpec::default()
        },
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn run_benchmark(
    model: &RobotModel,
    kind: ProblemType,
    schemes: &[Scheme],
    trials: usize,
    seed: u64,
    spec_extra: &ProblemSpec,
) -> CliResult<Benchmark> {
    if trials == 0 {
        return Err(invalid("--trials must be at least 1"));
    }
    if schemes.is_empty() {
        return Err(invalid("no orderings to benchmark"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let actuated = model.actuated_joints().len();
    let mut times = vec![Vec::with_capacity(trials); schemes.len()];
    let mut structure = vec![(0, 0); schemes.len()];
    let mut max_disagreement: f64 = 0.0;

    for trial in 0..trials {
        let state = random_state(model, &mut rng)?;
        let spec = ProblemSpec {
            planar_loops: spec_extra.planar_loops.clone(),
            ..random_spec(kind, actuated, &mut rng)
        };
        let prepared = prepare(model, &state, &spec)?;
        let mut reference = None;
        for (i, scheme) in schemes.iter().enumerate() {
            let input = prepared.clone();
            let start = Instant::now();
            let report = solve_prepared(model, input, &spec, scheme)?;
            times[i].push(start.elapsed().as_nanos() as f64 / 1000.0);
            if trial == 0 {
                structure[i] = (report.dag.edge_count(), report.dag.fill_in());
            }
            match &reference {
                None => reference = Some(report.raw),
                Some(r) => {
                    let d = report.raw.max_abs_diff(r);
                    max_disagreement = max_disagreement.max(d);
                    if !(d <= AGREEMENT) {
                        return Err(invalid(format!(
                            "ordering {scheme} disagrees with {} by {d:.3e} on trial {trial}",
                            schemes[0]
                        )));
                    }
                }
            }
        }
    }

    let rows = schemes
        .iter()
        .zip(times.iter_mut())
        .zip(structure)
        .map(|((scheme, t), (edge_count, fill_in))| {
            t.sort_by(f64::total_cmp);
            BenchRow {
                ordering: scheme.to_string(),
                mean_us: t.iter().sum::<f64>() / t.len() as f64,
                median_us: median(t),
                edge_count,
                fill_in,
            }
        })
        .collect();
    Ok(Benchmark {
        trials,
        seed,
        rows,
        max_disagreement,
    })
}

impl Benchmark {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "trials": self.trials,
            "seed": self.seed,
            "maxDisagreement": self.max_disagreement,
            "rows": self.rows.iter().map(|r| json!({
                "ordering": r.ordering,
                "meanMicros": r.mean_us,
                "medianMicros": r.median_us,
                "edgeCount": r.edge_count,
                "fillIn": r.fill_in,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>12} {:>12} {:>8} {:>8}\n",
            "ordering", "mean_us", "median_us", "edges", "fill_in"
        );
        for r in &self.rows {
            out += &format!(
                "{:<12} {:>12.2} {:>12.2} {:>8} {:>8}\n",
                r.ordering, r.mean_us, r.median_us, r.edge_count, r.fill_in
            );
        }
        out += &format!(
            "{} trials, seed {}, orderings agree within {:.1e}\n",
            self.trials, self.seed, self.max_disagreement
        );
        out
    }
}

pub(crate) fn cmd_benchmark(args: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    let model = load_model(&args.urdf)?;
    let schemes = match &args.orderings {
        Some(list) => list
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.parse::<Scheme>().map_err(CliError::from))
            .collect::<CliResult<Vec<_>>>()?,
        None => default_orderings(args.kind),
    };
    let mut extra = ProblemSpec::default();
    for p in &args.planar_loop {
        extra.planar_loops.push(parse_planar(p)?);
    }
    let bench = run_benchmark(&model, args.kind, &schemes, args.trials, args.seed, &extra)?;
    let text = if args.json {
        serde_json::to_string_pretty(&bench.to_json()).expect("JSON values serialize") + "\n"
    } else {
        bench.table()
    };
    emit(out, &text)
}
