use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use lnfee::game::oracle::run_oracle;
use lnfee::htlc2::{adversary_run, trace_jsonl};
use lnfee::probe::cost_curve;
use lnfee::sim::{run_simulation, Metrics};
use lnfee::topology::synthetic::generate;
use lnfee::{derive_seed, FeeModel, Move, Network, SimConfig};

use crate::config::ExperimentConfig;
use crate::output::{csv_bytes, jsonl_bytes, opt, write_atomic};

/// Seed streams for network preparation, apart from the simulator's own.
const STREAM_PARAMS: u64 = 4;
const STREAM_SYNTHETIC: u64 = 5;

pub struct Experiment<'a> {
    pub config: ExperimentConfig,
    pub snapshot: Option<&'a Path>,
    pub out: &'a Path,
    pub seed: u64,
}

impl Experiment<'_> {
    fn network(&self) -> Result<Network> {
        let mut network = match self.snapshot {
            Some(path) => {
                let file = File::open(path)
                    .with_context(|| format!("cannot open snapshot {}", path.display()))?;
                let (network, report) = Network::ingest_snapshot(file)
                    .with_context(|| format!("cannot load snapshot {}", path.display()))?;
                if report.warnings() > 0 {
                    log::warn!("snapshot cleanup: {report:?}");
                }
                network
            }
            None => {
                log::info!(
                    "no snapshot given, generating {} synthetic nodes",
                    self.config.network.nodes
                );
                let doc = generate(
                    &self.config.network.synthetic(),
                    derive_seed(self.seed, 0, STREAM_SYNTHETIC),
                );
                Network::from_doc(doc).context("synthetic network")?.0
            }
        };
        network
            .sample_missing_params(derive_seed(self.seed, 0, STREAM_PARAMS))
            .context("cannot fill policies")?;
        Ok(network)
    }
}

const METRIC_NAMES: [&str; 6] = ["SR", "LR", "F_I", "F_S", "F_I_prime", "F_S_prime"];

pub fn simulate(ctx: &Experiment) -> Result<()> {
    let network = ctx.network()?;
    let output = run_simulation(&network, &ctx.config.simulation)?;
    let header: Vec<&str> = std::iter::once("run").chain(METRIC_NAMES).collect();
    let rows = output.metrics.runs.iter().map(|r| {
        [
            r.run.to_string(),
            opt(r.sr),
            opt(r.lr),
            opt(r.f_i),
            opt(r.f_s),
            opt(r.f_i_prime),
            opt(r.f_s_prime),
        ]
    });
    write_atomic(ctx.out, "metrics.csv", &csv_bytes(&header, rows)?)?;
    write_atomic(ctx.out, "records.jsonl", &jsonl_bytes(&output.records)?)?;
    let m = &output.metrics;
    println!(
        "{}: SR {} LR {} over {} runs of {} payments",
        ctx.config.simulation.fee_model,
        opt(m.sr.mean),
        opt(m.lr.mean),
        ctx.config.simulation.num_runs,
        ctx.config.simulation.num_payments
    );
    Ok(())
}

pub fn compare(ctx: &Experiment) -> Result<()> {
    let network = ctx.network()?;
    let configs: Vec<SimConfig> = FeeModel::ALL
        .iter()
        .map(|&fee_model| SimConfig {
            fee_model,
            ..ctx.config.simulation.clone()
        })
        .collect();
    // Same seed for every arm, so all models see the same balances and payments.
    let results: Vec<Result<Metrics>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| {
                let network = &network;
                scope.spawn(move || Ok(run_simulation(network, config)?.metrics))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation thread panicked"))
            .collect()
    });

    let mut header = vec!["model".to_string()];
    for name in METRIC_NAMES {
        header.push(format!("{name}_mean"));
        header.push(format!("{name}_std"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for (model, metrics) in FeeModel::ALL.iter().zip(results) {
        let m = metrics?;
        let mut row = vec![model.to_string()];
        for s in [m.sr, m.lr, m.f_i, m.f_s, m.f_i_prime, m.f_s_prime] {
            row.push(opt(s.mean));
            row.push(opt(s.std));
        }
        println!("{model}: SR {} LR {}", opt(m.sr.mean), opt(m.lr.mean));
        rows.push(row);
    }
    write_atomic(ctx.out, "comparison.csv", &csv_bytes(&header, rows)?)?;
    Ok(())
}

pub fn probe(ctx: &Experiment) -> Result<()> {
    let section = &ctx.config.probe;
    let template = section.scenario(ctx.seed);
    let curve = cost_curve(&template, &section.sampled_balances(), section.granularity);
    let rows = curve.iter().map(|p| {
        [
            p.balance.to_string(),
            p.iterations.to_string(),
            p.cost.to_string(),
            p.window_mean_cost.to_string(),
        ]
    });
    write_atomic(
        ctx.out,
        "cost_curve.csv",
        &csv_bytes(&["B", "iterations", "cost_sat", "window_mean_cost"], rows)?,
    )?;
    let total: u64 = curve.iter().map(|p| p.cost).sum();
    println!(
        "{}: {} balances probed, {total} sat paid in total",
        section.fee_model,
        curve.len()
    );
    Ok(())
}

pub fn game_oracle(ctx: &Experiment) -> Result<()> {
    let report = run_oracle(&ctx.config.game_oracle, ctx.seed);
    let rows = report.decisions.iter().map(|d| {
        [
            d.path.to_string(),
            d.hops.to_string(),
            d.model.to_string(),
            d.party.to_string(),
            d.belief.to_string(),
            d.balance_ok.to_string(),
            d.fee.to_string(),
            d.collateral_cost.to_string(),
            d.fraction.to_string(),
            move_code(d.closed_form).to_string(),
            move_code(d.tree).to_string(),
        ]
    });
    let header = [
        "path",
        "hops",
        "model",
        "party",
        "belief",
        "balance_ok",
        "fee",
        "collateral_cost",
        "fraction",
        "closed_form",
        "tree",
    ];
    write_atomic(ctx.out, "game_oracle.csv", &csv_bytes(&header, rows)?)?;
    let mismatches = report.mismatches();
    println!(
        "{} paths, {} locking decisions, {mismatches} mismatches, {} withheld secrets",
        report.paths,
        report.decisions.len(),
        report.withheld
    );
    if mismatches > 0 || report.withheld > 0 {
        bail!("closed-form lock rule and game tree disagree");
    }
    Ok(())
}

pub fn htlc2_trace(ctx: &Experiment) -> Result<()> {
    let report = adversary_run(&ctx.config.htlc2)?;
    write_atomic(
        ctx.out,
        "htlc2_trace.jsonl",
        trace_jsonl(&report.trace).as_bytes(),
    )?;
    for party in &report.parties {
        println!(
            "v{}: intake {} sat, {} sat of fees lost",
            party.node,
            party.intake(),
            party.lost_amount
        );
    }
    println!(
        "closed channels: {:?}, rule-i rejections: {}",
        report.closed_channels, report.rule_i_rejections
    );
    Ok(())
}

pub fn generate_snapshot(ctx: &Experiment, nodes: Option<usize>) -> Result<()> {
    let mut synthetic = ctx.config.network.synthetic();
    if let Some(n) = nodes {
        synthetic.nodes = n;
    }
    if synthetic.nodes < 2 {
        bail!("a snapshot needs at least two nodes");
    }
    let doc = generate(&synthetic, derive_seed(ctx.seed, 0, STREAM_SYNTHETIC));
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    write_atomic(ctx.out, "snapshot.json", &bytes)?;
    println!("{} nodes, {} channels", doc.nodes.len(), doc.channels.len());
    Ok(())
}

fn move_code(mv: Move) -> &'static str {
    match mv {
        Move::Lock => "L",
        Move::NotLock => "NL",
        Move::Reveal => "H",
        Move::Withhold => "DH",
    }
}
