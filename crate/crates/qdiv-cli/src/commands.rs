use std::collections::BTreeMap;
use std::io::Write;
use std::ops::RangeInclusive;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::ValueEnum;
use qdiv::aep::{self, Smoothed};
use qdiv::channel_divergences::{channel_divergence_ref, d_max_ref, AscentConfig};
use qdiv::channels::{random_channel_between, Channel};
use qdiv::divergences::{self as dv, Divergence};
use qdiv::oracle::Distribution;
use qdiv::smoothing::{hypothesis_testing, smooth_dmax_with, Ball};
use qdiv::{random, BlockAlgebra, PositiveFunctional};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::ext_real;
use crate::instance::{Instance, InstanceSpec};
use crate::suites::reference_qubit_pair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Quantity {
    RelativeEntropy,
    SandwichedRenyi,
    PetzRenyi,
    GeometricRenyi,
    DMax,
    DH,
    SmoothDmax,
    InfoSpectrum,
    Fidelity,
    PurifiedDistance,
    Variance,
    ThirdMoment,
    MeasuredRenyi,
    SecondOrder,
    FiniteNBound,
    DmaxViaRenyiBound,
    VtFromDmax,
    DMaxRef,
    ChannelDivergenceRef,
}

#[derive(Clone, Debug, Default)]
pub struct ComputeArgs {
    pub rho: String,
    pub sigma: String,
    pub phi: Option<String>,
    pub psi: Option<String>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub n: Option<usize>,
    pub which: Option<Smoothed>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub quantity: String,
    #[serde(with = "ext_real")]
    pub value: f64,
    pub module: &'static str,
    pub parameters: BTreeMap<String, Value>,
    pub residuals: BTreeMap<String, Value>,
    pub wall_time_s: f64,
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> anyhow::Result<T> {
    v.ok_or_else(|| anyhow!("this quantity needs --{flag}"))
}

pub fn compute(inst: &Instance, quantity: Quantity, args: &ComputeArgs, config: &RunConfig) -> anyhow::Result<ResultRecord> {
    let start = Instant::now();
    let mut parameters = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    let pair = || -> anyhow::Result<(&PositiveFunctional, &PositiveFunctional)> { Ok((inst.state(&args.rho)?, inst.state(&args.sigma)?)) };
    let channels = || -> anyhow::Result<(&Channel, &Channel)> {
        let phi = args.phi.as_deref().ok_or_else(|| anyhow!("this quantity needs --phi"))?;
        let psi = args.psi.as_deref().ok_or_else(|| anyhow!("this quantity needs --psi"))?;
        Ok((inst.channel(phi)?, inst.channel(psi)?))
    };
    if matches!(quantity, Quantity::DMaxRef | Quantity::ChannelDivergenceRef) {
        parameters.insert("phi".into(), json!(args.phi));
        parameters.insert("psi".into(), json!(args.psi));
    } else {
        parameters.insert("rho".into(), json!(args.rho));
        parameters.insert("sigma".into(), json!(args.sigma));
    }
    let mut param = |k: &str, v: Value| {
        parameters.insert(k.to_string(), v);
    };
    let (module, value) = match quantity {
        Quantity::RelativeEntropy => ("divergences", { let (r, s) = pair()?; dv::relative_entropy(r, s)?.value }),
        Quantity::SandwichedRenyi | Quantity::PetzRenyi | Quantity::GeometricRenyi => {
            let alpha = need(args.alpha, "alpha")?;
            param("alpha", json!(alpha));
            let div = match quantity {
                Quantity::SandwichedRenyi => Divergence::Sandwiched(alpha),
                Quantity::PetzRenyi => Divergence::Petz(alpha),
                _ => Divergence::Geometric(alpha),
            };
            let (r, s) = pair()?;
            ("divergences", div.eval(r, s)?.value)
        }
        Quantity::DMax => ("divergences", { let (r, s) = pair()?; dv::d_max(r, s)?.value }),
        Quantity::DH => {
            let eps = need(args.epsilon, "epsilon")?;
            param("epsilon", json!(eps));
            let (r, s) = pair()?;
            let (v, test) = hypothesis_testing(r, s, eps)?;
            residuals.insert("type_one_error".into(), json!(test.type1));
            ("smoothing", v.value)
        }
        Quantity::SmoothDmax => {
            let eps = need(args.epsilon, "epsilon")?;
            param("epsilon", json!(eps));
            let (r, s) = pair()?;
            let (v, cert) = smooth_dmax_with(r, s, eps, Ball::Substates, &config.solver)?;
            residuals.insert("purified_distance".into(), json!(cert.purified_distance_achieved));
            residuals.insert("undecided_steps".into(), json!(cert.undecided_steps));
            residuals.insert("solver".into(), serde_json::to_value(&cert.solver_residuals)?);
            ("smoothing", v.value)
        }
        Quantity::InfoSpectrum => {
            let eps = need(args.epsilon, "epsilon")?;
            param("epsilon", json!(eps));
            let (r, s) = pair()?;
            ("divergences", dv::info_spectrum(r, s, eps)?.value)
        }
        Quantity::Fidelity => ("divergences", { let (r, s) = pair()?; dv::fidelity(r, s)? }),
        Quantity::PurifiedDistance => ("divergences", { let (r, s) = pair()?; dv::purified_distance(r, s)? }),
        Quantity::Variance | Quantity::ThirdMoment => {
            let (r, s) = pair()?;
            let m = dv::moments(r, s)?;
            let (raw, centered) = if quantity == Quantity::Variance { (m.v_raw, m.v_centered) } else { (m.t_raw, m.t_centered) };
            residuals.insert("centered".into(), json!(ext_real::to_value(centered)));
            ("divergences", raw)
        }
        Quantity::MeasuredRenyi => {
            let alpha = need(args.alpha, "alpha")?;
            param("alpha", json!(alpha));
            let (r, s) = pair()?;
            let b = dv::measured_renyi_bounds(r, s, alpha, 32, config.seed)?;
            residuals.insert("upper".into(), json!(ext_real::to_value(b.upper)));
            residuals.insert("pinched".into(), json!(ext_real::to_value(b.pinched)));
            ("divergences", b.lower)
        }
        Quantity::SecondOrder => {
            let (n, eps) = (need(args.n, "n")?, need(args.epsilon, "epsilon")?);
            let which = args.which.unwrap_or(Smoothed::HypothesisTesting);
            param("n", json!(n));
            param("epsilon", json!(eps));
            param("which", serde_json::to_value(which)?);
            let (r, s) = pair()?;
            let e = aep::second_order_target(r, s, n, eps, which)?;
            residuals.insert("d".into(), json!(e.d));
            residuals.insert("v_centered".into(), json!(e.v));
            ("aep", e.predicted)
        }
        Quantity::FiniteNBound => {
            let (n, eps) = (need(args.n, "n")?, need(args.epsilon, "epsilon")?);
            param("n", json!(n));
            param("epsilon", json!(eps));
            let (r, s) = pair()?;
            residuals.insert("mu".into(), json!(aep::finite_n_mu(r, s)?));
            ("aep", aep::finite_n_dmax_bound(r, s, n, eps)?)
        }
        Quantity::DmaxViaRenyiBound => {
            let (alpha, eps) = (need(args.alpha, "alpha")?, need(args.epsilon, "epsilon")?);
            param("alpha", json!(alpha));
            param("epsilon", json!(eps));
            let (r, s) = pair()?;
            ("aep", aep::dmax_via_renyi_bound(r, s, alpha, eps)?)
        }
        Quantity::VtFromDmax => {
            let (r, s) = pair()?;
            let (v, t) = aep::vt_from_dmax(r, s)?;
            residuals.insert("t_bound".into(), json!(t));
            ("aep", v)
        }
        Quantity::DMaxRef => ("channel_divergences", { let (p, q) = channels()?; d_max_ref(p, q)?.value }),
        Quantity::ChannelDivergenceRef => {
            let alpha = need(args.alpha, "alpha")?;
            param("alpha", json!(alpha));
            let (p, q) = channels()?;
            let cfg = AscentConfig { seed: config.seed, ..AscentConfig::default() };
            let d = channel_divergence_ref(p, q, Divergence::Sandwiched(alpha), None, &cfg)?;
            residuals.insert("bound".into(), serde_json::to_value(d.bound)?);
            ("channel_divergences", d.value)
        }
    };
    let quantity = quantity.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    Ok(ResultRecord { quantity, value, module, parameters, residuals, wall_time_s: start.elapsed().as_secs_f64() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    AepClassical,
    AepQuantum,
    #[value(name = "finite-n-6")]
    FiniteN,
}

impl SweepKind {
    pub fn default_range(self) -> RangeInclusive<usize> {
        match self {
            SweepKind::AepClassical => 1..=2000,
            SweepKind::AepQuantum => 1..=8,
            SweepKind::FiniteN => 4..=6,
        }
    }

    pub fn default_epsilon(self) -> f64 {
        match self {
            SweepKind::FiniteN => 0.9,
            _ => 0.25,
        }
    }
}

pub fn parse_range(text: &str) -> anyhow::Result<RangeInclusive<usize>> {
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a, b.trim_start_matches('=')),
        None => (text, text),
    };
    let (a, b): (usize, usize) = (a.trim().parse().context("range start")?, b.trim().parse().context("range end")?);
    if a == 0 || b < a {
        bail!("range {text} must be nonempty and start at 1 or later");
    }
    Ok(a..=b)
}

fn classical_weights(state: &PositiveFunctional) -> anyhow::Result<Vec<f64>> {
    let mut w = Vec::new();
    for (b, block) in state.algebra().blocks().iter().enumerate() {
        let m = state.block(b);
        for i in 0..block.dim {
            for j in 0..block.dim {
                if i != j && m[(i, j)].norm() > 1e-14 {
                    bail!("classical sweeps need diagonal states");
                }
            }
            w.push(m[(i, i)].re * block.weight);
        }
    }
    Ok(w)
}

pub struct SweepOutput {
    pub csv: Vec<u8>,
    pub warnings: Vec<String>,
    /// False when a bound row fails.
    pub pass: bool,
}

/// Runs a sweep and renders it as CSV with a metadata header line.
pub fn sweep(inst: Option<&Instance>, kind: SweepKind, range: RangeInclusive<usize>, eps: f64, which: Smoothed, config: &RunConfig) -> anyhow::Result<SweepOutput> {
    let pair = match inst {
        Some(i) => (i.state("rho")?.clone(), i.state("sigma")?.clone()),
        None if kind == SweepKind::AepClassical => (dv::classical_state(&[0.11, 0.89])?, dv::classical_state(&[0.5, 0.5])?),
        None => reference_qubit_pair(),
    };
    let mut warnings = Vec::new();
    let mut ns: Vec<usize> = range.collect();
    let mut meta: Vec<(&str, String)> = vec![("seed", config.seed.to_string()), ("epsilon", eps.to_string())];
    let mut csv = Vec::new();
    let mut pass = true;
    match kind {
        SweepKind::AepClassical => {
            let (p, q) = (Distribution::new(classical_weights(&pair.0)?)?, Distribution::new(classical_weights(&pair.1)?)?);
            meta.push(("quantity", "D_H^eps".into()));
            meta.push(("variance", "centered;predicted_raw=raw".into()));
            let rows = aep::classical_aep_sweep(&p, &q, eps, &ns)?;
            aep::write_sweep_csv(&rows, &meta, &mut csv)?;
        }
        SweepKind::AepQuantum => {
            let d = pair.0.algebra().total_dim() as f64;
            let fits = |n: usize| d.powi(n as i32) <= aep::DIMENSION_BUDGET as f64;
            if let Some(&n) = ns.iter().find(|&&n| !fits(n)) {
                warnings.push(format!("dimension budget {} exceeded from n = {n}; partial results", aep::DIMENSION_BUDGET));
                ns.retain(|&n| fits(n));
            }
            meta.push(("quantity", match which {
                Smoothed::HypothesisTesting => "D_H^eps".into(),
                Smoothed::MaxRelative => "D_max^sqrt(eps)_against_Phi^-1(eps)".into(),
            }));
            meta.push(("variance", "centered;predicted_raw=raw".into()));
            let rows = aep::aep_sweep(&pair.0, &pair.1, eps, &ns, which, &config.solver)?;
            aep::write_sweep_csv(&rows, &meta, &mut csv)?;
        }
        SweepKind::FiniteN => {
            meta.push(("quantity", "D_max^eps".into()));
            writeln!(csv, "# {}", meta.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" "))?;
            let mut w = csv::Writer::from_writer(&mut csv);
            w.write_record(["n", "epsilon", "measured", "bound", "margin"])?;
            for n in ns {
                let c = aep::finite_n_check(&pair.0, &pair.1, n, eps, &config.solver)?;
                pass &= c.measured_rate <= c.bound + 1e-6;
                w.serialize((n, eps, c.measured_rate, c.bound, c.bound - c.measured_rate))?;
            }
            w.flush()?;
        }
    }
    Ok(SweepOutput { csv, warnings, pass })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RandomKind {
    StatePair,
    Channel,
    ReplacerChain,
}

/// `dims` is `d` for states, `d_in:d_out` for channels and `d` per step for chains.
pub fn random_instance(kind: RandomKind, dims: &str, rank: Option<usize>, length: usize, seed: u64) -> anyhow::Result<InstanceSpec> {
    let parse = |s: &str| -> anyhow::Result<usize> {
        let d: usize = s.trim().parse().with_context(|| format!("dimension `{s}`"))?;
        if !(1..=64).contains(&d) {
            bail!("unsupported dimension {d}");
        }
        Ok(d)
    };
    let mut rng = random::rng(seed);
    let mut inst = Instance::default();
    inst.metadata.insert("seed".into(), json!(seed));
    inst.metadata.insert("kind".into(), json!(format!("{kind:?}")));
    match kind {
        RandomKind::StatePair => {
            let alg = BlockAlgebra::full(parse(dims)?);
            inst.algebras.insert("system".into(), alg.clone());
            inst.states.insert("rho".into(), random::state(&alg, None, &mut rng));
            inst.states.insert("sigma".into(), random::state(&alg, None, &mut rng));
        }
        RandomKind::Channel => {
            let (a, b) = dims.split_once(':').unwrap_or((dims, dims));
            let (din, dout) = (parse(a)?, parse(b)?);
            let rank = rank.unwrap_or(din.div_ceil(dout).max(2));
            if rank * dout < din {
                bail!("rank {rank} is too small for a {din} -> {dout} channel");
            }
            let (ai, ao) = (BlockAlgebra::full(din), BlockAlgebra::full(dout));
            inst.algebras.insert("input".into(), ai.clone());
            inst.algebras.insert("output".into(), ao.clone());
            let phi = random_channel_between(&ai, &ao, rank, &mut rng)?;
            inst.channels.insert("phi".into(), phi);
            let target = random::state(&ao, None, &mut rng);
            inst.channels.insert("psi".into(), Channel::replacer(&ai, &target)?);
            inst.states.insert("rho".into(), random::state(&ai, None, &mut rng));
            inst.states.insert("sigma".into(), random::state(&ai, None, &mut rng));
        }
        RandomKind::ReplacerChain => {
            let alg = BlockAlgebra::full(parse(dims)?);
            inst.algebras.insert("step".into(), alg.clone());
            for k in 1..=length {
                inst.states.insert(format!("rho_{k}"), random::state(&alg, None, &mut rng));
                inst.states.insert(format!("sigma_{k}"), random::state(&alg, None, &mut rng));
            }
        }
    }
    Ok(inst.to_spec())
}
