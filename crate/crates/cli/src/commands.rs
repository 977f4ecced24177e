use std::fs;
use std::path::{Path, PathBuf};

use plc_core::channel::{parse_header, ChannelParams, LossTrace};
use plc_core::conceal::{conceal_stream, ConcealConfig, NeuralModels};
use plc_core::dsp::wav::{encode, read_wav};
use plc_core::dsp::{AudioBuffer, FeatureExtractor};
use plc_core::fixtures::{fixture_corpus, periodic_corpus};
use plc_core::metrics::{empirical_plr, evaluate, EvalReport};
use plc_core::predictor::{self, PredictorModel};
use plc_core::vocoder::{self, FlowModel};
use plc_core::Method;

use crate::config::{echo, RunConfig};
use crate::error::{CliError, Result};
use crate::{ConcealArgs, EvalArgs, FeaturesArgs, FixturesArgs, SimulateArgs, TrainArgs};

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn read_trace(path: &Path) -> Result<(LossTrace, Option<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let plr = parse_header(&text).and_then(|(_, p)| p);
    Ok((LossTrace::parse(&text)?, plr))
}

pub fn simulate(cfg: &RunConfig, seed: u64, a: &SimulateArgs) -> Result<()> {
    let c = &cfg.channel;
    let plr = a.plr.unwrap_or(c.plr);
    let params = ChannelParams::derive(plr, a.lambda.unwrap_or(c.lambda), a.pg.unwrap_or(c.p_g), a.pb.unwrap_or(c.p_b))?;
    let trace = params.generate_trace(a.n, seed)?;
    write(&a.out, trace.to_text(Some(plr)))?;
    let mut eff = cfg.clone();
    eff.seed = Some(seed);
    eff.channel.plr = plr;
    eff.channel.lambda = params.lambda;
    eff.channel.p_g = params.p_g;
    eff.channel.p_b = params.p_b;
    echo(&eff, &a.out)?;
    let stats = empirical_plr(&trace)?;
    println!(
        "alpha={:.6} beta={:.6} packets={} lost={} empirical_plr={:.6}",
        params.alpha, params.beta, stats.packets, stats.lost, stats.plr
    );
    Ok(())
}

fn check_rate(audio: &AudioBuffer, cfg: &RunConfig, path: &Path) -> Result<()> {
    if audio.sample_rate != cfg.frames.sample_rate {
        return Err(plc_core::Error::Data(format!(
            "{} is {} Hz, configured for {} Hz",
            path.display(),
            audio.sample_rate,
            cfg.frames.sample_rate
        ))
        .into());
    }
    Ok(())
}

pub fn features(cfg: &RunConfig, a: &FeaturesArgs) -> Result<()> {
    let audio = read_wav(&a.input)?;
    check_rate(&audio, cfg, &a.input)?;
    let mel = FeatureExtractor::new(&cfg.frames)?.log_mel(&audio.samples)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..mel.n_mels()).map(|m| format!("mel{m}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for row in mel.rows() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    write(&a.out, w.into_inner().map_err(|e| csv_err(e.into_error().into()))?)?;
    echo(cfg, &a.out)?;
    println!("frames={} bands={}", mel.n_frames(), mel.n_mels());
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Core(plc_core::Error::Format(e.to_string()))
}

/// Every `.wav` file directly inside `dir`, in name order.
pub fn load_corpus(dir: &Path, cfg: &RunConfig) -> Result<Vec<AudioBuffer>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let audio = read_wav(&p)?;
        check_rate(&audio, cfg, &p)?;
        if audio.len() < cfg.frames.frame_len {
            log::warn!("skipping {}: shorter than one frame", p.display());
            continue;
        }
        out.push(audio);
    }
    if out.is_empty() {
        return Err(plc_core::Error::Data(format!("no usable WAV files in {}", dir.display())).into());
    }
    Ok(out)
}

fn write_losses(out: &Path, losses: &[f64]) -> Result<PathBuf> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["step", "loss"]).map_err(csv_err)?;
    for (i, l) in losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()]).map_err(csv_err)?;
    }
    let path = sibling(out, ".loss.csv");
    write(&path, w.into_inner().map_err(|e| csv_err(e.into_error().into()))?)?;
    Ok(path)
}

pub fn train_predictor(cfg: &RunConfig, seed: u64, a: &TrainArgs) -> Result<()> {
    let mut eff = cfg.clone();
    eff.seed = Some(seed);
    if let Some(s) = a.steps {
        eff.predictor_train.steps = s;
    }
    let fx = FeatureExtractor::new(&eff.frames)?;
    let mels = load_corpus(&a.data, &eff)?
        .iter()
        .map(|c| fx.log_mel(&c.samples))
        .collect::<plc_core::Result<Vec<_>>>()?;
    let (model, log) = predictor::train_predictor(&mels, eff.predictor, &eff.predictor_train, seed)?;
    model.save(&a.out)?;
    write_losses(&a.out, &log.losses)?;
    echo(&eff, &a.out)?;
    println!(
        "steps={} first_loss={:.6} last_loss={:.6}",
        log.losses.len(),
        log.losses.first().copied().unwrap_or(f64::NAN),
        log.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn train_vocoder(cfg: &RunConfig, seed: u64, a: &TrainArgs) -> Result<()> {
    let mut eff = cfg.clone();
    eff.seed = Some(seed);
    if let Some(s) = a.steps {
        eff.vocoder_train.steps = s;
    }
    let corpus = load_corpus(&a.data, &eff)?;
    let mut train_cfg = eff.vocoder_train.clone();
    train_cfg.checkpoint_path = Some(a.out.clone());
    let (model, log) = vocoder::train_vocoder(&corpus, &eff.frames, eff.vocoder, &train_cfg, seed)?;
    model.save(&a.out)?;
    write_losses(&a.out, &log.losses)?;
    echo(&eff, &a.out)?;
    println!(
        "steps={} first_nll={:.6} last_nll={:.6}",
        log.losses.len(),
        log.losses.first().copied().unwrap_or(f64::NAN),
        log.losses.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn load_models(cfg: &RunConfig, a: &ConcealArgs) -> Result<(PredictorModel, FlowModel)> {
    let missing = |what: &str| plc_core::Error::State(format!("method neural needs a {what} checkpoint"));
    let p_path = a.predictor.clone().or(cfg.models.predictor.clone()).ok_or_else(|| missing("predictor"))?;
    let v_path = a.vocoder.clone().or(cfg.models.vocoder.clone()).ok_or_else(|| missing("vocoder"))?;
    let (p, warnings) = PredictorModel::load(&p_path)?;
    warnings.iter().for_each(|w| log::warn!("{}: {w}", p_path.display()));
    let (v, warnings) = FlowModel::load(&v_path)?;
    warnings.iter().for_each(|w| log::warn!("{}: {w}", v_path.display()));
    Ok((p, v))
}

pub fn conceal(cfg: &RunConfig, seed: u64, a: &ConcealArgs) -> Result<()> {
    let audio = read_wav(&a.input)?;
    check_rate(&audio, cfg, &a.input)?;
    let (trace, _) = read_trace(&a.trace)?;
    let models = match a.method {
        Method::Neural => Some(load_models(cfg, a)?),
        _ => None,
    };
    let neural = models.as_ref().map(|(p, v)| NeuralModels {
        predictor: p,
        vocoder: v,
    });
    let mut eff = cfg.clone();
    eff.seed = Some(seed);
    eff.conceal.sigma = a.sigma.unwrap_or(cfg.conceal.sigma);
    let ccfg = ConcealConfig {
        frames: eff.frames,
        sigma: eff.conceal.sigma,
        seed,
    };
    let (out, report) = conceal_stream(&audio, &trace, a.method, &ccfg, neural)?;
    write(&a.out, encode(&out)?)?;
    let report_path = a.report.clone().unwrap_or_else(|| a.out.with_extension("json"));
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write(&report_path, json + "\n")?;
    echo(&eff, &a.out)?;
    println!(
        "method={} packets={} lost={} neural={} wsola={} silence={} coldstart={}",
        report.method,
        report.packets,
        report.lost,
        report.concealed_neural,
        report.concealed_wsola,
        report.concealed_silence,
        report.concealed_silence_coldstart
    );
    Ok(())
}

pub fn eval(cfg: &RunConfig, a: &EvalArgs) -> Result<()> {
    if !a.trace.is_empty() && a.trace.len() != a.test.len() {
        return Err(CliError::Usage(format!(
            "{} --trace values for {} --test values",
            a.trace.len(),
            a.test.len()
        )));
    }
    if !a.label.is_empty() && a.label.len() != a.test.len() {
        return Err(CliError::Usage(format!(
            "{} --label values for {} --test values",
            a.label.len(),
            a.test.len()
        )));
    }
    let reference = read_wav(&a.reference)?;
    let mut runs = Vec::with_capacity(a.test.len());
    for (i, path) in a.test.iter().enumerate() {
        let test = read_wav(path)?;
        let label = a.label.get(i).cloned().unwrap_or_else(|| {
            path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
        });
        let (trace, plr) = match a.trace.get(i) {
            Some(t) => {
                let (trace, plr) = read_trace(t)?;
                (Some(trace), plr)
            }
            None => (None, None),
        };
        runs.push(evaluate(&label, &reference, &test, trace.as_ref(), plr, &cfg.frames)?);
    }
    let report = EvalReport::from_runs(runs)?;
    if let Some(out) = &a.out {
        write(out, serde_json::to_string_pretty(&report).expect("report serializes") + "\n")?;
        echo(cfg, out)?;
    }
    print!("{}", report.table());
    Ok(())
}

pub fn make_fixtures(seed: u64, a: &FixturesArgs) -> Result<()> {
    let corpus = fixture_corpus(seed);
    for f in &corpus {
        write(&a.out.join("corpus").join(format!("{}.wav", f.name)), encode(&f.audio)?)?;
    }
    let periodic = periodic_corpus(seed);
    for f in &periodic {
        write(&a.out.join("periodic").join(format!("{}.wav", f.name)), encode(&f.audio)?)?;
    }
    let mut cfg = RunConfig::desk();
    cfg.seed = Some(seed);
    write(&a.out.join("desk.toml"), cfg.to_toml())?;
    let seconds: f64 = corpus.iter().map(|f| f.audio.duration_secs()).sum();
    println!(
        "clips={} seconds={seconds:.1} periodic={} dir={}",
        corpus.len(),
        periodic.len(),
        a.out.display()
    );
    Ok(())
}
