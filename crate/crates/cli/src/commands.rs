use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use scanlift::exposure::{classify_exposure, normalize, ExposureClass, ExposureReport};
use scanlift::metrics::{score, SsimParams, DEFAULT_PEAK};
use scanlift::nn::{load_weights, save_weights, train_with, SrModel, TrainConfig};
use scanlift::resample::degrade_restore;
use scanlift::synth::{corpus_specs, generate, PhantomSpec};
use scanlift::GrayImage;

use crate::args::{
    AssessArgs, BenchArgs, Command, CorpusArgs, EnhanceArgs, EqualizeArgs, ExposureArgs, Method, SynthArgs, TrainArgs,
};
use crate::pipeline::{read_image, write_image, MethodSet};
use crate::report::{render, summarize, BenchRow};
use crate::{Cli, CliError, CliResult};

pub fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Assess(a) => assess(&a, out, err),
        Command::Equalize(a) => equalize(&a, out),
        Command::Enhance(a) => enhance(&a, out),
        Command::Train(a) => train(&a, out),
        Command::Bench(a) => bench(&a, out),
        Command::Synth(a) => synth(&a, out),
    }
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments) -> CliResult<()> {
    writeln!(out, "{line}").map_err(|e| CliError::io("<stdout>", e))
}

fn classify(img: &GrayImage, threshold: f64) -> CliResult<ExposureReport> {
    classify_exposure(img, threshold).map_err(|e| CliError::Config(e.to_string()))
}

fn assess(a: &AssessArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let mut failures = 0;
    for path in &a.inputs {
        match read_image(path) {
            Ok(img) => {
                let r = classify(&img, a.threshold)?;
                emit(
                    out,
                    format_args!("{} class={} lower_mass={:.4}", path.display(), r.class.short_name(), r.lower_mass),
                )?;
            }
            Err(e) => {
                failures += 1;
                let _ = writeln!(err, "{} error={e}", path.display());
            }
        }
    }
    if failures == a.inputs.len() {
        return Err(CliError::Reported(format!("none of the {failures} inputs could be assessed")));
    }
    Ok(())
}

/// Exposure check followed by equalization when the image is faulty (or when forced).
fn correct_exposure(img: GrayImage, e: &ExposureArgs) -> CliResult<(ExposureReport, GrayImage, bool)> {
    let report = classify(&img, e.threshold)?;
    if report.class != ExposureClass::Normal || e.force_equalize {
        let fixed = normalize(&img, e.mode.into());
        Ok((report, fixed, true))
    } else {
        Ok((report, img, false))
    }
}

fn equalize(a: &EqualizeArgs, out: &mut dyn Write) -> CliResult<()> {
    let img = read_image(&a.input)?;
    let (report, fixed, equalized) = correct_exposure(img, &a.exposure)?;
    write_image(&a.out, &fixed)?;
    emit(
        out,
        format_args!(
            "{} class={} lower_mass={:.4} equalized={equalized}",
            a.input.display(),
            report.class.short_name(),
            report.lower_mass
        ),
    )
}

fn write_report(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn image_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn enhance(a: &EnhanceArgs, out: &mut dyn Write) -> CliResult<()> {
    let methods = MethodSet::from_args(&a.params)?;
    methods.model(a.method)?;
    let factor = match (a.method, a.factor) {
        (_, Some(0)) => return Err(CliError::Config("--factor must be at least 1".into())),
        (Method::Um | Method::Clahe, Some(f)) if f != 1 => {
            return Err(CliError::Config(format!("--factor does not apply to {}", a.method.label())))
        }
        (_, Some(f)) => f,
        (Method::Bicubic, None) => 2,
        (_, None) => 1,
    };
    let reference = a.reference.as_deref().map(read_image).transpose()?;
    let input = read_image(&a.input)?;
    let (report, corrected, equalized) = correct_exposure(input.clone(), &a.exposure)?;

    let start = Instant::now();
    let output = methods.apply(a.method, &corrected, factor)?;
    let runtime_ms = start.elapsed().as_secs_f64() * 1e3;

    write_image(&a.out, &output)?;
    if let Some(path) = &a.side_by_side {
        write_image(path, &input.side_by_side(&output))?;
    }
    let score = match &reference {
        Some(r) => Some(
            score(r, &output, DEFAULT_PEAK, &SsimParams::default())
                .map_err(|e| CliError::processing("scoring against the reference", e))?,
        ),
        None => None,
    };
    let row = BenchRow {
        image_id: image_id(&a.input),
        method: a.method,
        score,
        runtime_ms,
        params: methods.describe(a.method, factor),
    };
    emit(
        out,
        format_args!(
            "{} class={} lower_mass={:.4} equalized={equalized}",
            a.input.display(),
            report.class.short_name(),
            report.lower_mass
        ),
    )?;
    let text = render(std::slice::from_ref(&row), a.format);
    if let Some(path) = &a.report {
        write_report(path, &text)?;
    }
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

/// Named high-resolution images from a directory or the phantom generator.
pub fn load_corpus(c: &CorpusArgs) -> CliResult<Vec<(String, GrayImage)>> {
    match (&c.corpus, c.synthetic) {
        (Some(dir), _) => {
            let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
            let mut paths = Vec::new();
            for entry in entries {
                let path = entry.map_err(|e| CliError::io(dir, e))?.path();
                if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")) {
                    paths.push(path);
                }
            }
            paths.sort();
            if paths.is_empty() {
                return Err(CliError::Config(format!("no .pgm images in {}", dir.display())));
            }
            paths.iter().map(|p| Ok((image_id(p), read_image(p)?))).collect()
        }
        (None, Some(0)) => Err(CliError::Config("--synthetic needs at least one image".into())),
        (None, Some(n)) => {
            let base = PhantomSpec { seed: c.seed, ..PhantomSpec::default() };
            corpus_specs(n, &base)
                .iter()
                .map(|s| {
                    let img = generate(s).map_err(|e| CliError::processing("synthesizing", e))?;
                    Ok((format!("phantom_{}", s.seed), img))
                })
                .collect()
        }
        (None, None) => Err(CliError::Config("give a corpus with --corpus DIR or --synthetic N".into())),
    }
}

fn check_factor(factor: usize) -> CliResult<()> {
    if factor < 2 {
        return Err(CliError::Config(format!("degradation factor must be at least 2, got {factor}")));
    }
    Ok(())
}

fn train(a: &TrainArgs, out: &mut dyn Write) -> CliResult<()> {
    check_factor(a.factor)?;
    let arch = a.arch.into();
    let mut cfg = TrainConfig::preset(arch);
    cfg.seed = a.train_seed.unwrap_or(a.corpus.seed);
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.steps {
        cfg.steps_per_epoch = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.patch_size {
        cfg.patch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.base_lr = v;
    }
    if let Some(v) = a.grad_clip {
        cfg.grad_clip = (v > 0.0).then_some(v);
    }
    let model = match &a.init {
        Some(path) => {
            let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
            let m = load_weights(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if m.arch != arch {
                return Err(CliError::Config(format!("{} holds {} weights", path.display(), m.arch.name())));
            }
            m
        }
        None => SrModel::random(arch, cfg.seed),
    };
    cfg.validate(model.layers().len()).map_err(|e| CliError::Config(e.to_string()))?;

    let corpus = load_corpus(&a.corpus)?;
    let mut pairs = Vec::with_capacity(corpus.len());
    for (id, hr) in corpus {
        let lr = degrade_restore(&hr, a.factor, 0.0).map_err(|e| CliError::processing(id, e))?;
        pairs.push((lr, hr));
    }
    let mut write_err = None;
    let state = train_with(model, &pairs, &cfg, |r| {
        if let Err(e) = writeln!(out, "{r}") {
            write_err.get_or_insert(e);
        }
    })
    .map_err(|e| CliError::processing("training", e))?;
    if let Some(e) = write_err {
        return Err(CliError::io("<stdout>", e));
    }
    fs::write(&a.out, save_weights(&state.model)).map_err(|e| CliError::io(&a.out, e))?;
    emit(out, format_args!("wrote {} arch={} params={}", a.out.display(), arch.name(), state.model.net.param_count()))
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> CliResult<()> {
    check_factor(a.factor)?;
    let set = MethodSet::from_args(&a.params)?;
    let methods: Vec<Method> = if a.methods.is_empty() {
        Method::ALL.into_iter().filter(|&m| set.model(m).is_ok()).collect()
    } else {
        a.methods.clone()
    };
    for &m in &methods {
        set.model(m)?;
    }
    let corpus = load_corpus(&a.corpus)?;
    let ssim_params = SsimParams::default();
    let mut rows = Vec::with_capacity(corpus.len() * methods.len());
    for (id, hr) in &corpus {
        let restored = degrade_restore(hr, a.factor, 0.0).map_err(|e| CliError::processing(id.clone(), e))?;
        for &m in &methods {
            let start = Instant::now();
            let result = set.apply_restored(m, &restored)?;
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let s = score(hr, &result, DEFAULT_PEAK, &ssim_params).map_err(|e| CliError::processing(id.clone(), e))?;
            rows.push(BenchRow {
                image_id: id.clone(),
                method: m,
                score: Some(s),
                runtime_ms,
                params: set.describe(m, a.factor),
            });
        }
    }
    write_report(&a.report, &render(&rows, a.format))?;
    for s in summarize(&rows) {
        emit(out, format_args!("{s}"))?;
    }
    Ok(())
}

fn synth(a: &SynthArgs, out: &mut dyn Write) -> CliResult<()> {
    if a.count == 0 {
        return Err(CliError::Config("phantom count must be at least 1".into()));
    }
    let base = PhantomSpec {
        width: a.width,
        height: a.height,
        seed: a.seed,
        kind: a.kind.into(),
        count: a.primitives,
        noise_sigma: a.noise,
        exposure_bias: a.exposure_bias,
    };
    base.validate().map_err(|e| CliError::Config(e.to_string()))?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    for spec in corpus_specs(a.count, &base) {
        let img = generate(&spec).map_err(|e| CliError::processing("synthesizing", e))?;
        let path = a.out.join(format!("phantom_{}.pgm", spec.seed));
        write_image(&path, &img)?;
        emit(out, format_args!("{}", path.display()))?;
    }
    Ok(())
}
