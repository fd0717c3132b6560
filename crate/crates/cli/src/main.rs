mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{value_parser, Arg, ArgMatches, Command};
use ricci_forge::Error;
use serde_json::json;

use crate::commands::Outcome;
use crate::config::{parse_config, usage, CliError, Result, Settings};

pub const OUT_ENV: &str = "RICCI_FORGE_OUT";
const DEFAULT_OUT: &str = "ricci-forge-out";

const COMMANDS: &[(&str, &str)] = &[
    ("build-spec", "Build a metric family; writes the spec and a profile table"),
    ("verify-curvature", "Certify the curvature conditions of a family on a grid"),
    ("threshold", "Largest cone slope for which a family still certifies"),
    ("volume", "Volume of a closed family by quadrature and by Monte Carlo"),
    ("diameter", "Diameter of a sampled family"),
    ("displacement", "Smallest displacement of a group acting on the fiber sphere"),
    ("sample", "Sample a family; writes point and distance CSV files"),
    ("gh", "Gromov-Hausdorff upper bounds between sampled spaces"),
    ("converge", "Run the convergence experiment; writes CSV and JSON tables"),
];

fn cli() -> Command {
    let mut cmd = Command::new("ricci-forge")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Metric families with non-negative Ricci curvature and their Gromov-Hausdorff limits")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).value_name("FILE").help("Flat key=value file; flags override it"))
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_name("DIR")
                .help(format!("Output directory [default: ${OUT_ENV}, else {DEFAULT_OUT}]")),
        )
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_name("N")
                .value_parser(value_parser!(usize))
                .help("Cap on worker threads"),
        );
    for &(name, about) in COMMANDS {
        let mut sub = Command::new(name).about(about).allow_negative_numbers(true);
        for (key, default) in commands::defaults(name) {
            let help = if default.is_empty() { "[default: unset]".to_string() } else { format!("[default: {default}]") };
            sub = sub.arg(Arg::new(key).long(key).value_name("VALUE").help(help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn dispatch(name: &str, s: &Settings) -> Result<Outcome> {
    match name {
        "build-spec" => commands::build_spec(s),
        "verify-curvature" => commands::verify_curvature(s),
        "threshold" => commands::threshold(s),
        "volume" => commands::volume(s),
        "diameter" => commands::diameter_cmd(s),
        "displacement" => commands::displacement(s),
        "sample" => commands::sample(s),
        "gh" => commands::gh(s),
        "converge" => commands::converge(s),
        other => Err(usage(format!("unknown subcommand '{other}'"))),
    }
}

fn out_dir(matches: &ArgMatches) -> PathBuf {
    if let Some(dir) = matches.get_one::<String>("out") {
        return PathBuf::from(dir);
    }
    match std::env::var_os(OUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<()> {
    std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
}

fn report(s: &Settings, status: &str, result: serde_json::Value) -> Result<Vec<u8>> {
    let body = json!({
        "tool": "ricci-forge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": s.command,
        "config": s.values(),
        "status": status,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&body).map_err(Error::from)?;
    text.push('\n');
    Ok(text.into_bytes())
}

/// Runs one subcommand; `Ok(false)` when its checks fail.
fn execute(matches: &ArgMatches) -> Result<bool> {
    if let Some(&n) = matches.get_one::<usize>("threads") {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(format!("cannot size the thread pool: {e}")))?;
    }
    let (name, sub) = matches.subcommand().ok_or_else(|| usage("missing subcommand"))?;
    let file = match sub.get_one::<String>("config") {
        Some(path) => {
            let path = PathBuf::from(path);
            parse_config(&std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?)?
        }
        None => Default::default(),
    };
    let defaults = commands::defaults(name);
    let flags = defaults.iter().map(|&(k, _)| (k, sub.get_one::<String>(k).cloned())).collect();
    let settings = Settings::resolve(name, &defaults, file, flags)?;

    let dir = out_dir(sub);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    write(dir.join(format!("{name}.config")), settings.to_config_text().as_bytes())?;

    let report_path = dir.join(format!("{name}.json"));
    let outcome = match dispatch(name, &settings) {
        Ok(o) => o,
        Err(CliError::Core(Error::ExperimentAborted { i, detail, spec })) => {
            let result = json!({ "i": i, "detail": detail, "spec": spec });
            write(report_path.clone(), &report(&settings, "aborted", result)?)?;
            return Err(CliError::Core(Error::ExperimentAborted { i, detail, spec }));
        }
        Err(e) => return Err(e),
    };
    for (file, bytes) in &outcome.files {
        write(dir.join(file), bytes)?;
    }
    let status = if outcome.passed { "pass" } else { "fail" };
    write(report_path.clone(), &report(&settings, status, outcome.result)?)?;
    println!("{name}: {status} ({})", report_path.display());
    Ok(outcome.passed)
}

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Core(Error::CertificateFailed(_) | Error::ExperimentAborted { .. }) => 2,
        _ => 1,
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&matches) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os()));
}
