use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use mslr_eval_cli::{load_config, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match load_config(&cli).and_then(|cfg| run(&cfg, &cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let causes: Vec<String> = e.chain().skip(1).map(ToString::to_string).collect();
            let diag = json!({
                "level": "error",
                "command": cli.command.name(),
                "message": e.to_string(),
                "causes": causes,
            });
            eprintln!("{diag}");
            ExitCode::FAILURE
        }
    }
}
