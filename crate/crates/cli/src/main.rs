use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use steplab_cli::{run, Cli, Outcome};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    // A closed stdout is not worth a failure status once the files exist.
    match run(&cli) {
        Ok(Outcome::Plan(text)) | Ok(Outcome::Text(text)) => {
            let _ = write!(out, "{text}");
            ExitCode::SUCCESS
        }
        Ok(Outcome::Written { dir, files }) => {
            let _ = writeln!(out, "wrote {} files to {}", files.len(), dir.display());
            for f in files {
                let _ = writeln!(out, "  {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("steplab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
