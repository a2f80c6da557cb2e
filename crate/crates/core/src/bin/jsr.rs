use std::io::Write;

use clap::Parser;

fn main() {
    let cli = jsr::cli::Cli::parse();
    match jsr::cli::run(&cli) {
        Ok(text) => {
            // A closed pipe is not an error for the run itself.
            let newline = if text.ends_with('\n') { "" } else { "\n" };
            let _ = write!(std::io::stdout(), "{text}{newline}");
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
