use clap::Parser;
use hfsl_cli::args::Cli;
use hfsl_cli::error::EXIT_OK;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match hfsl_cli::run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("hfsl: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
