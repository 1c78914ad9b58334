use clap::Parser;

fn main() {
    let cli = match axmag_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { axmag_cli::EXIT_USAGE } else { axmag_cli::EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = axmag_cli::run(cli) {
        eprintln!("axmag: {e}");
        std::process::exit(e.code);
    }
}
