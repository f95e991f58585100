use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GDR_LOG", "warn")).init();
    let cli = gdr_cli::Cli::parse();
    if let Err(e) = gdr_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
