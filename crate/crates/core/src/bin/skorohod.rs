use clap::Parser;

fn main() {
    let cli = skorohod::cli::Cli::parse();
    std::process::exit(skorohod::cli::run(cli));
}
