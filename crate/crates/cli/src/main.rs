use clap::Parser;

fn main() {
    let cli = cubicphase_cli::Cli::parse();
    std::process::exit(cubicphase_cli::run(cli));
}
