use clap::Parser;

fn main() {
    let cli = uavjam::cli::Cli::parse();
    std::process::exit(uavjam::cli::run(cli));
}
