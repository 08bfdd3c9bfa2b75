fn main() {
    std::process::exit(blocktime_cli::run(std::env::args_os(), &mut std::io::stderr()));
}
