fn main() {
    std::process::exit(qfe_cli::run_cli(std::env::args_os()));
}
