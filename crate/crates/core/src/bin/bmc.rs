fn main() {
    std::process::exit(bmc::cli::run_cli(std::env::args_os()));
}
