fn main() {
    std::process::exit(complim::cli::run_cli(std::env::args_os()));
}
