fn main() {
    std::process::exit(fedbench::harness::cli::cli(std::env::args_os()));
}
