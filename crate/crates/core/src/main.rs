fn main() {
    std::process::exit(lta::cli::run_from(std::env::args_os()));
}
