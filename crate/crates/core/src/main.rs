fn main() {
    std::process::exit(cmlab::lab::cli::run_cli(std::env::args_os()));
}
