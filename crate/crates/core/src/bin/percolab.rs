fn main() {
    std::process::exit(percolab::cli::run(std::env::args_os()));
}
