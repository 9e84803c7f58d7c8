fn main() {
    std::process::exit(graphcond::cli::run(std::env::args_os()));
}
