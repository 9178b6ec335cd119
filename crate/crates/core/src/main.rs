fn main() {
    std::process::exit(homeclash::cli::run(std::env::args_os()));
}
