fn main() {
    std::process::exit(cotlab::cli::run(std::env::args_os()));
}
