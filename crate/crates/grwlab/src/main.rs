fn main() {
    std::process::exit(grwlab::cli::run(std::env::args_os()));
}
