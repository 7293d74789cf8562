fn main() {
    std::process::exit(dflab::cli::run(std::env::args_os()));
}
