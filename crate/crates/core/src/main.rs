fn main() {
    std::process::exit(blindcorner::cli::run(std::env::args_os()));
}
