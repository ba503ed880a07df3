fn main() {
    std::process::exit(sbcr::cli::run(std::env::args_os()));
}
