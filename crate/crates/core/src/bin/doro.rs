fn main() {
    std::process::exit(doro::cli::run(std::env::args_os()));
}
