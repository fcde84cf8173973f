fn main() {
    std::process::exit(wdioph::cli::run(std::env::args_os()));
}
