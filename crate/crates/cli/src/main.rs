fn main() {
    std::process::exit(flexduplex_cli::run(std::env::args_os()));
}
