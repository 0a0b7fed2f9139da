fn main() {
    std::process::exit(rulemix_cli::run(std::env::args_os()));
}
