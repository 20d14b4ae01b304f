fn main() {
    std::process::exit(granular_cli::run(std::env::args_os()));
}
