fn main() {
    std::process::exit(plna_yield_cli::run(std::env::args_os()));
}
