fn main() {
    std::process::exit(lingrid_cli::run(std::env::args_os()));
}
