fn main() {
    std::process::exit(awi_cli::run(std::env::args_os()));
}
