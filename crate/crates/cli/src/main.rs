fn main() {
    std::process::exit(scatlab_cli::run_cli(std::env::args_os()));
}
