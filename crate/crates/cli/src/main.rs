fn main() {
    std::process::exit(btflow_cli::run(std::env::args_os()));
}
