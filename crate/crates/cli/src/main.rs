fn main() {
    std::process::exit(molgen_cli::run(std::env::args_os()));
}
