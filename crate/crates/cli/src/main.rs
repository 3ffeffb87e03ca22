fn main() {
    std::process::exit(kmd_cli::run(std::env::args_os()));
}
