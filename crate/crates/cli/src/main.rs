fn main() {
    std::process::exit(heartcast_cli::execute(std::env::args_os()));
}
