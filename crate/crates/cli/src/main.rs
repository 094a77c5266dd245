fn main() {
    std::process::exit(horowalk_cli::run(std::env::args_os()));
}
