fn main() {
    std::process::exit(controversy_cli::run(std::env::args_os()));
}
