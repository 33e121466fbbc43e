fn main() {
    std::process::exit(finsler_cli::main_with_args(std::env::args_os()));
}
