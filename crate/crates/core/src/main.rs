fn main() {
    std::process::exit(paircd::cli::main_with_args(std::env::args_os()));
}
