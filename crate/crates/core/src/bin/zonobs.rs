fn main() {
    std::process::exit(zonobs::cli::main_with_args(std::env::args_os()));
}
