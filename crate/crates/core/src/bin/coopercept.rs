fn main() {
    std::process::exit(coopercept::cli::main_with_args(std::env::args_os()));
}
