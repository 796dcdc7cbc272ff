fn main() {
    std::process::exit(robust_mobo::cli::main_with_args(std::env::args_os()));
}
