fn main() {
    std::process::exit(nbv_core::cli::main_with_args(std::env::args_os()));
}
