fn main() {
    std::process::exit(focus_core::cli::main_with_args(std::env::args_os()));
}
