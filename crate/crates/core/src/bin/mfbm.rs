fn main() {
    std::process::exit(mfbm::cli::main_with_args(std::env::args_os()));
}
