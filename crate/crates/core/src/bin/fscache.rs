fn main() {
    std::process::exit(fscache::cli::main_with_args(std::env::args_os()));
}
