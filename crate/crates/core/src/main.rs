fn main() {
    std::process::exit(ddf::cli::main_with_args(std::env::args_os()));
}
