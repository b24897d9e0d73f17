fn main() {
    std::process::exit(floodtriage::cli::main_with_args(std::env::args_os()));
}
