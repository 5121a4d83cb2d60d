fn main() {
    std::process::exit(railplan::cli::main_with_args(std::env::args_os()));
}
