fn main() {
    std::process::exit(evarkit::cli::main_with_args(std::env::args_os()));
}
