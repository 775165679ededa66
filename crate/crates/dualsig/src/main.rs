fn main() {
    std::process::exit(dualsig::cli::main_with_args(std::env::args_os()));
}
