fn main() {
    std::process::exit(brwlab::cli::main_with(std::env::args_os()));
}
