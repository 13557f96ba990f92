fn main() {
    std::process::exit(bhrt::cli::main_with_args(std::env::args_os()));
}
