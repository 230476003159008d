fn main() {
    std::process::exit(trendsense::cli::main_with_args(std::env::args_os()));
}
