fn main() {
    std::process::exit(unixplain::cli::main_with_args(std::env::args_os()));
}
