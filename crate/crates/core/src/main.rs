fn main() {
    std::process::exit(advreg::cli::main_with_args(std::env::args_os()));
}
