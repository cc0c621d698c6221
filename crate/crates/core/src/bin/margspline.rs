fn main() {
    std::process::exit(margspline::cli::main_with_args(std::env::args_os()));
}
