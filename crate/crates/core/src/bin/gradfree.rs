fn main() {
    std::process::exit(gradfree::cli::main_with_args(std::env::args_os()));
}
