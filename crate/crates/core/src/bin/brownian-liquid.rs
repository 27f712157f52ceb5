fn main() {
    std::process::exit(brownian_liquid::cli::main_with_args(std::env::args_os()));
}
