fn main() {
    std::process::exit(fluxrecon::cli::main_with_args(std::env::args_os()));
}
