fn main() {
    std::process::exit(parisian_risk::cli::main_with_args(std::env::args_os()));
}
