fn main() {
    std::process::exit(codlag_gp::cli::main_with_args(std::env::args_os()));
}
