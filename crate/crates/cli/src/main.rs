fn main() {
    std::process::exit(probtune_cli::commands::main_with_args(std::env::args_os().collect()));
}
