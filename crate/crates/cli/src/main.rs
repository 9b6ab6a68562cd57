fn main() {
    std::process::exit(orwalk_cli::main_with_args(std::env::args_os()));
}
