fn main() {
    std::process::exit(aot_cli::main_with(std::env::args_os().collect()));
}
