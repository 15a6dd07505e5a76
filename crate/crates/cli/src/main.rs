fn main() {
    std::process::exit(lprkit_cli::main_with(std::env::args_os()));
}
