fn main() {
    std::process::exit(contactnet_cli::main_with_args(std::env::args_os()));
}
