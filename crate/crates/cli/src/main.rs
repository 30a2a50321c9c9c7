fn main() {
    std::process::exit(ffor_cli::main_with(std::env::args_os()));
}
