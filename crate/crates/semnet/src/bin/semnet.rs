fn main() {
    std::process::exit(semnet::cli::main_with(std::env::args_os()));
}
