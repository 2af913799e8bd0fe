fn main() {
    std::process::exit(holofocus::cli::main());
}
