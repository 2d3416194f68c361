fn main() {
    std::process::exit(newsclass::cli::main());
}
