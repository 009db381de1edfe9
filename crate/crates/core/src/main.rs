fn main() {
    std::process::exit(dyelim::cli::main());
}
