fn main() {
    std::process::exit(kgpath::cli::main());
}
