fn main() {
    std::process::exit(eigensense::cli::main_entry());
}
