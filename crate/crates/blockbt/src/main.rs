fn main() {
    std::process::exit(blockbt::cli::main_entry());
}
