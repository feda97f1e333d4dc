fn main() {
    std::process::exit(liesphere::cli::main_entry());
}
