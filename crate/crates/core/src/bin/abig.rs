fn main() {
    std::process::exit(abig::cli::main_from_args());
}
