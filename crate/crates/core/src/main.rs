fn main() {
    std::process::exit(hybridctl::cli::run());
}
