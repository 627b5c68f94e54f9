fn main() {
    std::process::exit(quadnls::cli::run());
}
