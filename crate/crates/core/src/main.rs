fn main() {
    std::process::exit(crack_imaging::cli::run());
}
