fn main() {
    std::process::exit(pparabolic::cli::main());
}
