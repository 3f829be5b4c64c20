fn main() {
    std::process::exit(audiobank::cli::run(std::env::args()))
}
