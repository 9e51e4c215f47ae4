fn main() {
    std::process::exit(homtomo::cli::run(std::env::args_os()));
}
