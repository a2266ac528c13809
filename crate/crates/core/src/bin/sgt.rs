fn main() {
    std::process::exit(shapecart::cli::run(std::env::args_os()));
}
