fn main() {
    std::process::exit(polymag::cli::run(std::env::args_os()));
}
