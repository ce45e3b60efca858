fn main() {
    std::process::exit(refracted::cli::run(std::env::args_os()));
}
