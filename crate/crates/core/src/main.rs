fn main() {
    std::process::exit(weakpol::cli::run(std::env::args_os()));
}
