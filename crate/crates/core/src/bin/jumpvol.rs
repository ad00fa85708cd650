fn main() {
    std::process::exit(jumpvol::cli::run(std::env::args_os()));
}
