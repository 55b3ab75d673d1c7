fn main() {
    std::process::exit(wiener_lab::cli::run(std::env::args_os()));
}
