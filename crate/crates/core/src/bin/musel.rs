fn main() {
    std::process::exit(musel::cli::run(std::env::args_os()));
}
