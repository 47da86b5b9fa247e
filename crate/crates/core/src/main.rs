fn main() {
    std::process::exit(zakai_adi::cli::run(std::env::args_os()));
}
