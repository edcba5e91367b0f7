fn main() {
    std::process::exit(balero::cli::run(std::env::args_os()));
}
